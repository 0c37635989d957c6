//! c-transforms, c-convexity, the c-exponential and Monge-Ampere diagnostics.

mod exponential;
mod field;
mod isoperimetric;
mod map;
mod residual;
mod transform;

pub use exponential::{c_exponential, c_exponential_raw, chart_exp, ExpResult, EXP_MAX_ITERS, EXP_RESIDUAL_TOL};
pub use field::{Lattice, PotentialField, PotentialFieldJson, Support};
pub use isoperimetric::{
    coverage_grid, disk_shape, isoperimetric_check, isoperimetric_check_with, rectangle_shape,
    IsoperimetricOptions, IsoperimetricReport,
};
pub use map::{extract_map, extract_map_with, MapRow, MapTable, SPLIT_THRESHOLD};
pub use residual::{monge_ampere_residual, MaskReason, ResidualField, ResidualStats};
pub use transform::{c_convexity_defect, c_transform, is_c_convex, Direction};
