//! Charts, probability measures and the cost catalogue.

mod cost;
mod discrete;
mod grid;
mod point;

pub use cost::{
    CostFunction, CostKind, DerivOrder, DerivativeMode, Partials, Tensor, DEFAULT_CUT_MARGIN,
    DEFAULT_FD_STEP, DEFAULT_LOG_EXCLUSION,
};
pub use discrete::{DiscreteMeasure, DiscreteMeasureJson};
pub use grid::{exp_north, log_north, GridMeasure, GridMeasureJson};
pub use point::{
    sphere_exp, sphere_tangent_coords, sphere_tangent_vector, Chart, Point, PointJson,
};
pub(crate) use point::{chart_move, dot, norm, norm2};
