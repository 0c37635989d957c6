//! Semi-discrete transport, c-Laguerre cells and Loeper's disconnected-cell example.

mod loeper;
mod solver;

pub use loeper::{
    cell_connectivity, cell_is_convex, loeper_demo, loeper_instance, loeper_scan, Components, Geometry, LoeperReport,
    HYPERBOLIC_SCAN_RADII, HYPERBOLIC_SCAN_SPACINGS, SIGNIFICANT_COMPONENT_MASS,
};
pub use solver::{cell_masses, solve_semidiscrete, SemiDiscreteSolution, DEFAULT_MASS_TOL, MAX_ITERATIONS, NEWTON_MAX_TARGETS};
