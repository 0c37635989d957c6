//! Monge-Ampere residual of the Brenier potential of a dilation.
use mk_core::cconvex::{monge_ampere_residual, Lattice, PotentialField};
use mk_core::measures::{Chart, CostFunction, GridMeasure};

fn main() -> mk_core::Result<()> {
    // Y = x + Du = 2x pushes the unit square onto [0, 2]^2
    let lat = Lattice::new(&[(0.0, 1.0), (0.0, 1.0)], &[48, 48])?;
    let u = PotentialField::sample(lat, |x| 0.5 * (x[0] * x[0] + x[1] * x[1]));
    let f_plus = GridMeasure::uniform(&[(0.0, 1.0), (0.0, 1.0)], &[48, 48], Chart::Euclidean)?;
    let f_minus = GridMeasure::uniform(&[(0.0, 2.0), (0.0, 2.0)], &[48, 48], Chart::Euclidean)?;
    let r = monge_ampere_residual(&u, &CostFunction::quadratic(), &f_plus, &f_minus)?;
    println!("{} nodes, median |R| {:.2e}, max |R| {:.2e}", r.stats.evaluated, r.stats.median_abs, r.stats.max_abs);
    Ok(())
}
