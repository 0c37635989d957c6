//! Laguerre-type cells of the uniform square for four weighted targets.
use mk_core::measures::{Chart, CostFunction, DiscreteMeasure, GridMeasure, Point};
use mk_core::semidiscrete::{solve_semidiscrete, DEFAULT_MASS_TOL};

fn main() -> mk_core::Result<()> {
    let src = GridMeasure::uniform(&[(0.0, 1.0), (0.0, 1.0)], &[96, 96], Chart::Euclidean)?;
    let ys = [[0.2, 0.2], [0.8, 0.3], [0.5, 0.8], [0.3, 0.6]].map(|c| Point::euclidean(&c));
    let nu = DiscreteMeasure::new(ys.to_vec(), vec![0.1, 0.2, 0.3, 0.4])?;
    let sol = solve_semidiscrete(&src, &nu, &CostFunction::quadratic(), DEFAULT_MASS_TOL)?;
    println!("weights {:?}", sol.weights.iter().map(|w| format!("{w:.4}")).collect::<Vec<_>>());
    println!("masses  {:?}", sol.masses.iter().map(|m| format!("{m:.4}")).collect::<Vec<_>>());
    println!("{} iterations, cost {:.6}", sol.iterations, sol.transport_cost);
    Ok(())
}
