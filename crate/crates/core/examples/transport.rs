//! Optimal plan between two small clouds, with its dual certificate and cycle check.
use mk_core::kantorovich::{check_cyclical_monotonicity, solve_plan, CycleOptions};
use mk_core::measures::{CostFunction, DiscreteMeasure, Point};

fn main() -> mk_core::Result<()> {
    let xs = [[0.0, 0.0], [1.0, 0.2], [0.3, 0.9], [0.8, 0.7]].map(|c| Point::euclidean(&c));
    let ys = [[0.1, 0.5], [0.9, 0.0], [0.5, 1.0]].map(|c| Point::euclidean(&c));
    let mu = DiscreteMeasure::uniform(xs.to_vec())?;
    let nu = DiscreteMeasure::new(ys.to_vec(), vec![0.5, 0.25, 0.25])?;
    let c = CostFunction::quadratic();
    let sol = solve_plan(&mu, &nu, &c)?;
    for e in &sol.plan {
        println!("{} -> {}  {:.4}", e.i, e.j, e.mass);
    }
    println!("cost {:.6}  dual {:.6}  gap {:.1e}", sol.primal_cost, sol.dual_value, sol.gap);
    let cycles = check_cyclical_monotonicity(&sol, &c, &CycleOptions::default());
    println!("cycle violations: {}", cycles.violations);
    Ok(())
}
