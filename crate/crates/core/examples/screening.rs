//! Monopolist screening on the unit square: exclusion, bunching and full separation.
use mk_core::screening::{check_exclusion, solve_rochet_chone, ScreeningProblem, SolverOptions};

fn main() -> mk_core::Result<()> {
    let sol = solve_rochet_chone(&ScreeningProblem::rochet_chone(64)?, &SolverOptions::default())?;
    println!("losses {:.6} after {} iterations", sol.losses, sol.iterations);
    println!("strata f0 {:.3}  f1 {:.3}  f2 {:.3}", sol.strata.f0, sol.strata.f1, sol.strata.f2);
    println!("exclusion: {}", check_exclusion(&sol).positive);
    println!("bunched products on an axis {:?}, on the diagonal {:?}", sol.axis_fraction, sol.diagonal_fraction);
    Ok(())
}
