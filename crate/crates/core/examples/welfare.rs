//! Welfare weighting between agents' surplus and the provider's losses.
use mk_core::screening::{solve_welfare, ScreeningProblem, SolverOptions, Welfare};

fn main() -> mk_core::Result<()> {
    let p = ScreeningProblem::rochet_chone(32)?;
    let opts = SolverOptions { kkt_samples: 0, ..SolverOptions::default() };
    for lambda in [0.5, 1.5, 3.0, 10.0] {
        let out = solve_welfare(&p, &Welfare::Linear, lambda, &opts)?;
        println!("lambda {lambda:4}: {:?}  losses {:?}", out.status, out.losses);
    }
    Ok(())
}
