//! Condition verdicts for the cost catalogue.
use mk_core::measures::CostFunction;
use mk_core::mtw::{certify_conditions, CertifyOptions, Domain};

fn main() -> mk_core::Result<()> {
    let opts = CertifyOptions { samples: 2000, keep_samples: false, ..CertifyOptions::default() };
    for c in [CostFunction::bilinear(), CostFunction::quadratic(), CostFunction::sphere_sq(), CostFunction::hyperbolic_sq()] {
        let rep = certify_conditions(&c, &Domain::default_for(&c, 2), &opts)?;
        let v: Vec<String> = rep.verdicts.iter().map(|(k, v)| format!("{k}:{}", if v.holds() { "ok" } else { "no" })).collect();
        println!("{:14} {}  min orthogonal cross {:.3e}", rep.cost, v.join(" "), rep.min_orthogonal);
    }
    Ok(())
}
