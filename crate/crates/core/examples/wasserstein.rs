//! W_p between point clouds on the line, where the sorted coupling is optimal.
use mk_core::kantorovich::wasserstein_p;
use mk_core::measures::{Chart, DiscreteMeasure, Point};

fn main() -> mk_core::Result<()> {
    let line = |v: &[f64]| DiscreteMeasure::uniform(v.iter().map(|&x| Point::euclidean(&[x])).collect());
    let a = line(&[0.0, 1.0, 3.0])?;
    let b = line(&[0.5, 2.0, 2.5])?;
    for p in [0.5, 1.0, 2.0, 3.0] {
        println!("p = {p}: d_p = {:.6}", wasserstein_p(&a, &b, p, Chart::Euclidean)?);
    }
    Ok(())
}
