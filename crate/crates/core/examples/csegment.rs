//! A c-segment on the sphere and the maximum principle along it.
use mk_core::measures::{CostFunction, Point};
use mk_core::mtw::{loeper_max_principle_check, trace_c_segment, Domain};
use rand::SeedableRng;

fn main() -> mk_core::Result<()> {
    let c = CostFunction::sphere_sq();
    let x0 = Point::on_sphere(&[0.0, 0.0, 1.0])?;
    let y0 = Point::on_sphere(&[0.4, 0.0, 1.0])?;
    let y1 = Point::on_sphere(&[0.0, 0.5, 1.0])?;
    let seg = trace_c_segment(&c, &x0, &y0, &y1, 40)?;
    println!("segment residual {:.2e}", seg.max_residual());
    let dom = Domain::default_for(&c, 2);
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
    let xs = (0..1000).map(|_| Point::new(dom.sample(&mut rng, false), c.chart)).collect::<mk_core::Result<Vec<_>>>()?;
    let rep = loeper_max_principle_check(&c, &seg, &xs);
    println!("max defect {:.2e} over {} points ({} skipped)", rep.max_defect, rep.evaluated, rep.skipped);
    Ok(())
}
