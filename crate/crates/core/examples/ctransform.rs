//! Double c-transform: a generic potential is pulled down to its c-convex envelope,
//! which is then a fixed point.
use mk_core::cconvex::{c_convexity_defect, c_transform, Direction, Lattice, PotentialField, Support};
use mk_core::measures::{Chart, CostFunction};

fn main() -> mk_core::Result<()> {
    let c = CostFunction::quadratic();
    let xs = Lattice::new(&[(-1.0, 1.0)], &[41])?;
    let ys = Support::Grid(Lattice::new(&[(-1.5, 1.5)], &[61])?, Chart::Euclidean);
    let u = PotentialField::sample(xs, |x| (3.0 * x[0]).sin());
    println!("defect of sin(3x): {:.4}", c_convexity_defect(&u, &c, Direction::XToY, &ys)?);
    let uc = c_transform(&u, &c, Direction::XToY, &ys)?;
    let ucc = c_transform(&uc, &c, Direction::YToX, &u.support)?;
    println!("defect of its envelope: {:.2e}", c_convexity_defect(&ucc, &c, Direction::XToY, &ys)?);
    Ok(())
}
