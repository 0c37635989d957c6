//! Three collinear targets: the middle cell is convex in the plane, connected on the
//! sphere, and torn in two in the hyperbolic plane.
use mk_core::semidiscrete::{loeper_demo, loeper_scan, Geometry};

fn main() -> mk_core::Result<()> {
    for g in [Geometry::Euclidean, Geometry::Sphere] {
        let (r, s) = g.defaults();
        let rep = loeper_demo(g, r, s, 256)?;
        println!("{g:?}: middle components {}, convex {:?}", rep.middle_components, rep.convex);
    }
    match loeper_scan(256)? {
        Some(rep) => println!("Hyperbolic r={} s={}: middle components {}", rep.ball_radius, rep.spacing, rep.middle_components),
        None => println!("Hyperbolic: no split found"),
    }
    Ok(())
}
