//! Transport proof of the isoperimetric inequality: the chain is tight for the disk
//! and slack for a long rectangle.
use mk_core::cconvex::{disk_shape, isoperimetric_check, rectangle_shape};

fn main() -> mk_core::Result<()> {
    for (name, shape) in [("disk", disk_shape(160)?), ("rectangle 1:4", rectangle_shape(4.0, 160)?)] {
        let r = isoperimetric_check(&shape)?;
        println!("{name}: 2 Vol {:.4} <= flux {:.4} <= perimeter {:.4}  ({})", r.lhs, r.flux, r.rhs, r.chain_holds);
    }
    Ok(())
}
