//! Reading a Monge map off a plan; equal uniform masses never split.
use mk_core::cconvex::extract_map;
use mk_core::kantorovich::solve_plan;
use mk_core::measures::{CostFunction, DiscreteMeasure, Point};
use rand::{Rng, SeedableRng};

fn main() -> mk_core::Result<()> {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
    let mut cloud = || -> Vec<Point> { (0..12).map(|_| Point::euclidean(&[rng.gen(), rng.gen()])).collect() };
    let mu = DiscreteMeasure::uniform(cloud())?;
    let nu = DiscreteMeasure::uniform(cloud())?;
    let sol = solve_plan(&mu, &nu, &CostFunction::quadratic())?;
    let table = extract_map(&sol);
    println!("monge: {}", table.is_monge());
    for r in &table.rows {
        println!("{:2} -> {:2}", r.i, r.j);
    }
    Ok(())
}
