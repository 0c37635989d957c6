use serde::{Deserialize, Serialize};

use crate::kantorovich::TransportSolution;

pub const SPLIT_THRESHOLD: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MapRow {
    pub i: usize,
    /// Target receiving the largest share of row `i`.
    pub j: usize,
    pub row_mass: f64,
    pub secondary_mass: f64,
    pub split: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MapTable {
    pub rows: Vec<MapRow>,
    pub split_rows: Vec<usize>,
}

impl MapTable {
    pub fn is_monge(&self) -> bool {
        self.split_rows.is_empty()
    }

    pub fn target_of(&self, i: usize) -> Option<usize> {
        self.rows.iter().find(|r| r.i == i).map(|r| r.j)
    }
}

/// Reads `x_i -> y_j(i)` off the plan, flagging rows whose secondary mass exceeds
/// `threshold` times the row mass.
pub fn extract_map_with(sol: &TransportSolution, threshold: f64) -> MapTable {
    let m = sol.mu_plus.len();
    let mut best: Vec<Option<(usize, f64)>> = vec![None; m];
    let mut total = vec![0.0; m];
    for e in &sol.plan {
        total[e.i] += e.mass;
        match best[e.i] {
            Some((_, bm)) if bm >= e.mass => {}
            _ => best[e.i] = Some((e.j, e.mass)),
        }
    }
    let mut rows = Vec::new();
    let mut split_rows = Vec::new();
    for i in 0..m {
        if let Some((j, bm)) = best[i] {
            let secondary = total[i] - bm;
            let split = secondary > threshold * total[i];
            if split {
                split_rows.push(i);
            }
            rows.push(MapRow { i, j, row_mass: total[i], secondary_mass: secondary, split });
        }
    }
    MapTable { rows, split_rows }
}

pub fn extract_map(sol: &TransportSolution) -> MapTable {
    extract_map_with(sol, SPLIT_THRESHOLD)
}
