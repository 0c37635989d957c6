use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::field::{PotentialField, Support};
use crate::error::{MkError, Result};
use crate::measures::CostFunction;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    /// `u^c~(y) = max_x -c(x,y) - u(x)`
    XToY,
    /// `v^c(x) = max_y -c(x,y) - v(y)`
    YToX,
}

impl Direction {
    pub fn flip(self) -> Direction {
        match self {
            Direction::XToY => Direction::YToX,
            Direction::YToX => Direction::XToY,
        }
    }
}

fn support_coords(s: &Support) -> Vec<Vec<f64>> {
    PotentialField { support: s.clone(), values: vec![] }.coords()
}

fn support_len(s: &Support) -> usize {
    match s {
        Support::Atoms(a) => a.len(),
        Support::Grid(l, _) => l.len(),
    }
}

/// Exact discrete c-transform of `field` onto the nodes of `onto`.
pub fn c_transform(
    field: &PotentialField,
    c: &CostFunction,
    direction: Direction,
    onto: &Support,
) -> Result<PotentialField> {
    if field.is_empty() || support_len(onto) == 0 {
        return Err(MkError::EmptyDomain("c-transform over an empty set".into()));
    }
    let src = field.coords();
    let dst = support_coords(onto);
    let values: Vec<f64> = dst
        .par_iter()
        .map(|z| {
            let mut best = f64::NEG_INFINITY;
            for (w, fv) in src.iter().zip(&field.values) {
                let cost = match direction {
                    Direction::XToY => c.value_raw(w, z),
                    Direction::YToX => c.value_raw(z, w),
                };
                let v = -cost - fv;
                if v > best {
                    best = v;
                }
            }
            best
        })
        .collect();
    if values.iter().any(|v| !v.is_finite()) {
        return Err(MkError::Numerical("c-transform produced a non-finite value".into()));
    }
    Ok(PotentialField { support: onto.clone(), values })
}

/// `sup |u - (u^c~)^c|` with the intermediate transform living on `dual`.
pub fn c_convexity_defect(
    u: &PotentialField,
    c: &CostFunction,
    direction: Direction,
    dual: &Support,
) -> Result<f64> {
    let t = c_transform(u, c, direction, dual)?;
    let back = c_transform(&t, c, direction.flip(), &u.support)?;
    Ok(u.values.iter().zip(&back.values).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
}

/// Whether `u` is a fixed point of the double transform within `tol`.
///
/// `u` lives on the source side of `direction`; `dual` is the opposite set.
pub fn is_c_convex(
    u: &PotentialField,
    c: &CostFunction,
    tol: f64,
    direction: Direction,
    dual: &Support,
) -> bool {
    match c_convexity_defect(u, c, direction, dual) {
        Ok(d) => d <= tol,
        Err(_) => false,
    }
}
