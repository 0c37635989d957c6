use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::exponential::c_exponential_raw;
use super::field::{Lattice, PotentialField};
use crate::error::{MkError, Result};
use crate::measures::{Chart, CostFunction, CostKind, GridMeasure};
use crate::util::{det, median};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaskReason {
    Evaluated,
    Boundary,
    /// `Y(x, Du(x))` left the target grid or could not be solved.
    TargetExit,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ResidualStats {
    pub evaluated: usize,
    pub boundary: usize,
    pub target_exit: usize,
    pub median_abs: f64,
    pub max_abs: f64,
}

#[derive(Clone, Debug)]
pub struct ResidualField {
    pub lattice: Lattice,
    /// `NaN` where masked.
    pub values: Vec<f64>,
    pub mask: Vec<MaskReason>,
    pub stats: ResidualStats,
}

/// `det(D^2u + D^2_xx c(x,Y)) f-(Y) / |det D^2_xy c(x,Y)| - f+(x)` with `Y = Y(x, Du(x))`.
///
/// Centred differences on the lattice; the width-1 boundary layer is masked, as are
/// nodes whose target leaves the `f_minus` box.
pub fn monge_ampere_residual(
    u: &PotentialField,
    c: &CostFunction,
    f_plus: &GridMeasure,
    f_minus: &GridMeasure,
) -> Result<ResidualField> {
    let lat = u
        .lattice()
        .ok_or_else(|| MkError::Validation("residual needs a potential on a grid".into()))?
        .clone();
    if u.chart() != Chart::Euclidean || c.chart != Chart::Euclidean {
        return Err(MkError::Validation("residual is implemented on Euclidean grids".into()));
    }
    if f_plus.dim() != lat.dim() || f_minus.dim() != lat.dim() {
        return Err(MkError::Validation("density grids must match the potential's dimension".into()));
    }
    let rows: Vec<(f64, MaskReason)> = (0..lat.len())
        .into_par_iter()
        .map(|k| {
            let Some(hess) = lat.hessian(&u.values, k) else {
                return (f64::NAN, MaskReason::Boundary);
            };
            let x = lat.node(k);
            let du = lat.gradient(&u.values, k);
            let y = if c.kind == CostKind::Bilinear {
                du.clone()
            } else {
                match c_exponential_raw(c, &x, &du) {
                    Ok(r) => r.y,
                    Err(_) => return (f64::NAN, MaskReason::TargetExit),
                }
            };
            let Some(fm) = f_minus.density_at(&y) else {
                return (f64::NAN, MaskReason::TargetExit);
            };
            let fp = f_plus.density_at(&x).unwrap_or(0.0);
            let (dxx, dxy) = match (c.dxx(&x, &y), c.dxy(&x, &y)) {
                (Ok(a), Ok(b)) => (a, b),
                _ => return (f64::NAN, MaskReason::TargetExit),
            };
            let d = lat.dim();
            let m: Vec<Vec<f64>> =
                (0..d).map(|i| (0..d).map(|j| hess[i][j] + dxx[(i, j)]).collect()).collect();
            let jac = dxy.determinant().abs();
            (det(&m) * fm / jac - fp, MaskReason::Evaluated)
        })
        .collect();
    let values: Vec<f64> = rows.iter().map(|r| r.0).collect();
    let mask: Vec<MaskReason> = rows.iter().map(|r| r.1).collect();
    let evaluated = mask.iter().filter(|m| **m == MaskReason::Evaluated).count();
    if evaluated == 0 {
        return Err(MkError::Domain("every node is masked; Y(x, Du) leaves the target grid".into()));
    }
    let abs: Vec<f64> = values.iter().filter(|v| v.is_finite()).map(|v| v.abs()).collect();
    let stats = ResidualStats {
        evaluated,
        boundary: mask.iter().filter(|m| **m == MaskReason::Boundary).count(),
        target_exit: mask.iter().filter(|m| **m == MaskReason::TargetExit).count(),
        median_abs: median(&abs).unwrap_or(f64::NAN),
        max_abs: abs.iter().copied().fold(0.0, f64::max),
    };
    Ok(ResidualField { lattice: lat, values, mask, stats })
}
