use serde::{Deserialize, Serialize};

use crate::cconvex::Lattice;

use super::ScreeningSolution;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Region {
    Exclusion,
    Bunching,
    FullRank,
}

/// Agent-mass fractions of the three strata.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Strata {
    pub f0: f64,
    pub f1: f64,
    pub f2: f64,
}

impl Strata {
    pub fn as_array(&self) -> [f64; 3] {
        [self.f0, self.f1, self.f2]
    }
}

/// Node Hessian from the 9-point stencil, shifted inward on the boundary layer.
pub(crate) fn node_hessian(lat: &Lattice, u: &[f64], k: usize) -> ([f64; 4], bool) {
    let d = lat.dim();
    let idx = lat.multi_index(k);
    let boundary = idx.iter().zip(&lat.shape).any(|(&i, &s)| i == 0 || i + 1 == s);
    let c: Vec<usize> = idx.iter().zip(&lat.shape).map(|(&i, &s)| i.clamp(1, s - 2)).collect();
    let kc = lat.flat_index(&c);
    let h = lat.hessian(u, kc).expect("shifted centre is interior");
    let mut out = [0.0; 4];
    for a in 0..d {
        for b in 0..d {
            out[a * d + b] = h[a][b];
        }
    }
    (out, boundary)
}

/// Singular values of a symmetric `d x d` block, largest first.
fn singular_values(h: &[f64; 4], d: usize) -> (f64, f64) {
    if d == 1 {
        return (h[0].abs(), h[0].abs());
    }
    let (a, b, c) = (h[0], h[1], h[3]);
    let m = 0.5 * (a + c);
    let r = (0.25 * (a - c) * (a - c) + b * b).sqrt();
    let (l1, l2) = ((m + r).abs(), (m - r).abs());
    (l1.max(l2), l1.min(l2))
}

/// Relabels `sol` in place; `None` selects the recorded defaults.
///
/// Exclusion where `u - u_null <= eps_u`, bunching where the smaller singular value of the
/// node Hessian is at most `eps_rank`, full rank elsewhere. In one dimension a bunched node
/// is one with vanishing second derivative.
pub fn classify_regions(sol: &mut ScreeningSolution, eps_u: Option<f64>, eps_rank: Option<f64>) {
    let lat = &sol.lattice;
    let d = lat.dim();
    let n = sol.u.len();
    let (lo, hi) = sol.u.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(*v), b.max(*v)));
    let eps_u = eps_u.unwrap_or_else(|| (1e-6 * (hi - lo)).max(EPS_U_FLOOR));
    let hess: Vec<([f64; 4], bool)> = (0..n).map(|k| node_hessian(lat, &sol.u, k)).collect();
    let sv: Vec<(f64, f64)> = hess.iter().map(|(h, _)| singular_values(h, d)).collect();
    let excluded: Vec<bool> = (0..n).map(|k| sol.u[k] - sol.reservation[k] <= eps_u).collect();
    let eps_rank = eps_rank.unwrap_or_else(|| {
        let mut big: Vec<f64> = (0..n).filter(|&k| !excluded[k]).map(|k| sv[k].0).collect();
        if big.is_empty() {
            return 0.0;
        }
        big.sort_by(f64::total_cmp);
        0.05 * big[big.len() / 2]
    });
    let mut labels = Vec::with_capacity(n);
    let mut strata = Strata::default();
    let mut boundary = 0;
    for k in 0..n {
        let r = if excluded[k] {
            Region::Exclusion
        } else if sv[k].1 <= eps_rank {
            Region::Bunching
        } else {
            Region::FullRank
        };
        let m = sol.mass[k];
        match r {
            Region::Exclusion => strata.f0 += m,
            Region::Bunching => strata.f1 += m,
            Region::FullRank => strata.f2 += m,
        }
        boundary += hess[k].1 as usize;
        labels.push(r);
    }
    let total = strata.f0 + strata.f1 + strata.f2;
    strata.f0 /= total;
    strata.f1 /= total;
    strata.f2 /= total;
    // bunched images on the diagonal y1 = y2
    let diag_tol = 2.0 * (0..d).map(|a| lat.spacing(a)).fold(0.0, f64::max);
    let bunched: Vec<usize> = (0..n).filter(|&k| labels[k] == Region::Bunching).collect();
    sol.diagonal_fraction = if d == 2 && !bunched.is_empty() {
        let on = bunched.iter().filter(|&&k| (sol.products[k][0] - sol.products[k][1]).abs() <= diag_tol).count();
        Some(on as f64 / bunched.len() as f64)
    } else {
        None
    };
    sol.axis_fraction = if d == 2 && !bunched.is_empty() {
        let on = bunched.iter().filter(|&&k| sol.products[k][0].abs().min(sol.products[k][1].abs()) <= diag_tol).count();
        Some(on as f64 / bunched.len() as f64)
    } else {
        None
    };
    sol.diagonal_tol = diag_tol;
    sol.labels = labels;
    sol.strata = strata;
    sol.eps_u = eps_u;
    sol.eps_rank = eps_rank;
    sol.boundary_nodes = boundary;
}

/// Absolute floor on the default exclusion threshold.
pub const EPS_U_FLOOR: f64 = 1e-7;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExclusionReport {
    pub excluded_fraction: f64,
    pub threshold: f64,
    /// More than a boundary layer of agents is priced out.
    pub positive: bool,
}

pub fn check_exclusion(sol: &ScreeningSolution) -> ExclusionReport {
    let res = sol.lattice.shape.iter().copied().max().unwrap_or(1) as f64;
    let threshold = 2.0 / res;
    ExclusionReport { excluded_fraction: sol.strata.f0, threshold, positive: sol.strata.f0 > threshold }
}
