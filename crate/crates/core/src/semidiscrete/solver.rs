use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{MkError, Result};
use crate::measures::{CostFunction, DiscreteMeasure, GridMeasure};

pub const DEFAULT_MASS_TOL: f64 = 1e-6;
pub const MAX_ITERATIONS: usize = 100_000;
/// Newton with a difference Jacobian up to this many targets, plain ascent above.
pub const NEWTON_MAX_TARGETS: usize = 64;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SemiDiscreteSolution {
    /// `v_i`; a cell is `argmax_i -c(x, y_i) - v_i`. Normalized so `v_0 = 0`.
    pub weights: Vec<f64>,
    /// Per source cell; `None` for cells without mass.
    pub labels: Vec<Option<usize>>,
    /// Cells whose centre argmax was an exact tie (assigned the lowest index).
    pub ties: usize,
    pub masses: Vec<f64>,
    pub mass_errors: Vec<f64>,
    pub max_mass_error: f64,
    /// `int c(x, T(x)) dmu`: sub-cell pieces plus the cell-averaged second-order term.
    pub transport_cost: f64,
    /// Dual objective after each accepted step.
    pub dual_trace: Vec<f64>,
    pub iterations: usize,
    pub shape: Vec<usize>,
}

/// Per-cell affine models of `-c(., y_i)` around the cell centre.
pub(crate) struct CellModels {
    pub cells: Vec<usize>,
    pub mass: Vec<f64>,
    pub half: Vec<f64>,
    /// `cells x targets`
    pub value: Vec<f64>,
    /// `cells x targets x dim`
    pub grad: Vec<f64>,
    /// Cell average of the second-order Taylor term of `c`, per cell and target.
    pub curv: Vec<f64>,
    pub targets: usize,
    pub dim: usize,
}

pub(crate) fn build_models(source: &GridMeasure, targets: &DiscreteMeasure, c: &CostFunction) -> Result<CellModels> {
    let d = source.dim();
    if d > 2 {
        return Err(MkError::Validation("semi-discrete cells are implemented for 1-D and 2-D sources".into()));
    }
    if source.chart() != targets.chart() || c.chart != source.chart() {
        return Err(MkError::Validation("source, targets and cost must share a chart".into()));
    }
    let cells: Vec<usize> = (0..source.len()).filter(|&k| source.cell_mass(k) > 0.0).collect();
    if cells.is_empty() {
        return Err(MkError::Validation("source carries no mass".into()));
    }
    let half: Vec<f64> = (0..d).map(|a| 0.5 * source.spacing(a)).collect();
    let t = targets.len();
    let ys: Vec<&[f64]> = targets.atoms().iter().map(|p| p.coords()).collect();
    let rows: Vec<Result<(Vec<f64>, Vec<f64>, Vec<f64>)>> = cells
        .par_iter()
        .map(|&k| {
            let x = source.centre(k);
            let eval = |z: &[f64], y: &[f64]| -> Result<f64> {
                let e = source.embed(z);
                c.check_pair(&e, y)?;
                Ok(-c.value_raw(&e, y))
            };
            let mut val = Vec::with_capacity(t);
            let mut grad = Vec::with_capacity(t * d);
            let mut curv = Vec::with_capacity(t);
            for y in &ys {
                let mid = eval(&x, y)?;
                val.push(mid);
                let mut cv = 0.0;
                for a in 0..d {
                    // face-midpoint differences
                    let mut p = x.clone();
                    let mut m = x.clone();
                    p[a] += half[a];
                    m[a] -= half[a];
                    let (fp, fm) = (eval(&p, y)?, eval(&m, y)?);
                    grad.push((fp - fm) / (2.0 * half[a]));
                    // (h^2 / 24) d_aa c, with h = 2 half
                    cv -= (fp - 2.0 * mid + fm) / 6.0;
                }
                curv.push(cv);
            }
            Ok((val, grad, curv))
        })
        .collect();
    let mut value = Vec::with_capacity(cells.len() * t);
    let mut grad = Vec::with_capacity(cells.len() * t * d);
    let mut curv = Vec::with_capacity(cells.len() * t);
    for r in rows {
        let (v, g, cv) = r?;
        value.extend(v);
        grad.extend(g);
        curv.extend(cv);
    }
    let total: f64 = cells.iter().map(|&k| source.cell_mass(k)).sum();
    let mass = cells.iter().map(|&k| source.cell_mass(k) / total).collect();
    Ok(CellModels { cells, mass, half, value, grad, curv, targets: t, dim: d })
}

type Poly = Vec<[f64; 2]>;

// Keep the part of `poly` where `c0 + n . z >= 0`.
fn clip(poly: &Poly, c0: f64, n: [f64; 2]) -> Poly {
    let mut out = Vec::with_capacity(poly.len() + 1);
    let side = |p: &[f64; 2]| c0 + n[0] * p[0] + n[1] * p[1];
    for i in 0..poly.len() {
        let a = poly[i];
        let b = poly[(i + 1) % poly.len()];
        let (sa, sb) = (side(&a), side(&b));
        if sa >= 0.0 {
            out.push(a);
        }
        if (sa >= 0.0) != (sb >= 0.0) {
            let t = sa / (sa - sb);
            out.push([a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])]);
        }
    }
    out
}

fn area_centroid(poly: &Poly) -> (f64, [f64; 2]) {
    if poly.len() < 3 {
        return (0.0, [0.0, 0.0]);
    }
    let (mut a, mut cx, mut cy) = (0.0, 0.0, 0.0);
    for i in 0..poly.len() {
        let p = poly[i];
        let q = poly[(i + 1) % poly.len()];
        let cr = p[0] * q[1] - q[0] * p[1];
        a += cr;
        cx += (p[0] + q[0]) * cr;
        cy += (p[1] + q[1]) * cr;
    }
    if a.abs() < 1e-300 {
        return (0.0, [0.0, 0.0]);
    }
    (0.5 * a, [cx / (3.0 * a), cy / (3.0 * a)])
}

/// Masses per target and the dual objective `int min_i (c + v_i) dmu - sum v_i nu_i`.
pub(crate) struct Evaluation {
    pub masses: Vec<f64>,
    pub dual: f64,
    pub cost: f64,
}

impl CellModels {
    fn score(&self, k: usize, i: usize, v: &[f64]) -> f64 {
        self.value[k * self.targets + i] - v[i]
    }

    fn g(&self, k: usize, i: usize) -> &[f64] {
        let o = (k * self.targets + i) * self.dim;
        &self.grad[o..o + self.dim]
    }

    /// Fractions of cell `k` won by each candidate, with the centroid offset of each piece.
    fn split(&self, k: usize, v: &[f64]) -> Vec<(usize, f64, [f64; 2])> {
        let t = self.targets;
        let d = self.dim;
        let best = (0..t).fold(0, |b, i| if self.score(k, i, v) > self.score(k, b, v) { i } else { b });
        let reach = |i: usize| self.g(k, i).iter().zip(&self.half).map(|(g, h)| g.abs() * h).sum::<f64>();
        let floor = self.score(k, best, v) - reach(best);
        let cands: Vec<usize> = (0..t).filter(|&i| i == best || self.score(k, i, v) + reach(i) > floor).collect();
        if cands.len() == 1 {
            return vec![(best, 1.0, [0.0, 0.0])];
        }
        let mut out = Vec::with_capacity(cands.len());
        for &i in &cands {
            if d == 1 {
                let (mut lo, mut hi) = (-self.half[0], self.half[0]);
                for &j in &cands {
                    if j == i {
                        continue;
                    }
                    let c0 = self.score(k, i, v) - self.score(k, j, v);
                    let n = self.g(k, i)[0] - self.g(k, j)[0];
                    if n > 0.0 {
                        lo = lo.max(-c0 / n);
                    } else if n < 0.0 {
                        hi = hi.min(-c0 / n);
                    } else if c0 < 0.0 || (c0 == 0.0 && j < i) {
                        hi = lo;
                    }
                }
                if hi > lo {
                    out.push((i, (hi - lo) / (2.0 * self.half[0]), [0.5 * (hi + lo), 0.0]));
                }
            } else {
                let (hx, hy) = (self.half[0], self.half[1]);
                let mut poly: Poly = vec![[-hx, -hy], [hx, -hy], [hx, hy], [-hx, hy]];
                for &j in &cands {
                    if j == i || poly.is_empty() {
                        continue;
                    }
                    let c0 = self.score(k, i, v) - self.score(k, j, v);
                    let (gi, gj) = (self.g(k, i), self.g(k, j));
                    let n = [gi[0] - gj[0], gi[1] - gj[1]];
                    if n == [0.0, 0.0] && c0 == 0.0 && j < i {
                        poly.clear();
                        continue;
                    }
                    poly = clip(&poly, c0, n);
                }
                let (a, cen) = area_centroid(&poly);
                if a > 0.0 {
                    out.push((i, a / (4.0 * hx * hy), cen));
                }
            }
        }
        // the pieces tile the cell; remove clipping roundoff
        let s: f64 = out.iter().map(|p| p.1).sum();
        if s > 0.0 {
            out.iter_mut().for_each(|p| p.1 /= s);
        }
        out
    }

    pub fn evaluate(&self, v: &[f64], nu: &[f64]) -> Evaluation {
        let t = self.targets;
        let parts: Vec<(Vec<f64>, f64, f64)> = (0..self.cells.len())
            .into_par_iter()
            .chunks(4096)
            .map(|ks| {
                let mut m = vec![0.0; t];
                let mut obj = 0.0;
                let mut second = 0.0;
                for k in ks {
                    for (i, frac, cen) in self.split(k, v) {
                        let w = self.mass[k] * frac;
                        m[i] += w;
                        let lin: f64 = self.g(k, i).iter().zip(&cen).map(|(g, z)| g * z).sum();
                        // -(score + g . centroid) is c + v_i averaged over the piece
                        obj -= w * (self.score(k, i, v) + lin);
                        second += w * self.curv[k * t + i];
                    }
                }
                (m, obj, second)
            })
            .collect();
        let mut masses = vec![0.0; t];
        let mut integral = 0.0;
        let mut second = 0.0;
        for (m, o, s2) in parts {
            for i in 0..t {
                masses[i] += m[i];
            }
            integral += o;
            second += s2;
        }
        let vn: f64 = v.iter().zip(nu).map(|(a, b)| a * b).sum();
        let vm: f64 = v.iter().zip(&masses).map(|(a, b)| a * b).sum();
        Evaluation { masses, dual: integral - vn, cost: integral - vm + second }
    }

    pub fn labels(&self, v: &[f64], len: usize) -> (Vec<Option<usize>>, usize) {
        let t = self.targets;
        let rows: Vec<(usize, bool)> = (0..self.cells.len())
            .into_par_iter()
            .map(|k| {
                let mut best = 0;
                let mut tie = false;
                for i in 1..t {
                    let (s, b) = (self.score(k, i, v), self.score(k, best, v));
                    if s > b {
                        best = i;
                        tie = false;
                    } else if s == b {
                        tie = true;
                    }
                }
                (best, tie)
            })
            .collect();
        let mut labels = vec![None; len];
        let mut ties = 0;
        for (k, (b, tie)) in rows.into_iter().enumerate() {
            labels[self.cells[k]] = Some(b);
            ties += tie as usize;
        }
        (labels, ties)
    }
}

/// Cell masses under the sub-cell model for fixed weights `v`.
pub fn cell_masses(source: &GridMeasure, targets: &DiscreteMeasure, c: &CostFunction, v: &[f64]) -> Result<Vec<f64>> {
    if v.len() != targets.len() {
        return Err(MkError::Validation("one weight per target is required".into()));
    }
    let models = build_models(source, targets, c)?;
    Ok(models.evaluate(v, targets.weights()).masses)
}

fn max_err(m: &[f64], nu: &[f64]) -> f64 {
    m.iter().zip(nu).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
}

/// Concave dual ascent for the semi-discrete problem from `source` to `targets`.
pub fn solve_semidiscrete(
    source: &GridMeasure,
    targets: &DiscreteMeasure,
    c: &CostFunction,
    mass_tol: f64,
) -> Result<SemiDiscreteSolution> {
    if !(mass_tol > 0.0) {
        return Err(MkError::Validation("mass_tol must be positive".into()));
    }
    let models = build_models(source, targets, c)?;
    let nu = targets.weights().to_vec();
    let t = nu.len();
    let mut v = vec![0.0; t];
    let mut ev = models.evaluate(&v, &nu);
    let mut err = max_err(&ev.masses, &nu);
    let mut trace = vec![ev.dual];
    let mut iterations = 0;
    let mut eta = 1.0;
    while err > mass_tol && iterations < MAX_ITERATIONS {
        iterations += 1;
        let mut moved = false;
        if t <= NEWTON_MAX_TARGETS && t > 1 {
            if let Some(step) = newton_step(&models, &v, &nu, &ev) {
                let mut tau = 1.0;
                while tau > 1e-6 {
                    let cand: Vec<f64> = v.iter().zip(&step).map(|(a, s)| a + tau * s).collect();
                    let ec = models.evaluate(&cand, &nu);
                    let ecand = max_err(&ec.masses, &nu);
                    if ec.dual >= ev.dual - 1e-15 * (1.0 + ev.dual.abs()) && ecand < err {
                        v = cand;
                        ev = ec;
                        err = ecand;
                        moved = true;
                        break;
                    }
                    tau *= 0.5;
                }
            }
        }
        if !moved {
            // gradient ascent: v_i += eta (mass_i - nu_i)
            loop {
                let cand: Vec<f64> = v.iter().enumerate().map(|(i, a)| a + eta * (ev.masses[i] - nu[i])).collect();
                let ec = models.evaluate(&cand, &nu);
                if ec.dual > ev.dual {
                    v = cand;
                    ev = ec;
                    err = max_err(&ev.masses, &nu);
                    eta *= 1.5;
                    moved = true;
                    break;
                }
                eta *= 0.5;
                if eta < 1e-14 {
                    break;
                }
            }
        }
        if !moved {
            break;
        }
        trace.push(ev.dual);
    }
    if err > mass_tol {
        return Err(MkError::NoConvergence(format!(
            "semi-discrete ascent stopped after {iterations} iterations with mass error {err:e}"
        )));
    }
    let shift = v[0];
    v.iter_mut().for_each(|a| *a -= shift);
    let (labels, ties) = models.labels(&v, source.len());
    let mass_errors: Vec<f64> = ev.masses.iter().zip(&nu).map(|(a, b)| a - b).collect();
    Ok(SemiDiscreteSolution {
        weights: v,
        labels,
        ties,
        max_mass_error: err,
        masses: ev.masses,
        mass_errors,
        transport_cost: ev.cost,
        dual_trace: trace,
        iterations,
        shape: source.shape().to_vec(),
    })
}

// Newton direction on v_1.. with v_0 held fixed; Jacobian by forward differences.
fn newton_step(models: &CellModels, v: &[f64], nu: &[f64], ev: &Evaluation) -> Option<Vec<f64>> {
    let t = v.len();
    let scale = 1.0 + v.iter().fold(0.0f64, |m, a| m.max(a.abs()));
    let h = 1e-7 * scale;
    let cols: Vec<Vec<f64>> = (1..t)
        .into_par_iter()
        .map(|j| {
            let mut vp = v.to_vec();
            vp[j] += h;
            let e = models.evaluate(&vp, nu);
            (1..t).map(|i| (e.masses[i] - ev.masses[i]) / h).collect()
        })
        .collect();
    let jac = DMatrix::from_fn(t - 1, t - 1, |i, j| cols[j][i]);
    let rhs = DVector::from_iterator(t - 1, (1..t).map(|i| -(ev.masses[i] - nu[i])));
    let sol = jac.lu().solve(&rhs)?;
    if sol.iter().any(|s| !s.is_finite()) {
        return None;
    }
    let mut step = vec![0.0];
    step.extend(sol.iter());
    Some(step)
}
