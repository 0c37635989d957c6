use crate::error::{MkError, Result};

use super::band::BandMatrix;
use super::mesh::Mesh;
use super::problem::ProductCost;

pub const MAX_IPM_ITERATIONS: usize = 300;
const STEP_TO_BOUNDARY: f64 = 0.995;
const CENTRALITY: f64 = 1e-3;
/// Iterations over which a relative energy decrease below `tol` counts as settled.
const STALL_WINDOW: usize = 50;
const SIGMA_FLOOR: f64 = 0.1;

/// Concave piecewise-linear welfare `w(s) = min_j (slope_j s + intercept_j)`.
#[derive(Clone, Debug)]
pub(crate) struct Pieces {
    pub slopes: Vec<f64>,
    pub intercepts: Vec<f64>,
}

/// Minimizes `lambda L(u) - sum_k m_k w(u_k)` over the mesh cone.
pub(crate) struct Objective<'a> {
    pub cost: ProductCost,
    pub lambda: f64,
    pub welfare: Option<&'a Pieces>,
}

pub(crate) struct IpmResult {
    pub u: Vec<f64>,
    pub trace: Vec<f64>,
    pub iterations: usize,
    pub gap: f64,
    pub dual_residual: f64,
}

struct State {
    u: Vec<f64>,
    t: Vec<f64>,
    s: Vec<f64>,
    z: Vec<f64>,
    /// Welfare rows, `n x J` row-major.
    sp: Vec<f64>,
    zp: Vec<f64>,
}

impl Objective<'_> {
    fn value(&self, mesh: &Mesh, u: &[f64], t: &[f64]) -> f64 {
        let mut f = if self.lambda > 0.0 { self.lambda * mesh.energy(&self.cost, u) } else { 0.0 };
        if self.welfare.is_some() {
            f -= mesh.mass.iter().zip(t).map(|(m, v)| m * v).sum::<f64>();
        }
        f
    }
}

fn slacks(mesh: &Mesh, w: Option<&Pieces>, u: &[f64], t: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let s: Vec<f64> = mesh.rows.iter().map(|r| r.eval(u) - r.rhs).collect();
    let sp = match w {
        None => Vec::new(),
        Some(p) => {
            let mut out = Vec::with_capacity(u.len() * p.slopes.len());
            for k in 0..u.len() {
                for j in 0..p.slopes.len() {
                    out.push(p.slopes[j] * u[k] + p.intercepts[j] - t[k]);
                }
            }
            out
        }
    };
    (s, sp)
}

fn max_step(v: &[f64], dv: &[f64]) -> f64 {
    v.iter().zip(dv).filter(|(_, d)| **d < 0.0).map(|(x, d)| -x / d).fold(1.0, f64::min)
}

/// Primal-feasible Mehrotra predictor-corrector on the P1 discretization.
pub(crate) fn interior_point(mesh: &Mesh, obj: &Objective, tol: f64, max_iter: usize) -> Result<IpmResult> {
    let n = mesh.len();
    let d = mesh.dim;
    let wf = obj.welfare;
    let jn = wf.map_or(0, |p| p.slopes.len());
    // strictly feasible start: lower bound plus a positive convex bump
    let xc: Vec<f64> = (0..2).map(|a| mesh.x.iter().map(|x| x[a]).sum::<f64>() / n as f64).collect();
    let u: Vec<f64> = (0..n)
        .map(|k| {
            let r2: f64 = (0..d).map(|a| (mesh.x[k][a] - xc[a]).powi(2)).sum();
            mesh.lower[k] + 0.1 * (1.0 + r2)
        })
        .collect();
    let t: Vec<f64> = match wf {
        None => Vec::new(),
        Some(p) => u
            .iter()
            .map(|v| (0..jn).map(|j| p.slopes[j] * v + p.intercepts[j]).fold(f64::INFINITY, f64::min) - 1.0)
            .collect(),
    };
    let (s, sp) = slacks(mesh, wf, &u, &t);
    // multipliers start at the size of a node mass
    let z0 = mesh.mass.iter().sum::<f64>() / n as f64;
    let z = vec![z0; s.len()];
    let zp = vec![z0; sp.len()];
    let mut st = State { u, t, s, z, sp, zp };
    let m_rows = st.s.len() + st.sp.len();
    let scale_d = mesh.mass.iter().copied().fold(0.0, f64::max);
    let mut f = obj.value(mesh, &st.u, &st.t);
    let mut trace = vec![f];

    for it in 0..max_iter {
        // dual residual r = grad F - A^T z
        let mut ru: Vec<f64> = if obj.lambda > 0.0 {
            mesh.energy_gradient(&obj.cost, &st.u).into_iter().map(|v| obj.lambda * v).collect()
        } else {
            vec![0.0; n]
        };
        let mut atz = vec![0.0; n];
        for (r, zr) in mesh.rows.iter().zip(&st.z) {
            for v in 0..r.nv {
                atz[r.nodes[v]] += r.coef[v] * zr;
            }
        }
        let dscale = ru.iter().chain(&atz).fold(scale_d, |m, v| m.max(v.abs()));
        for (r, a) in ru.iter_mut().zip(&atz) {
            *r -= a;
        }
        let mut rt = vec![0.0; if wf.is_some() { n } else { 0 }];
        if let Some(p) = wf {
            for k in 0..n {
                rt[k] = -mesh.mass[k];
                for j in 0..jn {
                    let zz = st.zp[k * jn + j];
                    ru[k] -= p.slopes[j] * zz;
                    rt[k] += zz;
                }
            }
        }
        let gap: f64 = st.s.iter().zip(&st.z).map(|(a, b)| a * b).sum::<f64>()
            + st.sp.iter().zip(&st.zp).map(|(a, b)| a * b).sum::<f64>();
        let dres = ru.iter().chain(&rt).fold(0.0f64, |m, v| m.max(v.abs()));
        // residual small against the terms it balances, or the energy has settled
        let settled = trace.len() > STALL_WINDOW && {
            let past = trace[trace.len() - 1 - STALL_WINDOW];
            past - f <= tol * (1.0 + f.abs())
        };
        if gap <= tol * (1.0 + f.abs()) && (dres <= tol.sqrt() * dscale || settled) {
            return Ok(IpmResult { u: st.u, trace, iterations: it, gap, dual_residual: dres });
        }
        let mu = gap / m_rows as f64;

        // Newton matrix on u with t eliminated
        let mut k = BandMatrix::zeros(n, mesh.bandwidth);
        if obj.lambda > 0.0 {
            for e in &mesh.elements {
                let g = mesh.gradient(e, &st.u);
                let (_, _, ha) = obj.cost.smooth(&g[..d]);
                for v in 0..e.nv {
                    for w in 0..=v {
                        let mut c = 0.0;
                        for a in 0..d {
                            for b in 0..d {
                                c += e.coef[a][v] * ha[a * d + b] * e.coef[b][w];
                            }
                        }
                        let val = obj.lambda * e.weight * c;
                        k.add(e.nodes[v], e.nodes[w], val);
                    }
                }
            }
        }
        for (r, (sr, zr)) in mesh.rows.iter().zip(st.s.iter().zip(&st.z)) {
            let wgt = zr / sr;
            for v in 0..r.nv {
                for w in 0..=v {
                    let val = wgt * r.coef[v] * r.coef[w];
                    k.add(r.nodes[v], r.nodes[w], val);
                }
            }
        }
        let mut ktt = vec![0.0; rt.len()];
        let mut kut = vec![0.0; rt.len()];
        if let Some(p) = wf {
            for kk in 0..n {
                for j in 0..jn {
                    let wgt = st.zp[kk * jn + j] / st.sp[kk * jn + j];
                    k.add(kk, kk, wgt * p.slopes[j] * p.slopes[j]);
                    kut[kk] -= wgt * p.slopes[j];
                    ktt[kk] += wgt;
                }
                k.add(kk, kk, -kut[kk] * kut[kk] / ktt[kk]);
            }
        }
        let diag_max = (0..n).map(|i| k.diag(i)).fold(0.0f64, f64::max);
        for i in 0..n {
            k.add(i, i, 1e-14 * diag_max);
        }
        let chol = k.cholesky()?;

        // solve for a complementarity target rc (per row)
        let solve = |rc: &[f64], rcp: &[f64]| -> (Vec<f64>, Vec<f64>, Vec<f64>, Vec<f64>, Vec<f64>, Vec<f64>) {
            let mut bu: Vec<f64> = ru.iter().map(|v| -v).collect();
            for (i, r) in mesh.rows.iter().enumerate() {
                let q = rc[i] / st.s[i];
                for v in 0..r.nv {
                    bu[r.nodes[v]] += r.coef[v] * q;
                }
            }
            let mut bt: Vec<f64> = rt.iter().map(|v| -v).collect();
            if let Some(p) = wf {
                for kk in 0..n {
                    for j in 0..jn {
                        let q = rcp[kk * jn + j] / st.sp[kk * jn + j];
                        bu[kk] += p.slopes[j] * q;
                        bt[kk] -= q;
                    }
                    bu[kk] -= kut[kk] * bt[kk] / ktt[kk];
                }
            }
            let du = chol.solve(&bu);
            let dt: Vec<f64> = (0..bt.len()).map(|kk| (bt[kk] - kut[kk] * du[kk]) / ktt[kk]).collect();
            let ds: Vec<f64> = mesh.rows.iter().map(|r| r.eval(&du)).collect();
            let dz: Vec<f64> = (0..ds.len()).map(|i| (rc[i] - st.z[i] * ds[i]) / st.s[i]).collect();
            let (dsp, dzp) = match wf {
                None => (Vec::new(), Vec::new()),
                Some(p) => {
                    let mut a = Vec::with_capacity(st.sp.len());
                    let mut b = Vec::with_capacity(st.sp.len());
                    for kk in 0..n {
                        for j in 0..jn {
                            let i = kk * jn + j;
                            let dsi = p.slopes[j] * du[kk] - dt[kk];
                            a.push(dsi);
                            b.push((rcp[i] - st.zp[i] * dsi) / st.sp[i]);
                        }
                    }
                    (a, b)
                }
            };
            (du, dt, ds, dz, dsp, dzp)
        };

        let rc: Vec<f64> = st.s.iter().zip(&st.z).map(|(a, b)| -a * b).collect();
        let rcp: Vec<f64> = st.sp.iter().zip(&st.zp).map(|(a, b)| -a * b).collect();
        let (_, _, ds, dz, dsp, dzp) = solve(&rc, &rcp);
        let ap = max_step(&st.s, &ds).min(max_step(&st.sp, &dsp));
        let ad = max_step(&st.z, &dz).min(max_step(&st.zp, &dzp));
        let mu_aff = (st.s.iter().zip(&ds).zip(st.z.iter().zip(&dz)).map(|((s, a), (z, b))| (s + ap * a) * (z + ad * b)).sum::<f64>()
            + st.sp.iter().zip(&dsp).zip(st.zp.iter().zip(&dzp)).map(|((s, a), (z, b))| (s + ap * a) * (z + ad * b)).sum::<f64>())
            / m_rows as f64;
        // keep pairs from collapsing far below the average
        let spread = st.s.iter().zip(&st.z).chain(st.sp.iter().zip(&st.zp)).map(|(a, b)| a * b).fold(f64::INFINITY, f64::min) / mu;
        let sigma = (mu_aff / mu).powi(3).min(1.0).max(if spread < CENTRALITY { SIGMA_FLOOR } else { 0.0 });
        let rc: Vec<f64> = (0..st.s.len()).map(|i| sigma * mu - st.s[i] * st.z[i] - ds[i] * dz[i]).collect();
        let rcp: Vec<f64> = (0..st.sp.len()).map(|i| sigma * mu - st.sp[i] * st.zp[i] - dsp[i] * dzp[i]).collect();
        let (du, dt, ds, dz, dsp, dzp) = solve(&rc, &rcp);
        let mut ap = (STEP_TO_BOUNDARY * max_step(&st.s, &ds).min(max_step(&st.sp, &dsp))).min(1.0);
        let ad = (STEP_TO_BOUNDARY * max_step(&st.z, &dz).min(max_step(&st.zp, &dzp))).min(1.0);

        // primal step: stay strictly inside and never raise the objective
        let mut accepted = None;
        for _ in 0..60 {
            let u: Vec<f64> = st.u.iter().zip(&du).map(|(a, b)| a + ap * b).collect();
            let t: Vec<f64> = st.t.iter().zip(&dt).map(|(a, b)| a + ap * b).collect();
            let (s, sp) = slacks(mesh, wf, &u, &t);
            if s.iter().chain(&sp).all(|v| *v > 0.0) {
                let fn_ = obj.value(mesh, &u, &t);
                if fn_ <= f {
                    accepted = Some((u, t, s, sp, fn_));
                    break;
                }
            }
            ap *= 0.5;
        }
        if let Some((u, t, s, sp, fn_)) = accepted {
            st.u = u;
            st.t = t;
            st.s = s;
            st.sp = sp;
            f = fn_;
        }
        for (z, dz) in st.z.iter_mut().zip(&dz) {
            *z += ad * dz;
        }
        for (z, dz) in st.zp.iter_mut().zip(&dzp) {
            *z += ad * dz;
        }
        trace.push(f);
        if !f.is_finite() || (obj.welfare.is_some() && f < -1e12) {
            break;
        }
    }
    let tail: Vec<String> = trace.iter().rev().take(5).map(|v| format!("{v:.12e}")).collect();
    Err(MkError::NoConvergence(format!(
        "interior point stopped after {} iterations; last energies {}",
        trace.len() - 1,
        tail.join(", ")
    )))
}
