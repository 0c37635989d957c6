use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cconvex::c_exponential_raw;
use crate::error::{MkError, Result};
use crate::measures::{CostFunction, Point};

/// Residual allowed in the linear-interpolation identity for every `y_t`.
pub const SEGMENT_TOL: f64 = 1e-9;

/// `t -> y_t` with `D_x c(x0, y_t)` affine in `t`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CSegment {
    pub x0: Point,
    pub y0: Point,
    pub y1: Point,
    pub ts: Vec<f64>,
    pub ys: Vec<Point>,
    pub residuals: Vec<f64>,
}

impl CSegment {
    pub fn max_residual(&self) -> f64 {
        self.residuals.iter().copied().fold(0.0, f64::max)
    }
}

/// Samples the c-segment from `y0` to `y1` as seen from `x0` at `n_t + 1` equally spaced times.
pub fn trace_c_segment(c: &CostFunction, x0: &Point, y0: &Point, y1: &Point, n_t: usize) -> Result<CSegment> {
    if n_t == 0 {
        return Err(MkError::Validation("n_t must be positive".into()));
    }
    c.check_points(x0, y0)?;
    c.check_points(x0, y1)?;
    let x = x0.coords();
    let p0 = c.dx(x, y0.coords())?;
    let p1 = c.dx(x, y1.coords())?;
    let ts: Vec<f64> = (0..=n_t).map(|k| k as f64 / n_t as f64).collect();
    let solved: Vec<Result<(Point, f64)>> = ts
        .par_iter()
        .map(|&t| {
            // Y(x0, p) solves D_x c(x0, y) = -p
            let target: Vec<f64> = p0.iter().zip(&p1).map(|(a, b)| (1.0 - t) * a + t * b).collect();
            let mom: Vec<f64> = target.iter().map(|v| -v).collect();
            let y = if t == 0.0 {
                y0.coords().to_vec()
            } else if t == 1.0 {
                y1.coords().to_vec()
            } else {
                c_exponential_raw(c, x, &mom)
                    .map_err(|e| MkError::NoConvergence(format!("c-segment at t = {t}: {e}")))?
                    .y
            };
            let d = c.dx(x, &y)?;
            let res = d.iter().zip(&target).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            let scale = 1.0 + target.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            if res > SEGMENT_TOL * scale {
                return Err(MkError::NoConvergence(format!("c-segment residual {res:e} at t = {t}")));
            }
            let pt = Point::new(y, c.chart)
                .map_err(|e| MkError::NoConvergence(format!("c-segment left the chart at t = {t}: {e}")))?;
            Ok((pt, res))
        })
        .collect();
    let mut ys = Vec::with_capacity(ts.len());
    let mut residuals = Vec::with_capacity(ts.len());
    for r in solved {
        let (y, res) = r?;
        ys.push(y);
        residuals.push(res);
    }
    Ok(CSegment { x0: x0.clone(), y0: y0.clone(), y1: y1.clone(), ts, ys, residuals })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MaxPrincipleReport {
    /// `max_{x,t} f(x,t) - max(f(x,0), f(x,1))`.
    pub max_defect: f64,
    pub witness_x: Option<Vec<f64>>,
    pub witness_t: Option<f64>,
    /// Largest negative second difference of `t -> f(x,t)`, scaled by `1/dt^2`.
    pub convexity_defect: f64,
    pub convexity_witness_x: Option<Vec<f64>>,
    pub evaluated: usize,
    pub skipped: usize,
}

/// Checks `f(x,t) = -c(x,y_t) + c(x0,y_t) <= max(f(x,0), f(x,1))` over `xs`.
///
/// Points where the cost is not admissible against some `y_t` are skipped and counted.
pub fn loeper_max_principle_check(c: &CostFunction, seg: &CSegment, xs: &[Point]) -> MaxPrincipleReport {
    let x0 = seg.x0.coords();
    let base: Vec<f64> = seg.ys.iter().map(|y| c.value_raw(x0, y.coords())).collect();
    let rows: Vec<Option<(f64, usize, f64)>> = xs
        .par_iter()
        .map(|x| {
            if x.chart() != c.chart {
                return None;
            }
            let mut f = Vec::with_capacity(seg.ys.len());
            for (y, b) in seg.ys.iter().zip(&base) {
                if c.check_pair(x.coords(), y.coords()).is_err() {
                    return None;
                }
                f.push(-c.value_raw(x.coords(), y.coords()) + b);
            }
            let ends = f[0].max(f[f.len() - 1]);
            let (k, top) = f
                .iter()
                .enumerate()
                .fold((0, f64::NEG_INFINITY), |acc, (k, v)| if *v > acc.1 { (k, *v) } else { acc });
            let mut conv = 0.0f64;
            for w in 0..f.len().saturating_sub(2) {
                let dt = seg.ts[w + 1] - seg.ts[w];
                conv = conv.max(-(f[w] - 2.0 * f[w + 1] + f[w + 2]) / (dt * dt));
            }
            Some((top - ends, k, conv))
        })
        .collect();
    let mut rep = MaxPrincipleReport {
        max_defect: f64::NEG_INFINITY,
        witness_x: None,
        witness_t: None,
        convexity_defect: 0.0,
        convexity_witness_x: None,
        evaluated: 0,
        skipped: 0,
    };
    for (x, r) in xs.iter().zip(rows) {
        let Some((d, k, conv)) = r else {
            rep.skipped += 1;
            continue;
        };
        rep.evaluated += 1;
        if d > rep.max_defect {
            rep.max_defect = d;
            rep.witness_x = Some(x.coords().to_vec());
            rep.witness_t = Some(seg.ts[k]);
        }
        if conv > rep.convexity_defect {
            rep.convexity_defect = conv;
            rep.convexity_witness_x = Some(x.coords().to_vec());
        }
    }
    if rep.evaluated == 0 {
        rep.max_defect = f64::NAN;
    }
    rep
}
