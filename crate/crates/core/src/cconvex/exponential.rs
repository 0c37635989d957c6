use nalgebra::{DMatrix, DVector};

use crate::error::{MkError, Result};
use crate::measures::{
    chart_move, dot, norm, norm2, sphere_exp, sphere_tangent_vector, Chart, CostFunction, CostKind,
    Point,
};

pub const EXP_RESIDUAL_TOL: f64 = 1e-10;
pub const EXP_MAX_ITERS: usize = 60;

/// Mobius addition in the Poincare ball.
fn mobius_add(a: &[f64], b: &[f64]) -> Vec<f64> {
    let ab = dot(a, b);
    let aa = norm2(a);
    let bb = norm2(b);
    let den = 1.0 + 2.0 * ab + aa * bb;
    a.iter()
        .zip(b)
        .map(|(ai, bi)| ((1.0 + 2.0 * ab + bb) * ai + (1.0 - aa) * bi) / den)
        .collect()
}

/// Riemannian exponential in chart coordinates (tangent vector given in chart coordinates).
pub fn chart_exp(chart: Chart, x: &[f64], v: &[f64]) -> Vec<f64> {
    match chart {
        Chart::Euclidean => x.iter().zip(v).map(|(a, b)| a + b).collect(),
        Chart::SphereEmbedded => sphere_exp(x, &sphere_tangent_vector(x, v)),
        Chart::PoincareDisk => {
            let r = norm(v);
            if r == 0.0 {
                return x.to_vec();
            }
            let lam = 2.0 / (1.0 - norm2(x));
            let t = (0.5 * lam * r).tanh();
            let w: Vec<f64> = v.iter().map(|c| t * c / r).collect();
            mobius_add(x, &w)
        }
    }
}

/// Inverse metric factor: `g = lambda^2 I` in the Poincare chart, identity otherwise.
fn metric_factor(chart: Chart, x: &[f64]) -> f64 {
    match chart {
        Chart::PoincareDisk => {
            let l = 2.0 / (1.0 - norm2(x));
            l * l
        }
        _ => 1.0,
    }
}

fn initial_guess(c: &CostFunction, x: &[f64], p: &[f64]) -> Result<Vec<f64>> {
    let g = metric_factor(c.chart, x);
    Ok(match c.kind {
        CostKind::Bilinear => p.to_vec(),
        CostKind::Quadratic => x.iter().zip(p).map(|(a, b)| a + b).collect(),
        CostKind::LogDistance => {
            let pp = norm2(p);
            if pp == 0.0 {
                return Err(MkError::NoConvergence("log cost has no target for p = 0".into()));
            }
            x.iter().zip(p).map(|(a, b)| a - b / pp).collect()
        }
        CostKind::SphereSq | CostKind::HyperbolicSq => {
            let v: Vec<f64> = p.iter().map(|c| c / g).collect();
            chart_exp(c.chart, x, &v)
        }
        CostKind::PowerDistance { p: e } => {
            if e <= 1.0 {
                return Err(MkError::NoConvergence(format!(
                    "power cost with exponent {e} is not twisted"
                )));
            }
            let dual = norm(p) / g.sqrt();
            if dual == 0.0 {
                x.to_vec()
            } else {
                let rho = (dual / e).powf(1.0 / (e - 1.0));
                // unit vector in the metric along g^{-1} p
                let v: Vec<f64> = p.iter().map(|c| rho * (c / g) / (dual / g.sqrt())).collect();
                chart_exp(c.chart, x, &v)
            }
        }
    })
}

#[derive(Clone, Debug)]
pub struct ExpResult {
    pub y: Vec<f64>,
    pub residual: f64,
    pub iterations: usize,
}

/// Solves `D_x c(x, y) + p = 0` for `y` by damped Newton on recentred charts.
pub fn c_exponential_raw(c: &CostFunction, x: &[f64], p: &[f64]) -> Result<ExpResult> {
    let n = c.chart.intrinsic_dim(x.len());
    if p.len() != n {
        return Err(MkError::Validation(format!("momentum must have {n} components")));
    }
    let mut y = initial_guess(c, x, p)?;
    let resid = |y: &[f64]| -> Option<Vec<f64>> {
        if c.check_pair(x, y).is_err() {
            return None;
        }
        let d = c.dx(x, y).ok()?;
        Some(d.iter().zip(p).map(|(a, b)| a + b).collect())
    };
    let mut r = match resid(&y) {
        Some(r) => r,
        None => {
            // fall back to a nearby admissible start
            y = chart_move(c.chart, x, &vec![1e-3; n]);
            resid(&y).ok_or_else(|| MkError::NoConvergence("no admissible starting point".into()))?
        }
    };
    let mut nr = norm(&r);
    let tol = EXP_RESIDUAL_TOL * (1.0 + norm(p));
    let mut iterations = 0;
    while iterations < EXP_MAX_ITERS {
        if nr <= 1e-3 * tol {
            break;
        }
        iterations += 1;
        let j = c.dxy(x, &y)?;
        let rhs = DVector::from_iterator(n, r.iter().map(|v| -v));
        let step = DMatrix::from(j)
            .lu()
            .solve(&rhs)
            .ok_or_else(|| MkError::NoConvergence("singular mixed Hessian in Newton step".into()))?;
        let mut lam = 1.0;
        let mut accepted = false;
        while lam > 1e-10 {
            let d: Vec<f64> = step.iter().map(|s| lam * s).collect();
            let cand = chart_move(c.chart, &y, &d);
            if let Some(rc) = resid(&cand) {
                let nc = norm(&rc);
                if nc < nr {
                    y = cand;
                    r = rc;
                    nr = nc;
                    accepted = true;
                    break;
                }
            }
            lam *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    if nr > tol || !nr.is_finite() {
        return Err(MkError::NoConvergence(format!(
            "c-exponential residual {nr:e} after {iterations} iterations"
        )));
    }
    Ok(ExpResult { y, residual: nr, iterations })
}

/// `Y(x, p)`: the target whose cost gradient at `x` is `-p`.
pub fn c_exponential(c: &CostFunction, x: &Point, p: &[f64]) -> Result<Point> {
    if x.chart() != c.chart {
        return Err(MkError::Domain("point chart does not match the cost".into()));
    }
    let r = c_exponential_raw(c, x.coords(), p)?;
    Point::new(r.y, c.chart).map_err(|e| MkError::NoConvergence(format!("Newton left the chart: {e}")))
}
