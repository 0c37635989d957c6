use serde::{Deserialize, Serialize};

use crate::cconvex::c_exponential_raw;
use crate::error::{MkError, Result};
use crate::measures::{Chart, CostFunction, GridMeasure};

/// Width of the pseudo-Huber smoothing of `|y|` seen by the solver.
pub const NORM_SMOOTHING: f64 = 1e-9;

/// Manufacturing cost `a(y)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum ProductCost {
    /// `|y|^2 / 2`
    Quadratic,
    /// `|y|^2 / 2 + kappa |y|`
    QuadraticPlusNorm { kappa: f64 },
}

impl ProductCost {
    pub fn value(&self, y: &[f64]) -> f64 {
        let n2: f64 = y.iter().map(|v| v * v).sum();
        match *self {
            ProductCost::Quadratic => 0.5 * n2,
            ProductCost::QuadraticPlusNorm { kappa } => 0.5 * n2 + kappa * n2.sqrt(),
        }
    }

    /// Smoothed value, gradient and Hessian (row-major `d x d`).
    pub(crate) fn smooth(&self, y: &[f64]) -> (f64, [f64; 2], [f64; 4]) {
        let d = y.len();
        let n2: f64 = y.iter().map(|v| v * v).sum();
        let mut g = [0.0; 2];
        let mut h = [0.0; 4];
        for a in 0..d {
            g[a] = y[a];
            h[a * d + a] = 1.0;
        }
        let mut val = 0.5 * n2;
        if let ProductCost::QuadraticPlusNorm { kappa } = *self {
            let dl = NORM_SMOOTHING;
            let r = (n2 + dl * dl).sqrt();
            val += kappa * (r - dl);
            for a in 0..d {
                g[a] += kappa * y[a] / r;
                for b in 0..d {
                    let id = if a == b { 1.0 } else { 0.0 };
                    h[a * d + b] += kappa * (id / r - y[a] * y[b] / (r * r * r));
                }
            }
        }
        (val, g, h)
    }
}

/// Benefit `b(x, y)` of product `y` to agent `x`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Benefit {
    /// `x . y`, the only benefit the solver accepts.
    Bilinear,
    /// `-c(x, y)`; evaluated by [`principal_losses`](super::principal_losses) only.
    NegCost(CostFunction),
}

impl Benefit {
    pub fn value(&self, x: &[f64], y: &[f64]) -> f64 {
        match self {
            Benefit::Bilinear => x.iter().zip(y).map(|(a, b)| a * b).sum(),
            Benefit::NegCost(c) => -c.value_raw(x, y),
        }
    }

    /// The product `Y(x, p)` with `D_x b(x, Y) = p`.
    pub fn product(&self, x: &[f64], p: &[f64]) -> Result<Vec<f64>> {
        match self {
            Benefit::Bilinear => Ok(p.to_vec()),
            Benefit::NegCost(c) => c_exponential_raw(c, x, p)
                .map(|r| r.y)
                .map_err(|e| MkError::Domain(format!("no product for gradient {p:?} at {x:?}: {e}"))),
        }
    }
}

#[derive(Clone, Debug)]
pub struct ScreeningProblem {
    /// Agent types `mu+`, a Euclidean grid in one or two dimensions.
    pub agents: GridMeasure,
    pub benefit: Benefit,
    pub cost: ProductCost,
    pub null_product: Vec<f64>,
    /// Optional product box; gradients outside it are a domain error for the losses.
    pub products: Option<Vec<(f64, f64)>>,
}

impl ScreeningProblem {
    pub fn new(agents: GridMeasure, cost: ProductCost) -> Result<ScreeningProblem> {
        let d = agents.dim();
        let p = ScreeningProblem { agents, benefit: Benefit::Bilinear, cost, null_product: vec![0.0; d], products: None };
        p.validate()?;
        Ok(p)
    }

    /// Uniform agents on the unit square, `a(y) = |y|^2/2`, null product at the origin.
    pub fn rochet_chone(resolution: usize) -> Result<ScreeningProblem> {
        let g = GridMeasure::uniform(&[(0.0, 1.0), (0.0, 1.0)], &[resolution, resolution], Chart::Euclidean)?;
        ScreeningProblem::new(g, ProductCost::Quadratic)
    }

    /// The one-dimensional analogue on `[0, 1]`.
    pub fn interval(resolution: usize) -> Result<ScreeningProblem> {
        let g = GridMeasure::uniform(&[(0.0, 1.0)], &[resolution], Chart::Euclidean)?;
        ScreeningProblem::new(g, ProductCost::Quadratic)
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.agents.dim();
        if self.agents.chart() != Chart::Euclidean || d > 2 {
            return Err(MkError::Validation("agents must live on a Euclidean box of dimension 1 or 2".into()));
        }
        if self.null_product.len() != d {
            return Err(MkError::Validation(format!("null product needs {d} coordinates")));
        }
        if let ProductCost::QuadraticPlusNorm { kappa } = self.cost {
            if !(kappa >= 0.0) || !kappa.is_finite() {
                return Err(MkError::Validation("kappa must be finite and nonnegative".into()));
            }
        }
        if !self.cost.value(&self.null_product).is_finite() {
            return Err(MkError::Validation("a(y_null) must be finite".into()));
        }
        if let Some(b) = &self.products {
            if b.len() != d || b.iter().any(|(l, h)| !(l <= h)) {
                return Err(MkError::Validation("product box needs lo <= hi on every axis".into()));
            }
        }
        Ok(())
    }

    /// `u_null(x) = b(x, y_null) - a(y_null)`.
    pub fn reservation(&self, x: &[f64]) -> f64 {
        self.benefit.value(x, &self.null_product) - self.cost.value(&self.null_product)
    }

    pub(crate) fn in_products(&self, y: &[f64]) -> bool {
        match &self.products {
            None => true,
            Some(b) => y.iter().zip(b).all(|(v, (l, h))| *v >= *l && *v <= *h),
        }
    }
}
