use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{MkError, Result};
use crate::measures::{CostFunction, Point};

/// `(A2)` threshold on `|det c_{i,j}|`.
pub const NONDEGENERACY_TOL: f64 = 1e-8;

fn unit(n: usize, k: usize) -> Vec<f64> {
    let mut e = vec![0.0; n];
    e[k] = 1.0;
    e
}

/// Contracted cross-curvature in chart coordinates, no argument checks.
pub(crate) fn cross_raw(c: &CostFunction, x: &[f64], y: &[f64], p: &[f64], q: &[f64]) -> Result<f64> {
    let n = p.len();
    let mixed = c.dxy(x, y)?;
    if !(mixed.determinant().abs() >= NONDEGENERACY_TOL) {
        return Err(MkError::Degenerate(format!(
            "(A2) fails: |det c_ij| = {:e}",
            mixed.determinant().abs()
        )));
    }
    let fourth = c.directional(x, y, p, q, 4)?[2][2];
    // a_r = c_{ij,r} p^i p^j,  b_m = c_{m,kl} q^k q^l
    let mut a = DVector::zeros(n);
    let mut b = DVector::zeros(n);
    for k in 0..n {
        let e = unit(n, k);
        a[k] = c.directional(x, y, p, &e, 3)?[2][1];
        b[k] = c.directional(x, y, &e, q, 3)?[1][2];
    }
    // mixed[(m, r)] = c_{m,r}; c^{r,m} is its inverse
    let inv = mixed
        .clone()
        .try_inverse()
        .ok_or_else(|| MkError::Degenerate("mixed Hessian is singular".into()))?;
    let corr = (a.transpose() * inv * b)[(0, 0)];
    Ok(-fourth + corr)
}

fn check_vectors(x: &Point, p: &[f64], q: &[f64]) -> Result<()> {
    let n = x.dim();
    if p.len() != n || q.len() != n {
        return Err(MkError::Validation(format!("tangent vectors need {n} components")));
    }
    if p.iter().all(|v| *v == 0.0) || q.iter().all(|v| *v == 0.0) {
        return Err(MkError::Validation("p and q must be nonzero".into()));
    }
    Ok(())
}

/// `cross(p, q) = (-c_{ij,kl} + c_{ij,r} c^{r,m} c_{m,kl}) p^i p^j q^k q^l`.
pub fn cross_curvature(c: &CostFunction, x: &Point, y: &Point, p: &[f64], q: &[f64]) -> Result<f64> {
    c.check_points(x, y)?;
    check_vectors(x, p, q)?;
    cross_raw(c, x.coords(), y.coords(), p, q)
}

/// `p^i c_{i,j} q^j`.
pub fn orthogonality_defect(c: &CostFunction, x: &Point, y: &Point, p: &[f64], q: &[f64]) -> Result<f64> {
    c.check_points(x, y)?;
    let m = c.dxy(x.coords(), y.coords())?;
    Ok((DVector::from_column_slice(p).transpose() * m * DVector::from_column_slice(q))[(0, 0)])
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MetricTensor {
    /// Row-major `2n x 2n` matrix of `h` in `(x, y)` chart coordinates.
    pub matrix: Vec<Vec<f64>>,
    pub eigenvalues: Vec<f64>,
    pub positive: usize,
    pub negative: usize,
}

impl MetricTensor {
    pub fn signature(&self) -> (usize, usize) {
        (self.positive, self.negative)
    }
}

/// The pseudo-metric `h = c_{i,j} (dx^i dy^j + dy^j dx^i)` on the product chart.
pub fn metric_tensor_h(c: &CostFunction, x: &Point, y: &Point) -> Result<MetricTensor> {
    c.check_points(x, y)?;
    let m = c.dxy(x.coords(), y.coords())?;
    if !(m.determinant().abs() >= NONDEGENERACY_TOL) {
        return Err(MkError::Degenerate("(A2) fails; h is degenerate".into()));
    }
    let n = m.nrows();
    let mut h = DMatrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        for j in 0..n {
            h[(i, n + j)] = m[(i, j)];
            h[(n + j, i)] = m[(i, j)];
        }
    }
    let eig = SymmetricEigen::new(h.clone());
    let scale = eig.eigenvalues.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let tol = 1e-12 * scale.max(1.0);
    let mut eigenvalues: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    eigenvalues.sort_by(f64::total_cmp);
    Ok(MetricTensor {
        matrix: (0..2 * n).map(|i| (0..2 * n).map(|j| h[(i, j)]).collect()).collect(),
        positive: eigenvalues.iter().filter(|v| **v > tol).count(),
        negative: eigenvalues.iter().filter(|v| **v < -tol).count(),
        eigenvalues,
    })
}
