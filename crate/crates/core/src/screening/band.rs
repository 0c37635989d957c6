use crate::error::{MkError, Result};

/// Symmetric matrix stored as its lower band, row by row.
pub(crate) struct BandMatrix {
    n: usize,
    b: usize,
    data: Vec<f64>,
}

impl BandMatrix {
    pub fn zeros(n: usize, b: usize) -> BandMatrix {
        BandMatrix { n, b, data: vec![0.0; n * (b + 1)] }
    }

    #[inline]
    fn at(&self, i: usize, j: usize) -> usize {
        i * (self.b + 1) + (j + self.b - i)
    }

    /// Adds `v` at `(i, j)`; only the lower triangle is kept, so callers add each pair once
    /// from either side.
    #[inline]
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let (i, j) = if i >= j { (i, j) } else { (j, i) };
        debug_assert!(i - j <= self.b);
        let k = self.at(i, j);
        self.data[k] += v;
    }

    pub fn diag(&self, i: usize) -> f64 {
        self.data[self.at(i, i)]
    }

    /// In-place `L L^T`.
    pub fn cholesky(mut self) -> Result<BandCholesky> {
        let (n, b, w) = (self.n, self.b, self.b + 1);
        for i in 0..n {
            let lo_i = i.saturating_sub(b);
            for j in lo_i..=i {
                let lo = lo_i.max(j.saturating_sub(b));
                let ri = i * w + b - i;
                let rj = j * w + b - j;
                let mut s = self.data[ri + j];
                let (a, c) = (&self.data[ri + lo..ri + j], &self.data[rj + lo..rj + j]);
                s -= a.iter().zip(c).map(|(x, y)| x * y).sum::<f64>();
                if i == j {
                    if !(s > 0.0) {
                        return Err(MkError::Numerical(format!("banded Cholesky pivot {s:e} at row {i}")));
                    }
                    self.data[ri + i] = s.sqrt();
                } else {
                    self.data[ri + j] = s / self.data[rj + j];
                }
            }
        }
        Ok(BandCholesky { m: self })
    }
}

pub(crate) struct BandCholesky {
    m: BandMatrix,
}

impl BandCholesky {
    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let (n, b, w) = (self.m.n, self.m.b, self.m.b + 1);
        let d = &self.m.data;
        let mut y = rhs.to_vec();
        for i in 0..n {
            let lo = i.saturating_sub(b);
            let ri = i * w + b - i;
            let s: f64 = (lo..i).map(|k| d[ri + k] * y[k]).sum();
            y[i] = (y[i] - s) / d[ri + i];
        }
        for i in (0..n).rev() {
            let ri = i * w + b - i;
            y[i] /= d[ri + i];
            let yi = y[i];
            let lo = i.saturating_sub(b);
            for k in lo..i {
                y[k] -= d[ri + k] * yi;
            }
        }
        y
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matches_a_dense_solve() {
        let n = 9;
        let b = 3;
        let mut m = BandMatrix::zeros(n, b);
        let mut dense = nalgebra::DMatrix::<f64>::zeros(n, n);
        for i in 0..n {
            for j in i.saturating_sub(b)..=i {
                let v = if i == j { 10.0 + i as f64 } else { 1.0 / (1.0 + (i * j) as f64) };
                m.add(i, j, v);
                dense[(i, j)] = v;
                dense[(j, i)] = v;
            }
        }
        let rhs: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
        let x = m.cholesky().unwrap().solve(&rhs);
        let r = dense * nalgebra::DVector::from_vec(x) - nalgebra::DVector::from_vec(rhs);
        assert!(r.amax() < 1e-13);
    }
}
