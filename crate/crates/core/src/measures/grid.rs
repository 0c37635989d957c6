use serde::{Deserialize, Serialize};

use super::point::Chart;
use crate::error::{MkError, Result};

pub const GRID_MASS_TOL: f64 = 1e-9;

/// Cell-centred density on a box.
///
/// For `SphereEmbedded` the box lives in the exponential chart at the north pole
/// (last embedded axis), so cell centres map to the sphere through [`GridMeasure::embed`].
#[derive(Clone, Debug, PartialEq)]
pub struct GridMeasure {
    lo: Vec<f64>,
    hi: Vec<f64>,
    shape: Vec<usize>,
    density: Vec<f64>,
    chart: Chart,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridMeasureJson {
    pub chart: String,
    #[serde(rename = "box")]
    pub bounds: Vec<[f64; 2]>,
    pub shape: Vec<usize>,
    pub density: Vec<f64>,
}

impl GridMeasure {
    pub fn new(
        bounds: &[(f64, f64)],
        shape: &[usize],
        density: Vec<f64>,
        chart: Chart,
    ) -> Result<GridMeasure> {
        let g = GridMeasure::unchecked(bounds, shape, density, chart)?;
        let mass = g.total_mass();
        if (mass - 1.0).abs() > GRID_MASS_TOL {
            return Err(MkError::Validation(format!("grid mass is {mass}, expected 1")));
        }
        Ok(g)
    }

    fn unchecked(
        bounds: &[(f64, f64)],
        shape: &[usize],
        density: Vec<f64>,
        chart: Chart,
    ) -> Result<GridMeasure> {
        if bounds.is_empty() || bounds.len() > 3 || bounds.len() != shape.len() {
            return Err(MkError::Validation("box and shape must have 1 to 3 matching axes".into()));
        }
        if bounds.iter().any(|(l, h)| !(l < h) || !l.is_finite() || !h.is_finite()) {
            return Err(MkError::Validation("each axis needs lo < hi".into()));
        }
        if shape.iter().any(|&s| s == 0) {
            return Err(MkError::Validation("empty grid axis".into()));
        }
        let n: usize = shape.iter().product();
        if density.len() != n {
            return Err(MkError::Validation(format!(
                "density has {} values, shape needs {n}",
                density.len()
            )));
        }
        if density.iter().any(|d| !d.is_finite() || *d < 0.0) {
            return Err(MkError::Validation("density must be finite and nonnegative".into()));
        }
        let g = GridMeasure {
            lo: bounds.iter().map(|b| b.0).collect(),
            hi: bounds.iter().map(|b| b.1).collect(),
            shape: shape.to_vec(),
            density,
            chart,
        };
        for k in 0..n {
            if g.density[k] > 0.0 && g.volume_element(&g.centre(k)) == 0.0 {
                return Err(MkError::Domain(format!("cell {k} carries mass outside the chart")));
            }
        }
        Ok(g)
    }

    /// Samples `f` at cell centres and rescales to unit mass.
    pub fn from_fn(
        bounds: &[(f64, f64)],
        shape: &[usize],
        chart: Chart,
        f: impl Fn(&[f64]) -> f64,
    ) -> Result<GridMeasure> {
        let n: usize = shape.iter().product();
        let mut probe = GridMeasure::unchecked(bounds, shape, vec![0.0; n], chart)?;
        for k in 0..n {
            let c = probe.centre(k);
            probe.density[k] = if probe.volume_element(&c) > 0.0 { f(&c).max(0.0) } else { 0.0 };
        }
        probe.renormalize()?;
        Ok(probe)
    }

    pub fn uniform(bounds: &[(f64, f64)], shape: &[usize], chart: Chart) -> Result<GridMeasure> {
        GridMeasure::from_fn(bounds, shape, chart, |_| 1.0)
    }

    pub fn renormalize(&mut self) -> Result<()> {
        let m = self.total_mass();
        if !(m > 0.0) || !m.is_finite() {
            return Err(MkError::Validation("grid carries no mass".into()));
        }
        self.density.iter_mut().for_each(|d| *d /= m);
        Ok(())
    }

    pub fn chart(&self) -> Chart {
        self.chart
    }

    pub fn dim(&self) -> usize {
        self.shape.len()
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn bounds(&self) -> Vec<(f64, f64)> {
        self.lo.iter().copied().zip(self.hi.iter().copied()).collect()
    }

    pub fn density(&self) -> &[f64] {
        &self.density
    }

    pub fn len(&self) -> usize {
        self.density.len()
    }

    pub fn is_empty(&self) -> bool {
        self.density.is_empty()
    }

    pub fn spacing(&self, axis: usize) -> f64 {
        (self.hi[axis] - self.lo[axis]) / self.shape[axis] as f64
    }

    /// Row-major multi-index of flat cell `k` (last axis fastest).
    pub fn multi_index(&self, mut k: usize) -> Vec<usize> {
        let mut idx = vec![0; self.shape.len()];
        for a in (0..self.shape.len()).rev() {
            idx[a] = k % self.shape[a];
            k /= self.shape[a];
        }
        idx
    }

    pub fn flat_index(&self, idx: &[usize]) -> usize {
        idx.iter().zip(&self.shape).fold(0, |acc, (i, s)| acc * s + i)
    }

    pub fn centre(&self, k: usize) -> Vec<f64> {
        let idx = self.multi_index(k);
        (0..self.shape.len())
            .map(|a| self.lo[a] + (idx[a] as f64 + 0.5) * self.spacing(a))
            .collect()
    }

    /// Riemannian volume density of the chart at coordinates `x`.
    pub fn volume_element(&self, x: &[f64]) -> f64 {
        let n = x.len() as i32;
        match self.chart {
            Chart::Euclidean => 1.0,
            Chart::PoincareDisk => {
                let r2: f64 = x.iter().map(|c| c * c).sum();
                if r2 >= 1.0 {
                    0.0
                } else {
                    (2.0 / (1.0 - r2)).powi(n)
                }
            }
            Chart::SphereEmbedded => {
                let rho: f64 = x.iter().map(|c| c * c).sum::<f64>().sqrt();
                if rho >= std::f64::consts::PI {
                    0.0
                } else if rho < 1e-8 {
                    1.0
                } else {
                    (rho.sin() / rho).powi(n - 1)
                }
            }
        }
    }

    pub fn cell_volume(&self, k: usize) -> f64 {
        let h: f64 = (0..self.dim()).map(|a| self.spacing(a)).product();
        h * self.volume_element(&self.centre(k))
    }

    pub fn cell_mass(&self, k: usize) -> f64 {
        if self.density[k] == 0.0 {
            0.0
        } else {
            self.density[k] * self.cell_volume(k)
        }
    }

    pub fn total_mass(&self) -> f64 {
        (0..self.len()).map(|k| self.cell_mass(k)).sum()
    }

    /// Chart coordinates to point coordinates (identity except on the sphere).
    pub fn embed(&self, x: &[f64]) -> Vec<f64> {
        match self.chart {
            Chart::SphereEmbedded => exp_north(x),
            _ => x.to_vec(),
        }
    }

    /// Multilinear interpolation of the cell-centred density; `None` outside the box.
    pub fn density_at(&self, x: &[f64]) -> Option<f64> {
        let d = self.dim();
        if x.len() != d {
            return None;
        }
        let mut base = vec![0usize; d];
        let mut frac = vec![0.0; d];
        for a in 0..d {
            if x[a] < self.lo[a] || x[a] > self.hi[a] {
                return None;
            }
            let s = (x[a] - self.lo[a]) / self.spacing(a) - 0.5;
            let m = self.shape[a];
            if m == 1 || s <= 0.0 {
                base[a] = 0;
                frac[a] = 0.0;
            } else if s >= (m - 1) as f64 {
                base[a] = m - 2;
                frac[a] = 1.0;
            } else {
                base[a] = s.floor() as usize;
                frac[a] = s - base[a] as f64;
            }
        }
        let mut acc = 0.0;
        for corner in 0..(1usize << d) {
            let mut w = 1.0;
            let mut idx = base.clone();
            for a in 0..d {
                let bit = (corner >> a) & 1;
                if self.shape[a] == 1 {
                    if bit == 1 {
                        w = 0.0;
                    }
                    continue;
                }
                idx[a] += bit;
                w *= if bit == 1 { frac[a] } else { 1.0 - frac[a] };
            }
            if w != 0.0 {
                acc += w * self.density[self.flat_index(&idx)];
            }
        }
        Some(acc)
    }

    pub fn to_json(&self) -> GridMeasureJson {
        GridMeasureJson {
            chart: self.chart.name().to_string(),
            bounds: self.lo.iter().zip(&self.hi).map(|(l, h)| [*l, *h]).collect(),
            shape: self.shape.clone(),
            density: self.density.clone(),
        }
    }

    pub fn from_json(j: GridMeasureJson) -> Result<GridMeasure> {
        let chart = Chart::parse(&j.chart)?;
        let b: Vec<(f64, f64)> = j.bounds.iter().map(|p| (p[0], p[1])).collect();
        GridMeasure::new(&b, &j.shape, j.density, chart)
    }
}

/// Exponential map of the unit sphere at the north pole `e_{n}`.
pub fn exp_north(v: &[f64]) -> Vec<f64> {
    let rho: f64 = v.iter().map(|c| c * c).sum::<f64>().sqrt();
    let mut out = Vec::with_capacity(v.len() + 1);
    if rho < 1e-300 {
        out.extend(std::iter::repeat_n(0.0, v.len()));
        out.push(1.0);
        return out;
    }
    let s = rho.sin() / rho;
    out.extend(v.iter().map(|c| c * s));
    out.push(rho.cos());
    out
}

/// Inverse of [`exp_north`] away from the south pole.
pub fn log_north(p: &[f64]) -> Vec<f64> {
    let n = p.len() - 1;
    let r: f64 = p[..n].iter().map(|c| c * c).sum::<f64>().sqrt();
    let rho = r.atan2(p[n]);
    if r < 1e-300 {
        return vec![0.0; n];
    }
    p[..n].iter().map(|c| c * rho / r).collect()
}
