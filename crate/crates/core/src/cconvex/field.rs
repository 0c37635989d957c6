use serde::{Deserialize, Serialize};

use crate::error::{MkError, Result};
use crate::measures::{Chart, GridMeasure, Point};

/// Cell-centred node layout shared with [`GridMeasure`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Lattice {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub shape: Vec<usize>,
}

impl Lattice {
    pub fn new(bounds: &[(f64, f64)], shape: &[usize]) -> Result<Lattice> {
        if bounds.is_empty() || bounds.len() != shape.len() || shape.contains(&0) {
            return Err(MkError::Validation("lattice needs matching non-empty axes".into()));
        }
        if bounds.iter().any(|(l, h)| !(l < h)) {
            return Err(MkError::Validation("each axis needs lo < hi".into()));
        }
        Ok(Lattice {
            lo: bounds.iter().map(|b| b.0).collect(),
            hi: bounds.iter().map(|b| b.1).collect(),
            shape: shape.to_vec(),
        })
    }

    pub fn of(g: &GridMeasure) -> Lattice {
        let b = g.bounds();
        Lattice::new(&b, g.shape()).expect("grid measures have valid axes")
    }

    pub fn dim(&self) -> usize {
        self.shape.len()
    }

    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn spacing(&self, a: usize) -> f64 {
        (self.hi[a] - self.lo[a]) / self.shape[a] as f64
    }

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

    pub fn node(&self, k: usize) -> Vec<f64> {
        let idx = self.multi_index(k);
        (0..self.dim()).map(|a| self.lo[a] + (idx[a] as f64 + 0.5) * self.spacing(a)).collect()
    }

    /// True when every axis index is at least `w` away from the edge.
    pub fn is_interior(&self, k: usize, w: usize) -> bool {
        self.multi_index(k).iter().zip(&self.shape).all(|(&i, &s)| i >= w && i + w < s)
    }

    fn stride(&self, a: usize) -> usize {
        self.shape[a + 1..].iter().product()
    }

    /// Centred first differences, one-sided at the edges.
    pub fn gradient(&self, values: &[f64], k: usize) -> Vec<f64> {
        let idx = self.multi_index(k);
        (0..self.dim())
            .map(|a| {
                let st = self.stride(a);
                let h = self.spacing(a);
                let i = idx[a];
                let s = self.shape[a];
                if s == 1 {
                    0.0
                } else if i == 0 {
                    (values[k + st] - values[k]) / h
                } else if i + 1 == s {
                    (values[k] - values[k - st]) / h
                } else {
                    (values[k + st] - values[k - st]) / (2.0 * h)
                }
            })
            .collect()
    }

    /// Centred Hessian (the 9-point stencil in 2-D); `None` on the boundary layer.
    pub fn hessian(&self, values: &[f64], k: usize) -> Option<Vec<Vec<f64>>> {
        if !self.is_interior(k, 1) {
            return None;
        }
        let d = self.dim();
        let mut h = vec![vec![0.0; d]; d];
        for a in 0..d {
            let sa = self.stride(a);
            let ha = self.spacing(a);
            h[a][a] = (values[k + sa] - 2.0 * values[k] + values[k - sa]) / (ha * ha);
            for b in a + 1..d {
                let sb = self.stride(b);
                let hb = self.spacing(b);
                let v = (values[k + sa + sb] - values[k + sa - sb] - values[k - sa + sb]
                    + values[k - sa - sb])
                    / (4.0 * ha * hb);
                h[a][b] = v;
                h[b][a] = v;
            }
        }
        Some(h)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Support {
    Atoms(Vec<Point>),
    /// Nodes of a lattice in the given chart (cell centres).
    Grid(Lattice, Chart),
}

/// Scalar potential on a finite set.
#[derive(Clone, Debug, PartialEq)]
pub struct PotentialField {
    pub support: Support,
    pub values: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PotentialFieldJson {
    pub chart: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub atoms: Option<Vec<Vec<f64>>>,
    #[serde(default, rename = "box", skip_serializing_if = "Option::is_none")]
    pub bounds: Option<Vec<[f64; 2]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shape: Option<Vec<usize>>,
    pub values: Vec<f64>,
}

impl PotentialField {
    pub fn on_atoms(atoms: Vec<Point>, values: Vec<f64>) -> Result<PotentialField> {
        if atoms.len() != values.len() {
            return Err(MkError::Validation("one value per atom required".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(MkError::Validation("potential values must be finite".into()));
        }
        Ok(PotentialField { support: Support::Atoms(atoms), values })
    }

    pub fn on_grid(lattice: Lattice, chart: Chart, values: Vec<f64>) -> Result<PotentialField> {
        if lattice.len() != values.len() {
            return Err(MkError::Validation("one value per lattice node required".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(MkError::Validation("potential values must be finite".into()));
        }
        Ok(PotentialField { support: Support::Grid(lattice, chart), values })
    }

    /// Samples `f` at the lattice nodes.
    pub fn sample(lattice: Lattice, f: impl Fn(&[f64]) -> f64) -> PotentialField {
        let values = (0..lattice.len()).map(|k| f(&lattice.node(k))).collect();
        PotentialField { support: Support::Grid(lattice, Chart::Euclidean), values }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn lattice(&self) -> Option<&Lattice> {
        match &self.support {
            Support::Grid(l, _) => Some(l),
            Support::Atoms(_) => None,
        }
    }

    pub fn chart(&self) -> Chart {
        match &self.support {
            Support::Grid(_, c) => *c,
            Support::Atoms(a) => a.first().map(|p| p.chart()).unwrap_or(Chart::Euclidean),
        }
    }

    /// Point coordinates of every node.
    pub fn coords(&self) -> Vec<Vec<f64>> {
        match &self.support {
            Support::Atoms(a) => a.iter().map(|p| p.coords().to_vec()).collect(),
            Support::Grid(l, chart) => (0..l.len())
                .map(|k| match chart {
                    Chart::SphereEmbedded => crate::measures::exp_north(&l.node(k)),
                    _ => l.node(k),
                })
                .collect(),
        }
    }

    /// Finite-difference gradient per node (grids only).
    pub fn gradients(&self) -> Option<Vec<Vec<f64>>> {
        let l = self.lattice()?;
        Some((0..l.len()).map(|k| l.gradient(&self.values, k)).collect())
    }

    pub fn to_json(&self) -> PotentialFieldJson {
        match &self.support {
            Support::Atoms(a) => PotentialFieldJson {
                chart: self.chart().name().into(),
                atoms: Some(a.iter().map(|p| p.coords().to_vec()).collect()),
                bounds: None,
                shape: None,
                values: self.values.clone(),
            },
            Support::Grid(l, c) => PotentialFieldJson {
                chart: c.name().into(),
                atoms: None,
                bounds: Some(l.lo.iter().zip(&l.hi).map(|(a, b)| [*a, *b]).collect()),
                shape: Some(l.shape.clone()),
                values: self.values.clone(),
            },
        }
    }

    pub fn from_json(j: PotentialFieldJson) -> Result<PotentialField> {
        let chart = Chart::parse(&j.chart)?;
        match (j.atoms, j.bounds, j.shape) {
            (Some(atoms), None, None) => {
                let pts = atoms.into_iter().map(|c| Point::new(c, chart)).collect::<Result<Vec<_>>>()?;
                PotentialField::on_atoms(pts, j.values)
            }
            (None, Some(b), Some(s)) => {
                let bounds: Vec<(f64, f64)> = b.iter().map(|p| (p[0], p[1])).collect();
                PotentialField::on_grid(Lattice::new(&bounds, &s)?, chart, j.values)
            }
            _ => Err(MkError::Validation(
                "potential field needs either `atoms` or both `box` and `shape`".into(),
            )),
        }
    }
}
