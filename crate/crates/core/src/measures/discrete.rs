use serde::{Deserialize, Serialize};

use super::point::{Chart, Point};
use crate::error::{MkError, Result};

pub const WEIGHT_SUM_TOL: f64 = 1e-12;
pub const ATOM_DISTINCT_TOL: f64 = 1e-12;

/// Weighted point cloud.
#[derive(Clone, Debug, PartialEq)]
pub struct DiscreteMeasure {
    atoms: Vec<Point>,
    weights: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiscreteMeasureJson {
    pub chart: String,
    pub atoms: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
}

impl DiscreteMeasure {
    pub fn new(atoms: Vec<Point>, weights: Vec<f64>) -> Result<DiscreteMeasure> {
        if atoms.is_empty() {
            return Err(MkError::Validation("measure has no atoms".into()));
        }
        if atoms.len() != weights.len() {
            return Err(MkError::Validation(format!(
                "{} atoms but {} weights",
                atoms.len(),
                weights.len()
            )));
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(MkError::Validation("weights must be finite and nonnegative".into()));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(MkError::Validation(format!("weights sum to {total}, expected 1")));
        }
        let chart = atoms[0].chart();
        let len = atoms[0].coords().len();
        if atoms.iter().any(|a| a.chart() != chart || a.coords().len() != len) {
            return Err(MkError::Validation("atoms must share one chart and dimension".into()));
        }
        check_distinct(&atoms)?;
        Ok(DiscreteMeasure { atoms, weights })
    }

    /// Rescales positive masses to total one.
    pub fn normalized(atoms: Vec<Point>, masses: Vec<f64>) -> Result<DiscreteMeasure> {
        let total: f64 = masses.iter().sum();
        if !(total > 0.0) {
            return Err(MkError::Validation("total mass must be positive".into()));
        }
        let weights = masses.iter().map(|m| m / total).collect();
        DiscreteMeasure::new(atoms, weights)
    }

    /// Equal weights on the given atoms.
    pub fn uniform(atoms: Vec<Point>) -> Result<DiscreteMeasure> {
        let n = atoms.len();
        DiscreteMeasure::normalized(atoms, vec![1.0; n])
    }

    pub fn dirac(p: Point) -> DiscreteMeasure {
        DiscreteMeasure { atoms: vec![p], weights: vec![1.0] }
    }

    pub fn atoms(&self) -> &[Point] {
        &self.atoms
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn chart(&self) -> Chart {
        self.atoms[0].chart()
    }

    pub fn dim(&self) -> usize {
        self.atoms[0].dim()
    }

    pub fn to_json(&self) -> DiscreteMeasureJson {
        DiscreteMeasureJson {
            chart: self.chart().name().to_string(),
            atoms: self.atoms.iter().map(|a| a.coords().to_vec()).collect(),
            weights: self.weights.clone(),
        }
    }

    pub fn from_json(j: DiscreteMeasureJson) -> Result<DiscreteMeasure> {
        let chart = Chart::parse(&j.chart)?;
        let atoms = j
            .atoms
            .into_iter()
            .map(|c| Point::new(c, chart))
            .collect::<Result<Vec<_>>>()?;
        DiscreteMeasure::new(atoms, j.weights)
    }
}

fn check_distinct(atoms: &[Point]) -> Result<()> {
    let mut idx: Vec<usize> = (0..atoms.len()).collect();
    idx.sort_by(|&a, &b| atoms[a].coords()[0].total_cmp(&atoms[b].coords()[0]));
    for (k, &i) in idx.iter().enumerate() {
        let xi = atoms[i].coords();
        for &j in &idx[k + 1..] {
            let xj = atoms[j].coords();
            if xj[0] - xi[0] > ATOM_DISTINCT_TOL {
                break;
            }
            let d2: f64 = xi.iter().zip(xj).map(|(a, b)| (a - b) * (a - b)).sum();
            if d2.sqrt() <= ATOM_DISTINCT_TOL {
                return Err(MkError::Validation(format!("atoms {i} and {j} coincide")));
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_duplicates() {
        let a = Point::euclidean(&[0.0, 1.0]);
        let r = DiscreteMeasure::uniform(vec![a.clone(), a]);
        assert!(matches!(r, Err(MkError::Validation(_))));
    }

    #[test]
    fn rejects_bad_total() {
        let r = DiscreteMeasure::new(vec![Point::euclidean(&[0.0])], vec![0.9]);
        assert!(r.is_err());
    }

    #[test]
    fn json_roundtrip() {
        let m = DiscreteMeasure::uniform(vec![Point::euclidean(&[0.0]), Point::euclidean(&[2.0])])
            .unwrap();
        let s = serde_json::to_string(&m.to_json()).unwrap();
        let back = DiscreteMeasure::from_json(serde_json::from_str(&s).unwrap()).unwrap();
        assert_eq!(m, back);
    }
}
