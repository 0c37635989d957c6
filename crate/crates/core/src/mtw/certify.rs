use std::collections::BTreeMap;

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::cross::{cross_raw, NONDEGENERACY_TOL};
use crate::error::{MkError, Result};
use crate::measures::{exp_north, Chart, CostFunction};

/// Where `(x, y)` pairs are drawn from; both points come from the same set.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Domain {
    EuclideanBox { dim: usize, lo: f64, hi: f64 },
    /// Geodesic ball of the given radius about the north pole of `S^dim`.
    SphereCap { dim: usize, radius: f64 },
    /// Hyperbolic ball of the given radius about the origin of the Poincare ball.
    PoincareBall { dim: usize, radius: f64 },
}

impl Domain {
    pub fn chart(&self) -> Chart {
        match self {
            Domain::EuclideanBox { .. } => Chart::Euclidean,
            Domain::SphereCap { .. } => Chart::SphereEmbedded,
            Domain::PoincareBall { .. } => Chart::PoincareDisk,
        }
    }

    pub fn dim(&self) -> usize {
        match *self {
            Domain::EuclideanBox { dim, .. } | Domain::SphereCap { dim, .. } | Domain::PoincareBall { dim, .. } => dim,
        }
    }

    /// Default domain for a cost: the unit box, the `pi/4` cap, or the hyperbolic ball of radius 2.
    pub fn default_for(c: &CostFunction, dim: usize) -> Domain {
        match c.chart {
            Chart::Euclidean => Domain::EuclideanBox { dim, lo: -1.0, hi: 1.0 },
            Chart::SphereEmbedded => Domain::SphereCap { dim, radius: std::f64::consts::FRAC_PI_4 },
            Chart::PoincareDisk => Domain::PoincareBall { dim, radius: 2.0 },
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match *self {
            Domain::EuclideanBox { dim, lo, hi } => (1..=3).contains(&dim) && lo < hi,
            Domain::SphereCap { dim, radius } => {
                (1..=2).contains(&dim) && radius > 0.0 && radius < std::f64::consts::FRAC_PI_2
            }
            Domain::PoincareBall { dim, radius } => (1..=3).contains(&dim) && radius > 0.0 && radius < 20.0,
        };
        if ok {
            Ok(())
        } else {
            Err(MkError::Validation(format!("unsupported sampling domain {self:?}")))
        }
    }

    fn radial(&self, rng: &mut ChaCha8Rng, boundary: bool, rmax: f64, n: usize) -> Vec<f64> {
        let dir = unit_vector(rng, n);
        let r = if boundary {
            rmax * rng.gen_range(0.9..1.0)
        } else {
            rmax * rng.gen_range(0.0f64..1.0).powf(1.0 / n as f64)
        };
        dir.iter().map(|d| d * r).collect()
    }

    /// One point; `boundary` pushes it into the outer shell of the set.
    pub fn sample(&self, rng: &mut ChaCha8Rng, boundary: bool) -> Vec<f64> {
        match *self {
            Domain::EuclideanBox { dim, lo, hi } => {
                let mut v: Vec<f64> = (0..dim).map(|_| rng.gen_range(lo..hi)).collect();
                if boundary {
                    let k = rng.gen_range(0..dim);
                    let w = 0.05 * (hi - lo);
                    v[k] = if rng.gen_bool(0.5) { hi - rng.gen_range(0.0..w) } else { lo + rng.gen_range(0.0..w) };
                }
                v
            }
            Domain::SphereCap { dim, radius } => exp_north(&self.radial(rng, boundary, radius, dim)),
            Domain::PoincareBall { dim, radius } => self.radial(rng, boundary, (0.5 * radius).tanh(), dim),
        }
    }
}

fn unit_vector(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let r = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        if r > 1e-3 && r <= 1.0 {
            return v.iter().map(|a| a / r).collect();
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CrossSample {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub p: Vec<f64>,
    pub q: Vec<f64>,
    pub cross: f64,
    /// `p^i c_{i,j} q^j`.
    pub orthogonality_defect: f64,
    pub orthogonal: bool,
    /// `|det c_{i,j}|` at the pair.
    pub mixed_det: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Verdict {
    Holds { margin: f64 },
    Violated { witness: CrossSample },
    Inconclusive,
}

impl Verdict {
    pub fn holds(&self) -> bool {
        matches!(self, Verdict::Holds { .. })
    }
}

#[derive(Clone, Copy, Debug)]
pub struct CertifyOptions {
    pub samples: usize,
    /// Lower bound required of `cross(p, q)` for unit `p`, `q` under `(A3)s`.
    pub margin: f64,
    /// Slack for the weak inequalities `(A3)` and `(B3)`.
    pub tol: f64,
    pub boundary_fraction: f64,
    pub seed: u64,
    pub keep_samples: bool,
}

impl Default for CertifyOptions {
    fn default() -> Self {
        CertifyOptions { samples: 5000, margin: 1e-4, tol: 1e-9, boundary_fraction: 0.3, seed: 7, keep_samples: true }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CrossCurvatureReport {
    pub cost: String,
    pub domain: Domain,
    pub seed: u64,
    pub requested: usize,
    pub degenerate: usize,
    pub verdicts: BTreeMap<String, Verdict>,
    pub min_orthogonal: f64,
    pub max_orthogonal: f64,
    pub min_general: f64,
    pub max_general: f64,
    pub samples: Vec<CrossSample>,
}

impl CrossCurvatureReport {
    pub fn verdict(&self, cond: &str) -> Option<&Verdict> {
        self.verdicts.get(cond)
    }
}

struct Draw {
    orth: Option<CrossSample>,
    general: Option<CrossSample>,
    mixed_det: f64,
    pair: (Vec<f64>, Vec<f64>),
}

fn draw(c: &CostFunction, domain: &Domain, opts: &CertifyOptions, index: usize) -> Draw {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    rng.set_stream(index as u64);
    let n = domain.dim();
    let mut pair = (vec![], vec![]);
    for _ in 0..32 {
        let bx = rng.gen_bool(opts.boundary_fraction);
        let by = rng.gen_bool(opts.boundary_fraction);
        let x = domain.sample(&mut rng, bx);
        let y = domain.sample(&mut rng, by);
        if c.check_pair(&x, &y).is_ok() {
            pair = (x, y);
            break;
        }
    }
    let none = |pair| Draw { orth: None, general: None, mixed_det: 0.0, pair };
    if pair.0.is_empty() {
        return none(pair);
    }
    let (x, y) = (&pair.0, &pair.1);
    let Ok(m) = c.dxy(x, y) else { return none(pair) };
    let mixed_det = m.determinant().abs();
    if !(mixed_det >= NONDEGENERACY_TOL) {
        return Draw { orth: None, general: None, mixed_det, pair };
    }
    let p = unit_vector(&mut rng, n);
    let q = unit_vector(&mut rng, n);
    let defect = |q: &[f64]| {
        (DVector::from_column_slice(&p).transpose() * &m * DVector::from_column_slice(q))[(0, 0)]
    };
    let sample = |q: Vec<f64>, orthogonal: bool| -> Option<CrossSample> {
        let cross = cross_raw(c, x, y, &p, &q).ok()?;
        Some(CrossSample {
            x: x.clone(),
            y: y.clone(),
            p: p.clone(),
            orthogonality_defect: defect(&q),
            q,
            cross,
            orthogonal,
            mixed_det,
        })
    };
    let general = sample(q.clone(), false);
    // remove the component of q along c_{i,j}^T p, then renormalize
    let a: Vec<f64> = (0..n).map(|j| (0..n).map(|i| p[i] * m[(i, j)]).sum()).collect();
    let aa: f64 = a.iter().map(|v| v * v).sum();
    let orth = if n == 1 {
        None
    } else {
        let qa: f64 = q.iter().zip(&a).map(|(u, v)| u * v).sum();
        let qo: Vec<f64> = q.iter().zip(&a).map(|(u, v)| u - qa / aa * v).collect();
        let r = qo.iter().map(|v| v * v).sum::<f64>().sqrt();
        if r < 1e-6 {
            None
        } else {
            sample(qo.iter().map(|v| v / r).collect(), true)
        }
    };
    Draw { orth, general, mixed_det, pair }
}

/// Monte Carlo certification of `(A2)`, `(A3)`, `(A3)s` and `(B3)` over `domain`.
///
/// Samples are drawn from per-index streams of one seeded generator, so the report
/// does not depend on the thread count.
pub fn certify_conditions(c: &CostFunction, domain: &Domain, opts: &CertifyOptions) -> Result<CrossCurvatureReport> {
    domain.validate()?;
    if domain.chart() != c.chart {
        return Err(MkError::Validation(format!(
            "domain chart {} does not match cost chart {}",
            domain.chart().name(),
            c.chart.name()
        )));
    }
    if opts.samples == 0 {
        return Err(MkError::Validation("need at least one sample".into()));
    }
    let draws: Vec<Draw> = (0..opts.samples).into_par_iter().map(|i| draw(c, domain, opts, i)).collect();

    let mut verdicts = BTreeMap::new();
    let mut degenerate = 0;
    let mut a2_witness: Option<CrossSample> = None;
    let mut min_det = f64::INFINITY;
    for d in &draws {
        if d.orth.is_none() && d.general.is_none() {
            degenerate += 1;
            if !d.pair.0.is_empty() && !(d.mixed_det >= NONDEGENERACY_TOL) && a2_witness.is_none() {
                a2_witness = Some(CrossSample {
                    x: d.pair.0.clone(),
                    y: d.pair.1.clone(),
                    p: vec![],
                    q: vec![],
                    cross: f64::NAN,
                    orthogonality_defect: f64::NAN,
                    orthogonal: false,
                    mixed_det: d.mixed_det,
                });
            }
        } else {
            min_det = min_det.min(d.mixed_det);
        }
    }
    let orth: Vec<&CrossSample> = draws.iter().filter_map(|d| d.orth.as_ref()).collect();
    let general: Vec<&CrossSample> = draws.iter().filter_map(|d| d.general.as_ref()).collect();
    let argmin = |v: &[&CrossSample]| v.iter().copied().min_by(|a, b| a.cross.total_cmp(&b.cross)).cloned();
    let lo_o = argmin(&orth);
    let lo_g = argmin(&general);
    let fold = |v: &[&CrossSample], f: fn(f64, f64) -> f64, init: f64| v.iter().map(|s| s.cross).fold(init, f);

    verdicts.insert(
        "A2".to_string(),
        match (&a2_witness, general.is_empty()) {
            (Some(w), _) => Verdict::Violated { witness: w.clone() },
            (None, true) => Verdict::Inconclusive,
            (None, false) => Verdict::Holds { margin: min_det },
        },
    );
    let weak = |w: &Option<CrossSample>| match w {
        None => Verdict::Inconclusive,
        Some(s) if s.cross >= -opts.tol => Verdict::Holds { margin: s.cross },
        Some(s) => Verdict::Violated { witness: s.clone() },
    };
    let a3 = weak(&lo_o);
    let b3 = weak(&lo_g);
    let a3s = match &lo_o {
        None => Verdict::Inconclusive,
        Some(s) if s.cross >= opts.margin => Verdict::Holds { margin: s.cross },
        Some(s) => Verdict::Violated { witness: s.clone() },
    };
    verdicts.insert("A3".to_string(), a3);
    verdicts.insert("A3s".to_string(), a3s);
    verdicts.insert("B3".to_string(), b3);

    let mut samples = Vec::new();
    if opts.keep_samples {
        for d in &draws {
            samples.extend(d.general.iter().cloned());
            samples.extend(d.orth.iter().cloned());
        }
    }
    Ok(CrossCurvatureReport {
        cost: c.kind.name(),
        domain: *domain,
        seed: opts.seed,
        requested: opts.samples,
        degenerate,
        verdicts,
        min_orthogonal: fold(&orth, f64::min, f64::INFINITY),
        max_orthogonal: fold(&orth, f64::max, f64::NEG_INFINITY),
        min_general: fold(&general, f64::min, f64::INFINITY),
        max_general: fold(&general, f64::max, f64::NEG_INFINITY),
        samples,
    })
}
