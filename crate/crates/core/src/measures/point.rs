use serde::{Deserialize, Serialize};

use crate::error::{MkError, Result};

/// Coordinate model of the ambient space.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Chart {
    Euclidean,
    /// Unit sphere `S^n` stored in `R^(n+1)`.
    SphereEmbedded,
    /// Hyperbolic space in the Poincare ball model.
    PoincareDisk,
}

impl Chart {
    /// Intrinsic dimension for a coordinate vector of length `len`.
    pub fn intrinsic_dim(self, len: usize) -> usize {
        match self {
            Chart::SphereEmbedded => len.saturating_sub(1),
            _ => len,
        }
    }

    pub fn parse(s: &str) -> Result<Chart> {
        match s {
            "euclidean" => Ok(Chart::Euclidean),
            "sphere_embedded" | "sphere" => Ok(Chart::SphereEmbedded),
            "poincare_disk" | "hyperbolic" => Ok(Chart::PoincareDisk),
            _ => Err(MkError::Validation(format!("unknown chart `{s}`"))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Chart::Euclidean => "euclidean",
            Chart::SphereEmbedded => "sphere_embedded",
            Chart::PoincareDisk => "poincare_disk",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PointJson", into = "PointJson")]
pub struct Point {
    coords: Vec<f64>,
    chart: Chart,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PointJson {
    pub chart: Chart,
    pub coords: Vec<f64>,
}

impl TryFrom<PointJson> for Point {
    type Error = MkError;

    fn try_from(j: PointJson) -> Result<Point> {
        Point::new(j.coords, j.chart)
    }
}

impl From<Point> for PointJson {
    fn from(p: Point) -> PointJson {
        PointJson { chart: p.chart, coords: p.coords }
    }
}

pub const SPHERE_NORM_TOL: f64 = 1e-12;

impl Point {
    pub fn new(coords: Vec<f64>, chart: Chart) -> Result<Point> {
        check_coords(&coords, chart)?;
        Ok(Point { coords, chart })
    }

    pub fn euclidean(coords: &[f64]) -> Point {
        Point::new(coords.to_vec(), Chart::Euclidean).expect("finite euclidean coordinates")
    }

    /// Normalizes onto the sphere before validating.
    pub fn on_sphere(coords: &[f64]) -> Result<Point> {
        let n = norm(coords);
        if n == 0.0 || !n.is_finite() {
            return Err(MkError::Domain("cannot normalize the zero vector".into()));
        }
        Point::new(coords.iter().map(|c| c / n).collect(), Chart::SphereEmbedded)
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn chart(&self) -> Chart {
        self.chart
    }

    /// Intrinsic dimension.
    pub fn dim(&self) -> usize {
        self.chart.intrinsic_dim(self.coords.len())
    }

    /// Geodesic distance in the chart's metric.
    pub fn distance(&self, other: &Point) -> Result<f64> {
        if self.chart != other.chart || self.coords.len() != other.coords.len() {
            return Err(MkError::Domain("points live in different charts".into()));
        }
        Ok(raw_distance(self.chart, &self.coords, &other.coords))
    }

    /// Moves by chart coordinates `a`: translation, or the normalized frame step on the sphere.
    pub fn moved(&self, a: &[f64]) -> Result<Point> {
        let coords = chart_move(self.chart, &self.coords, a);
        Point::new(coords, self.chart)
    }
}

fn check_coords(coords: &[f64], chart: Chart) -> Result<()> {
    if coords.iter().any(|c| !c.is_finite()) {
        return Err(MkError::Domain("non-finite coordinate".into()));
    }
    let n = chart.intrinsic_dim(coords.len());
    if !(1..=3).contains(&n) {
        return Err(MkError::Domain(format!("unsupported dimension {n}")));
    }
    match chart {
        Chart::Euclidean => Ok(()),
        Chart::SphereEmbedded => {
            let r = norm(coords);
            if (r - 1.0).abs() > SPHERE_NORM_TOL {
                Err(MkError::Domain(format!("sphere point has norm {r}")))
            } else {
                Ok(())
            }
        }
        Chart::PoincareDisk => {
            if norm2(coords) >= 1.0 {
                Err(MkError::Domain("point outside the Poincare disk".into()))
            } else {
                Ok(())
            }
        }
    }
}

pub(crate) fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|c| c * c).sum()
}

pub(crate) fn norm(v: &[f64]) -> f64 {
    norm2(v).sqrt()
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn raw_distance(chart: Chart, x: &[f64], y: &[f64]) -> f64 {
    match chart {
        Chart::Euclidean => x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt(),
        Chart::SphereEmbedded => {
            // atan2 form stays accurate for nearby points
            let diff: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
            let sum: f64 = x.iter().zip(y).map(|(a, b)| (a + b) * (a + b)).sum();
            2.0 * diff.sqrt().atan2(sum.sqrt())
        }
        Chart::PoincareDisk => {
            let diff: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
            let delta = 2.0 * diff / ((1.0 - norm2(x)) * (1.0 - norm2(y)));
            // acosh(1 + d) = ln(1 + d + sqrt(d (2 + d)))
            (delta + (delta * (2.0 + delta)).sqrt()).ln_1p()
        }
    }
}

/// Orthonormal tangent frame at a unit vector `x`, deterministic in `x`.
pub(crate) fn sphere_frame(x: &[f64]) -> Vec<Vec<f64>> {
    let m = x.len();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| x[a].abs().partial_cmp(&x[b].abs()).unwrap().then(a.cmp(&b)));
    let mut frame: Vec<Vec<f64>> = Vec::with_capacity(m - 1);
    for &k in order.iter().take(m - 1) {
        let mut v = vec![0.0; m];
        v[k] = 1.0;
        // two passes of Gram-Schmidt for stability
        for _ in 0..2 {
            let a = dot(&v, x);
            for (vi, xi) in v.iter_mut().zip(x) {
                *vi -= a * xi;
            }
            for f in &frame {
                let a = dot(&v, f);
                for (vi, fi) in v.iter_mut().zip(f) {
                    *vi -= a * fi;
                }
            }
        }
        let r = norm(&v);
        v.iter_mut().for_each(|c| *c /= r);
        frame.push(v);
    }
    frame
}

/// Applies chart coordinates `a` at base point `x`.
pub(crate) fn chart_move(chart: Chart, x: &[f64], a: &[f64]) -> Vec<f64> {
    match chart {
        Chart::SphereEmbedded => {
            let frame = sphere_frame(x);
            let mut v = x.to_vec();
            for (ak, f) in a.iter().zip(&frame) {
                for (vi, fi) in v.iter_mut().zip(f) {
                    *vi += ak * fi;
                }
            }
            let r = norm(&v);
            v.iter_mut().for_each(|c| *c /= r);
            v
        }
        _ => x.iter().zip(a).map(|(xi, ai)| xi + ai).collect(),
    }
}

/// Riemannian exponential map on the unit sphere for a tangent vector `v` at `x` (embedded).
pub fn sphere_exp(x: &[f64], v: &[f64]) -> Vec<f64> {
    let r = norm(v);
    if r == 0.0 {
        return x.to_vec();
    }
    let (s, c) = r.sin_cos();
    let mut out: Vec<f64> = x.iter().zip(v).map(|(xi, vi)| c * xi + s * vi / r).collect();
    let nr = norm(&out);
    out.iter_mut().for_each(|c| *c /= nr);
    out
}

/// Frame coordinates of an embedded tangent vector at `x`.
pub fn sphere_tangent_coords(x: &[f64], v: &[f64]) -> Vec<f64> {
    sphere_frame(x).iter().map(|f| dot(f, v)).collect()
}

/// Embedded tangent vector at `x` from frame coordinates.
pub fn sphere_tangent_vector(x: &[f64], a: &[f64]) -> Vec<f64> {
    let frame = sphere_frame(x);
    let mut v = vec![0.0; x.len()];
    for (ak, f) in a.iter().zip(&frame) {
        for (vi, fi) in v.iter_mut().zip(f) {
            *vi += ak * fi;
        }
    }
    v
}
