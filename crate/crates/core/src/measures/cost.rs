use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::point::{chart_move, norm2, sphere_frame, Chart, Point};
use crate::error::{MkError, Result};
use crate::jet::{Jet, Scalar};

pub const DEFAULT_CUT_MARGIN: f64 = std::f64::consts::PI / 20.0;
pub const DEFAULT_LOG_EXCLUSION: f64 = 1e-6;
pub const DEFAULT_FD_STEP: f64 = 1e-3;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum CostKind {
    /// `-x.y`
    Bilinear,
    /// `|x-y|^2 / 2`
    Quadratic,
    /// `-log |x-y|`
    LogDistance,
    /// `d(x,y)^p` in the chart metric
    PowerDistance { p: f64 },
    /// `d^2 / 2` on the unit sphere
    SphereSq,
    /// `d^2 / 2` in the Poincare ball
    HyperbolicSq,
}

impl CostKind {
    pub fn parse(s: &str) -> Result<CostKind> {
        Ok(match s {
            "bilinear" => CostKind::Bilinear,
            "quadratic" => CostKind::Quadratic,
            "log_distance" => CostKind::LogDistance,
            "sphere_sq" => CostKind::SphereSq,
            "hyperbolic_sq" => CostKind::HyperbolicSq,
            _ => {
                if let Some(p) = s.strip_prefix("power:").or_else(|| s.strip_prefix("power_distance:")) {
                    let p: f64 = p
                        .parse()
                        .map_err(|_| MkError::Validation(format!("bad exponent in `{s}`")))?;
                    if !(p > 0.0) {
                        return Err(MkError::Validation("power exponent must be positive".into()));
                    }
                    CostKind::PowerDistance { p }
                } else {
                    return Err(MkError::Validation(format!("unknown cost `{s}`")));
                }
            }
        })
    }

    pub fn name(&self) -> String {
        match self {
            CostKind::Bilinear => "bilinear".into(),
            CostKind::Quadratic => "quadratic".into(),
            CostKind::LogDistance => "log_distance".into(),
            CostKind::PowerDistance { p } => format!("power:{p}"),
            CostKind::SphereSq => "sphere_sq".into(),
            CostKind::HyperbolicSq => "hyperbolic_sq".into(),
        }
    }

    pub fn default_chart(&self) -> Chart {
        match self {
            CostKind::SphereSq => Chart::SphereEmbedded,
            CostKind::HyperbolicSq => Chart::PoincareDisk,
            _ => Chart::Euclidean,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode")]
pub enum DerivativeMode {
    Analytic,
    /// Centred differences; `step` is relative to the local coordinate scale.
    FiniteDifference { step: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum DerivOrder {
    /// `c_i`
    Dx,
    /// `c_{,j}`
    Dy,
    /// `c_{i,j}`
    Dxy,
    /// `c_{ij}`
    Dxx,
    /// `c_{,kl}`
    Dyy,
    /// `c_{ij,r}`
    Dxxy,
    /// `c_{m,kl}`
    Dxyy,
    /// `c_{ij,kl}`
    Dxxyy,
}

/// Dense tensor in chart coordinates, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor {
    pub dims: Vec<usize>,
    pub data: Vec<f64>,
}

impl Tensor {
    pub fn get(&self, idx: &[usize]) -> f64 {
        let k = idx.iter().zip(&self.dims).fold(0, |acc, (i, d)| acc * d + i);
        self.data[k]
    }

    pub fn matrix(&self) -> DMatrix<f64> {
        assert_eq!(self.dims.len(), 2);
        DMatrix::from_row_slice(self.dims[0], self.dims[1], &self.data)
    }
}

/// Partials `d^a/ds^a d^b/dt^b c(x(s), y(t))` at `s = t = 0`, indexed `[a][b]`.
pub type Partials = [[f64; 3]; 3];

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CostFunction {
    pub kind: CostKind,
    pub mode: DerivativeMode,
    pub chart: Chart,
    pub cut_margin: f64,
    pub log_exclusion: f64,
}

impl CostFunction {
    pub fn new(kind: CostKind) -> CostFunction {
        CostFunction {
            kind,
            mode: DerivativeMode::Analytic,
            chart: kind.default_chart(),
            cut_margin: DEFAULT_CUT_MARGIN,
            log_exclusion: DEFAULT_LOG_EXCLUSION,
        }
    }

    pub fn bilinear() -> Self {
        Self::new(CostKind::Bilinear)
    }
    pub fn quadratic() -> Self {
        Self::new(CostKind::Quadratic)
    }
    pub fn log_distance() -> Self {
        Self::new(CostKind::LogDistance)
    }
    pub fn power(p: f64) -> Self {
        Self::new(CostKind::PowerDistance { p })
    }
    pub fn sphere_sq() -> Self {
        Self::new(CostKind::SphereSq)
    }
    pub fn hyperbolic_sq() -> Self {
        Self::new(CostKind::HyperbolicSq)
    }

    /// Power distance measured in another chart's metric.
    pub fn on_chart(mut self, chart: Chart) -> Result<Self> {
        match self.kind {
            CostKind::PowerDistance { .. } => {
                self.chart = chart;
                Ok(self)
            }
            _ if chart == self.chart => Ok(self),
            _ => Err(MkError::Validation(format!(
                "{} lives on the {} chart",
                self.kind.name(),
                self.chart.name()
            ))),
        }
    }

    pub fn finite_difference(mut self, step: f64) -> Self {
        self.mode = DerivativeMode::FiniteDifference { step };
        self
    }

    pub fn analytic(mut self) -> Self {
        self.mode = DerivativeMode::Analytic;
        self
    }

    pub fn is_symmetric(&self) -> bool {
        true
    }

    /// Validated evaluation.
    pub fn value(&self, x: &Point, y: &Point) -> Result<f64> {
        self.check_points(x, y)?;
        Ok(self.value_raw(x.coords(), y.coords()))
    }

    /// Unchecked evaluation on raw coordinates.
    #[inline]
    pub fn value_raw(&self, x: &[f64], y: &[f64]) -> f64 {
        self.eval::<f64>(x, y)
    }

    pub fn check_points(&self, x: &Point, y: &Point) -> Result<()> {
        if x.chart() != self.chart || y.chart() != self.chart {
            return Err(MkError::Domain(format!(
                "{} expects {} points",
                self.kind.name(),
                self.chart.name()
            )));
        }
        self.check_pair(x.coords(), y.coords())
    }

    /// Admissibility of a coordinate pair: chart membership, cut margin, log exclusion.
    pub fn check_pair(&self, x: &[f64], y: &[f64]) -> Result<()> {
        if x.len() != y.len() {
            return Err(MkError::Domain("dimension mismatch".into()));
        }
        match self.chart {
            Chart::PoincareDisk => {
                if norm2(x) >= 1.0 || norm2(y) >= 1.0 {
                    return Err(MkError::Domain("point outside the Poincare disk".into()));
                }
            }
            Chart::SphereEmbedded => {
                let d = super::point::raw_distance(Chart::SphereEmbedded, x, y);
                if d >= std::f64::consts::PI - self.cut_margin {
                    return Err(MkError::Domain(format!(
                        "pair at distance {d} is inside the cut-locus margin"
                    )));
                }
            }
            Chart::Euclidean => {}
        }
        if self.kind == CostKind::LogDistance {
            let d2: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
            if d2.sqrt() <= self.log_exclusion {
                return Err(MkError::Domain("log cost evaluated at coincident points".into()));
            }
        }
        Ok(())
    }

    fn eval<S: Scalar>(&self, x: &[S], y: &[S]) -> S {
        match self.kind {
            CostKind::Bilinear => {
                let mut acc = S::cst(0.0);
                for (a, b) in x.iter().zip(y) {
                    acc = acc - *a * *b;
                }
                acc
            }
            CostKind::Quadratic => euclid_sq(x, y).scale(0.5),
            CostKind::LogDistance => euclid_sq(x, y).ln().scale(-0.5),
            CostKind::PowerDistance { p } => sq_dist(self.chart, x, y).powf(0.5 * p),
            CostKind::SphereSq | CostKind::HyperbolicSq => sq_dist(self.chart, x, y).scale(0.5),
        }
    }

    fn lift(&self, base: &[f64], dir: &[f64], first: bool) -> Vec<Jet> {
        let mk = |v: f64, d: f64| if first { Jet::linear(v, d, 0.0) } else { Jet::linear(v, 0.0, d) };
        match self.chart {
            Chart::SphereEmbedded => {
                let frame = sphere_frame(base);
                let mut emb = vec![0.0; base.len()];
                for (a, f) in dir.iter().zip(&frame) {
                    for (e, fi) in emb.iter_mut().zip(f) {
                        *e += a * fi;
                    }
                }
                let v: Vec<Jet> = base.iter().zip(&emb).map(|(b, e)| mk(*b, *e)).collect();
                let mut r2 = Jet::cst(0.0);
                for c in &v {
                    r2 = r2 + *c * *c;
                }
                let r = r2.sqrt();
                v.into_iter().map(|c| c / r).collect()
            }
            _ => base.iter().zip(dir).map(|(b, d)| mk(*b, *d)).collect(),
        }
    }

    fn local_scale(&self, x: &[f64]) -> f64 {
        match self.chart {
            Chart::PoincareDisk => (1.0 - norm2(x)).max(1e-3),
            _ => 1.0,
        }
    }

    /// Directional partials along `x + s p`, `y + t q` in chart coordinates.
    ///
    /// `max_order` bounds `a + b`; finite-difference mode skips the expensive
    /// third and fourth order stencils when it is at most 2.
    pub fn directional(
        &self,
        x: &[f64],
        y: &[f64],
        p: &[f64],
        q: &[f64],
        max_order: usize,
    ) -> Result<Partials> {
        if let CostKind::PowerDistance { p: e } = self.kind {
            if e < 1.0 {
                return Err(MkError::Domain(
                    "power distance with exponent below 1 has no derivatives".into(),
                ));
            }
        }
        self.check_pair(x, y)?;
        match self.mode {
            DerivativeMode::Analytic => {
                let xs = self.lift(x, p, true);
                let yt = self.lift(y, q, false);
                let j = self.eval::<Jet>(&xs, &yt);
                let mut out = [[0.0; 3]; 3];
                for (a, row) in out.iter_mut().enumerate() {
                    for (b, v) in row.iter_mut().enumerate() {
                        *v = j.partial(a, b);
                    }
                }
                Ok(out)
            }
            DerivativeMode::FiniteDifference { step } => {
                let hx = step * self.local_scale(x);
                let hy = step * self.local_scale(y);
                let mut out = self.fd_low(x, y, p, q, hx, hy)?;
                if max_order > 2 {
                    let big = |h: f64| 10.0 * h;
                    let coarse = self.fd_high(x, y, p, q, big(hx), big(hy))?;
                    let fine = self.fd_high(x, y, p, q, big(hx) / 2.0, big(hy) / 2.0)?;
                    for &(a, b) in &[(2usize, 1usize), (1, 2), (2, 2)] {
                        out[a][b] = (16.0 * fine[a][b] - coarse[a][b]) / 15.0;
                    }
                }
                Ok(out)
            }
        }
    }

    fn fd_point(&self, x: &[f64], y: &[f64], p: &[f64], q: &[f64], s: f64, t: f64) -> Result<f64> {
        let sp: Vec<f64> = p.iter().map(|v| v * s).collect();
        let tq: Vec<f64> = q.iter().map(|v| v * t).collect();
        let xs = chart_move(self.chart, x, &sp);
        let yt = chart_move(self.chart, y, &tq);
        self.check_pair(&xs, &yt)
            .map_err(|e| MkError::Stencil(format!("stencil point rejected: {e}")))?;
        Ok(self.value_raw(&xs, &yt))
    }

    fn fd_low(&self, x: &[f64], y: &[f64], p: &[f64], q: &[f64], hx: f64, hy: f64) -> Result<Partials> {
        let mut f = [[0.0; 3]; 3];
        for (i, si) in [-1.0, 0.0, 1.0].iter().enumerate() {
            for (j, tj) in [-1.0, 0.0, 1.0].iter().enumerate() {
                f[i][j] = self.fd_point(x, y, p, q, si * hx, tj * hy)?;
            }
        }
        let mut out = [[0.0; 3]; 3];
        out[0][0] = f[1][1];
        out[1][0] = (f[2][1] - f[0][1]) / (2.0 * hx);
        out[0][1] = (f[1][2] - f[1][0]) / (2.0 * hy);
        out[2][0] = (f[2][1] - 2.0 * f[1][1] + f[0][1]) / (hx * hx);
        out[0][2] = (f[1][2] - 2.0 * f[1][1] + f[1][0]) / (hy * hy);
        out[1][1] = (f[2][2] - f[2][0] - f[0][2] + f[0][0]) / (4.0 * hx * hy);
        Ok(out)
    }

    // 5-point per-axis product stencil, fourth-order accurate.
    fn fd_high(&self, x: &[f64], y: &[f64], p: &[f64], q: &[f64], hx: f64, hy: f64) -> Result<Partials> {
        const D1: [f64; 5] = [1.0 / 12.0, -8.0 / 12.0, 0.0, 8.0 / 12.0, -1.0 / 12.0];
        const D2: [f64; 5] = [-1.0 / 12.0, 16.0 / 12.0, -30.0 / 12.0, 16.0 / 12.0, -1.0 / 12.0];
        let mut f = [[0.0; 5]; 5];
        for i in 0..5 {
            for j in 0..5 {
                let s = (i as f64 - 2.0) * hx;
                let t = (j as f64 - 2.0) * hy;
                f[i][j] = self.fd_point(x, y, p, q, s, t)?;
            }
        }
        let apply = |wa: &[f64; 5], wb: &[f64; 5]| {
            let mut acc = 0.0;
            for i in 0..5 {
                for j in 0..5 {
                    acc += wa[i] * wb[j] * f[i][j];
                }
            }
            acc
        };
        let mut out = [[0.0; 3]; 3];
        out[2][1] = apply(&D2, &D1) / (hx * hx * hy);
        out[1][2] = apply(&D1, &D2) / (hx * hy * hy);
        out[2][2] = apply(&D2, &D2) / (hx * hx * hy * hy);
        Ok(out)
    }

    /// Full derivative tensor in chart coordinates.
    pub fn derivative(&self, x: &Point, y: &Point, order: DerivOrder) -> Result<Tensor> {
        self.check_points(x, y)?;
        self.derivative_raw(x.coords(), y.coords(), order)
    }

    pub fn derivative_raw(&self, x: &[f64], y: &[f64], order: DerivOrder) -> Result<Tensor> {
        let n = self.chart.intrinsic_dim(x.len());
        let e = |i: usize| {
            let mut v = vec![0.0; n];
            v[i] = 1.0;
            v
        };
        let zero = vec![0.0; n];
        let pairs = polar_dirs(n);
        match order {
            DerivOrder::Dx => {
                let data = (0..n)
                    .map(|i| Ok(self.directional(x, y, &e(i), &zero, 1)?[1][0]))
                    .collect::<Result<Vec<_>>>()?;
                Ok(Tensor { dims: vec![n], data })
            }
            DerivOrder::Dy => {
                let data = (0..n)
                    .map(|j| Ok(self.directional(x, y, &zero, &e(j), 1)?[0][1]))
                    .collect::<Result<Vec<_>>>()?;
                Ok(Tensor { dims: vec![n], data })
            }
            DerivOrder::Dxy => {
                let mut data = vec![0.0; n * n];
                for i in 0..n {
                    for j in 0..n {
                        data[i * n + j] = self.directional(x, y, &e(i), &e(j), 2)?[1][1];
                    }
                }
                Ok(Tensor { dims: vec![n, n], data })
            }
            DerivOrder::Dxx | DerivOrder::Dyy => {
                let xside = order == DerivOrder::Dxx;
                let vals = pairs
                    .iter()
                    .map(|(_, _, d)| {
                        let r = if xside {
                            self.directional(x, y, d, &zero, 2)?[2][0]
                        } else {
                            self.directional(x, y, &zero, d, 2)?[0][2]
                        };
                        Ok(r)
                    })
                    .collect::<Result<Vec<_>>>()?;
                Ok(Tensor { dims: vec![n, n], data: depolarize(n, &pairs, &vals) })
            }
            DerivOrder::Dxxy => {
                let mut data = vec![0.0; n * n * n];
                for r in 0..n {
                    let vals = pairs
                        .iter()
                        .map(|(_, _, d)| Ok(self.directional(x, y, d, &e(r), 3)?[2][1]))
                        .collect::<Result<Vec<_>>>()?;
                    let m = depolarize(n, &pairs, &vals);
                    for i in 0..n {
                        for j in 0..n {
                            data[(i * n + j) * n + r] = m[i * n + j];
                        }
                    }
                }
                Ok(Tensor { dims: vec![n, n, n], data })
            }
            DerivOrder::Dxyy => {
                let mut data = vec![0.0; n * n * n];
                for m_ in 0..n {
                    let vals = pairs
                        .iter()
                        .map(|(_, _, d)| Ok(self.directional(x, y, &e(m_), d, 3)?[1][2]))
                        .collect::<Result<Vec<_>>>()?;
                    let m = depolarize(n, &pairs, &vals);
                    for k in 0..n {
                        for l in 0..n {
                            data[(m_ * n + k) * n + l] = m[k * n + l];
                        }
                    }
                }
                Ok(Tensor { dims: vec![n, n, n], data })
            }
            DerivOrder::Dxxyy => {
                // T(p,p,q,q) on all polarization pairs, then depolarize twice
                let np = pairs.len();
                let mut raw = vec![0.0; np * np];
                for (a, (_, _, dp)) in pairs.iter().enumerate() {
                    for (b, (_, _, dq)) in pairs.iter().enumerate() {
                        raw[a * np + b] = self.directional(x, y, dp, dq, 4)?[2][2];
                    }
                }
                let mut per_p = vec![vec![0.0; n * n]; np];
                for (a, row) in per_p.iter_mut().enumerate() {
                    *row = depolarize(n, &pairs, &raw[a * np..(a + 1) * np]);
                }
                let mut data = vec![0.0; n * n * n * n];
                for k in 0..n {
                    for l in 0..n {
                        let vals: Vec<f64> = per_p.iter().map(|row| row[k * n + l]).collect();
                        let m = depolarize(n, &pairs, &vals);
                        for i in 0..n {
                            for j in 0..n {
                                data[((i * n + j) * n + k) * n + l] = m[i * n + j];
                            }
                        }
                    }
                }
                Ok(Tensor { dims: vec![n, n, n, n], data })
            }
        }
    }

    /// `D_x c` as a vector.
    pub fn dx(&self, x: &[f64], y: &[f64]) -> Result<Vec<f64>> {
        Ok(self.derivative_raw(x, y, DerivOrder::Dx)?.data)
    }

    /// Mixed Hessian `c_{i,j}`.
    pub fn dxy(&self, x: &[f64], y: &[f64]) -> Result<DMatrix<f64>> {
        Ok(self.derivative_raw(x, y, DerivOrder::Dxy)?.matrix())
    }

    pub fn dxx(&self, x: &[f64], y: &[f64]) -> Result<DMatrix<f64>> {
        Ok(self.derivative_raw(x, y, DerivOrder::Dxx)?.matrix())
    }
}

fn euclid_sq<S: Scalar>(x: &[S], y: &[S]) -> S {
    let mut acc = S::cst(0.0);
    for (a, b) in x.iter().zip(y) {
        let d = *a - *b;
        acc = acc + d * d;
    }
    acc
}

fn sq_dist<S: Scalar>(chart: Chart, x: &[S], y: &[S]) -> S {
    match chart {
        Chart::Euclidean => euclid_sq(x, y),
        Chart::SphereEmbedded => {
            let mut z = S::cst(0.0);
            for (a, b) in x.iter().zip(y) {
                z = z + *a * *b;
            }
            z.acos_sq()
        }
        Chart::PoincareDisk => {
            let one = S::cst(1.0);
            let nx = euclid_sq(x, &vec![S::cst(0.0); x.len()]);
            let ny = euclid_sq(y, &vec![S::cst(0.0); y.len()]);
            let delta = euclid_sq(x, y).scale(2.0) / ((one - nx) * (one - ny));
            delta.acosh1p_sq()
        }
    }
}

/// Directions `e_i` and `e_i + e_j` used to recover symmetric bilinear forms.
fn polar_dirs(n: usize) -> Vec<(usize, usize, Vec<f64>)> {
    let mut out = Vec::new();
    for i in 0..n {
        for j in i..n {
            let mut d = vec![0.0; n];
            d[i] += 1.0;
            if j != i {
                d[j] += 1.0;
            }
            out.push((i, j, d));
        }
    }
    out
}

fn depolarize(n: usize, pairs: &[(usize, usize, Vec<f64>)], vals: &[f64]) -> Vec<f64> {
    let mut diag = vec![0.0; n];
    for ((i, j, _), v) in pairs.iter().zip(vals) {
        if i == j {
            diag[*i] = *v;
        }
    }
    let mut m = vec![0.0; n * n];
    for ((i, j, _), v) in pairs.iter().zip(vals) {
        if i == j {
            m[i * n + i] = *v;
        } else {
            let b = 0.5 * (v - diag[*i] - diag[*j]);
            m[i * n + j] = b;
            m[j * n + i] = b;
        }
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bilinear_orthogonal_vectors_cost_zero() {
        let c = CostFunction::bilinear();
        let v = c.value(&Point::euclidean(&[1.0, 0.0]), &Point::euclidean(&[0.0, 1.0])).unwrap();
        assert_eq!(v, 0.0);
    }

    #[test]
    fn quadratic_identity_is_zero() {
        let c = CostFunction::quadratic();
        let x = Point::euclidean(&[0.3, -1.2]);
        assert_eq!(c.value(&x, &x).unwrap(), 0.0);
    }

    #[test]
    fn sphere_antipodal_margin_is_domain_error() {
        let c = CostFunction::sphere_sq();
        let x = Point::new(vec![0.0, 0.0, 1.0], Chart::SphereEmbedded).unwrap();
        let y = Point::on_sphere(&[0.01, 0.0, -1.0]).unwrap();
        assert!(matches!(c.value(&x, &y), Err(MkError::Domain(_))));
    }

    #[test]
    fn bilinear_mixed_hessian_is_minus_identity() {
        let c = CostFunction::bilinear();
        let m = c.dxy(&[0.4, 2.0], &[-1.0, 0.5]).unwrap();
        assert_eq!(m, -DMatrix::<f64>::identity(2, 2));
    }

    #[test]
    fn quadratic_gradient_is_difference() {
        let c = CostFunction::quadratic();
        let g = c.dx(&[0.4, 2.0], &[-1.0, 0.5]).unwrap();
        assert!((g[0] - 1.4).abs() < 1e-15 && (g[1] - 1.5).abs() < 1e-15);
    }

    #[test]
    fn sphere_sq_hessian_matches_fd() {
        let c = CostFunction::sphere_sq();
        let x = Point::on_sphere(&[0.2, 0.1, 1.0]).unwrap();
        let y = Point::on_sphere(&[-0.5, 0.3, 0.8]).unwrap();
        let a = c.derivative(&x, &y, DerivOrder::Dxy).unwrap();
        let f = c.finite_difference(DEFAULT_FD_STEP).derivative(&x, &y, DerivOrder::Dxy).unwrap();
        for (u, v) in a.data.iter().zip(&f.data) {
            assert!((u - v).abs() <= 1e-5 * (1.0 + u.abs()), "{u} vs {v}");
        }
    }

    #[test]
    fn hyperbolic_fourth_order_matches_fd() {
        let c = CostFunction::hyperbolic_sq();
        let x = [0.1, -0.2];
        let y = [0.3, 0.25];
        let a = c.derivative_raw(&x, &y, DerivOrder::Dxxyy).unwrap();
        let f = c.finite_difference(DEFAULT_FD_STEP).derivative_raw(&x, &y, DerivOrder::Dxxyy).unwrap();
        for (u, v) in a.data.iter().zip(&f.data) {
            assert!((u - v).abs() <= 1e-5 * (1.0 + u.abs()), "{u} vs {v}");
        }
    }

    #[test]
    fn power_below_one_rejects_derivatives() {
        let c = CostFunction::power(0.5);
        assert!(c.dx(&[0.0], &[1.0]).is_err());
        assert!((c.value_raw(&[0.0], &[4.0]) - 2.0).abs() < 1e-15);
    }

    #[test]
    fn fd_stencil_leaving_disk_is_stencil_error() {
        let c = CostFunction::hyperbolic_sq().finite_difference(0.1);
        let r = c.derivative_raw(&[0.99999, 0.0], &[0.0, 0.0], DerivOrder::Dxxyy);
        assert!(matches!(r, Err(MkError::Stencil(_))), "{r:?}");
    }
}
