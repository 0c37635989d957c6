use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::solver::{solve_semidiscrete, SemiDiscreteSolution, DEFAULT_MASS_TOL};
use crate::error::{MkError, Result};
use crate::measures::{exp_north, Chart, CostFunction, DiscreteMeasure, GridMeasure, Point};

/// Components lighter than this are reported but not counted as significant.
pub const SIGNIFICANT_COMPONENT_MASS: f64 = 1e-3;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Components {
    pub count: usize,
    pub significant: usize,
    /// Descending.
    pub masses: Vec<f64>,
}

/// Four-neighbour (two in 1-D) components of the cells labelled `target`.
pub fn cell_connectivity(sol: &SemiDiscreteSolution, source: &GridMeasure, target: usize) -> Components {
    let shape = &sol.shape;
    let n = sol.labels.len();
    let mut seen = vec![false; n];
    let mut masses = Vec::new();
    let total: f64 = (0..n).map(|k| source.cell_mass(k)).sum();
    for start in 0..n {
        if seen[start] || sol.labels[start] != Some(target) {
            continue;
        }
        let mut q = VecDeque::from([start]);
        seen[start] = true;
        let mut m = 0.0;
        while let Some(k) = q.pop_front() {
            m += source.cell_mass(k) / total;
            let idx = source.multi_index(k);
            for a in 0..shape.len() {
                for step in [-1i64, 1] {
                    let j = idx[a] as i64 + step;
                    if j < 0 || j >= shape[a] as i64 {
                        continue;
                    }
                    let mut nb = idx.clone();
                    nb[a] = j as usize;
                    let f = source.flat_index(&nb);
                    if !seen[f] && sol.labels[f] == Some(target) {
                        seen[f] = true;
                        q.push_back(f);
                    }
                }
            }
        }
        masses.push(m);
    }
    masses.sort_by(|a, b| b.total_cmp(a));
    Components {
        count: masses.len(),
        significant: masses.iter().filter(|m| **m >= SIGNIFICANT_COMPONENT_MASS).count(),
        masses,
    }
}

/// Discrete convexity test on a 2-D label raster: sampled chords between cells of
/// `target` must stay within one cell of the label.
pub fn cell_is_convex(sol: &SemiDiscreteSolution, target: usize, samples: usize) -> bool {
    let shape = &sol.shape;
    if shape.len() != 2 {
        return true;
    }
    let (nx, ny) = (shape[0], shape[1]);
    let members: Vec<usize> = (0..sol.labels.len()).filter(|&k| sol.labels[k] == Some(target)).collect();
    if members.len() < 2 {
        return true;
    }
    let near = |x: f64, y: f64| {
        let (i, j) = (x.round() as i64, y.round() as i64);
        for di in -1..=1 {
            for dj in -1..=1 {
                let (a, b) = (i + di, j + dj);
                if a >= 0 && b >= 0 && (a as usize) < nx && (b as usize) < ny && sol.labels[a as usize * ny + b as usize] == Some(target) {
                    return true;
                }
            }
        }
        false
    };
    let stride = (members.len() / samples.max(1)).max(1);
    let picks: Vec<usize> = members.iter().step_by(stride).copied().collect();
    for (a, &p) in picks.iter().enumerate() {
        for &q in picks.iter().skip(a + 1).step_by(7) {
            let (pi, pj) = ((p / ny) as f64, (p % ny) as f64);
            let (qi, qj) = ((q / ny) as f64, (q % ny) as f64);
            let steps = ((qi - pi).abs().max((qj - pj).abs()) as usize).max(1);
            for s in 0..=steps {
                let t = s as f64 / steps as f64;
                if !near(pi + t * (qi - pi), pj + t * (qj - pj)) {
                    return false;
                }
            }
        }
    }
    true
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Geometry {
    Euclidean,
    Sphere,
    Hyperbolic,
}

impl Geometry {
    pub fn parse(s: &str) -> Result<Geometry> {
        match s {
            "euclidean" => Ok(Geometry::Euclidean),
            "sphere" => Ok(Geometry::Sphere),
            "hyperbolic" => Ok(Geometry::Hyperbolic),
            _ => Err(MkError::Validation(format!("unknown geometry {s}"))),
        }
    }

    /// `(ball_radius, spacing)` used when none is given.
    pub fn defaults(self) -> (f64, f64) {
        match self {
            Geometry::Euclidean => (1.0, 0.5),
            Geometry::Sphere => (0.5, 0.3),
            Geometry::Hyperbolic => (3.0, 2.5),
        }
    }

    pub fn cost(self) -> CostFunction {
        match self {
            Geometry::Euclidean => CostFunction::quadratic(),
            Geometry::Sphere => CostFunction::sphere_sq(),
            Geometry::Hyperbolic => CostFunction::hyperbolic_sq(),
        }
    }
}

/// Ball radii and target spacings (intrinsic units) tried by [`loeper_scan`].
pub const HYPERBOLIC_SCAN_RADII: [f64; 3] = [1.0, 2.0, 3.0];
pub const HYPERBOLIC_SCAN_SPACINGS: [f64; 3] = [1.0, 2.0, 2.5];

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LoeperReport {
    pub geometry: Geometry,
    pub ball_radius: f64,
    pub spacing: f64,
    pub resolution: usize,
    pub targets: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
    pub masses: Vec<f64>,
    pub max_mass_error: f64,
    pub components: Vec<Components>,
    /// Only evaluated for the Euclidean geometry.
    pub convex: Option<Vec<bool>>,
    pub middle_components: usize,
    pub iterations: usize,
    pub ties: usize,
    #[serde(skip)]
    pub solution: Option<SemiDiscreteSolution>,
}

/// Source ball and three geodesically collinear targets, `y_1` at the ball centre.
pub fn loeper_instance(geometry: Geometry, ball_radius: f64, spacing: f64, resolution: usize) -> Result<(GridMeasure, DiscreteMeasure)> {
    if !(ball_radius > 0.0) || !(spacing > 0.0) || resolution < 4 {
        return Err(MkError::Validation("ball radius and spacing must be positive, resolution at least 4".into()));
    }
    let shape = [resolution, resolution];
    let (grid, atoms) = match geometry {
        Geometry::Euclidean => {
            let r = ball_radius;
            let g = GridMeasure::from_fn(&[(-r, r), (-r, r)], &shape, Chart::Euclidean, |x| {
                (x[0] * x[0] + x[1] * x[1] < r * r) as u8 as f64
            })?;
            let a = [-spacing, 0.0, spacing].iter().map(|&s| Point::euclidean(&[s, 0.0])).collect::<Vec<_>>();
            (g, a)
        }
        Geometry::Sphere => {
            if ball_radius >= std::f64::consts::FRAC_PI_2 || spacing >= std::f64::consts::FRAC_PI_2 {
                return Err(MkError::Validation("sphere demo needs radius and spacing below pi/2".into()));
            }
            let r = ball_radius;
            let g = GridMeasure::from_fn(&[(-r, r), (-r, r)], &shape, Chart::SphereEmbedded, |x| {
                (x[0] * x[0] + x[1] * x[1] < r * r) as u8 as f64
            })?;
            let a = [-spacing, 0.0, spacing]
                .iter()
                .map(|&s| Point::new(exp_north(&[s, 0.0]), Chart::SphereEmbedded))
                .collect::<Result<Vec<_>>>()?;
            (g, a)
        }
        Geometry::Hyperbolic => {
            // Euclidean radius of a hyperbolic ball about the origin
            let r = (0.5 * ball_radius).tanh();
            let t = (0.5 * spacing).tanh();
            let g = GridMeasure::from_fn(&[(-r, r), (-r, r)], &shape, Chart::PoincareDisk, |x| {
                (x[0] * x[0] + x[1] * x[1] < r * r) as u8 as f64
            })?;
            let a = [-t, 0.0, t]
                .iter()
                .map(|&s| Point::new(vec![s, 0.0], Chart::PoincareDisk))
                .collect::<Result<Vec<_>>>()?;
            (g, a)
        }
    };
    Ok((grid, DiscreteMeasure::uniform(atoms)?))
}

pub fn loeper_demo(geometry: Geometry, ball_radius: f64, spacing: f64, resolution: usize) -> Result<LoeperReport> {
    let (grid, targets) = loeper_instance(geometry, ball_radius, spacing, resolution)?;
    let sol = solve_semidiscrete(&grid, &targets, &geometry.cost(), DEFAULT_MASS_TOL)?;
    let components: Vec<Components> = (0..3).map(|i| cell_connectivity(&sol, &grid, i)).collect();
    let convex = (geometry == Geometry::Euclidean).then(|| (0..3).map(|i| cell_is_convex(&sol, i, 200)).collect());
    Ok(LoeperReport {
        geometry,
        ball_radius,
        spacing,
        resolution,
        targets: targets.atoms().iter().map(|p| p.coords().to_vec()).collect(),
        weights: sol.weights.clone(),
        masses: sol.masses.clone(),
        max_mass_error: sol.max_mass_error,
        middle_components: components[1].significant,
        components,
        convex,
        iterations: sol.iterations,
        ties: sol.ties,
        solution: Some(sol),
    })
}

/// First hyperbolic configuration (radius-major order) whose middle cell splits.
pub fn loeper_scan(resolution: usize) -> Result<Option<LoeperReport>> {
    for &r in &HYPERBOLIC_SCAN_RADII {
        for &s in &HYPERBOLIC_SCAN_SPACINGS {
            let rep = loeper_demo(Geometry::Hyperbolic, r, s, resolution)?;
            if rep.middle_components >= 2 {
                return Ok(Some(rep));
            }
        }
    }
    Ok(None)
}
