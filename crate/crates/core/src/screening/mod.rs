//! Principal-agent screening with a bilinear benefit.

mod band;
mod ipm;
mod mesh;
mod problem;
mod regions;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cconvex::{Lattice, PotentialField, Support};
use crate::error::{MkError, Result};
use crate::measures::Chart;

pub use ipm::MAX_IPM_ITERATIONS;
use ipm::{interior_point, Objective, Pieces};
use mesh::Mesh;
pub use problem::{Benefit, ProductCost, ScreeningProblem, NORM_SMOOTHING};
pub use regions::{check_exclusion, classify_regions, ExclusionReport, Region, Strata, EPS_U_FLOOR};

pub const MIN_RESOLUTION: usize = 16;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SolverOptions {
    /// Relative duality gap at termination.
    pub tol: f64,
    /// Enforce second differences along the two diagonals as well as the axes.
    pub diagonals: bool,
    pub max_iterations: usize,
    pub kkt_samples: usize,
    pub kkt_magnitude: f64,
    pub seed: u64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions { tol: 1e-9, diagonals: true, max_iterations: MAX_IPM_ITERATIONS, kkt_samples: 100, kkt_magnitude: 1e-4, seed: 7 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KktReport {
    pub samples: usize,
    pub magnitude: f64,
    /// Smallest `F(u + delta) - F(u)` seen.
    pub min_change: f64,
    pub violations: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ScreeningSolution {
    pub lattice: Lattice,
    pub u: Vec<f64>,
    pub reservation: Vec<f64>,
    pub mass: Vec<f64>,
    /// Centred `Du` at each node.
    pub products: Vec<Vec<f64>>,
    pub labels: Vec<Region>,
    pub strata: Strata,
    /// Final value of the minimized objective.
    pub energy: f64,
    pub losses: f64,
    pub energy_trace: Vec<f64>,
    pub iterations: usize,
    pub gap: Option<f64>,
    pub dual_residual: Option<f64>,
    /// Smallest enforced second difference.
    pub convexity_defect: f64,
    /// Smallest `u - u_null`.
    pub bound_defect: f64,
    pub active_bounds: usize,
    pub active_convexity: usize,
    pub directions: Vec<[i64; 2]>,
    pub eps_u: f64,
    pub eps_rank: f64,
    /// Bunched nodes with `|y1 - y2| <= diagonal_tol`.
    pub diagonal_fraction: Option<f64>,
    /// Bunched nodes with `min(|y1|, |y2|) <= diagonal_tol`.
    pub axis_fraction: Option<f64>,
    pub diagonal_tol: f64,
    pub boundary_nodes: usize,
    pub tol: f64,
    pub seed: u64,
    pub kkt: Option<KktReport>,
}

impl ScreeningSolution {
    pub fn potential(&self) -> PotentialField {
        PotentialField::on_grid(self.lattice.clone(), Chart::Euclidean, self.u.clone())
            .expect("solution values match the lattice")
    }

    pub fn max_energy_increase(&self) -> f64 {
        self.energy_trace.windows(2).map(|w| w[1] - w[0]).fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Slack below which a constraint counts as active.
const ACTIVE_TOL: f64 = 1e-9;

struct Run {
    trace: Vec<f64>,
    iterations: usize,
    gap: Option<f64>,
    dual_residual: Option<f64>,
}

fn assemble(mesh: &Mesh, problem: &ScreeningProblem, u: Vec<f64>, run: Run, options: &SolverOptions) -> Result<ScreeningSolution> {
    let n = mesh.len();
    let products: Vec<Vec<f64>> = (0..n).map(|k| mesh.lattice.gradient(&u, k)).collect();
    let losses = losses_on(mesh, problem, &u)?;
    let energy = match run.trace.last() {
        Some(e) => *e,
        None => mesh.energy(&problem.cost, &u),
    };
    let slack: Vec<f64> = mesh.rows.iter().map(|r| r.eval(&u) - r.rhs).collect();
    let mut sol = ScreeningSolution {
        lattice: mesh.lattice.clone(),
        reservation: mesh.lower.clone(),
        mass: mesh.mass.clone(),
        products,
        labels: Vec::new(),
        strata: Strata::default(),
        energy,
        losses,
        energy_trace: run.trace,
        iterations: run.iterations,
        gap: run.gap,
        dual_residual: run.dual_residual,
        convexity_defect: mesh.convexity_defect(&u),
        bound_defect: slack[..n].iter().copied().fold(f64::INFINITY, f64::min),
        active_bounds: slack[..n].iter().filter(|s| **s <= ACTIVE_TOL).count(),
        active_convexity: slack[n..].iter().filter(|s| **s <= ACTIVE_TOL).count(),
        directions: mesh.directions.clone(),
        eps_u: 0.0,
        eps_rank: 0.0,
        diagonal_fraction: None,
        axis_fraction: None,
        diagonal_tol: 0.0,
        boundary_nodes: 0,
        tol: options.tol,
        seed: options.seed,
        kkt: None,
        u,
    };
    classify_regions(&mut sol, None, None);
    Ok(sol)
}

impl ScreeningSolution {
    /// Wraps given node values (no solve) so they can be classified and scored.
    pub fn from_values(problem: &ScreeningProblem, values: Vec<f64>) -> Result<ScreeningSolution> {
        if values.len() != problem.agents.len() {
            return Err(MkError::Validation(format!("expected {} node values", problem.agents.len())));
        }
        let mesh = Mesh::new(problem, true)?;
        let run = Run { trace: Vec::new(), iterations: 0, gap: None, dual_residual: None };
        assemble(&mesh, problem, values, run, &SolverOptions { kkt_samples: 0, ..SolverOptions::default() })
    }
}

fn check_options(problem: &ScreeningProblem, options: &SolverOptions) -> Result<()> {
    if problem.benefit != Benefit::Bilinear {
        return Err(MkError::Validation("the screening solver needs the bilinear benefit".into()));
    }
    if problem.agents.shape().iter().any(|&s| s < MIN_RESOLUTION) {
        return Err(MkError::Validation(format!("resolution must be at least {MIN_RESOLUTION}")));
    }
    if !(options.tol > 0.0) || options.tol >= 1.0 {
        return Err(MkError::Validation("tol must lie in (0, 1)".into()));
    }
    Ok(())
}

/// Minimizes the discretized losses `int a(Du) - x.Du + u dmu` over `u >= u_null` convex.
pub fn solve_rochet_chone(problem: &ScreeningProblem, options: &SolverOptions) -> Result<ScreeningSolution> {
    check_options(problem, options)?;
    let mesh = Mesh::new(problem, options.diagonals)?;
    let obj = Objective { cost: problem.cost, lambda: 1.0, welfare: None };
    let r = interior_point(&mesh, &obj, options.tol, options.max_iterations)?;
    let run = Run { trace: r.trace, iterations: r.iterations, gap: Some(r.gap), dual_residual: Some(r.dual_residual) };
    let mut sol = assemble(&mesh, problem, r.u, run, options)?;
    if options.kkt_samples > 0 {
        sol.kkt = Some(kkt_check(&mesh, &obj, &sol.u, options));
    }
    Ok(sol)
}

/// Random feasible perturbations of sup-norm `magnitude`; none may lower the objective.
fn kkt_check(mesh: &Mesh, obj: &Objective, u: &[f64], options: &SolverOptions) -> KktReport {
    let n = mesh.len();
    let d = mesh.dim;
    let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
    let f0 = mesh.energy(&obj.cost, u) * obj.lambda;
    let mut min_change = f64::INFINITY;
    let mut violations = 0;
    let eps = options.kkt_magnitude;
    for s in 0..options.kkt_samples {
        // random nonnegative convex bump
        let c: f64 = rng.gen_range(0.0..1.0);
        let p: Vec<f64> = (0..d).map(|_| rng.gen_range(-0.5..1.5)).collect();
        let a1: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let a2: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let b2: f64 = rng.gen_range(-0.5..0.5);
        let mut q: Vec<f64> = (0..n)
            .map(|k| {
                let x = &mesh.x[k];
                let r2: f64 = (0..d).map(|i| (x[i] - p[i]).powi(2)).sum();
                let l1: f64 = (0..d).map(|i| a1[i] * x[i]).sum();
                let l2: f64 = (0..d).map(|i| a2[i] * x[i]).sum::<f64>() + b2;
                c * r2 + l1.max(l2)
            })
            .collect();
        let qmin = q.iter().copied().fold(f64::INFINITY, f64::min);
        q.iter_mut().for_each(|v| *v -= qmin);
        let delta: Vec<f64> = if s % 2 == 0 {
            let top = q.iter().copied().fold(0.0, f64::max).max(f64::MIN_POSITIVE);
            q.iter().map(|v| eps * v / top).collect()
        } else {
            // towards the feasible point u_null + q
            let diff: Vec<f64> = (0..n).map(|k| mesh.lower[k] + q[k] - u[k]).collect();
            let top = diff.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
            let theta = (eps / top).min(1.0);
            diff.iter().map(|v| theta * v).collect()
        };
        let w: Vec<f64> = u.iter().zip(&delta).map(|(a, b)| a + b).collect();
        let change = mesh.energy(&obj.cost, &w) * obj.lambda - f0;
        if change < -1e-12 * (1.0 + f0.abs()) {
            violations += 1;
        }
        min_change = min_change.min(change);
    }
    KktReport { samples: options.kkt_samples, magnitude: eps, min_change, violations }
}

fn losses_on(mesh: &Mesh, problem: &ScreeningProblem, u: &[f64]) -> Result<f64> {
    let d = mesh.dim;
    let mut s = 0.0;
    for e in &mesh.elements {
        let g = mesh.gradient(e, u);
        let x = &e.centre[..d];
        let y = problem.benefit.product(x, &g[..d])?;
        if !problem.in_products(&y) {
            return Err(MkError::Domain(format!("product {y:?} at {x:?} leaves the product box")));
        }
        s += e.weight * (problem.cost.value(&y) - problem.benefit.value(x, &y));
    }
    Ok(s + mesh.mass.iter().zip(u).map(|(m, v)| m * v).sum::<f64>())
}

/// `L(u) = int a(Y(x, Du)) - b(x, Y(x, Du)) + u dmu` by the solver's quadrature.
pub fn principal_losses(u: &PotentialField, problem: &ScreeningProblem) -> Result<f64> {
    let lat = match &u.support {
        Support::Grid(l, Chart::Euclidean) => l,
        _ => return Err(MkError::Validation("losses need a Euclidean grid field".into())),
    };
    if *lat != Lattice::of(&problem.agents) {
        return Err(MkError::Validation("field lattice differs from the agent grid".into()));
    }
    let mesh = Mesh::new(problem, false)?;
    losses_on(&mesh, problem, &u.values)
}

/// Concave nondecreasing welfare `w(s)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Welfare {
    /// `w(s) = s`
    Linear,
    /// `w(s) = min(s, cap)`
    Capped { cap: f64 },
    /// `w(s) = min_j (slopes_j s + intercepts_j)`
    Pieces { slopes: Vec<f64>, intercepts: Vec<f64> },
}

impl Welfare {
    fn pieces(&self) -> Pieces {
        match self {
            Welfare::Linear => Pieces { slopes: vec![1.0], intercepts: vec![0.0] },
            Welfare::Capped { cap } => Pieces { slopes: vec![1.0, 0.0], intercepts: vec![0.0, *cap] },
            Welfare::Pieces { slopes, intercepts } => Pieces { slopes: slopes.clone(), intercepts: intercepts.clone() },
        }
    }

    pub fn value(&self, s: f64) -> f64 {
        let p = self.pieces();
        p.slopes.iter().zip(&p.intercepts).map(|(a, b)| a * s + b).fold(f64::INFINITY, f64::min)
    }

    /// Sampled monotonicity and concavity on `[-10, 10]`.
    pub fn validate(&self) -> Result<()> {
        let p = self.pieces();
        if p.slopes.is_empty() || p.slopes.len() != p.intercepts.len() {
            return Err(MkError::Validation("welfare needs matching, non-empty slopes and intercepts".into()));
        }
        if p.slopes.iter().chain(&p.intercepts).any(|v| !v.is_finite()) {
            return Err(MkError::Validation("welfare coefficients must be finite".into()));
        }
        let h = 0.01;
        let ws: Vec<f64> = (0..=2000).map(|i| self.value(-10.0 + i as f64 * h)).collect();
        for w in ws.windows(3) {
            if w[1] < w[0] - 1e-12 || w[2] - 2.0 * w[1] + w[0] > 1e-12 {
                return Err(MkError::Validation("welfare must be concave and nondecreasing".into()));
            }
        }
        Ok(())
    }

    /// Slope of `w` as `s -> +inf`.
    pub fn asymptotic_slope(&self) -> f64 {
        self.pieces().slopes.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WelfareStatus {
    Optimal,
    /// Adding a constant to `u` raises the objective without bound.
    Unbounded,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct WelfareOutcome {
    pub status: WelfareStatus,
    pub lambda: f64,
    /// `-lambda L(u) + int w(u) dmu` at the returned point.
    pub objective: Option<f64>,
    /// `L(u)`; the provider breaks even when this is `<= 0`.
    pub losses: Option<f64>,
    pub welfare: Option<f64>,
    pub solution: Option<ScreeningSolution>,
}

/// `max -lambda L(u) + int w(x, u(x)) dmu` over the same cone as [`solve_rochet_chone`].
pub fn solve_welfare(problem: &ScreeningProblem, w: &Welfare, lambda: f64, options: &SolverOptions) -> Result<WelfareOutcome> {
    check_options(problem, options)?;
    w.validate()?;
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(MkError::Validation("lambda must be finite and nonnegative".into()));
    }
    if w.asymptotic_slope() > lambda {
        return Ok(WelfareOutcome { status: WelfareStatus::Unbounded, lambda, objective: None, losses: None, welfare: None, solution: None });
    }
    let mesh = Mesh::new(problem, options.diagonals)?;
    let pieces = w.pieces();
    let obj = Objective { cost: problem.cost, lambda, welfare: Some(&pieces) };
    let r = interior_point(&mesh, &obj, options.tol, options.max_iterations)?;
    let run = Run { trace: r.trace, iterations: r.iterations, gap: Some(r.gap), dual_residual: Some(r.dual_residual) };
    let mut sol = assemble(&mesh, problem, r.u, run, options)?;
    let welfare: f64 = sol.u.iter().zip(&sol.mass).map(|(v, m)| m * w.value(*v)).sum();
    // the trace tracks the hypograph variables; report the objective at u itself
    sol.energy = lambda * mesh.energy(&problem.cost, &sol.u) - welfare;
    Ok(WelfareOutcome {
        status: WelfareStatus::Optimal,
        lambda,
        objective: Some(-lambda * sol.losses + welfare),
        losses: Some(sol.losses),
        welfare: Some(welfare),
        solution: Some(sol),
    })
}

/// `-lambda L(u) + int w(u) dmu` for an arbitrary grid field.
pub fn welfare_objective(u: &PotentialField, problem: &ScreeningProblem, w: &Welfare, lambda: f64) -> Result<f64> {
    let l = principal_losses(u, problem)?;
    let mass: Vec<f64> = (0..problem.agents.len()).map(|k| problem.agents.cell_mass(k)).collect();
    Ok(-lambda * l + u.values.iter().zip(&mass).map(|(v, m)| m * w.value(*v)).sum::<f64>())
}
