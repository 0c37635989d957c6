//! Exact discrete Kantorovich problem, Wasserstein distances and structure checks.

mod cycles;
mod simplex;

pub use cycles::{
    check_cyclical_monotonicity, cyclical_monotonicity_of, minty_spacelike_check, minty_spacelike_of,
    CycleOptions, CycleReport, KCycleReport, SpacelikeReport,
};
pub use simplex::{network_simplex, RawSolution};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{MkError, Result};
use crate::measures::{Chart, CostFunction, CostKind, DiscreteMeasure, DiscreteMeasureJson, Point};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlanEntry {
    pub i: usize,
    pub j: usize,
    pub mass: f64,
}

#[derive(Clone, Debug)]
pub struct TransportSolution {
    pub plan: Vec<PlanEntry>,
    pub dual_u: Vec<f64>,
    pub dual_v: Vec<f64>,
    pub primal_cost: f64,
    pub dual_value: f64,
    pub gap: f64,
    /// Source atoms with zero weight, removed before solving.
    pub dropped_sources: Vec<usize>,
    pub dropped_targets: Vec<usize>,
    pub pivots: usize,
    pub mu_plus: DiscreteMeasure,
    pub mu_minus: DiscreteMeasure,
    pub cost: CostFunction,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransportSolutionJson {
    pub cost: String,
    pub plan: Vec<PlanEntry>,
    pub dual_u: Vec<f64>,
    pub dual_v: Vec<f64>,
    pub primal_cost: f64,
    pub dual_value: f64,
    pub gap: f64,
    pub dropped_sources: Vec<usize>,
    pub dropped_targets: Vec<usize>,
    pub mu_plus: DiscreteMeasureJson,
    pub mu_minus: DiscreteMeasureJson,
}

impl TransportSolution {
    pub fn to_json(&self) -> TransportSolutionJson {
        TransportSolutionJson {
            cost: self.cost.kind.name(),
            plan: self.plan.clone(),
            dual_u: self.dual_u.clone(),
            dual_v: self.dual_v.clone(),
            primal_cost: self.primal_cost,
            dual_value: self.dual_value,
            gap: self.gap,
            dropped_sources: self.dropped_sources.clone(),
            dropped_targets: self.dropped_targets.clone(),
            mu_plus: self.mu_plus.to_json(),
            mu_minus: self.mu_minus.to_json(),
        }
    }

    pub fn from_json(j: TransportSolutionJson) -> Result<TransportSolution> {
        let mu_plus = DiscreteMeasure::from_json(j.mu_plus)?;
        let mu_minus = DiscreteMeasure::from_json(j.mu_minus)?;
        let cost = CostFunction::new(CostKind::parse(&j.cost)?).on_chart(mu_plus.chart())?;
        Ok(TransportSolution {
            plan: j.plan,
            dual_u: j.dual_u,
            dual_v: j.dual_v,
            primal_cost: j.primal_cost,
            dual_value: j.dual_value,
            gap: j.gap,
            dropped_sources: j.dropped_sources,
            dropped_targets: j.dropped_targets,
            pivots: 0,
            mu_plus,
            mu_minus,
            cost,
        })
    }

    /// Plan as `i,j,mass` lines.
    pub fn plan_csv(&self) -> String {
        let mut s = String::from("i,j,mass\n");
        for e in &self.plan {
            s.push_str(&format!("{},{},{:e}\n", e.i, e.j, e.mass));
        }
        s
    }

    /// Parses `i,j,mass` lines (header optional).
    pub fn parse_plan_csv(text: &str) -> Result<Vec<PlanEntry>> {
        let mut out = Vec::new();
        for (ln, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with("i,") {
                continue;
            }
            let parts: Vec<&str> = line.split(',').collect();
            let bad = || MkError::Validation(format!("bad plan line {}", ln + 1));
            if parts.len() != 3 {
                return Err(bad());
            }
            out.push(PlanEntry {
                i: parts[0].trim().parse().map_err(|_| bad())?,
                j: parts[1].trim().parse().map_err(|_| bad())?,
                mass: parts[2].trim().parse().map_err(|_| bad())?,
            });
        }
        Ok(out)
    }

    pub fn row_sums(&self) -> Vec<f64> {
        let mut r = vec![0.0; self.mu_plus.len()];
        for e in &self.plan {
            r[e.i] += e.mass;
        }
        r
    }

    pub fn col_sums(&self) -> Vec<f64> {
        let mut r = vec![0.0; self.mu_minus.len()];
        for e in &self.plan {
            r[e.j] += e.mass;
        }
        r
    }

    /// Largest `c(x,y) + u(x) + v(y)` over support pairs.
    pub fn slackness_defect(&self) -> f64 {
        self.plan
            .iter()
            .map(|e| {
                let c = self
                    .cost
                    .value_raw(self.mu_plus.atoms()[e.i].coords(), self.mu_minus.atoms()[e.j].coords());
                (c + self.dual_u[e.i] + self.dual_v[e.j]).abs()
            })
            .fold(0.0, f64::max)
    }

    /// Largest violation of `-u(x) - v(y) <= c(x,y)` over all pairs.
    pub fn dual_infeasibility(&self) -> f64 {
        let xs = self.mu_plus.atoms();
        let ys = self.mu_minus.atoms();
        (0..xs.len())
            .map(|i| {
                (0..ys.len())
                    .map(|j| {
                        -self.dual_u[i]
                            - self.dual_v[j]
                            - self.cost.value_raw(xs[i].coords(), ys[j].coords())
                    })
                    .fold(f64::NEG_INFINITY, f64::max)
            })
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Row-major cost matrix, validating every pair.
pub fn cost_matrix(xs: &[Point], ys: &[Point], c: &CostFunction) -> Result<Vec<f64>> {
    let rows: Vec<Result<Vec<f64>>> = xs
        .par_iter()
        .map(|x| {
            ys.iter()
                .map(|y| {
                    c.check_points(x, y)?;
                    Ok(c.value_raw(x.coords(), y.coords()))
                })
                .collect()
        })
        .collect();
    let mut out = Vec::with_capacity(xs.len() * ys.len());
    for r in rows {
        out.extend(r?);
    }
    Ok(out)
}

/// Optimal plan with dual certificate.
pub fn solve_plan(
    mu_plus: &DiscreteMeasure,
    mu_minus: &DiscreteMeasure,
    c: &CostFunction,
) -> Result<TransportSolution> {
    if mu_plus.chart() != mu_minus.chart() || mu_plus.dim() != mu_minus.dim() {
        return Err(MkError::Validation("measures live in different charts".into()));
    }
    if c.chart != mu_plus.chart() {
        return Err(MkError::Validation(format!(
            "cost {} expects the {} chart",
            c.kind.name(),
            c.chart.name()
        )));
    }
    let keep_x: Vec<usize> = (0..mu_plus.len()).filter(|&i| mu_plus.weights()[i] > 0.0).collect();
    let keep_y: Vec<usize> = (0..mu_minus.len()).filter(|&j| mu_minus.weights()[j] > 0.0).collect();
    let dropped_sources: Vec<usize> =
        (0..mu_plus.len()).filter(|&i| mu_plus.weights()[i] <= 0.0).collect();
    let dropped_targets: Vec<usize> =
        (0..mu_minus.len()).filter(|&j| mu_minus.weights()[j] <= 0.0).collect();
    let full = cost_matrix(mu_plus.atoms(), mu_minus.atoms(), c)?;
    let nfull = mu_minus.len();
    let mut sub = Vec::with_capacity(keep_x.len() * keep_y.len());
    for &i in &keep_x {
        for &j in &keep_y {
            sub.push(full[i * nfull + j]);
        }
    }
    let a: Vec<f64> = keep_x.iter().map(|&i| mu_plus.weights()[i]).collect();
    let b: Vec<f64> = keep_y.iter().map(|&j| mu_minus.weights()[j]).collect();
    let raw = network_simplex(&sub, &a, &b)?;

    let mut dual_u = vec![f64::NAN; mu_plus.len()];
    let mut dual_v = vec![f64::NAN; mu_minus.len()];
    for (k, &i) in keep_x.iter().enumerate() {
        dual_u[i] = raw.u[k];
    }
    for (k, &j) in keep_y.iter().enumerate() {
        dual_v[j] = raw.v[k];
    }
    // dropped atoms get their c-transform so the dual stays feasible
    for &i in &dropped_sources {
        dual_u[i] = keep_y
            .iter()
            .map(|&j| -full[i * nfull + j] - dual_v[j])
            .fold(f64::NEG_INFINITY, f64::max);
    }
    for &j in &dropped_targets {
        dual_v[j] = (0..mu_plus.len())
            .map(|i| -full[i * nfull + j] - dual_u[i])
            .fold(f64::NEG_INFINITY, f64::max);
    }
    let plan: Vec<PlanEntry> = raw
        .plan
        .iter()
        .map(|&(i, j, mass)| PlanEntry { i: keep_x[i], j: keep_y[j], mass })
        .collect();
    let primal_cost: f64 = plan.iter().map(|e| e.mass * full[e.i * nfull + e.j]).sum();
    let dual_value: f64 = -mu_plus.weights().iter().zip(&dual_u).map(|(w, u)| if *w > 0.0 { w * u } else { 0.0 }).sum::<f64>()
        - mu_minus.weights().iter().zip(&dual_v).map(|(w, v)| if *w > 0.0 { w * v } else { 0.0 }).sum::<f64>();
    Ok(TransportSolution {
        plan,
        dual_u,
        dual_v,
        primal_cost,
        dual_value,
        gap: primal_cost - dual_value,
        dropped_sources,
        dropped_targets,
        pivots: raw.pivots,
        mu_plus: mu_plus.clone(),
        mu_minus: mu_minus.clone(),
        cost: *c,
    })
}

/// `d_p` for the chart metric: `W_c^(1/p)` for `p >= 1`, `W_c` itself below.
pub fn wasserstein_p(
    mu_plus: &DiscreteMeasure,
    mu_minus: &DiscreteMeasure,
    p: f64,
    chart: Chart,
) -> Result<f64> {
    if !(p > 0.0) || !p.is_finite() {
        return Err(MkError::Validation("p must be positive".into()));
    }
    let c = CostFunction::power(p).on_chart(chart)?;
    let sol = solve_plan(mu_plus, mu_minus, &c)?;
    let w = sol.primal_cost.max(0.0);
    Ok(if p >= 1.0 { w.powf(1.0 / p) } else { w })
}
