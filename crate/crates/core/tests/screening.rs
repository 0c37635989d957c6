use mk_core::cconvex::{Lattice, PotentialField};
use mk_core::measures::{Chart, GridMeasure};
use mk_core::screening::*;
use mk_core::MkError;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::sync::OnceLock;

fn quiet() -> SolverOptions {
    SolverOptions { kkt_samples: 0, ..SolverOptions::default() }
}

fn rc32() -> &'static ScreeningSolution {
    static S: OnceLock<ScreeningSolution> = OnceLock::new();
    S.get_or_init(|| solve_rochet_chone(&ScreeningProblem::rochet_chone(32).unwrap(), &SolverOptions::default()).unwrap())
}

fn field(problem: &ScreeningProblem, values: Vec<f64>) -> PotentialField {
    PotentialField::on_grid(Lattice::of(&problem.agents), Chart::Euclidean, values).unwrap()
}

fn nodes(problem: &ScreeningProblem) -> Vec<Vec<f64>> {
    (0..problem.agents.len()).map(|k| problem.agents.centre(k)).collect()
}

/// Nonnegative convex field: max of affine pieces plus a bowl.
fn random_convex(problem: &ScreeningProblem, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let c: f64 = rng.gen_range(0.0..2.0);
    let p = [rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0)];
    let planes: Vec<[f64; 3]> =
        (0..3).map(|_| [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-0.3..0.3)]).collect();
    let lift: f64 = rng.gen_range(0.0..0.5);
    let raw: Vec<f64> = nodes(problem)
        .iter()
        .map(|x| {
            let aff = planes.iter().map(|q| q[0] * x[0] + q[1] * x[1] + q[2]).fold(f64::NEG_INFINITY, f64::max);
            c * ((x[0] - p[0]).powi(2) + (x[1] - p[1]).powi(2)) + aff
        })
        .collect();
    let lo = raw.iter().copied().fold(f64::INFINITY, f64::min);
    raw.iter().map(|v| v - lo + lift).collect()
}

// Losses for a(y) = |y|^2/2 and the bilinear benefit, integrated on both diagonal splits of
// every grid square with the half cells at the border folded into the outer squares.
fn losses_oracle(problem: &ScreeningProblem, u: &[f64]) -> f64 {
    let g = &problem.agents;
    let (nx, ny) = (g.shape()[0], g.shape()[1]);
    let (hx, hy) = (g.spacing(0), g.spacing(1));
    let rho = g.density();
    let x = nodes(problem);
    let at = |i: usize, j: usize| i * ny + j;
    let reach = |i: usize, n: usize, h: f64| h * (1.0 + if i == 0 { 0.5 } else { 0.0 } + if i + 2 == n { 0.5 } else { 0.0 });
    let mut total = 0.0;
    for i in 0..nx - 1 {
        for j in 0..ny - 1 {
            let corners = [at(i, j), at(i + 1, j), at(i, j + 1), at(i + 1, j + 1)];
            let dens = corners.iter().map(|&k| rho[k]).sum::<f64>() / 4.0;
            let area = reach(i, nx, hx) * reach(j, ny, hy);
            let [a, b, c, d] = corners;
            // (vertices, gradient)
            let tris = [
                ([a, b, d], [(u[b] - u[a]) / hx, (u[d] - u[b]) / hy]),
                ([a, c, d], [(u[d] - u[c]) / hx, (u[c] - u[a]) / hy]),
                ([a, b, c], [(u[b] - u[a]) / hx, (u[c] - u[a]) / hy]),
                ([b, c, d], [(u[d] - u[c]) / hx, (u[d] - u[b]) / hy]),
            ];
            for (vs, y) in tris {
                let cx = vs.iter().map(|&k| x[k][0]).sum::<f64>() / 3.0;
                let cy = vs.iter().map(|&k| x[k][1]).sum::<f64>() / 3.0;
                let integrand = 0.5 * (y[0] * y[0] + y[1] * y[1]) - cx * y[0] - cy * y[1];
                total += dens * area / 4.0 * integrand;
            }
        }
    }
    total + (0..u.len()).map(|k| g.cell_mass(k) * u[k]).sum::<f64>()
}

#[test]
fn null_contract_costs_nothing() {
    let p = ScreeningProblem::rochet_chone(16).unwrap();
    let l = principal_losses(&field(&p, vec![0.0; p.agents.len()]), &p).unwrap();
    assert!(l.abs() < 1e-15);
}

#[test]
fn losses_match_independent_quadrature() {
    let p = ScreeningProblem::rochet_chone(20).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..20 {
        let u = random_convex(&p, &mut rng);
        let a = principal_losses(&field(&p, u.clone()), &p).unwrap();
        let b = losses_oracle(&p, &u);
        assert!((a - b).abs() <= 1e-10, "{a} vs {b}");
    }
}

#[test]
fn losses_respect_the_product_box() {
    let mut p = ScreeningProblem::rochet_chone(16).unwrap();
    p.products = Some(vec![(0.0, 0.5), (0.0, 0.5)]);
    let u: Vec<f64> = nodes(&p).iter().map(|x| x[0]).collect();
    assert!(matches!(principal_losses(&field(&p, u), &p), Err(MkError::Domain(_))));
    let lat = Lattice::new(&[(0.0, 1.0), (0.0, 1.0)], &[8, 8]).unwrap();
    let f = PotentialField::on_grid(lat, Chart::Euclidean, vec![0.0; 64]).unwrap();
    assert!(matches!(principal_losses(&f, &p), Err(MkError::Validation(_))));
}

#[test]
fn losses_are_midpoint_convex() {
    let p = ScreeningProblem::rochet_chone(16).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..50 {
        let u1 = random_convex(&p, &mut rng);
        let u2 = random_convex(&p, &mut rng);
        let mid: Vec<f64> = u1.iter().zip(&u2).map(|(a, b)| 0.5 * (a + b)).collect();
        let l = |u: Vec<f64>| principal_losses(&field(&p, u), &p).unwrap();
        let (a, b, m) = (l(u1), l(u2), l(mid));
        assert!(m <= 0.5 * (a + b) + 1e-10);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]
    #[test]
    fn midpoint_convexity_holds_for_random_pairs(seed in any::<u64>()) {
        let p = ScreeningProblem::rochet_chone(16).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let u1 = random_convex(&p, &mut rng);
        let u2 = random_convex(&p, &mut rng);
        let mid: Vec<f64> = u1.iter().zip(&u2).map(|(a, b)| 0.5 * (a + b)).collect();
        let l = |u: Vec<f64>| principal_losses(&field(&p, u), &p).unwrap();
        prop_assert!(l(mid) <= 0.5 * (l(u1) + l(u2)) + 1e-10);
    }

    #[test]
    fn quadrature_agrees_for_random_fields(seed in any::<u64>()) {
        let p = ScreeningProblem::rochet_chone(17).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let u = random_convex(&p, &mut rng);
        let a = principal_losses(&field(&p, u.clone()), &p).unwrap();
        prop_assert!((a - losses_oracle(&p, &u)).abs() <= 1e-10);
    }
}

#[test]
fn expensive_products_price_everyone_out() {
    let g = GridMeasure::uniform(&[(0.0, 1.0), (0.0, 1.0)], &[16, 16], Chart::Euclidean).unwrap();
    let p = ScreeningProblem::new(g, ProductCost::QuadraticPlusNorm { kappa: 10.0 }).unwrap();
    let s = solve_rochet_chone(&p, &SolverOptions::default()).unwrap();
    assert!(s.u.iter().all(|v| v.abs() < 1e-6), "max u {}", s.u.iter().copied().fold(0.0, f64::max));
    assert!((s.strata.f0 - 1.0).abs() < 1e-12);
    assert!(s.losses.abs() < 1e-6);
    assert!(check_exclusion(&s).positive);
}

// Minimizes the same 1-d discrete losses over monotone slope sequences by dynamic
// programming on a fine slope grid, for every possible location of the minimum of u.
fn interval_dp(n: usize) -> f64 {
    let h = 1.0 / n as f64;
    let x: Vec<f64> = (0..n).map(|k| (k as f64 + 0.5) * h).collect();
    let m = vec![h; n];
    let ne = n - 1;
    let w: Vec<f64> =
        (0..ne).map(|i| h * (1.0 + if i == 0 { 0.5 } else { 0.0 } + if i + 1 == ne { 0.5 } else { 0.0 })).collect();
    let c: Vec<f64> = (0..ne).map(|i| 0.5 * (x[i] + x[i + 1])).collect();
    let grid: Vec<f64> = (0..=2400).map(|j| -0.2 + j as f64 * 5e-4).collect();
    let mut best = f64::INFINITY;
    for kstar in 0..n {
        // u_k - u_kstar as a linear function of the slopes
        let coef: Vec<f64> = (0..ne)
            .map(|i| if i >= kstar { h * m[i + 1..].iter().sum::<f64>() } else { -h * m[..=i].iter().sum::<f64>() })
            .collect();
        let mut prev = vec![0.0; grid.len()];
        for i in 0..ne {
            let mut run = f64::INFINITY;
            let mut cur = vec![f64::INFINITY; grid.len()];
            for (j, &g) in grid.iter().enumerate() {
                run = run.min(prev[j]);
                let sign_ok = if i >= kstar { g >= 0.0 } else { g <= 0.0 };
                if sign_ok {
                    cur[j] = run + w[i] * (0.5 * g * g - c[i] * g) + coef[i] * g;
                }
            }
            prev = cur;
        }
        best = best.min(prev.iter().copied().fold(f64::INFINITY, f64::min));
    }
    best
}

#[test]
fn interval_matches_dynamic_programming() {
    let n = 64;
    let s = solve_rochet_chone(&ScreeningProblem::interval(n).unwrap(), &SolverOptions::default()).unwrap();
    let dp = interval_dp(n);
    assert!((s.energy - dp).abs() < 1e-3, "{} vs {dp}", s.energy);
    assert!(s.energy <= dp + 1e-9);
    // continuum optimum u = (x - 1/2)_+^2, losses -1/12
    assert!((s.energy + 1.0 / 12.0).abs() < 2e-3);
    let half = s.u.iter().zip(&s.reservation).filter(|(u, r)| *u - *r <= s.eps_u).count() as f64 / n as f64;
    assert!((half - 0.5).abs() < 0.05, "excluded {half}");
}

#[test]
fn rochet_chone_has_three_strata() {
    let s = rc32();
    let [f0, f1, f2] = s.strata.as_array();
    assert!(f0 > 0.0 && f1 > 0.0 && f2 > 0.0, "{:?}", s.strata);
    assert!((f0 + f1 + f2 - 1.0).abs() < 1e-12);
    assert!(check_exclusion(s).positive);
}

#[test]
fn solution_is_feasible_and_descends() {
    let s = rc32();
    assert!(s.bound_defect >= -1e-12);
    assert!(s.convexity_defect >= -1e-12);
    assert!(s.max_energy_increase() <= 0.0);
    assert!(s.gap.unwrap() <= s.tol * (1.0 + s.energy.abs()));
    assert!(s.active_bounds > 0 && s.active_convexity > 0);
    assert!(s.iterations <= MAX_IPM_ITERATIONS);
}

#[test]
fn solution_beats_the_null_contract() {
    let s = rc32();
    assert!(s.losses < 0.0);
    assert!((s.losses - s.energy).abs() < 1e-6);
}

#[test]
fn no_feasible_perturbation_improves() {
    let k = rc32().kkt.clone().unwrap();
    assert_eq!(k.samples, 100);
    assert_eq!(k.violations, 0, "min change {}", k.min_change);
}

#[test]
fn bunching_concentrates_on_the_diagonal() {
    let s = rc32();
    let frac = s.diagonal_fraction.unwrap();
    assert!(frac >= 0.5, "diagonal {frac}, axes {:?}", s.axis_fraction);
}

#[test]
fn classification_of_closed_form_fields() {
    let p = ScreeningProblem::rochet_chone(24).unwrap();
    let s = ScreeningSolution::from_values(&p, vec![0.0; p.agents.len()]).unwrap();
    assert_eq!(s.strata.f0, 1.0);
    assert!(s.labels.iter().all(|r| *r == Region::Exclusion));
    assert!(s.gap.is_none());

    let bowl: Vec<f64> = nodes(&p).iter().map(|x| 0.5 * (x[0] * x[0] + x[1] * x[1]) + 0.1).collect();
    let s = ScreeningSolution::from_values(&p, bowl).unwrap();
    assert_eq!(s.strata.f1, 0.0);
    assert!(s.labels.iter().all(|r| *r == Region::FullRank));
    assert!(!check_exclusion(&s).positive);

    // a ridge: rank one everywhere
    let ridge: Vec<f64> = nodes(&p).iter().map(|x| (x[0] + x[1]).powi(2) + 0.1).collect();
    let s = ScreeningSolution::from_values(&p, ridge).unwrap();
    assert_eq!(s.strata.f1, 1.0);
    assert_eq!(s.diagonal_fraction, Some(1.0));
}

#[test]
fn thresholds_can_be_overridden() {
    let mut s = rc32().clone();
    classify_regions(&mut s, Some(-1.0), Some(-1.0));
    assert_eq!(s.strata.f2, 1.0);
    classify_regions(&mut s, Some(f64::INFINITY), None);
    assert_eq!(s.strata.f0, 1.0);
}

#[test]
fn rejects_bad_setups() {
    assert!(matches!(
        solve_rochet_chone(&ScreeningProblem::rochet_chone(8).unwrap(), &quiet()),
        Err(MkError::Validation(_))
    ));
    let bad = SolverOptions { tol: 0.0, ..quiet() };
    assert!(solve_rochet_chone(&ScreeningProblem::rochet_chone(16).unwrap(), &bad).is_err());
    let g = GridMeasure::uniform(&[(0.0, 1.0), (0.0, 1.0)], &[16, 16], Chart::Euclidean).unwrap();
    assert!(ScreeningProblem::new(g, ProductCost::QuadraticPlusNorm { kappa: -1.0 }).is_err());
    let p = ScreeningProblem::rochet_chone(16).unwrap();
    assert!(ScreeningSolution::from_values(&p, vec![0.0; 3]).is_err());
}

#[test]
fn json_round_trip() {
    let s = rc32();
    let text = serde_json::to_string(s).unwrap();
    let back: ScreeningSolution = serde_json::from_str(&text).unwrap();
    assert_eq!(back.u, s.u);
    assert_eq!(back.labels, s.labels);
    assert_eq!(back.strata, s.strata);
}

#[test]
fn linear_welfare_without_a_budget_weight_is_unbounded() {
    let p = ScreeningProblem::rochet_chone(16).unwrap();
    let out = solve_welfare(&p, &Welfare::Linear, 0.0, &quiet()).unwrap();
    assert_eq!(out.status, WelfareStatus::Unbounded);
    assert!(out.solution.is_none());
    let out = solve_welfare(&p, &Welfare::Linear, 0.5, &quiet()).unwrap();
    assert_eq!(out.status, WelfareStatus::Unbounded);
}

#[test]
fn welfare_approaches_the_monopolist_as_lambda_grows() {
    let p = ScreeningProblem::rochet_chone(16).unwrap();
    let rc = solve_rochet_chone(&p, &quiet()).unwrap();
    let mut last = f64::INFINITY;
    for lambda in [1.5, 3.0, 6.0, 12.0, 24.0] {
        let out = solve_welfare(&p, &Welfare::Linear, lambda, &quiet()).unwrap();
        assert_eq!(out.status, WelfareStatus::Optimal);
        let gap = out.losses.unwrap() - rc.losses;
        assert!(gap >= -1e-7, "lambda {lambda}: {gap}");
        assert!(gap <= last + 1e-7, "lambda {lambda}: {gap} after {last}");
        last = gap;
    }
    assert!(last < 0.02);
}

#[test]
fn capped_welfare_beats_the_null_contract() {
    let p = ScreeningProblem::rochet_chone(16).unwrap();
    let w = Welfare::Capped { cap: 0.1 };
    let out = solve_welfare(&p, &w, 0.0, &quiet()).unwrap();
    assert_eq!(out.status, WelfareStatus::Optimal);
    let sol = out.solution.unwrap();
    let at_null = welfare_objective(&field(&p, vec![0.0; p.agents.len()]), &p, &w, 0.0).unwrap();
    let at_opt = welfare_objective(&sol.potential(), &p, &w, 0.0).unwrap();
    assert!(at_opt >= at_null);
    assert!((at_opt - out.objective.unwrap()).abs() < 1e-9);
    // everyone reaches the cap when losses are free
    assert!((at_opt - 0.1).abs() < 1e-5, "{at_opt}");
}

#[test]
fn welfare_rejects_convex_shapes() {
    let w = Welfare::Pieces { slopes: vec![0.0, 1.0], intercepts: vec![0.0, -1.0] };
    assert!(w.validate().is_ok());
    let w = Welfare::Pieces { slopes: vec![-1.0], intercepts: vec![0.0] };
    assert!(w.validate().is_err());
}
