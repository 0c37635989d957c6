//! One line per acceptance criterion; the test fails if any line reads FAIL.

use std::f64::consts::{FRAC_PI_4, PI};
use std::fs;
use std::path::Path;
use std::time::Instant;

use mk_core::cconvex::*;
use mk_core::cli::run_with;
use mk_core::jet::{Jet, Scalar};
use mk_core::kantorovich::*;
use mk_core::measures::*;
use mk_core::mtw::*;
use mk_core::screening::{principal_losses, solve_rochet_chone, ScreeningProblem, SolverOptions};
use mk_core::semidiscrete::{loeper_demo, Geometry};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

struct Board {
    lines: Vec<String>,
    failed: Vec<usize>,
}

impl Board {
    fn record(&mut self, id: usize, name: &str, ok: bool, detail: String) {
        let line = format!("{} {id:2} {name}: {detail}", if ok { "PASS" } else { "FAIL" });
        println!("{line}");
        self.lines.push(line);
        if !ok {
            self.failed.push(id);
        }
    }
}

fn cloud(rng: &mut ChaCha8Rng, chart: Chart, n: usize, d: usize) -> Vec<Point> {
    (0..n)
        .map(|_| match chart {
            Chart::Euclidean => Point::euclidean(&(0..d).map(|_| rng.gen_range(-1.0..1.0)).collect::<Vec<_>>()),
            Chart::SphereEmbedded => {
                let v: Vec<f64> = (0..2).map(|_| rng.gen_range(-0.7..0.7)).collect();
                Point::new(exp_north(&v), chart).unwrap()
            }
            Chart::PoincareDisk => {
                let r = 0.76 * rng.gen_range(0.0f64..1.0).sqrt();
                let t = rng.gen_range(0.0..2.0 * PI);
                Point::new(vec![r * t.cos(), r * t.sin()], chart).unwrap()
            }
        })
        .collect()
}

fn catalogue(k: usize) -> CostFunction {
    match k % 7 {
        0 => CostFunction::quadratic(),
        1 => CostFunction::bilinear(),
        2 => CostFunction::log_distance(),
        3 => CostFunction::power(1.0),
        4 => CostFunction::power(3.0),
        5 => CostFunction::sphere_sq(),
        _ => CostFunction::hyperbolic_sq(),
    }
}

fn random_measure(rng: &mut ChaCha8Rng, chart: Chart, n: usize, d: usize) -> DiscreteMeasure {
    let w: Vec<f64> = (0..n).map(|_| rng.gen_range(0.05..1.0)).collect();
    DiscreteMeasure::normalized(cloud(rng, chart, n, d), w).unwrap()
}

fn duality_instances() -> Vec<(TransportSolution, CostFunction)> {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    (0..100)
        .map(|k| {
            let c = catalogue(k);
            let d = if c.chart == Chart::Euclidean { 1 + k % 3 } else { 2 };
            let (m, n) = (rng.gen_range(2..=200), rng.gen_range(2..=200));
            let a = random_measure(&mut rng, c.chart, m, d);
            let b = random_measure(&mut rng, c.chart, n, d);
            (solve_plan(&a, &b, &c).unwrap(), c)
        })
        .collect()
}

fn criterion_1_and_5(board: &mut Board) {
    let t = Instant::now();
    let sols = duality_instances();
    let secs = t.elapsed().as_secs_f64();
    let rel = |s: &TransportSolution| s.gap.abs() / s.primal_cost.abs().max(s.dual_value.abs()).max(f64::MIN_POSITIVE);
    let worst_gap = sols.iter().map(|(s, _)| rel(s)).fold(0.0, f64::max);
    let worst_slack = sols.iter().map(|(s, _)| s.slackness_defect()).fold(0.0, f64::max);
    board.record(
        1,
        "duality certificate",
        worst_gap <= 1e-9 && worst_slack <= 1e-8 && secs <= 10.0,
        format!("100 instances, max rel gap {worst_gap:.1e} (<= 1e-9), max slackness {worst_slack:.1e} (<= 1e-8), {secs:.2} s (<= 10 s)"),
    );

    let opts = CycleOptions { k_max: 3, exhaustive_cap: u64::MAX, ..CycleOptions::default() };
    let mut violations = 0;
    let mut tested = 0;
    let mut all_exhaustive = true;
    for (s, c) in &sols {
        let r = check_cyclical_monotonicity(s, c, &opts);
        violations += r.violations;
        tested += r.per_k.iter().map(|k| k.subsets_tested).sum::<u64>();
        all_exhaustive &= r.per_k.iter().all(|k| k.exhaustive);
    }
    board.record(
        5,
        "cyclical monotonicity",
        violations == 0 && all_exhaustive,
        format!("{tested} subsets (all 2- and 3-cycles of 100 plans), {violations} violations"),
    );
}

fn brute_force(cm: &[f64], n: usize) -> f64 {
    fn rec(cm: &[f64], n: usize, row: usize, used: &mut [bool], acc: f64, best: &mut f64) {
        if row == n {
            *best = best.min(acc);
            return;
        }
        for j in 0..n {
            if !used[j] {
                used[j] = true;
                rec(cm, n, row + 1, used, acc + cm[row * n + j], best);
                used[j] = false;
            }
        }
    }
    let mut best = f64::INFINITY;
    rec(cm, n, 0, &mut vec![false; n], 0.0, &mut best);
    best / n as f64
}

fn criterion_2(board: &mut Board) {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst: f64 = 0.0;
    for k in 0..50 {
        let c = catalogue(k);
        let n = rng.gen_range(1..=7);
        let a = DiscreteMeasure::uniform(cloud(&mut rng, c.chart, n, 2)).unwrap();
        let b = DiscreteMeasure::uniform(cloud(&mut rng, c.chart, n, 2)).unwrap();
        let sol = solve_plan(&a, &b, &c).unwrap();
        let cm = cost_matrix(a.atoms(), b.atoms(), &c).unwrap();
        worst = worst.max((sol.primal_cost - brute_force(&cm, n)).abs());
    }
    board.record(2, "brute-force equivalence", worst <= 1e-12, format!("50 instances, max |LP - enumeration| {worst:.1e} (<= 1e-12)"));
}

fn criterion_3(board: &mut Board) {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst = f64::NEG_INFINITY;
    for p in [1.0, 2.0] {
        for _ in 0..200 {
            let ms: Vec<DiscreteMeasure> = (0..3)
                .map(|_| {
                    let n = rng.gen_range(1..=12);
                    random_measure(&mut rng, Chart::Euclidean, n, 2)
                })
                .collect();
            let d = |a: &DiscreteMeasure, b: &DiscreteMeasure| wasserstein_p(a, b, p, Chart::Euclidean).unwrap();
            worst = worst.max(d(&ms[0], &ms[2]) - d(&ms[0], &ms[1]) - d(&ms[1], &ms[2]));
        }
    }
    board.record(3, "triangle inequality", worst <= 1e-8, format!("400 triples, max d(a,c) - d(a,b) - d(b,c) = {worst:.1e} (<= 1e-8)"));
}

fn dyadic(rng: &mut ChaCha8Rng, n: usize, d: usize) -> Vec<Point> {
    (0..n).map(|_| Point::euclidean(&(0..d).map(|_| rng.gen_range(-16i32..=16) as f64 / 8.0).collect::<Vec<_>>())).collect()
}

fn criterion_4(board: &mut Board) {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let c = CostFunction::bilinear();
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let d = rng.gen_range(1..=3);
        let (m, n) = (rng.gen_range(1..40), rng.gen_range(1..40));
        let xs = Support::Atoms(dyadic(&mut rng, m, d));
        let ys = dyadic(&mut rng, n, d);
        let vals: Vec<f64> = (0..n).map(|_| rng.gen_range(-64i32..=64) as f64 / 16.0).collect();
        let v = PotentialField::on_atoms(ys.clone(), vals).unwrap();
        let vc = c_transform(&v, &c, Direction::YToX, &xs).unwrap();
        let vcc = c_transform(&vc, &c, Direction::XToY, &Support::Atoms(ys)).unwrap();
        let vccc = c_transform(&vcc, &c, Direction::YToX, &xs).unwrap();
        worst = worst.max(vc.values.iter().zip(&vccc.values).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max));
    }
    // generic floating-point data for reference
    let mut generic: f64 = 0.0;
    let q = CostFunction::quadratic();
    for _ in 0..100 {
        let xs = Support::Atoms(cloud(&mut rng, Chart::Euclidean, 30, 2));
        let ys = cloud(&mut rng, Chart::Euclidean, 30, 2);
        let v = PotentialField::on_atoms(ys.clone(), (0..30).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap();
        let vc = c_transform(&v, &q, Direction::YToX, &xs).unwrap();
        generic = generic.max(c_convexity_defect(&vc, &q, Direction::XToY, &Support::Atoms(ys)).unwrap());
    }
    board.record(
        4,
        "c-transform idempotence",
        worst == 0.0,
        format!("100 exactly representable fields, sup |v^ccc - v^c| = {worst:e}; generic floats {generic:.1e}"),
    );
}

fn criterion_6(board: &mut Board) {
    let t = Instant::now();
    let opts = CertifyOptions { samples: 5000, keep_samples: false, ..CertifyOptions::default() };
    let bil = certify_conditions(&CostFunction::bilinear(), &Domain::EuclideanBox { dim: 2, lo: -1.0, hi: 1.0 }, &opts).unwrap();
    let sph = certify_conditions(&CostFunction::sphere_sq(), &Domain::SphereCap { dim: 2, radius: FRAC_PI_4 }, &opts).unwrap();
    let hyp = certify_conditions(&CostFunction::hyperbolic_sq(), &Domain::PoincareBall { dim: 2, radius: 2.0 }, &opts).unwrap();
    let secs = t.elapsed().as_secs_f64();
    let b_ok = bil.verdict("B3").unwrap().holds() && matches!(bil.verdict("A3s").unwrap(), Verdict::Violated { .. });
    let margin = match sph.verdict("A3s").unwrap() {
        Verdict::Holds { margin } => *margin,
        _ => f64::NAN,
    };
    let witness = match hyp.verdict("A3").unwrap() {
        Verdict::Violated { witness } => Some(witness.cross),
        _ => None,
    };
    let ok = b_ok && margin > 0.0 && witness.is_some_and(|w| w < 0.0) && secs <= 60.0;
    board.record(
        6,
        "curvature verdicts",
        ok,
        format!("bilinear B3 holds / A3s violated: {b_ok}; sphere A3s margin {margin:.3}; hyperbolic A3 witness cross {witness:?}; {secs:.1} s (<= 60 s)"),
    );
}

const D2: [f64; 5] = [-1.0 / 12.0, 16.0 / 12.0, -30.0 / 12.0, 16.0 / 12.0, -1.0 / 12.0];

// d^2/ds^2 d^2/dt^2 g(0,0) by a product stencil, Richardson-combined over one halving.
fn fd22(g: &dyn Fn(f64, f64) -> f64, h: f64) -> f64 {
    let one = |h: f64| {
        let mut acc = 0.0;
        for i in 0..5 {
            for j in 0..5 {
                acc += D2[i] * D2[j] * g((i as f64 - 2.0) * h, (j as f64 - 2.0) * h);
            }
        }
        acc / (h * h * h * h)
    };
    let (a, b) = (one(h), one(h / 2.0));
    b + (b - a) / 15.0
}

fn unit(k: usize) -> Vec<f64> {
    let mut v = vec![0.0; 2];
    v[k] = 1.0;
    v
}

// Cross-curvature of -log|x - y| with y = y0 + A z, differentiated exactly in z with jets.
fn cross_in_linear_chart(x: &[f64], y0: &[f64], a: &DMatrix<f64>, p: &[f64], qz: &[f64]) -> f64 {
    let part = |u: &[f64], v: &[f64], da: usize, db: usize| {
        let xs: Vec<Jet> = x.iter().zip(u).map(|(xi, ui)| Jet::linear(*xi, *ui, 0.0)).collect();
        let z: Vec<Jet> = v.iter().map(|vi| Jet::linear(0.0, 0.0, *vi)).collect();
        let mut d2 = Jet::cst(0.0);
        for r in 0..2 {
            let y = Jet::cst(y0[r]) + z[0].scale(a[(r, 0)]) + z[1].scale(a[(r, 1)]);
            d2 = d2 + (xs[r] - y) * (xs[r] - y);
        }
        d2.ln().scale(-0.5).partial(da, db)
    };
    let mut m = DMatrix::zeros(2, 2);
    let mut l = DVector::zeros(2);
    let mut r = DVector::zeros(2);
    for i in 0..2 {
        for j in 0..2 {
            m[(i, j)] = part(&unit(i), &unit(j), 1, 1);
        }
        l[i] = part(p, &unit(i), 2, 1);
        r[i] = part(&unit(i), qz, 1, 2);
    }
    -part(p, qz, 2, 2) + (l.transpose() * m.try_inverse().unwrap() * r)[(0, 0)]
}

fn criterion_7(board: &mut Board) {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let c = CostFunction::log_distance();
    let mut worst_inv: f64 = 0.0;
    for _ in 0..50 {
        let x: Vec<f64> = (0..2).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let y0: Vec<f64> = (0..2).map(|_| rng.gen_range(0.9..1.5)).collect();
        let p: Vec<f64> = (0..2).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let q: Vec<f64> = (0..2).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let a = DMatrix::from_fn(2, 2, |i, j| if i == j { 1.0 } else { 0.0 } + rng.gen_range(-0.4..0.4));
        let qz = a.clone().try_inverse().unwrap() * DVector::from_column_slice(&q);
        let plain = cross_curvature(&c, &Point::euclidean(&x), &Point::euclidean(&y0), &p, &q).unwrap();
        let moved = cross_in_linear_chart(&x, &y0, &a, &p, qz.as_slice());
        worst_inv = worst_inv.max((plain - moved).abs() / plain.abs().max(moved.abs()).max(1e-300));
    }
    // -d^4/ds^2 dt^2 c(x(s), y(t)) along a c-segment equals cross(p, ydot)
    let cases: Vec<(CostFunction, Vec<f64>, Vec<f64>)> = vec![
        (CostFunction::log_distance(), vec![0.1, 0.2], vec![1.0, -0.4]),
        (CostFunction::sphere_sq(), exp_north(&[0.2, 0.1]), exp_north(&[-0.5, 0.4])),
        (CostFunction::hyperbolic_sq(), vec![0.1, -0.2], vec![0.3, 0.25]),
        (CostFunction::power(3.0), vec![0.0, 0.1], vec![0.8, 0.5]),
    ];
    let (p, w) = ([0.6, -0.8], [0.3, 0.5]);
    let mut worst_lemma: f64 = 0.0;
    for (c, x, y) in cases {
        let d0 = c.dx(&x, &y).unwrap();
        let yt = |t: f64| {
            let mom: Vec<f64> = d0.iter().zip(&w).map(|(a, b)| -(a + t * b)).collect();
            c_exponential_raw(&c, &x, &mom).unwrap().y
        };
        let xp = Point::new(x.clone(), c.chart).unwrap();
        let g = |s: f64, t: f64| {
            let xs = xp.moved(&p.iter().map(|v| v * s).collect::<Vec<_>>()).unwrap();
            c.value_raw(xs.coords(), &yt(t))
        };
        let fourth = -fd22(&g, 0.04);
        let ydot = c.dxy(&x, &y).unwrap().try_inverse().unwrap() * DVector::from_column_slice(&w);
        let cross = cross_curvature(&c, &xp, &Point::new(y, c.chart).unwrap(), &p, ydot.as_slice()).unwrap();
        worst_lemma = worst_lemma.max((cross - fourth).abs() / cross.abs().max(1e-300));
    }
    board.record(
        7,
        "cross-curvature correctness",
        worst_inv <= 1e-6 && worst_lemma <= 1e-4,
        format!("linear y-chart invariance max rel {worst_inv:.1e} (<= 1e-6); c-segment identity max rel {worst_lemma:.1e} (<= 1e-4)"),
    );
}

fn criterion_8(board: &mut Board) {
    let c = CostFunction::sphere_sq();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let dom = Domain::SphereCap { dim: 2, radius: FRAC_PI_4 };
    let xs: Vec<Point> = (0..3000).map(|_| Point::new(dom.sample(&mut rng, false), c.chart).unwrap()).collect();
    let mut sphere: f64 = f64::NEG_INFINITY;
    for _ in 0..10 {
        let mut pt = || Point::new(exp_north(&[rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5)]), c.chart).unwrap();
        let (x0, y0, y1) = (pt(), pt(), pt());
        let seg = trace_c_segment(&c, &x0, &y0, &y1, 32).unwrap();
        sphere = sphere.max(loeper_max_principle_check(&c, &seg, &xs).max_defect);
    }
    let h = CostFunction::hyperbolic_sq();
    let x0 = Point::new(vec![0.0, 0.0], Chart::PoincareDisk).unwrap();
    let a = 0.5f64.tanh();
    let y0 = Point::new(vec![a * 1.0f64.cos(), a * 1.0f64.sin()], Chart::PoincareDisk).unwrap();
    let y1 = Point::new(vec![a * 1.0f64.cos(), -a * 1.0f64.sin()], Chart::PoincareDisk).unwrap();
    let seg = trace_c_segment(&h, &x0, &y0, &y1, 32).unwrap();
    let hdom = Domain::PoincareBall { dim: 2, radius: 2.0 };
    let hx: Vec<Point> = (0..3000).map(|_| Point::new(hdom.sample(&mut rng, false), h.chart).unwrap()).collect();
    let rep = loeper_max_principle_check(&h, &seg, &hx);
    board.record(
        8,
        "maximum principle",
        sphere <= 1e-8 && rep.max_defect > 0.0 && rep.witness_x.is_some(),
        format!("sphere max defect {sphere:.1e} over 10 segments (<= 1e-8); hyperbolic defect {:.3e} at x = {:?}", rep.max_defect, rep.witness_x),
    );
}

fn criterion_9(board: &mut Board) {
    let t = Instant::now();
    let (r, s) = Geometry::Hyperbolic.defaults();
    let h512 = loeper_demo(Geometry::Hyperbolic, r, s, 512).unwrap();
    let h1024 = loeper_demo(Geometry::Hyperbolic, r, s, 1024).unwrap();
    let (er, es) = Geometry::Euclidean.defaults();
    let euc = loeper_demo(Geometry::Euclidean, er, es, 512).unwrap();
    let (sr, ss) = Geometry::Sphere.defaults();
    let sph = loeper_demo(Geometry::Sphere, sr, ss, 512).unwrap();
    let secs = t.elapsed().as_secs_f64();
    let convex = euc.convex.clone().unwrap_or_default();
    let sph_conn: Vec<usize> = sph.components.iter().map(|c| c.significant).collect();
    let ok = h512.middle_components >= 2
        && h1024.middle_components >= 2
        && convex.len() == 3
        && convex.iter().all(|b| *b)
        && sph_conn.iter().all(|&k| k == 1)
        && secs <= 300.0;
    board.record(
        9,
        "Loeper counterexample",
        ok,
        format!(
            "hyperbolic (r={r}, s={s}) middle components {} at 512, {} at 1024; euclidean convex {convex:?}; sphere components {sph_conn:?}; {secs:.0} s (<= 300 s)",
            h512.middle_components, h1024.middle_components
        ),
    );
}

const SIGMA: f64 = 1.5;
const EPS: f64 = 0.6;

fn quartic_map(x: f64) -> f64 {
    SIGMA * x + EPS * x * x * x / 3.0
}

fn pushed_density(y: f64) -> f64 {
    let mut x = y / SIGMA;
    for _ in 0..60 {
        x -= (quartic_map(x) - y) / (SIGMA + EPS * x * x);
    }
    1.0 / (SIGMA + EPS * x * x)
}

fn criterion_10(board: &mut Board) {
    let c = CostFunction::bilinear();
    // the linear map and the identity: second differences are exact
    let mut exact: f64 = 0.0;
    for n in [32, 64, 128, 256] {
        let fp = GridMeasure::uniform(&[(0.0, 1.0)], &[n], Chart::Euclidean).unwrap();
        let fm = GridMeasure::uniform(&[(0.0, 2.0)], &[n], Chart::Euclidean).unwrap();
        let u = PotentialField::sample(Lattice::of(&fp), |x| x[0] * x[0]);
        exact = exact.max(monge_ampere_residual(&u, &c, &fp, &fm).unwrap().stats.max_abs);
        let m = n / 2;
        let g = GridMeasure::uniform(&[(-1.0, 1.0), (-1.0, 1.0)], &[m, m], Chart::Euclidean).unwrap();
        let u = PotentialField::sample(Lattice::of(&g), |x| 0.5 * (x[0] * x[0] + x[1] * x[1]));
        exact = exact.max(monge_ampere_residual(&u, &c, &g, &g).unwrap().stats.max_abs);
    }
    // smooth non-polynomial-in-the-stencil instances: u = sigma x^2/2 + eps x^4/12 per axis
    let mut ratios = Vec::new();
    for d in [1usize, 2] {
        let sizes: &[usize] = if d == 1 { &[32, 64, 128, 256] } else { &[16, 32, 64, 128] };
        let med: Vec<f64> = sizes
            .iter()
            .map(|&n| {
                let fp = GridMeasure::uniform(&vec![(0.0, 1.0); d], &vec![n; d], Chart::Euclidean).unwrap();
                let top = quartic_map(1.0);
                let fm = GridMeasure::from_fn(&vec![(0.0, top); d], &vec![n; d], Chart::Euclidean, |y| {
                    y.iter().map(|&v| pushed_density(v)).product()
                })
                .unwrap();
                let u = PotentialField::sample(Lattice::of(&fp), |x| x.iter().map(|&v| SIGMA * v * v / 2.0 + EPS * v.powi(4) / 12.0).sum());
                monge_ampere_residual(&u, &c, &fp, &fm).unwrap().stats.median_abs
            })
            .collect();
        ratios.extend(med.windows(2).map(|w| w[0] / w[1]));
    }
    let min_ratio = ratios.iter().copied().fold(f64::INFINITY, f64::min);
    board.record(
        10,
        "Monge-Ampere residual convergence",
        exact <= 1e-9 && min_ratio >= 1.5,
        format!(
            "linear map and identity exact at every resolution (max |r| {exact:.1e}); smooth 1-D/2-D halving ratios {:?} (>= 1.5)",
            ratios.iter().map(|r| (r * 100.0).round() / 100.0).collect::<Vec<_>>()
        ),
    );
}

fn criterion_11(board: &mut Board) {
    let disk = isoperimetric_check(&disk_shape(256).unwrap()).unwrap();
    let sq = isoperimetric_check(&rectangle_shape(1.0, 256).unwrap()).unwrap();
    let per = 4.0 * PI.sqrt();
    let ok = (disk.ratio - 1.0).abs() <= 0.03 && sq.flux >= 2.0 * PI && sq.flux <= per;
    board.record(
        11,
        "isoperimetric chain",
        ok,
        format!("disk ratio {:.4} (1 +- 0.03); square flux {:.4} in [2 pi, 4 sqrt(pi)] = [{:.4}, {per:.4}]", disk.ratio, sq.flux, 2.0 * PI),
    );
}

fn criterion_12(board: &mut Board) {
    let t = Instant::now();
    let p128 = ScreeningProblem::rochet_chone(128).unwrap();
    let s128 = solve_rochet_chone(&p128, &SolverOptions::default()).unwrap();
    let s64 = solve_rochet_chone(&ScreeningProblem::rochet_chone(64).unwrap(), &SolverOptions::default()).unwrap();
    let secs = t.elapsed().as_secs_f64();
    let f = s128.strata.as_array();
    let g = s64.strata.as_array();
    let drift = f.iter().zip(&g).map(|(a, b)| (a - b).abs() / a).fold(0.0, f64::max);

    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let lat = Lattice::of(&p128.agents);
    let nodes: Vec<Vec<f64>> = (0..lat.len()).map(|k| lat.node(k)).collect();
    let field = |rng: &mut ChaCha8Rng| {
        let c: f64 = rng.gen_range(0.0..2.0);
        let q = [rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0)];
        let planes: Vec<[f64; 3]> = (0..3).map(|_| [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-0.3..0.3)]).collect();
        let raw: Vec<f64> = nodes
            .iter()
            .map(|x| {
                c * ((x[0] - q[0]).powi(2) + (x[1] - q[1]).powi(2))
                    + planes.iter().map(|a| a[0] * x[0] + a[1] * x[1] + a[2]).fold(f64::NEG_INFINITY, f64::max)
            })
            .collect();
        let lo = raw.iter().copied().fold(f64::INFINITY, f64::min);
        PotentialField::on_grid(lat.clone(), Chart::Euclidean, raw.iter().map(|v| v - lo).collect()).unwrap()
    };
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..50 {
        let (a, b) = (field(&mut rng), field(&mut rng));
        let mid = PotentialField::on_grid(lat.clone(), Chart::Euclidean, a.values.iter().zip(&b.values).map(|(x, y)| 0.5 * (x + y)).collect()).unwrap();
        let l = |u: &PotentialField| principal_losses(u, &p128).unwrap();
        worst = worst.max(l(&mid) - 0.5 * (l(&a) + l(&b)));
    }
    let ok = f.iter().all(|v| *v > 0.0) && worst <= 1e-10 && drift <= 0.25 && secs <= 600.0;
    board.record(
        12,
        "screening",
        ok,
        format!(
            "strata at 128 {:.4?} (64: {:.4?}), max relative drift {drift:.3} (<= 0.25); midpoint excess {worst:.1e} on 50 pairs (<= 1e-10); {secs:.1} s (<= 600 s)",
            f, g
        ),
    );
}

fn mk(args: &[String]) -> (i32, Vec<u8>) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let code = run_with(std::iter::once("mk".to_string()).chain(args.iter().cloned()), &mut out, &mut err);
    if code != 0 {
        eprintln!("{}", String::from_utf8_lossy(&err));
    }
    (code, out)
}

// inputs are written to `input`, outputs to `dir`; only `dir` is compared
fn cli_round(input: &Path, dir: &Path) -> Vec<(String, Vec<u8>)> {
    let w = |name: &str, v: serde_json::Value| {
        let p = input.join(name);
        fs::write(&p, v.to_string()).unwrap();
        p.to_str().unwrap().to_string()
    };
    let o = |name: &str| dir.join(name).to_str().unwrap().to_string();
    let a = w("a.json", json!({"chart": "euclidean", "atoms": [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [0.6, 0.6]], "weights": [0.4, 0.2, 0.2, 0.2]}));
    let b = w("b.json", json!({"chart": "euclidean", "atoms": [[0.2, 0.1], [0.9, 0.8], [0.4, 0.5]], "weights": [0.3, 0.3, 0.4]}));
    let g = w("g.json", json!({"chart": "euclidean", "box": [[0.0, 1.0], [0.0, 1.0]], "shape": [20, 20], "density": vec![1.0; 400]}));
    let u = w("u.json", json!({"chart": "euclidean", "box": [[0.0, 1.0], [0.0, 1.0]], "shape": [20, 20], "values": (0..400).map(|k| ((k % 7) as f64) * 0.01).collect::<Vec<_>>()}));
    let cfg = w("cfg.json", json!({"command": "curvature", "cost": "sphere_sq", "samples": 400, "seed": 11, "out": o("cfg_out.json")}));
    let runs: Vec<Vec<String>> = vec![
        vec!["transport", "--mu", &a, "--nu", &b, "--out", &o("t.json"), "--csv", &o("t.csv")],
        vec!["wasserstein", "--mu", &a, "--nu", &b, "--p", "1", "--out", &o("w.json")],
        vec!["ctransform", "--field", &u, "--onto", &g, "--out", &o("ct.json")],
        vec!["map", "--solution", &o("t.json"), "--out", &o("map.json")],
        vec!["residual", "--field", &u, "--f-plus", &g, "--f-minus", &g, "--out", &o("r.json"), "--raster", &o("r.pgm")],
        vec!["isoperimetric", "--resolution", "64", "--coarse", "16", "--out", &o("iso.json")],
        vec!["curvature", "--cost", "hyperbolic_sq", "--samples", "500", "--out", &o("cu.json")],
        vec!["csegment", "--cost", "log_distance", "--x0", "0,0", "--y0", "1,0.5", "--y1", "1,-0.5", "--out", &o("cs.json")],
        vec!["maxprinciple", "--cost", "sphere_sq", "--x0", "0,0,1", "--y0", "0.6,0,0.8", "--y1", "0,0.6,0.8", "--samples", "300", "--out", &o("mp.json")],
        vec!["semidiscrete", "--source", &g, "--targets", &b, "--out", &o("sd.json"), "--raster", &o("sd.pgm")],
        vec!["loeper", "--geometry", "euclidean", "--resolution", "48", "--out", &o("l.json"), "--raster", &o("l.pgm")],
        vec!["screening", "--resolution", "16", "--kkt-samples", "20", "--out", &o("rc.json"), "--raster", &o("rc.pgm")],
        vec!["welfare", "--resolution", "16", "--lambda", "3", "--welfare", "capped:0.3", "--out", &o("wf.json")],
        vec!["--config", &cfg],
    ]
    .into_iter()
    .map(|v| v.into_iter().map(String::from).collect())
    .collect();
    let mut stdout = Vec::new();
    for r in &runs {
        let (code, out) = mk(r);
        stdout.extend(format!("{code} ").into_bytes());
        stdout.extend(out);
    }
    let mut files: Vec<(String, Vec<u8>)> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect();
    files.sort();
    files.push(("stdout".into(), stdout));
    files
}

fn criterion_13(board: &mut Board) {
    let (d1, d2) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let (i1, i2) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let first = cli_round(i1.path(), d1.path());
    let second = cli_round(i2.path(), d2.path());
    let failures = String::from_utf8_lossy(&first.last().unwrap().1).matches("\"status\":\"error\"").count();
    let differing: Vec<&str> = first
        .iter()
        .zip(&second)
        .filter(|(a, b)| a != b)
        .map(|(a, _)| a.0.as_str())
        .collect();
    let ok = differing.is_empty() && first.len() == second.len() && failures == 0;
    board.record(
        13,
        "CLI determinism",
        ok,
        format!("13 subcommands plus a config run, {} files compared, differing {differing:?}, failed runs {failures}", first.len()),
    );
}

#[test]
fn acceptance() {
    let mut board = Board { lines: Vec::new(), failed: Vec::new() };
    criterion_1_and_5(&mut board);
    criterion_2(&mut board);
    criterion_3(&mut board);
    criterion_4(&mut board);
    criterion_6(&mut board);
    criterion_7(&mut board);
    criterion_8(&mut board);
    criterion_9(&mut board);
    criterion_10(&mut board);
    criterion_11(&mut board);
    criterion_12(&mut board);
    criterion_13(&mut board);
    board.lines.sort_by_key(|l| l[5..7].trim().parse::<usize>().unwrap());
    println!("---- summary");
    for l in &board.lines {
        println!("{l}");
    }
    assert!(board.failed.is_empty(), "failed criteria: {:?}", board.failed);
}
