use std::f64::consts::FRAC_PI_4;

use mk_core::cconvex::c_exponential_raw;
use mk_core::jet::{Jet, Scalar};
use mk_core::measures::{exp_north, Chart, CostFunction, Point};
use mk_core::mtw::*;
use mk_core::MkError;
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const D1: [f64; 5] = [1.0 / 12.0, -8.0 / 12.0, 0.0, 8.0 / 12.0, -1.0 / 12.0];
const D2: [f64; 5] = [-1.0 / 12.0, 16.0 / 12.0, -30.0 / 12.0, 16.0 / 12.0, -1.0 / 12.0];
const D0: [f64; 5] = [0.0, 0.0, 1.0, 0.0, 0.0];

// d^a/ds^a d^b/dt^b g(0,0) by product stencils, Richardson-combined over two halvings.
fn fd(g: &dyn Fn(f64, f64) -> f64, a: usize, b: usize, h: f64) -> f64 {
    let w = |k: usize| match k {
        0 => D0,
        1 => D1,
        _ => D2,
    };
    let one = |h: f64| {
        let (wa, wb) = (w(a), w(b));
        let mut acc = 0.0;
        for i in 0..5 {
            for j in 0..5 {
                if wa[i] != 0.0 && wb[j] != 0.0 {
                    acc += wa[i] * wb[j] * g((i as f64 - 2.0) * h, (j as f64 - 2.0) * h);
                }
            }
        }
        acc / h.powi((a + b) as i32)
    };
    let (f0, f1, f2) = (one(h), one(h / 2.0), one(h / 4.0));
    let (r0, r1) = ((16.0 * f1 - f0) / 15.0, (16.0 * f2 - f1) / 15.0);
    (64.0 * r1 - r0) / 63.0
}

fn add(x: &[f64], v: &[f64], s: f64) -> Vec<f64> {
    x.iter().zip(v).map(|(a, b)| a + s * b).collect()
}

fn unit(k: usize) -> Vec<f64> {
    let mut e = vec![0.0; 2];
    e[k] = 1.0;
    e
}

// Cross-curvature of an arbitrary planar cost by brute-force differences.
fn fd_cross(f: &dyn Fn(&[f64], &[f64]) -> f64, x: &[f64], y: &[f64], p: &[f64], q: &[f64]) -> f64 {
    let h = 0.12;
    let dir = |u: Vec<f64>, v: Vec<f64>| move |s: f64, t: f64| f(&add(x, &u, s), &add(y, &v, t));
    let fourth = fd(&dir(p.to_vec(), q.to_vec()), 2, 2, h);
    let mut m = DMatrix::zeros(2, 2);
    let mut a = DVector::zeros(2);
    let mut b = DVector::zeros(2);
    for i in 0..2 {
        for j in 0..2 {
            m[(i, j)] = fd(&dir(unit(i), unit(j)), 1, 1, h);
        }
        a[i] = fd(&dir(p.to_vec(), unit(i)), 2, 1, h);
        b[i] = fd(&dir(unit(i), q.to_vec()), 1, 2, h);
    }
    -fourth + (a.transpose() * m.try_inverse().unwrap() * b)[(0, 0)]
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-12)
}

#[test]
fn bilinear_and_quadratic_have_zero_cross() {
    let x = Point::euclidean(&[0.3, -0.2]);
    let y = Point::euclidean(&[-0.7, 0.9]);
    for c in [CostFunction::bilinear(), CostFunction::quadratic()] {
        assert_eq!(cross_curvature(&c, &x, &y, &[1.0, 0.5], &[-0.2, 1.0]).unwrap(), 0.0);
    }
}

#[test]
fn analytic_cross_matches_brute_force_differences() {
    let c = CostFunction::log_distance();
    let f = |x: &[f64], y: &[f64]| c.value_raw(x, y);
    let (x, y) = ([0.3, 0.1], [-0.5, 0.6]);
    let (p, q) = ([0.8, -0.3], [0.2, 0.9]);
    let lib = cross_curvature(&c, &Point::euclidean(&x), &Point::euclidean(&y), &p, &q).unwrap();
    let oracle = fd_cross(&f, &x, &y, &p, &q);
    assert!(rel(lib, oracle) < 1e-6, "{lib} vs {oracle}");
}

// Log-cost cross-curvature in the chart y = phi(z), differentiated exactly with jets.
fn jet_cross_log(phi: &dyn Fn(&[Jet]) -> Vec<Jet>, x: &[f64], z: &[f64], p: &[f64], q: &[f64]) -> f64 {
    let part = |u: &[f64], v: &[f64], a: usize, b: usize| {
        let xs: Vec<Jet> = x.iter().zip(u).map(|(xi, ui)| Jet::linear(*xi, *ui, 0.0)).collect();
        let zt: Vec<Jet> = z.iter().zip(v).map(|(zi, vi)| Jet::linear(*zi, 0.0, *vi)).collect();
        let y = phi(&zt);
        let mut d2 = Jet::cst(0.0);
        for (xi, yi) in xs.iter().zip(&y) {
            d2 = d2 + (*xi - *yi) * (*xi - *yi);
        }
        d2.ln().scale(-0.5).partial(a, b)
    };
    let fourth = part(p, q, 2, 2);
    let mut m = DMatrix::zeros(2, 2);
    let mut a = DVector::zeros(2);
    let mut b = DVector::zeros(2);
    for i in 0..2 {
        for j in 0..2 {
            m[(i, j)] = part(&unit(i), &unit(j), 1, 1);
        }
        a[i] = part(p, &unit(i), 2, 1);
        b[i] = part(&unit(i), q, 1, 2);
    }
    -fourth + (a.transpose() * m.try_inverse().unwrap() * b)[(0, 0)]
}

#[test]
fn cross_is_invariant_under_y_reparametrization() {
    let c = CostFunction::log_distance();
    let mut rng = ChaCha8Rng::seed_from_u64(19);
    for k in 0..20 {
        let x: Vec<f64> = (0..2).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let y0: Vec<f64> = (0..2).map(|_| rng.gen_range(-0.3..0.3) + 1.2).collect();
        let p: Vec<f64> = (0..2).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let q: Vec<f64> = (0..2).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let a = DMatrix::from_fn(2, 2, |i, j| if i == j { 1.0 } else { 0.0 } + rng.gen_range(-0.4..0.4));
        // linear charts for even k, a quadratic bend for odd k
        let bq: f64 = if k % 2 == 0 { 0.0 } else { rng.gen_range(-0.5..0.5) };
        let phi = |z: &[Jet]| {
            let lin = |r: usize| z[0].scale(a[(r, 0)]) + z[1].scale(a[(r, 1)]);
            vec![Jet::cst(y0[0]) + lin(0) + (z[0] * z[0]).scale(bq), Jet::cst(y0[1]) + lin(1) + (z[0] * z[1]).scale(bq)]
        };
        let qz = a.clone().try_inverse().unwrap() * DVector::from_column_slice(&q);
        let plain = cross_curvature(&c, &Point::euclidean(&x), &Point::euclidean(&y0), &p, &q).unwrap();
        let moved = jet_cross_log(&phi, &x, &[0.0, 0.0], &p, qz.as_slice());
        assert!(rel(plain, moved) < 1e-6, "{plain} vs {moved}");
        // dropping the correction term breaks invariance under the bent chart
        if bq.abs() > 0.1 {
            let naive = |phi: &dyn Fn(&[Jet]) -> Vec<Jet>, qv: &[f64]| {
                let xs: Vec<Jet> = x.iter().zip(&p).map(|(xi, ui)| Jet::linear(*xi, *ui, 0.0)).collect();
                let zt: Vec<Jet> = qv.iter().map(|vi| Jet::linear(0.0, 0.0, *vi)).collect();
                let y = phi(&zt);
                let mut d2 = Jet::cst(0.0);
                for (xi, yi) in xs.iter().zip(&y) {
                    d2 = d2 + (*xi - *yi) * (*xi - *yi);
                }
                -d2.ln().scale(-0.5).partial(2, 2)
            };
            let id = |z: &[Jet]| vec![Jet::cst(y0[0]) + z[0], Jet::cst(y0[1]) + z[1]];
            assert!(rel(naive(&id, &q), naive(&phi, qz.as_slice())) > 1e-4);
        }
    }
}

// -d^4/ds^2dt^2 c(x(s), y(t)) along a c-segment y(t) through y.
fn lemma_pair(c: &CostFunction, x: &[f64], y: &[f64], p: &[f64], w: &[f64]) -> (f64, f64) {
    let d0 = c.dx(x, y).unwrap();
    let yt = |t: f64| {
        let mom: Vec<f64> = d0.iter().zip(w).map(|(a, b)| -(a + t * b)).collect();
        c_exponential_raw(c, x, &mom).unwrap().y
    };
    let xp = Point::new(x.to_vec(), c.chart).unwrap();
    let g = |s: f64, t: f64| {
        let xs = xp.moved(&p.iter().map(|v| v * s).collect::<Vec<_>>()).unwrap();
        c.value_raw(xs.coords(), &yt(t))
    };
    let fourth = -fd(&g, 2, 2, 0.04);
    let m = c.dxy(x, y).unwrap();
    let ydot = m.try_inverse().unwrap() * DVector::from_column_slice(w);
    let cross = cross_curvature(c, &xp, &Point::new(y.to_vec(), c.chart).unwrap(), p, ydot.as_slice()).unwrap();
    (cross, fourth)
}

#[test]
fn non_tensorial_expression_on_c_segments() {
    let cases: Vec<(CostFunction, Vec<f64>, Vec<f64>)> = vec![
        (CostFunction::log_distance(), vec![0.1, 0.2], vec![1.0, -0.4]),
        (CostFunction::sphere_sq(), exp_north(&[0.2, 0.1]), exp_north(&[-0.5, 0.4])),
        (CostFunction::hyperbolic_sq(), vec![0.1, -0.2], vec![0.3, 0.25]),
        (CostFunction::power(3.0), vec![0.0, 0.1], vec![0.8, 0.5]),
    ];
    for (c, x, y) in cases {
        let (cross, fourth) = lemma_pair(&c, &x, &y, &[0.6, -0.8], &[0.3, 0.5]);
        assert!(rel(cross, fourth) < 1e-4, "{}: {cross} vs {fourth}", c.kind.name());
    }
}

#[test]
fn sphere_orthogonal_cross_is_positive() {
    let c = CostFunction::sphere_sq();
    let x = Point::new(exp_north(&[0.1, 0.0]), Chart::SphereEmbedded).unwrap();
    let y = Point::new(exp_north(&[-0.3, 0.2]), Chart::SphereEmbedded).unwrap();
    let p = [1.0, 0.3];
    let m = c.dxy(x.coords(), y.coords()).unwrap();
    let a = m.transpose() * DVector::from_column_slice(&p);
    let q = [-a[1], a[0]];
    assert!(orthogonality_defect(&c, &x, &y, &p, &q).unwrap().abs() < 1e-12);
    assert!(cross_curvature(&c, &x, &y, &p, &q).unwrap() > 0.0);
}

#[test]
fn degenerate_pairs_are_reported() {
    let c = CostFunction::sphere_sq();
    let x = Point::on_sphere(&[0.0, 0.0, 1.0]).unwrap();
    let y = Point::on_sphere(&[1.0, 0.0, 0.0]).unwrap();
    let r = cross_curvature(&c, &x, &y, &[0.0, 0.0], &[1.0, 0.0]);
    assert!(matches!(r, Err(MkError::Validation(_))));
    // the one-dimensional bilinear cost is fine, power 2 at coincident points is not
    let c = CostFunction::power(4.0);
    let z = Point::euclidean(&[0.2, 0.2]);
    let r = cross_curvature(&c, &z, &z, &[1.0, 0.0], &[0.0, 1.0]);
    assert!(matches!(r, Err(MkError::Degenerate(_))), "{r:?}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]
    #[test]
    fn cross_is_quadratic_and_swap_symmetric(
        x in prop::collection::vec(-0.6f64..0.6, 2),
        y in prop::collection::vec(-0.6f64..0.6, 2),
        p in prop::collection::vec(-1.0f64..1.0, 2),
        q in prop::collection::vec(-1.0f64..1.0, 2),
        lam in 0.1f64..3.0,
    ) {
        prop_assume!(p.iter().any(|v| v.abs() > 0.05) && q.iter().any(|v| v.abs() > 0.05));
        let c = CostFunction::hyperbolic_sq();
        let (Ok(xp), Ok(yp)) = (Point::new(x.clone(), Chart::PoincareDisk), Point::new(y.clone(), Chart::PoincareDisk)) else {
            return Ok(());
        };
        prop_assume!(xp.distance(&yp).unwrap() > 1e-2);
        let base = cross_curvature(&c, &xp, &yp, &p, &q).unwrap();
        let lp: Vec<f64> = p.iter().map(|v| v * lam).collect();
        let scaled = cross_curvature(&c, &xp, &yp, &lp, &q).unwrap();
        prop_assert!((scaled - lam * lam * base).abs() <= 1e-8 * (1.0 + scaled.abs()));
        let swapped = cross_curvature(&c, &yp, &xp, &q, &p).unwrap();
        prop_assert!((swapped - base).abs() <= 1e-8 * (1.0 + base.abs()));
    }
}

#[test]
fn curvature_verdicts() {
    let opts = CertifyOptions::default();
    let r = certify_conditions(&CostFunction::bilinear(), &Domain::EuclideanBox { dim: 2, lo: -1.0, hi: 1.0 }, &opts).unwrap();
    assert!(r.verdict("B3").unwrap().holds() && r.verdict("A3").unwrap().holds());
    assert!(!r.verdict("A3s").unwrap().holds());

    let r = certify_conditions(&CostFunction::sphere_sq(), &Domain::SphereCap { dim: 2, radius: FRAC_PI_4 }, &opts).unwrap();
    match r.verdict("A3s").unwrap() {
        Verdict::Holds { margin } => assert!(*margin > opts.margin),
        v => panic!("sphere A3s: {v:?}"),
    }
    assert!(r.verdict("A3").unwrap().holds());
    assert!(r.samples.iter().filter(|s| s.orthogonal).all(|s| s.orthogonality_defect.abs() < 1e-9));

    let r = certify_conditions(&CostFunction::hyperbolic_sq(), &Domain::PoincareBall { dim: 2, radius: 2.0 }, &opts).unwrap();
    match r.verdict("A3").unwrap() {
        Verdict::Violated { witness } => {
            assert!(witness.cross < 0.0 && witness.orthogonal);
            let x = Point::new(witness.x.clone(), Chart::PoincareDisk).unwrap();
            let y = Point::new(witness.y.clone(), Chart::PoincareDisk).unwrap();
            let again = cross_curvature(&CostFunction::hyperbolic_sq(), &x, &y, &witness.p, &witness.q).unwrap();
            assert_eq!(again, witness.cross);
        }
        v => panic!("hyperbolic A3: {v:?}"),
    }
}

#[test]
fn certification_is_reproducible() {
    let c = CostFunction::sphere_sq();
    let d = Domain::SphereCap { dim: 2, radius: 0.5 };
    let o = CertifyOptions { samples: 300, seed: 3, ..Default::default() };
    let a = serde_json::to_string(&certify_conditions(&c, &d, &o).unwrap()).unwrap();
    let b = serde_json::to_string(&certify_conditions(&c, &d, &o).unwrap()).unwrap();
    assert_eq!(a, b);
}

#[test]
fn h_signature_is_balanced() {
    let bil = metric_tensor_h(&CostFunction::bilinear(), &Point::euclidean(&[0.1, 0.2]), &Point::euclidean(&[0.3, -1.0])).unwrap();
    assert_eq!(bil.signature(), (2, 2));
    assert_eq!(bil.matrix[0][2], -1.0);
    assert!(bil.eigenvalues.iter().all(|v| (v.abs() - 1.0).abs() < 1e-14));
    let q = metric_tensor_h(&CostFunction::quadratic(), &Point::euclidean(&[0.0]), &Point::euclidean(&[2.0])).unwrap();
    assert_eq!(q.signature(), (1, 1));
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let c = CostFunction::sphere_sq();
    for _ in 0..50 {
        let x = exp_north(&[rng.gen_range(-0.7..0.7), rng.gen_range(-0.7..0.7)]);
        let y = exp_north(&[rng.gen_range(-0.7..0.7), rng.gen_range(-0.7..0.7)]);
        let h = metric_tensor_h(&c, &Point::new(x, Chart::SphereEmbedded).unwrap(), &Point::new(y, Chart::SphereEmbedded).unwrap()).unwrap();
        assert_eq!(h.signature(), (2, 2));
    }
}

#[test]
fn straight_segments_for_linear_costs() {
    let x0 = Point::euclidean(&[0.2, -0.4]);
    let y0 = Point::euclidean(&[1.0, 0.0]);
    let y1 = Point::euclidean(&[-0.5, 2.0]);
    for c in [CostFunction::bilinear(), CostFunction::quadratic()] {
        let seg = trace_c_segment(&c, &x0, &y0, &y1, 8).unwrap();
        for (t, y) in seg.ts.iter().zip(&seg.ys) {
            assert!((y.coords()[0] - (1.0 - 1.5 * t)).abs() < 1e-12);
            assert!((y.coords()[1] - 2.0 * t).abs() < 1e-12);
        }
        let grid: Vec<Point> = (0..100).map(|k| Point::euclidean(&[k as f64 / 50.0 - 1.0, 0.3])).collect();
        let rep = loeper_max_principle_check(&c, &seg, &grid);
        assert!(rep.max_defect <= 1e-12 && rep.convexity_defect <= 1e-9, "{rep:?}");
    }
}

#[test]
fn sphere_segment_follows_interpolated_momenta() {
    let c = CostFunction::sphere_sq();
    let x0 = Point::new(exp_north(&[0.0, 0.0]), Chart::SphereEmbedded).unwrap();
    let y0 = Point::new(exp_north(&[0.6, 0.1]), Chart::SphereEmbedded).unwrap();
    let y1 = Point::new(exp_north(&[-0.2, 0.7]), Chart::SphereEmbedded).unwrap();
    let seg = trace_c_segment(&c, &x0, &y0, &y1, 10).unwrap();
    assert!(seg.max_residual() <= 1e-9);
    let p0 = c.dx(x0.coords(), y0.coords()).unwrap();
    let p1 = c.dx(x0.coords(), y1.coords()).unwrap();
    for (t, y) in seg.ts.iter().zip(&seg.ys) {
        let mom: Vec<f64> = p0.iter().zip(&p1).map(|(a, b)| -((1.0 - t) * a + t * b)).collect();
        let oracle = c_exponential_raw(&c, x0.coords(), &mom).unwrap().y;
        assert!(y.coords().iter().zip(&oracle).all(|(a, b)| (a - b).abs() < 1e-9));
    }
}

fn cap_grid(radius: f64, n: usize) -> Vec<Point> {
    let mut out = Vec::new();
    for i in 0..n {
        for j in 0..n {
            let v = [radius * (2.0 * i as f64 / (n - 1) as f64 - 1.0), radius * (2.0 * j as f64 / (n - 1) as f64 - 1.0)];
            if v[0].hypot(v[1]) <= radius {
                out.push(Point::new(exp_north(&v), Chart::SphereEmbedded).unwrap());
            }
        }
    }
    out
}

#[test]
fn sphere_max_principle_holds() {
    let c = CostFunction::sphere_sq();
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let grid = cap_grid(FRAC_PI_4, 41);
    for _ in 0..5 {
        let mut pt = || {
            let v = [rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5)];
            Point::new(exp_north(&v), Chart::SphereEmbedded).unwrap()
        };
        let (x0, y0, y1) = (pt(), pt(), pt());
        let seg = trace_c_segment(&c, &x0, &y0, &y1, 32).unwrap();
        let rep = loeper_max_principle_check(&c, &seg, &grid);
        assert!(rep.max_defect <= 1e-8, "{rep:?}");
        assert_eq!(rep.skipped, 0);
    }
}

#[test]
fn hyperbolic_max_principle_fails() {
    let c = CostFunction::hyperbolic_sq();
    let x0 = Point::new(vec![0.0, 0.0], Chart::PoincareDisk).unwrap();
    let a = (0.5f64).tanh();
    let y0 = Point::new(vec![a * 1.0f64.cos(), a * 1.0f64.sin()], Chart::PoincareDisk).unwrap();
    let y1 = Point::new(vec![a * 1.0f64.cos(), -a * 1.0f64.sin()], Chart::PoincareDisk).unwrap();
    let seg = trace_c_segment(&c, &x0, &y0, &y1, 32).unwrap();
    let grid: Vec<Point> = (0..40).map(|k| Point::new(vec![0.02 * k as f64 + 0.1, 0.0], Chart::PoincareDisk).unwrap()).collect();
    let rep = loeper_max_principle_check(&c, &seg, &grid);
    assert!(rep.max_defect > 1e-3, "{rep:?}");
    assert!(rep.convexity_defect > 0.0);
}
