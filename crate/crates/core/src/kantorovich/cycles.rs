use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::TransportSolution;
use crate::measures::{CostFunction, CostKind, Point};

pub const CYCLE_TOL: f64 = 1e-8;

#[derive(Clone, Copy, Debug)]
pub struct CycleOptions {
    pub k_max: usize,
    /// Random subsets per `k` once exhaustive enumeration is too large.
    pub trials: usize,
    /// Largest number of `k`-subsets enumerated exhaustively.
    pub exhaustive_cap: u64,
    pub seed: u64,
}

impl Default for CycleOptions {
    fn default() -> Self {
        CycleOptions { k_max: 3, trials: 5000, exhaustive_cap: 5000, seed: 7 }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct KCycleReport {
    pub k: usize,
    pub exhaustive: bool,
    pub subsets_tested: u64,
    pub worst: f64,
    /// Support indices and the permutation achieving `worst`.
    pub witness: Option<(Vec<usize>, Vec<usize>)>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CycleReport {
    pub per_k: Vec<KCycleReport>,
    pub worst: f64,
    pub violations: u64,
    pub passed: bool,
    pub seed: u64,
}

fn permutations(k: usize) -> Vec<Vec<usize>> {
    fn rec(cur: &mut Vec<usize>, used: &mut Vec<bool>, out: &mut Vec<Vec<usize>>) {
        let k = used.len();
        if cur.len() == k {
            if cur.iter().enumerate().any(|(i, &s)| i != s) {
                out.push(cur.clone());
            }
            return;
        }
        for s in 0..k {
            if !used[s] {
                used[s] = true;
                cur.push(s);
                rec(cur, used, out);
                cur.pop();
                used[s] = false;
            }
        }
    }
    let mut out = Vec::new();
    rec(&mut Vec::new(), &mut vec![false; k], &mut out);
    out
}

fn binom(n: u64, k: u64) -> u64 {
    let mut r: u128 = 1;
    for i in 0..k {
        r = r * (n - i) as u128 / (i + 1) as u128;
        if r > u64::MAX as u128 {
            return u64::MAX;
        }
    }
    r as u64
}

// Advances `idx` to the next k-combination of 0..n in lexicographic order.
fn next_combination(idx: &mut [usize], n: usize) -> bool {
    let k = idx.len();
    let mut i = k;
    while i > 0 {
        i -= 1;
        if idx[i] < n - k + i {
            idx[i] += 1;
            for j in i + 1..k {
                idx[j] = idx[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

fn unrank_first(n: usize, k: usize, mut rank: u64) -> Vec<usize> {
    let mut out = Vec::with_capacity(k);
    let mut start = 0usize;
    for slot in 0..k {
        let remaining = (k - slot - 1) as u64;
        let mut v = start;
        loop {
            let count = binom((n - v - 1) as u64, remaining);
            if rank < count {
                break;
            }
            rank -= count;
            v += 1;
        }
        out.push(v);
        start = v + 1;
    }
    out
}

/// Worst `sum c(x_i,y_i) - sum c(x_i,y_sigma(i))` over subsets of support pairs.
pub fn cyclical_monotonicity_of(pairs: &[(Point, Point)], c: &CostFunction, opts: &CycleOptions) -> CycleReport {
    let s = pairs.len();
    // support-restricted cost matrix
    let cm: Vec<f64> = (0..s * s)
        .into_par_iter()
        .map(|ab| c.value_raw(pairs[ab / s].0.coords(), pairs[ab % s].1.coords()))
        .collect();
    let diag: Vec<f64> = (0..s).map(|a| cm[a * s + a]).collect();
    let scale: f64 = 1.0 + diag.iter().map(|v| v.abs()).fold(0.0, f64::max);
    let tol = CYCLE_TOL * scale;
    let eval = |sub: &[usize], perms: &[Vec<usize>]| -> (f64, usize) {
        let base: f64 = sub.iter().map(|&a| diag[a]).sum();
        let mut best = (f64::NEG_INFINITY, 0);
        for (pi, p) in perms.iter().enumerate() {
            let mut other = 0.0;
            for (slot, &a) in sub.iter().enumerate() {
                other += cm[a * s + sub[p[slot]]];
            }
            let v = base - other;
            if v > best.0 {
                best = (v, pi);
            }
        }
        best
    };
    let mut per_k = Vec::new();
    let mut violations = 0u64;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    for k in 2..=opts.k_max.min(s) {
        let perms = permutations(k);
        let total = binom(s as u64, k as u64);
        let exhaustive = total <= opts.exhaustive_cap;
        let (worst, witness, tested, bad) = if exhaustive {
            // split the lexicographic order into chunks by first index
            let chunks = 256u64.min(total).max(1);
            let per = total.div_ceil(chunks);
            let results: Vec<(f64, Option<(Vec<usize>, Vec<usize>)>, u64)> = (0..chunks)
                .into_par_iter()
                .map(|ch| {
                    let lo = ch * per;
                    let hi = ((ch + 1) * per).min(total);
                    let mut best: (f64, Option<(Vec<usize>, Vec<usize>)>) = (f64::NEG_INFINITY, None);
                    let mut bad = 0u64;
                    if lo >= hi {
                        return (best.0, best.1, 0);
                    }
                    let mut idx = unrank_first(s, k, lo);
                    for r in lo..hi {
                        let (v, pi) = eval(&idx, &perms);
                        if v > tol {
                            bad += 1;
                        }
                        if v > best.0 {
                            best = (v, Some((idx.clone(), perms[pi].clone())));
                        }
                        if r + 1 < hi {
                            next_combination(&mut idx, s);
                        }
                    }
                    (best.0, best.1, bad)
                })
                .collect();
            let mut worst = f64::NEG_INFINITY;
            let mut wit = None;
            let mut bad = 0;
            for (v, w, b) in results {
                bad += b;
                if v > worst {
                    worst = v;
                    wit = w;
                }
            }
            (worst, wit, total, bad)
        } else {
            let subsets: Vec<Vec<usize>> = (0..opts.trials)
                .map(|_| {
                    let mut v = sample(&mut rng, s, k).into_vec();
                    v.sort_unstable();
                    v
                })
                .collect();
            let results: Vec<(f64, usize)> = subsets.par_iter().map(|sub| eval(sub, &perms)).collect();
            let mut worst = f64::NEG_INFINITY;
            let mut wit = None;
            let mut bad = 0;
            for (sub, (v, pi)) in subsets.iter().zip(results) {
                if v > tol {
                    bad += 1;
                }
                if v > worst {
                    worst = v;
                    wit = Some((sub.clone(), perms[pi].clone()));
                }
            }
            (worst, wit, opts.trials as u64, bad)
        };
        violations += bad;
        per_k.push(KCycleReport { k, exhaustive, subsets_tested: tested, worst, witness });
    }
    let worst = per_k.iter().map(|r| r.worst).fold(0.0f64, f64::max);
    CycleReport { per_k, worst, violations, passed: violations == 0, seed: opts.seed }
}

fn support_pairs(sol: &TransportSolution) -> Vec<(Point, Point)> {
    sol.plan
        .iter()
        .map(|e| (sol.mu_plus.atoms()[e.i].clone(), sol.mu_minus.atoms()[e.j].clone()))
        .collect()
}

pub fn check_cyclical_monotonicity(sol: &TransportSolution, c: &CostFunction, opts: &CycleOptions) -> CycleReport {
    cyclical_monotonicity_of(&support_pairs(sol), c, opts)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SpacelikeReport {
    pub pairs_tested: u64,
    /// Largest `c(x0,y0)+c(x1,y1)-c(x0,y1)-c(x1,y0)`.
    pub worst_defect: f64,
    /// Smallest `<dx, dy>` (bilinear cost only).
    pub min_inner: Option<f64>,
    /// Largest `|dw| - |dz|` in rotated coordinates (bilinear cost only).
    pub worst_lipschitz: Option<f64>,
    pub passed: bool,
}

pub fn minty_spacelike_of(pairs: &[(Point, Point)], c: &CostFunction) -> SpacelikeReport {
    let s = pairs.len();
    let bil = c.kind == CostKind::Bilinear;
    let rows: Vec<(f64, f64, f64)> = (0..s)
        .into_par_iter()
        .map(|a| {
            let (x0, y0) = (&pairs[a].0, &pairs[a].1);
            let mut worst = f64::NEG_INFINITY;
            let mut inner = f64::INFINITY;
            let mut lip = f64::NEG_INFINITY;
            for (x1, y1) in &pairs[a + 1..] {
                let (x0c, y0c, x1c, y1c) = (x0.coords(), y0.coords(), x1.coords(), y1.coords());
                let d = c.value_raw(x0c, y0c) + c.value_raw(x1c, y1c)
                    - c.value_raw(x0c, y1c)
                    - c.value_raw(x1c, y0c);
                worst = worst.max(d);
                if bil {
                    let dx: Vec<f64> = x1c.iter().zip(x0c).map(|(a, b)| a - b).collect();
                    let dy: Vec<f64> = y1c.iter().zip(y0c).map(|(a, b)| a - b).collect();
                    inner = inner.min(dx.iter().zip(&dy).map(|(a, b)| a * b).sum());
                    // z = (x + y)/sqrt2, w = (y - x)/sqrt2
                    let dz: f64 = dx.iter().zip(&dy).map(|(a, b)| (a + b) * (a + b)).sum::<f64>().sqrt();
                    let dw: f64 = dx.iter().zip(&dy).map(|(a, b)| (b - a) * (b - a)).sum::<f64>().sqrt();
                    lip = lip.max((dw - dz) / std::f64::consts::SQRT_2);
                }
            }
            (worst, inner, lip)
        })
        .collect();
    let worst = rows.iter().map(|r| r.0).fold(f64::NEG_INFINITY, f64::max);
    let inner = rows.iter().map(|r| r.1).fold(f64::INFINITY, f64::min);
    let lip = rows.iter().map(|r| r.2).fold(f64::NEG_INFINITY, f64::max);
    let tested = (s * s.saturating_sub(1) / 2) as u64;
    let worst = if tested == 0 { 0.0 } else { worst };
    let (min_inner, worst_lipschitz) = if bil && tested > 0 { (Some(inner), Some(lip)) } else { (None, None) };
    let passed = worst <= CYCLE_TOL && worst_lipschitz.is_none_or(|l| l <= CYCLE_TOL);
    SpacelikeReport { pairs_tested: tested, worst_defect: worst, min_inner, worst_lipschitz, passed }
}

pub fn minty_spacelike_check(sol: &TransportSolution, c: &CostFunction) -> SpacelikeReport {
    minty_spacelike_of(&support_pairs(sol), c)
}
