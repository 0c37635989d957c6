use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{MkError, Result};
use crate::kantorovich::{network_simplex, RawSolution};
use crate::measures::{Chart, GridMeasure};

#[derive(Clone, Copy, Debug)]
pub struct IsoperimetricOptions {
    /// Atoms per axis in the transport atomization.
    pub coarse: usize,
    /// Nearest atoms used for the local affine fit of the map on the contour.
    pub fit_neighbours: usize,
    /// Relative slack allowed in each inequality of the chain.
    pub tolerance: f64,
}

impl Default for IsoperimetricOptions {
    fn default() -> Self {
        IsoperimetricOptions { coarse: 40, fit_neighbours: 12, tolerance: 0.01 }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct IsoperimetricReport {
    pub area_before_rescale: f64,
    pub scale: f64,
    /// `n Vol(M+)`, i.e. `2 pi` after rescaling.
    pub lhs: f64,
    /// Boundary flux of the transport map.
    pub flux: f64,
    /// Perimeter of the rescaled shape.
    pub rhs: f64,
    /// `rhs / lhs`; equals perimeter over `2 pi`.
    pub ratio: f64,
    pub flux_ratio: f64,
    pub atoms: usize,
    pub contour_segments: usize,
    pub chain_holds: bool,
}

/// Coverage-fraction grid of `inside`, supersampled `ss x ss` per cell.
pub fn coverage_grid(
    bounds: [(f64, f64); 2],
    res: usize,
    ss: usize,
    inside: impl Fn(f64, f64) -> bool,
) -> Result<GridMeasure> {
    let hx = (bounds[0].1 - bounds[0].0) / res as f64;
    let hy = (bounds[1].1 - bounds[1].0) / res as f64;
    let mut dens = vec![0.0; res * res];
    for i in 0..res {
        for j in 0..res {
            let mut hits = 0usize;
            for a in 0..ss {
                for b in 0..ss {
                    let x = bounds[0].0 + (i as f64 + (a as f64 + 0.5) / ss as f64) * hx;
                    let y = bounds[1].0 + (j as f64 + (b as f64 + 0.5) / ss as f64) * hy;
                    if inside(x, y) {
                        hits += 1;
                    }
                }
            }
            dens[i * res + j] = hits as f64 / (ss * ss) as f64;
        }
    }
    let area: f64 = dens.iter().sum::<f64>() * hx * hy;
    if area == 0.0 {
        return Err(MkError::Validation("shape covers no cell".into()));
    }
    dens.iter_mut().for_each(|d| *d /= area);
    GridMeasure::new(&bounds, &[res, res], dens, Chart::Euclidean)
}

/// Unit disk on a padded box.
pub fn disk_shape(res: usize) -> Result<GridMeasure> {
    coverage_grid([(-1.25, 1.25), (-1.25, 1.25)], res, 8, |x, y| x * x + y * y <= 1.0)
}

/// Axis-aligned rectangle of area `pi` with the given aspect ratio, on a square padded box.
pub fn rectangle_shape(aspect: f64, res: usize) -> Result<GridMeasure> {
    let b = (PI / aspect).sqrt();
    let a = aspect * b;
    let half = 0.5 * a.max(b) * 1.15;
    coverage_grid([(-half, half), (-half, half)], res, 8, |x, y| {
        x.abs() <= 0.5 * a && y.abs() <= 0.5 * b
    })
}

struct Contour {
    length: f64,
    // midpoint, unit outward normal, length
    segments: Vec<([f64; 2], [f64; 2], f64)>,
}

// Marching squares at level 0.5 over cell-centre values.
fn contour(cov: &[f64], res: usize, lo: [f64; 2], h: [f64; 2]) -> Contour {
    let at = |i: usize, j: usize| cov[i * res + j];
    let pos = |i: f64, j: f64| [lo[0] + (i + 0.5) * h[0], lo[1] + (j + 0.5) * h[1]];
    let mut segments = Vec::new();
    let mut length = 0.0;
    for i in 0..res - 1 {
        for j in 0..res - 1 {
            let v = [at(i, j), at(i + 1, j), at(i + 1, j + 1), at(i, j + 1)];
            let corners = [(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)];
            let mut pts: Vec<[f64; 2]> = Vec::with_capacity(4);
            for e in 0..4 {
                let (a, b) = (v[e], v[(e + 1) % 4]);
                if (a >= 0.5) != (b >= 0.5) {
                    let t = (0.5 - a) / (b - a);
                    let (ca, cb) = (corners[e], corners[(e + 1) % 4]);
                    pts.push(pos(
                        i as f64 + ca.0 + t * (cb.0 - ca.0),
                        j as f64 + ca.1 + t * (cb.1 - ca.1),
                    ));
                }
            }
            // gradient of the bilinear interpolant at the cell centre
            let gx = 0.5 * ((v[1] + v[2]) - (v[0] + v[3])) / h[0];
            let gy = 0.5 * ((v[2] + v[3]) - (v[0] + v[1])) / h[1];
            let pairs: Vec<([f64; 2], [f64; 2])> = match pts.len() {
                2 => vec![(pts[0], pts[1])],
                4 => {
                    // saddle: pair by the centre value
                    let centre = 0.25 * (v[0] + v[1] + v[2] + v[3]);
                    if (centre >= 0.5) == (v[0] >= 0.5) {
                        vec![(pts[0], pts[3]), (pts[1], pts[2])]
                    } else {
                        vec![(pts[0], pts[1]), (pts[2], pts[3])]
                    }
                }
                _ => vec![],
            };
            for (a, b) in pairs {
                let dx = b[0] - a[0];
                let dy = b[1] - a[1];
                let len = (dx * dx + dy * dy).sqrt();
                if len == 0.0 {
                    continue;
                }
                let mut n = [dy / len, -dx / len];
                if n[0] * gx + n[1] * gy > 0.0 {
                    n = [-n[0], -n[1]];
                }
                length += len;
                segments.push(([0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])], n, len));
            }
        }
    }
    Contour { length, segments }
}

// Block atomization: mass-weighted centroids of `block x block` cell groups.
fn atomize(cov: &[f64], res: usize, lo: [f64; 2], h: [f64; 2], block: usize) -> (Vec<[f64; 2]>, Vec<f64>) {
    let nb = res.div_ceil(block);
    let mut atoms = Vec::new();
    let mut mass = Vec::new();
    for bi in 0..nb {
        for bj in 0..nb {
            let (mut m, mut sx, mut sy) = (0.0, 0.0, 0.0);
            for i in bi * block..((bi + 1) * block).min(res) {
                for j in bj * block..((bj + 1) * block).min(res) {
                    let w = cov[i * res + j];
                    if w > 0.0 {
                        m += w;
                        sx += w * (lo[0] + (i as f64 + 0.5) * h[0]);
                        sy += w * (lo[1] + (j as f64 + 0.5) * h[1]);
                    }
                }
            }
            if m > 0.0 {
                atoms.push([sx / m, sy / m]);
                mass.push(m);
            }
        }
    }
    let total: f64 = mass.iter().sum();
    mass.iter_mut().for_each(|v| *v /= total);
    (atoms, mass)
}

fn affine_fit(pts: &[[f64; 2]], vals: &[[f64; 2]], at: [f64; 2]) -> [f64; 2] {
    // least squares for g(z) = b + A (z - at); returns b
    let mut ata = nalgebra::Matrix3::<f64>::zeros();
    let mut atb = nalgebra::Matrix3x2::<f64>::zeros();
    for (p, v) in pts.iter().zip(vals) {
        let r = nalgebra::Vector3::new(1.0, p[0] - at[0], p[1] - at[1]);
        ata += r * r.transpose();
        for c in 0..2 {
            for k in 0..3 {
                atb[(k, c)] += r[k] * v[c];
            }
        }
    }
    match ata.try_inverse() {
        Some(inv) => {
            let sol = inv * atb;
            [sol[(0, 0)], sol[(0, 1)]]
        }
        None => {
            let n = vals.len() as f64;
            [vals.iter().map(|v| v[0]).sum::<f64>() / n, vals.iter().map(|v| v[1]).sum::<f64>() / n]
        }
    }
}

/// Evaluates `2 Vol <= flux of the Brenier map <= perimeter` for a planar shape.
pub fn isoperimetric_check(shape: &GridMeasure) -> Result<IsoperimetricReport> {
    isoperimetric_check_with(shape, &IsoperimetricOptions::default())
}

pub fn isoperimetric_check_with(shape: &GridMeasure, opts: &IsoperimetricOptions) -> Result<IsoperimetricReport> {
    if shape.dim() != 2 || shape.chart() != Chart::Euclidean || shape.shape()[0] != shape.shape()[1] {
        return Err(MkError::Validation("isoperimetric check needs a square planar grid".into()));
    }
    let res = shape.shape()[0];
    if res < 4 {
        return Err(MkError::Validation("grid too coarse".into()));
    }
    let maxd = shape.density().iter().copied().fold(0.0, f64::max);
    let cov: Vec<f64> = shape.density().iter().map(|d| d / maxd).collect();
    let b = shape.bounds();
    let h0 = [shape.spacing(0), shape.spacing(1)];
    let area: f64 = cov.iter().sum::<f64>() * h0[0] * h0[1];
    let scale = if ((area - PI) / PI).abs() > 0.01 { (PI / area).sqrt() } else { 1.0 };
    let lo = [b[0].0 * scale, b[1].0 * scale];
    let h = [h0[0] * scale, h0[1] * scale];
    let vol = area * scale * scale;
    let ct = contour(&cov, res, lo, h);
    if ct.segments.is_empty() {
        return Err(MkError::Validation("shape has no boundary inside the box".into()));
    }

    let block = res.div_ceil(opts.coarse).max(1);
    let (src, a) = atomize(&cov, res, lo, h, block);
    // unit disk on the same (rescaled) lattice
    let disk: Vec<f64> = (0..res * res)
        .map(|k| {
            let (i, j) = (k / res, k % res);
            let ss = 8;
            let mut hits = 0;
            for p in 0..ss {
                for q in 0..ss {
                    let x = lo[0] + (i as f64 + (p as f64 + 0.5) / ss as f64) * h[0];
                    let y = lo[1] + (j as f64 + (q as f64 + 0.5) / ss as f64) * h[1];
                    if x * x + y * y <= 1.0 {
                        hits += 1;
                    }
                }
            }
            hits as f64 / (ss * ss) as f64
        })
        .collect();
    let (dst, bw) = atomize(&disk, res, lo, h, block);
    let (m, n) = (src.len(), dst.len());
    let mut cost = Vec::with_capacity(m * n);
    for s in &src {
        for t in &dst {
            cost.push(0.5 * ((s[0] - t[0]).powi(2) + (s[1] - t[1]).powi(2)));
        }
    }
    let RawSolution { plan, .. } = network_simplex(&cost, &a, &bw)?;
    let mut g = vec![[0.0; 2]; m];
    for &(i, j, w) in &plan {
        g[i][0] += w * dst[j][0];
        g[i][1] += w * dst[j][1];
    }
    for i in 0..m {
        g[i][0] /= a[i];
        g[i][1] /= a[i];
    }
    let kn = opts.fit_neighbours.min(m).max(1);
    let mut flux = 0.0;
    for (mid, nrm, len) in &ct.segments {
        let mut idx: Vec<(f64, usize)> = src
            .iter()
            .enumerate()
            .map(|(i, s)| ((s[0] - mid[0]).powi(2) + (s[1] - mid[1]).powi(2), i))
            .collect();
        idx.select_nth_unstable_by(kn - 1, |p, q| p.0.total_cmp(&q.0));
        idx.truncate(kn);
        idx.sort_by(|p, q| p.0.total_cmp(&q.0).then(p.1.cmp(&q.1)));
        let pts: Vec<[f64; 2]> = idx.iter().map(|(_, i)| src[*i]).collect();
        let vals: Vec<[f64; 2]> = idx.iter().map(|(_, i)| g[*i]).collect();
        let gm = affine_fit(&pts, &vals, *mid);
        flux += (gm[0] * nrm[0] + gm[1] * nrm[1]) * len;
    }
    let lhs = 2.0 * vol;
    let rhs = ct.length;
    Ok(IsoperimetricReport {
        area_before_rescale: area,
        scale,
        lhs,
        flux,
        rhs,
        ratio: rhs / lhs,
        flux_ratio: flux / lhs,
        atoms: m,
        contour_segments: ct.segments.len(),
        chain_holds: lhs <= flux * (1.0 + opts.tolerance) && flux <= rhs * (1.0 + opts.tolerance),
    })
}
