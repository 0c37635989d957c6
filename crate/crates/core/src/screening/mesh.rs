use crate::cconvex::Lattice;
use crate::error::{MkError, Result};

use super::problem::{ProductCost, ScreeningProblem};

/// Linear element: gradient `g_a = sum_v coef[a][v] u[nodes[v]]`.
#[derive(Clone, Debug)]
pub(crate) struct Element {
    pub nodes: [usize; 3],
    pub coef: [[f64; 3]; 2],
    pub nv: usize,
    pub weight: f64,
    pub centre: [f64; 2],
}

/// `sum_v coef[v] u[nodes[v]] >= rhs`.
#[derive(Clone, Debug)]
pub(crate) struct Row {
    pub nodes: [usize; 3],
    pub coef: [f64; 3],
    pub nv: usize,
    pub rhs: f64,
}

impl Row {
    #[inline]
    pub fn eval(&self, u: &[f64]) -> f64 {
        (0..self.nv).map(|v| self.coef[v] * u[self.nodes[v]]).sum()
    }
}

/// Node values on the agent grid with P1 elements and the convexity cone.
#[derive(Clone, Debug)]
pub(crate) struct Mesh {
    pub dim: usize,
    pub lattice: Lattice,
    pub x: Vec<[f64; 2]>,
    pub mass: Vec<f64>,
    pub lower: Vec<f64>,
    pub elements: Vec<Element>,
    /// The first `x.len()` rows are the bounds `u >= u_null`.
    pub rows: Vec<Row>,
    pub directions: Vec<[i64; 2]>,
    pub bandwidth: usize,
}

impl Mesh {
    pub fn new(problem: &ScreeningProblem, diagonals: bool) -> Result<Mesh> {
        problem.validate()?;
        let g = &problem.agents;
        let lattice = Lattice::of(g);
        let dim = lattice.dim();
        let shape = lattice.shape.clone();
        if shape.iter().any(|&s| s < 3) {
            return Err(MkError::Validation("screening grids need at least 3 nodes per axis".into()));
        }
        let n = lattice.len();
        let x: Vec<[f64; 2]> = (0..n)
            .map(|k| {
                let c = lattice.node(k);
                [c[0], if dim == 2 { c[1] } else { 0.0 }]
            })
            .collect();
        let mass: Vec<f64> = (0..n).map(|k| g.cell_mass(k)).collect();
        let lower: Vec<f64> = (0..n).map(|k| problem.reservation(&x[k][..dim])).collect();
        let h: Vec<f64> = (0..dim).map(|a| lattice.spacing(a)).collect();
        let density = g.density();
        // interval [i, i+1] also covers the half cell beyond an end node
        let span = |a: usize, i: usize| h[a] * (1.0 + 0.5 * (i == 0) as u8 as f64 + 0.5 * (i + 2 == shape[a]) as u8 as f64);
        let mut elements = Vec::new();
        if dim == 1 {
            for i in 0..shape[0] - 1 {
                let w = 0.5 * (density[i] + density[i + 1]) * span(0, i);
                elements.push(Element {
                    nodes: [i, i + 1, 0],
                    coef: [[-1.0 / h[0], 1.0 / h[0], 0.0], [0.0; 3]],
                    nv: 2,
                    weight: w,
                    centre: [0.5 * (x[i][0] + x[i + 1][0]), 0.0],
                });
            }
        } else {
            let ny = shape[1];
            let (ix, iy) = (1.0 / h[0], 1.0 / h[1]);
            for i in 0..shape[0] - 1 {
                for j in 0..ny - 1 {
                    let k00 = i * ny + j;
                    let (k10, k01, k11) = (k00 + ny, k00 + 1, k00 + ny + 1);
                    let w = 0.25 * (density[k00] + density[k10] + density[k01] + density[k11]) * span(0, i) * span(1, j);
                    // both diagonal splits, a quarter of the square each
                    let tris: [([usize; 3], [[f64; 3]; 2]); 4] = [
                        ([k00, k10, k11], [[-ix, ix, 0.0], [0.0, -iy, iy]]),
                        ([k00, k01, k11], [[0.0, -ix, ix], [-iy, iy, 0.0]]),
                        ([k00, k10, k01], [[-ix, ix, 0.0], [-iy, 0.0, iy]]),
                        ([k10, k01, k11], [[0.0, -ix, ix], [-iy, 0.0, iy]]),
                    ];
                    for (nodes, coef) in tris {
                        let c0 = (x[nodes[0]][0] + x[nodes[1]][0] + x[nodes[2]][0]) / 3.0;
                        let c1 = (x[nodes[0]][1] + x[nodes[1]][1] + x[nodes[2]][1]) / 3.0;
                        elements.push(Element { nodes, coef, nv: 3, weight: 0.25 * w, centre: [c0, c1] });
                    }
                }
            }
        }
        let directions: Vec<[i64; 2]> = match (dim, diagonals) {
            (1, _) => vec![[1, 0]],
            (_, false) => vec![[1, 0], [0, 1]],
            _ => vec![[1, 0], [0, 1], [1, 1], [1, -1]],
        };
        let mut rows: Vec<Row> =
            (0..n).map(|k| Row { nodes: [k, 0, 0], coef: [1.0, 0.0, 0.0], nv: 1, rhs: lower[k] }).collect();
        let mut bandwidth = 1;
        let strides: Vec<i64> = if dim == 1 { vec![1] } else { vec![shape[1] as i64, 1] };
        for dir in &directions {
            for k in 0..n {
                let idx = lattice.multi_index(k);
                let ok = (0..dim).all(|a| {
                    let i = idx[a] as i64;
                    i - dir[a] >= 0 && i + dir[a] < shape[a] as i64 && i + dir[a] >= 0 && i - dir[a] < shape[a] as i64
                });
                if !ok {
                    continue;
                }
                let off: i64 = (0..dim).map(|a| dir[a] * strides[a]).sum();
                let (lo, hi) = ((k as i64 - off) as usize, (k as i64 + off) as usize);
                bandwidth = bandwidth.max(lo.abs_diff(hi));
                rows.push(Row { nodes: [lo, k, hi], coef: [1.0, -2.0, 1.0], nv: 3, rhs: 0.0 });
            }
        }
        for e in &elements {
            let ns = &e.nodes[..e.nv];
            let span = ns.iter().max().unwrap() - ns.iter().min().unwrap();
            bandwidth = bandwidth.max(span);
        }
        Ok(Mesh { dim, lattice, x, mass, lower, elements, rows, directions, bandwidth })
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    #[inline]
    pub fn gradient(&self, e: &Element, u: &[f64]) -> [f64; 2] {
        let mut g = [0.0; 2];
        for a in 0..self.dim {
            g[a] = (0..e.nv).map(|v| e.coef[a][v] * u[e.nodes[v]]).sum();
        }
        g
    }

    /// Smoothed bilinear losses: `sum_T w (a(g) - x.g) + sum_k m_k u_k`.
    pub fn energy(&self, cost: &ProductCost, u: &[f64]) -> f64 {
        let d = self.dim;
        let mut s = 0.0;
        for e in &self.elements {
            let g = self.gradient(e, u);
            let (a, _, _) = cost.smooth(&g[..d]);
            s += e.weight * (a - (0..d).map(|i| e.centre[i] * g[i]).sum::<f64>());
        }
        s + self.mass.iter().zip(u).map(|(m, v)| m * v).sum::<f64>()
    }

    pub fn energy_gradient(&self, cost: &ProductCost, u: &[f64]) -> Vec<f64> {
        let d = self.dim;
        let mut out = self.mass.clone();
        for e in &self.elements {
            let g = self.gradient(e, u);
            let (_, da, _) = cost.smooth(&g[..d]);
            for v in 0..e.nv {
                let c: f64 = (0..d).map(|i| e.coef[i][v] * (da[i] - e.centre[i])).sum();
                out[e.nodes[v]] += e.weight * c;
            }
        }
        out
    }

    /// Smallest slack among the convexity rows, `+inf` when there are none.
    pub fn convexity_defect(&self, u: &[f64]) -> f64 {
        self.rows[self.len()..].iter().map(|r| r.eval(u)).fold(f64::INFINITY, f64::min)
    }
}
