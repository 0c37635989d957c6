//! Primal network simplex for the balanced transportation problem.
//!
//! Follows the classic artificial-root start: every supply node hangs off the
//! root by a zero-cost arc, every demand node by an arc of prohibitive cost.
//! Entering arcs come from block-search pricing, leaving arcs from the strongly
//! feasible tree rule, which rules out cycling on degenerate pivots.

use crate::error::{MkError, Result};

#[derive(Clone, Debug)]
pub struct RawSolution {
    /// `(i, j, mass)` for every arc carrying positive flow, sorted.
    pub plan: Vec<(usize, usize, f64)>,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub pivots: usize,
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum State {
    Tree,
    Lower,
}

struct Simplex<'a> {
    m: usize,
    n: usize,
    cost: &'a [f64],
    art_cost: f64,
    flow: Vec<f64>,
    state: Vec<State>,
    // per node (root = m + n)
    parent: Vec<usize>,
    pred: Vec<usize>,
    up: Vec<bool>,
    depth: Vec<usize>,
    pi: Vec<f64>,
    next_arc: usize,
    block: usize,
}

const NONE: usize = usize::MAX;

impl<'a> Simplex<'a> {
    fn root(&self) -> usize {
        self.m + self.n
    }

    fn n_real(&self) -> usize {
        self.m * self.n
    }

    fn ends(&self, a: usize) -> (usize, usize) {
        let nr = self.n_real();
        if a < nr {
            (a / self.n, self.m + a % self.n)
        } else {
            let u = a - nr;
            if u < self.m {
                (u, self.root())
            } else {
                (self.root(), u)
            }
        }
    }

    fn arc_cost(&self, a: usize) -> f64 {
        let nr = self.n_real();
        if a < nr {
            self.cost[a]
        } else if a - nr < self.m {
            0.0
        } else {
            self.art_cost
        }
    }

    fn reduced(&self, a: usize) -> f64 {
        let (s, t) = self.ends(a);
        self.arc_cost(a) + self.pi[s] - self.pi[t]
    }

    /// Recomputes parent, depth, orientation and potentials from the basic arcs.
    fn rebuild(&mut self, tree_arcs: &[usize]) {
        let nn = self.m + self.n + 1;
        let mut head = vec![NONE; nn];
        let mut next = vec![NONE; 2 * tree_arcs.len()];
        let mut other = vec![0usize; 2 * tree_arcs.len()];
        let mut arc_of = vec![0usize; 2 * tree_arcs.len()];
        for (k, &a) in tree_arcs.iter().enumerate() {
            let (s, t) = self.ends(a);
            for (slot, (from, to)) in [(2 * k, (s, t)), (2 * k + 1, (t, s))] {
                other[slot] = to;
                arc_of[slot] = a;
                next[slot] = head[from];
                head[from] = slot;
            }
        }
        let root = self.root();
        let mut seen = vec![false; nn];
        let mut queue = Vec::with_capacity(nn);
        queue.push(root);
        seen[root] = true;
        self.parent[root] = NONE;
        self.depth[root] = 0;
        self.pi[root] = 0.0;
        let mut qi = 0;
        while qi < queue.len() {
            let w = queue[qi];
            qi += 1;
            let mut e = head[w];
            while e != NONE {
                let c = other[e];
                if !seen[c] {
                    seen[c] = true;
                    let a = arc_of[e];
                    self.parent[c] = w;
                    self.pred[c] = a;
                    self.depth[c] = self.depth[w] + 1;
                    let (s, _) = self.ends(a);
                    self.up[c] = s == c;
                    // reduced cost zero on tree arcs
                    self.pi[c] = if self.up[c] {
                        self.pi[w] - self.arc_cost(a)
                    } else {
                        self.pi[w] + self.arc_cost(a)
                    };
                    queue.push(c);
                }
                e = next[e];
            }
        }
        debug_assert_eq!(queue.len(), nn);
    }

    fn find_entering(&mut self, eps: f64) -> Option<usize> {
        let total = self.n_real();
        let mut best = NONE;
        let mut best_rc = -eps;
        let mut scanned = 0;
        let mut in_block = 0;
        let mut a = self.next_arc;
        while scanned < total {
            if self.state[a] == State::Lower {
                let rc = self.reduced(a);
                if rc < best_rc {
                    best_rc = rc;
                    best = a;
                }
            }
            scanned += 1;
            in_block += 1;
            a += 1;
            if a == total {
                a = 0;
            }
            if in_block == self.block {
                if best != NONE {
                    self.next_arc = a;
                    return Some(best);
                }
                in_block = 0;
            }
        }
        if best != NONE {
            self.next_arc = a;
            Some(best)
        } else {
            None
        }
    }

    fn pivot(&mut self, enter: usize, tree_arcs: &mut Vec<usize>) {
        let (first, second) = self.ends(enter);
        // join = lowest common ancestor
        let (mut a, mut b) = (first, second);
        while a != b {
            if self.depth[a] >= self.depth[b] {
                a = self.parent[a];
            } else {
                b = self.parent[b];
            }
        }
        let join = a;
        let mut delta = f64::INFINITY;
        let mut leave_node = NONE;
        // flow runs join -> first: decreasing arcs are those pointing up
        let mut w = first;
        while w != join {
            if self.up[w] {
                let d = self.flow[self.pred[w]];
                if d < delta {
                    delta = d;
                    leave_node = w;
                }
            }
            w = self.parent[w];
        }
        // flow runs second -> join: decreasing arcs are those pointing down
        let mut w = second;
        while w != join {
            if !self.up[w] {
                let d = self.flow[self.pred[w]];
                if d <= delta {
                    delta = d;
                    leave_node = w;
                }
            }
            w = self.parent[w];
        }
        assert!(leave_node != NONE, "uncapacitated transportation problems are bounded");
        if delta > 0.0 {
            self.flow[enter] += delta;
            let mut w = first;
            while w != join {
                let e = self.pred[w];
                if self.up[w] {
                    self.flow[e] -= delta;
                } else {
                    self.flow[e] += delta;
                }
                w = self.parent[w];
            }
            let mut w = second;
            while w != join {
                let e = self.pred[w];
                if self.up[w] {
                    self.flow[e] += delta;
                } else {
                    self.flow[e] -= delta;
                }
                w = self.parent[w];
            }
        }
        let leave = self.pred[leave_node];
        self.flow[leave] = 0.0;
        self.state[leave] = State::Lower;
        self.state[enter] = State::Tree;
        let pos = tree_arcs.iter().position(|&x| x == leave).expect("leaving arc is basic");
        tree_arcs[pos] = enter;
        self.rebuild(tree_arcs);
    }

    /// Potentials re-propagated along the real basic arcs from anchors near node 0.
    ///
    /// The artificial root leaves a large common offset in `pi`; summing the dual
    /// objective with that offset loses digits to cancellation.
    fn tight_potentials(&self) -> Vec<f64> {
        let (m, n) = (self.m, self.n);
        let mut adj: Vec<Vec<(usize, f64)>> = vec![Vec::new(); m + n];
        for a in 0..self.n_real() {
            if self.state[a] == State::Tree {
                let (s, t) = self.ends(a);
                adj[s].push((t, self.cost[a]));
                adj[t].push((s, self.cost[a]));
            }
        }
        let mut out = vec![f64::NAN; m + n];
        let mut stack = Vec::new();
        for r in 0..m + n {
            if !out[r].is_nan() {
                continue;
            }
            out[r] = self.pi[r] - self.pi[0];
            stack.push(r);
            while let Some(w) = stack.pop() {
                for &(c, cost) in &adj[w] {
                    if out[c].is_nan() {
                        // supply s, demand t: pi[t] = pi[s] + cost
                        out[c] = if c < m { out[w] - cost } else { out[w] + cost };
                        stack.push(c);
                    }
                }
            }
        }
        out
    }
}

/// Solves `min sum c_ij g_ij` subject to row sums `a` and column sums `b`.
///
/// `cost` is row-major `m x n`. Totals must agree within `1e-10`.
pub fn network_simplex(cost: &[f64], a: &[f64], b: &[f64]) -> Result<RawSolution> {
    let m = a.len();
    let n = b.len();
    if m == 0 || n == 0 {
        return Err(MkError::Validation("empty transport instance".into()));
    }
    if cost.len() != m * n {
        return Err(MkError::Validation("cost matrix has the wrong size".into()));
    }
    if cost.iter().any(|c| !c.is_finite()) {
        return Err(MkError::Numerical("non-finite cost entry".into()));
    }
    let ta: f64 = a.iter().sum();
    let tb: f64 = b.iter().sum();
    if (ta - tb).abs() > 1e-10 * (1.0 + ta.abs()) {
        return Err(MkError::Infeasible(format!("supply {ta} differs from demand {tb}")));
    }
    let max_abs = cost.iter().fold(0.0f64, |acc, c| acc.max(c.abs()));
    let nn = m + n + 1;
    let nr = m * n;
    let mut s = Simplex {
        m,
        n,
        cost,
        art_cost: (max_abs + 1.0) * nn as f64,
        flow: vec![0.0; nr + m + n],
        state: vec![State::Lower; nr + m + n],
        parent: vec![NONE; nn],
        pred: vec![NONE; nn],
        up: vec![false; nn],
        depth: vec![0; nn],
        pi: vec![0.0; nn],
        next_arc: 0,
        block: ((nr as f64).sqrt().ceil() as usize).max(10).min(nr),
    };
    let mut tree_arcs = Vec::with_capacity(m + n);
    for i in 0..m {
        let e = nr + i;
        s.flow[e] = a[i];
        s.state[e] = State::Tree;
        tree_arcs.push(e);
    }
    for j in 0..n {
        let e = nr + m + j;
        s.flow[e] = b[j];
        s.state[e] = State::Tree;
        tree_arcs.push(e);
    }
    s.rebuild(&tree_arcs);
    let eps = 1e-13 * (1.0 + max_abs);
    let cap = 50 * (nr + nn) + 10_000;
    let mut pivots = 0;
    while let Some(enter) = s.find_entering(eps) {
        s.pivot(enter, &mut tree_arcs);
        pivots += 1;
        if pivots > cap {
            return Err(MkError::Numerical(format!("simplex exceeded {cap} pivots")));
        }
    }
    let residual: f64 = (nr..nr + m + n).map(|e| s.flow[e]).fold(0.0, f64::max);
    if residual > 1e-9 * (1.0 + ta) {
        return Err(MkError::Infeasible(format!("artificial arcs carry flow {residual}")));
    }
    let mut plan = Vec::new();
    for e in 0..nr {
        if s.flow[e] > 0.0 {
            plan.push((e / n, e % n, s.flow[e]));
        }
    }
    let pi = s.tight_potentials();
    let u: Vec<f64> = pi[..m].to_vec();
    let v: Vec<f64> = pi[m..].iter().map(|p| -p).collect();
    Ok(RawSolution { plan, u, v, pivots })
}
