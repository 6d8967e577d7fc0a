//! Transportation simplex for uniform marginals.
//!
//! Flows are kept as integers in units of `1 / (n1 n2 K)`. Supplies are
//! perturbed (`+1` unit on every source, `+n1` units on the last sink), which
//! makes every basis nondegenerate so the method cannot cycle. Rounding a flow
//! to the nearest multiple of `K` removes the perturbation and gives the
//! vertex of the original polytope with the same basis.
//!
//! Entering cells are chosen by most negative reduced cost, ties broken by
//! lowest `(row, col)`. A solver instance keeps its basis between calls, so a
//! sequence of related cost matrices is solved from a warm start.

use nalgebra::DMatrix;

use super::TransportPlan;
use crate::error::{Error, Result};

const NONE: usize = usize::MAX;

/// Exact solver for `min <cost, pi>` over the uniform transportation polytope.
#[derive(Debug, Clone)]
pub struct TransportSimplex {
    n1: usize,
    n2: usize,
    scale: i64,
    /// Row-major `n1 x n2` flows in perturbed units.
    flow: Vec<i64>,
    basic: Vec<bool>,
    row_adj: Vec<Vec<usize>>,
    col_adj: Vec<Vec<usize>>,
    // scratch
    potential: Vec<f64>,
    parent: Vec<usize>,
    depth: Vec<usize>,
    queue: Vec<usize>,
}

impl TransportSimplex {
    pub fn new(n1: usize, n2: usize) -> Self {
        assert!(n1 > 0 && n2 > 0, "transport problem needs nonempty sides");
        let scale = 2 * n1 as i64 + 2;
        let mut supply: Vec<i64> = vec![n2 as i64 * scale + 1; n1];
        let mut demand: Vec<i64> = vec![n1 as i64 * scale; n2];
        demand[n2 - 1] += n1 as i64;

        let mut solver = Self {
            n1,
            n2,
            scale,
            flow: vec![0; n1 * n2],
            basic: vec![false; n1 * n2],
            row_adj: vec![Vec::new(); n1],
            col_adj: vec![Vec::new(); n2],
            potential: vec![0.0; n1 + n2],
            parent: vec![NONE; n1 + n2],
            depth: vec![0; n1 + n2],
            queue: Vec::with_capacity(n1 + n2),
        };

        // North-west corner start; the perturbation keeps it a spanning tree.
        let (mut i, mut j) = (0, 0);
        loop {
            let q = supply[i].min(demand[j]);
            solver.add_basic(i, j, q);
            supply[i] -= q;
            demand[j] -= q;
            if i == n1 - 1 && j == n2 - 1 {
                break;
            }
            debug_assert!(supply[i] != 0 || demand[j] != 0);
            debug_assert!(!(supply[i] == 0 && demand[j] == 0));
            if supply[i] == 0 {
                i += 1;
            } else {
                j += 1;
            }
        }
        debug_assert_eq!(solver.basic.iter().filter(|b| **b).count(), n1 + n2 - 1);
        solver
    }

    fn add_basic(&mut self, i: usize, j: usize, q: i64) {
        let idx = i * self.n2 + j;
        self.basic[idx] = true;
        self.flow[idx] = q;
        self.row_adj[i].push(j);
        self.col_adj[j].push(i);
    }

    fn remove_basic(&mut self, i: usize, j: usize) {
        let idx = i * self.n2 + j;
        self.basic[idx] = false;
        self.flow[idx] = 0;
        let pos = self.row_adj[i].iter().position(|&c| c == j).expect("basic cell in tree");
        self.row_adj[i].swap_remove(pos);
        let pos = self.col_adj[j].iter().position(|&r| r == i).expect("basic cell in tree");
        self.col_adj[j].swap_remove(pos);
    }

    /// Dual potentials on the current tree, rooted at row 0. Rows are nodes
    /// `0..n1`, columns `n1..n1+n2`; `u_i + v_j = c_ij` on basic cells.
    fn compute_potentials(&mut self, cost: &DMatrix<f64>) {
        let n1 = self.n1;
        self.parent.fill(NONE);
        self.queue.clear();
        self.potential[0] = 0.0;
        self.depth[0] = 0;
        self.parent[0] = 0;
        self.queue.push(0);
        let mut head = 0;
        while head < self.queue.len() {
            let node = self.queue[head];
            head += 1;
            if node < n1 {
                let i = node;
                for &j in &self.row_adj[i] {
                    let child = n1 + j;
                    if self.parent[child] == NONE {
                        self.parent[child] = node;
                        self.depth[child] = self.depth[node] + 1;
                        self.potential[child] = cost[(i, j)] - self.potential[node];
                        self.queue.push(child);
                    }
                }
            } else {
                let j = node - n1;
                for &i in &self.col_adj[j] {
                    if self.parent[i] == NONE {
                        self.parent[i] = node;
                        self.depth[i] = self.depth[node] + 1;
                        self.potential[i] = cost[(i, j)] - self.potential[node];
                        self.queue.push(i);
                    }
                }
            }
        }
        debug_assert_eq!(self.queue.len(), n1 + self.n2, "basis is not spanning");
    }

    fn cell_of(&self, a: usize, b: usize) -> (usize, usize) {
        if a < self.n1 {
            (a, b - self.n1)
        } else {
            (b, a - self.n1)
        }
    }

    /// Row potentials `u` and column potentials `v` of the last solve.
    pub fn potentials(&self) -> (Vec<f64>, Vec<f64>) {
        (
            self.potential[..self.n1].to_vec(),
            self.potential[self.n1..].to_vec(),
        )
    }

    /// Solves for `cost`, starting from the basis left by the previous call.
    pub fn solve(&mut self, cost: &DMatrix<f64>) -> Result<(TransportPlan, f64)> {
        let (n1, n2) = (self.n1, self.n2);
        if cost.shape() != (n1, n2) {
            return Err(Error::ShapeMismatch(format!(
                "cost is {}x{}, solver is {n1}x{n2}",
                cost.nrows(),
                cost.ncols()
            )));
        }
        let mut cmax = 0.0_f64;
        for j in 0..n2 {
            for i in 0..n1 {
                let c = cost[(i, j)];
                if !c.is_finite() {
                    return Err(Error::NonFiniteCost(i, j));
                }
                cmax = cmax.max(c.abs());
            }
        }
        let tol = 1e-12 * cmax.max(1.0);
        let c_rm: Vec<f64> = (0..n1).flat_map(|i| (0..n2).map(move |j| cost[(i, j)])).collect();
        let max_pivots = 50 * n1 * n2 + 1000;

        let mut cycle: Vec<(usize, usize)> = Vec::with_capacity(n1 + n2);
        let mut up_a: Vec<usize> = Vec::new();
        let mut up_b: Vec<usize> = Vec::new();
        for _ in 0..max_pivots {
            self.compute_potentials(cost);

            // Basic cells have zero reduced cost up to rounding, far inside
            // `tol`, so the scan skips the basis test and stays branch-free.
            let mut best = -tol;
            let mut entering = None;
            let v = &self.potential[n1..];
            for i in 0..n1 {
                let u = self.potential[i];
                let row = &c_rm[i * n2..(i + 1) * n2];
                let m = row.iter().zip(v).fold(f64::INFINITY, |m, (c, v)| {
                    let rc = c - u - v;
                    if rc < m { rc } else { m }
                });
                if m < best {
                    best = m;
                    let j = row.iter().zip(v).position(|(c, v)| c - u - v == m).expect("row minimum is attained");
                    entering = Some((i, j));
                }
            }
            let Some((ei, ej)) = entering else {
                return Ok(self.current_plan(cost));
            };

            // Tree path from column ej to row ei closes the cycle.
            up_a.clear();
            up_b.clear();
            let (mut a, mut b) = (ei, n1 + ej);
            while self.depth[a] > self.depth[b] {
                up_a.push(a);
                a = self.parent[a];
            }
            while self.depth[b] > self.depth[a] {
                up_b.push(b);
                b = self.parent[b];
            }
            while a != b {
                up_a.push(a);
                a = self.parent[a];
                up_b.push(b);
                b = self.parent[b];
            }
            cycle.clear();
            for &node in &up_b {
                cycle.push(self.cell_of(node, self.parent[node]));
            }
            for &node in up_a.iter().rev() {
                cycle.push(self.cell_of(node, self.parent[node]));
            }

            // Odd positions (0, 2, ...) lose flow.
            let mut theta = i64::MAX;
            let mut leaving = 0;
            for (pos, &(i, j)) in cycle.iter().enumerate().step_by(2) {
                let f = self.flow[i * n2 + j];
                if f < theta {
                    theta = f;
                    leaving = pos;
                }
            }
            debug_assert!(theta > 0, "perturbed basis became degenerate");
            for (pos, &(i, j)) in cycle.iter().enumerate() {
                let idx = i * n2 + j;
                if pos % 2 == 0 {
                    self.flow[idx] -= theta;
                } else {
                    self.flow[idx] += theta;
                }
            }
            let (li, lj) = cycle[leaving];
            self.remove_basic(li, lj);
            self.add_basic(ei, ej, theta);
        }
        debug_assert!(false, "transport simplex exceeded its pivot budget");
        self.compute_potentials(cost);
        Ok(self.current_plan(cost))
    }

    fn current_plan(&self, cost: &DMatrix<f64>) -> (TransportPlan, f64) {
        let (n1, n2) = (self.n1, self.n2);
        let unit = 1.0 / (n1 * n2) as f64;
        let half = self.scale / 2;
        let mut pi = DMatrix::zeros(n1, n2);
        let mut value = 0.0;
        for i in 0..n1 {
            for j in 0..n2 {
                let idx = i * n2 + j;
                if self.basic[idx] {
                    let units = (self.flow[idx] + half).div_euclid(self.scale);
                    if units > 0 {
                        let v = units as f64 * unit;
                        pi[(i, j)] = v;
                        value += v * cost[(i, j)];
                    }
                }
            }
        }
        (TransportPlan::from_matrix_unchecked(pi), value)
    }
}

/// Optimal vertex plan and its value `<cost, pi>` for uniform marginals.
pub fn solve_exact(cost: &DMatrix<f64>) -> Result<(TransportPlan, f64)> {
    if cost.nrows() == 0 || cost.ncols() == 0 {
        return Err(Error::ShapeMismatch("empty cost matrix".into()));
    }
    TransportSimplex::new(cost.nrows(), cost.ncols()).solve(cost)
}
