//! Exact transportation simplex (network simplex on the complete bipartite
//! graph). The basis is a spanning tree of `m + n - 1` cells; dual potentials
//! come from the tree and certify optimality on exit.

use std::collections::VecDeque;

use crate::error::{Error, Result};

use super::{CostMatrix, TransportPlan};

/// Optimal plan, its cost, and the dual potentials that certify it.
#[derive(Debug, Clone, PartialEq)]
pub struct TransportSolution {
    pub plan: TransportPlan,
    pub objective: f64,
    pub row_potentials: Vec<f64>,
    pub col_potentials: Vec<f64>,
}

impl TransportSolution {
    /// Complementary slackness: every reduced cost `c_ij - u_i - v_j` is
    /// non-negative, and it is zero wherever the plan ships mass.
    pub fn is_certified(&self, cost: &CostMatrix, tol: f64) -> bool {
        let (m, n) = (cost.rows(), cost.cols());
        (0..m).all(|i| {
            (0..n).all(|j| {
                let reduced = cost.get(i, j) - self.row_potentials[i] - self.col_potentials[j];
                reduced >= -tol && (self.plan.flow(i, j) <= tol || reduced.abs() <= tol)
            })
        })
    }
}

const MARGINAL_TOL: f64 = 1e-9;

/// Minimum-cost transport of `supply` onto `demand`. Both must be non-empty,
/// non-negative, and have equal totals.
pub fn solve_transport(cost: &CostMatrix, supply: &[f64], demand: &[f64]) -> Result<TransportSolution> {
    let (m, n) = (supply.len(), demand.len());
    if m == 0 || n == 0 {
        return Err(Error::UndefinedTransport("empty supply or demand".into()));
    }
    if cost.rows() != m || cost.cols() != n {
        return Err(Error::ShapeMismatch {
            op: "solve_transport",
            expected: format!("{m} x {n}"),
            found: format!("{} x {}", cost.rows(), cost.cols()),
        });
    }
    if supply.iter().chain(demand).any(|w| !w.is_finite() || *w < 0.0) {
        return Err(Error::UndefinedTransport("weights must be finite and non-negative".into()));
    }
    let (ts, td) = (supply.iter().sum::<f64>(), demand.iter().sum::<f64>());
    if (ts - td).abs() > MARGINAL_TOL * ts.max(1.0) || ts <= 0.0 {
        return Err(Error::UndefinedTransport(format!(
            "supply total {ts} does not match demand total {td}"
        )));
    }

    let mut solver = Simplex::northwest_corner(cost, supply, demand);
    let eps = 1e-12 * (1.0 + cost.max());
    solver.optimize(eps);

    let flows: Vec<f64> = solver.flow.iter().map(|f| f.max(0.0)).collect();
    let objective = flows.iter().zip(cost.data()).map(|(f, c)| f * c).sum();
    let solution = TransportSolution {
        plan: TransportPlan::new(m, n, flows),
        objective,
        row_potentials: solver.u,
        col_potentials: solver.v,
    };
    debug_assert!(solution.is_certified(cost, 1e-9 * (1.0 + cost.max())));
    Ok(solution)
}

struct Simplex<'c> {
    cost: &'c CostMatrix,
    m: usize,
    n: usize,
    flow: Vec<f64>,
    basic: Vec<bool>,
    u: Vec<f64>,
    v: Vec<f64>,
}

impl<'c> Simplex<'c> {
    fn northwest_corner(cost: &'c CostMatrix, supply: &[f64], demand: &[f64]) -> Self {
        let (m, n) = (supply.len(), demand.len());
        let mut flow = vec![0.0; m * n];
        let mut basic = vec![false; m * n];
        let mut a = supply.to_vec();
        let mut b = demand.to_vec();
        let (mut i, mut j) = (0, 0);
        loop {
            let x = a[i].min(b[j]);
            flow[i * n + j] = x;
            basic[i * n + j] = true;
            a[i] -= x;
            b[j] -= x;
            if i == m - 1 && j == n - 1 {
                break;
            }
            if j == n - 1 || (i < m - 1 && a[i] <= b[j]) {
                i += 1;
            } else {
                j += 1;
            }
        }
        Self {
            cost,
            m,
            n,
            flow,
            basic,
            u: vec![0.0; m],
            v: vec![0.0; n],
        }
    }

    /// Node ids: rows are `0..m`, columns are `m..m+n`.
    fn adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.m + self.n];
        for i in 0..self.m {
            for j in 0..self.n {
                if self.basic[i * self.n + j] {
                    adj[i].push(self.m + j);
                    adj[self.m + j].push(i);
                }
            }
        }
        adj
    }

    fn update_potentials(&mut self, adj: &[Vec<usize>]) {
        let mut seen = vec![false; self.m + self.n];
        let mut queue = VecDeque::from([0usize]);
        seen[0] = true;
        self.u[0] = 0.0;
        while let Some(node) = queue.pop_front() {
            for &next in &adj[node] {
                if seen[next] {
                    continue;
                }
                seen[next] = true;
                if node < self.m {
                    let j = next - self.m;
                    self.v[j] = self.cost.get(node, j) - self.u[node];
                } else {
                    let j = node - self.m;
                    self.u[next] = self.cost.get(next, j) - self.v[j];
                }
                queue.push_back(next);
            }
        }
    }

    /// Tree path from column `q` to row `p` as a list of cells.
    fn path(&self, adj: &[Vec<usize>], p: usize, q: usize) -> Vec<(usize, usize)> {
        let start = p;
        let goal = self.m + q;
        let mut parent = vec![usize::MAX; self.m + self.n];
        parent[start] = start;
        let mut queue = VecDeque::from([start]);
        while let Some(node) = queue.pop_front() {
            if node == goal {
                break;
            }
            for &next in &adj[node] {
                if parent[next] == usize::MAX {
                    parent[next] = node;
                    queue.push_back(next);
                }
            }
        }
        let mut cells = Vec::new();
        let mut node = goal;
        while node != start {
            let prev = parent[node];
            let cell = if node < self.m {
                (node, prev - self.m)
            } else {
                (prev, node - self.m)
            };
            cells.push(cell);
            node = prev;
        }
        cells
    }

    fn optimize(&mut self, eps: f64) {
        let dantzig_budget = 50 * self.m * self.n + 100;
        let mut iterations = 0usize;
        loop {
            let adj = self.adjacency();
            self.update_potentials(&adj);
            // Past the budget, Bland's rule (first improving cell, lowest
            // leaving index) rules out cycling on degenerate bases.
            let bland = iterations >= dantzig_budget;
            let Some((p, q)) = self.entering(eps, bland) else {
                return;
            };
            let path = self.path(&adj, p, q);
            // Signs alternate -, +, -, ... starting at the cell touching column q.
            let minus = path.iter().step_by(2);
            let mut leaving = None;
            let mut theta = f64::INFINITY;
            for &(i, j) in minus {
                let f = self.flow[i * self.n + j];
                let better = match leaving {
                    None => true,
                    Some((li, lj)) => f < theta || (f == theta && bland && (i, j) < (li, lj)),
                };
                if better {
                    theta = f;
                    leaving = Some((i, j));
                }
            }
            let (li, lj) = leaving.expect("a cycle has at least one minus cell");
            for (k, &(i, j)) in path.iter().enumerate() {
                if k % 2 == 0 {
                    self.flow[i * self.n + j] -= theta;
                } else {
                    self.flow[i * self.n + j] += theta;
                }
            }
            self.flow[p * self.n + q] = theta;
            self.basic[p * self.n + q] = true;
            self.flow[li * self.n + lj] = 0.0;
            self.basic[li * self.n + lj] = false;
            iterations += 1;
        }
    }

    fn entering(&self, eps: f64, bland: bool) -> Option<(usize, usize)> {
        let mut best: Option<((usize, usize), f64)> = None;
        for i in 0..self.m {
            for j in 0..self.n {
                if self.basic[i * self.n + j] {
                    continue;
                }
                let reduced = self.cost.get(i, j) - self.u[i] - self.v[j];
                if reduced < -eps {
                    if bland {
                        return Some((i, j));
                    }
                    if best.is_none_or(|(_, r)| reduced < r) {
                        best = Some(((i, j), reduced));
                    }
                }
            }
        }
        best.map(|(cell, _)| cell)
    }
}
