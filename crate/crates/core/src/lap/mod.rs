//! Exact linear assignment solvers.
//!
//! [`solve_dense`] and [`solve_sparse`] share one Jonker-Volgenant style
//! shortest-augmenting-path core (column reduction, reduction transfer,
//! augmenting row reduction, then Dijkstra augmentation). The two entry points
//! differ only in how rows are stored and how the Dijkstra frontier picks its
//! next column: a linear scan for dense rows, a binary heap for sparse rows.
//! Both pick the smallest `(distance, column)` pair, so on a complete graph
//! they walk identical paths and return identical permutations.
//!
//! [`brute_force`] enumerates permutations and exists as a test oracle.

mod brute;
mod jv;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::knn::SparseBipartiteGraph;

pub use brute::{brute_force, BRUTE_FORCE_MAX_N};

/// Square matrix of non-negative, finite assignment costs, row-major.
///
/// Memory is `8 n²` bytes.
#[derive(Debug, Clone, PartialEq)]
pub struct CostMatrix {
    n: usize,
    data: Vec<f64>,
}

impl CostMatrix {
    pub fn new(n: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != n * n {
            return Err(Error::InvalidInput(format!(
                "cost matrix is not square: {} entries for n = {n}",
                data.len()
            )));
        }
        if let Some(pos) = data.iter().position(|c| !c.is_finite() || *c < 0.0) {
            return Err(Error::InvalidInput(format!(
                "cost ({}, {}) = {} is not a finite non-negative number",
                pos / n.max(1),
                pos % n.max(1),
                data[pos]
            )));
        }
        Ok(CostMatrix { n, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != n) {
            return Err(Error::InvalidInput(format!(
                "cost matrix is not square: row {i} has {} entries, expected {n}",
                r.len()
            )));
        }
        Self::new(n, rows.concat())
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        let mut data = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                data.push(f(i, j));
            }
        }
        Self::new(n, data)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    /// Σ_i w[i][perm[i]], accumulated in row order.
    pub fn cost_of(&self, perm: &[usize]) -> f64 {
        perm.iter().enumerate().map(|(i, &j)| self.get(i, j)).sum()
    }
}

/// A bijection rows → columns plus its cost.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Assignment {
    /// `perm[i]` is the column assigned to row `i`.
    pub perm: Vec<usize>,
    pub total_cost: f64,
}

impl Assignment {
    pub fn is_bijection(&self) -> bool {
        let n = self.perm.len();
        let mut seen = vec![false; n];
        self.perm.iter().all(|&j| j < n && !std::mem::replace(&mut seen[j], true))
    }

    /// Inverse permutation: `inverse()[j]` is the row holding column `j`.
    pub fn inverse(&self) -> Vec<usize> {
        let mut inv = vec![usize::MAX; self.perm.len()];
        for (i, &j) in self.perm.iter().enumerate() {
            inv[j] = i;
        }
        inv
    }
}

/// Optimal assignment for a dense cost matrix.
pub fn solve_dense(costs: &CostMatrix) -> Result<Assignment> {
    solve_dense_with_prices(costs).map(|(a, _)| a)
}

/// Like [`solve_dense`], also returning the final column prices `v`.
///
/// At termination `w[i][j] - v[j] >= w[i][perm[i]] - v[perm[i]]` for all `i, j`.
pub fn solve_dense_with_prices(costs: &CostMatrix) -> Result<(Assignment, Vec<f64>)> {
    let rows = jv::DenseRows(costs);
    let mut frontier = jv::ScanFrontier::default();
    let (perm, prices) = jv::solve(&rows, &mut frontier)?;
    let total_cost = costs.cost_of(&perm);
    Ok((Assignment { perm, total_cost }, prices))
}

/// Optimal perfect matching restricted to the edges of a k-regular graph.
///
/// Fails with [`Error::Precondition`] if any vertex degree differs from `k`,
/// and with [`Error::Infeasible`] if no augmenting path exists anyway.
pub fn solve_sparse(graph: &SparseBipartiteGraph) -> Result<Assignment> {
    solve_sparse_with_prices(graph).map(|(a, _)| a)
}

pub fn solve_sparse_with_prices(graph: &SparseBipartiteGraph) -> Result<(Assignment, Vec<f64>)> {
    if let Some(msg) = graph.regularity_violation() {
        return Err(Error::Precondition(msg));
    }
    solve_sparse_unchecked(graph)
}

/// Runs the sparse solver without the regularity precondition. Any graph that
/// admits a perfect matching succeeds; others report [`Error::Infeasible`].
pub fn solve_sparse_unchecked(graph: &SparseBipartiteGraph) -> Result<(Assignment, Vec<f64>)> {
    let rows = jv::SparseRows(graph);
    let mut frontier = jv::HeapFrontier::default();
    let (perm, prices) = jv::solve(&rows, &mut frontier)?;
    let total_cost = perm
        .iter()
        .enumerate()
        .map(|(i, &j)| graph.weight(i, j).expect("matched edge exists"))
        .sum();
    Ok((Assignment { perm, total_cost }, prices))
}
