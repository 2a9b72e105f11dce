//! Greedy subgraph modification: turn the kNN graph into a k-regular one.
//!
//! Grid vertices with degree above `k` (Y_>) are examined in descending
//! `(degree, Σ edge weight)` order. For the examined vertex `y` its edges are
//! scanned heaviest first; edge `x–y` is swapped for the lightest `x–y'` with
//! `y'` in Y_< and not yet adjacent to `x`. If no such `y'` exists for this
//! `x` the next edge is tried. After a swap, `y` goes back into the queue with
//! its new priority until its degree reaches `k`.
//!
//! Every swap deletes one edge at a vertex of Y_> and inserts one at a vertex
//! of Y_<, so instance degrees stay at `k`, the degree sum stays at `2kN`, and
//! no deleted edge is ever inserted again. At most `kN` swaps can happen.

use std::cmp::Ordering;
use std::collections::{BTreeSet, BinaryHeap};

use crate::error::{Error, Result};

use super::{CenterIndex, SparseBipartiteGraph};

/// Record of one repair run.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RepairTrace {
    /// Deleted edges `(instance, grid)`, in order.
    pub removed: Vec<(usize, usize)>,
    /// Inserted edges, parallel to `removed`.
    pub added: Vec<(usize, usize)>,
    /// Σ deg over both vertex sets after each delete+insert pair.
    pub degree_sums: Vec<usize>,
    /// `|Y_>| + |Y_<|` before the first swap and after every swap.
    pub unbalanced: Vec<usize>,
}

impl RepairTrace {
    pub fn swaps(&self) -> usize {
        self.removed.len()
    }
}

pub fn repair(graph: SparseBipartiteGraph) -> Result<SparseBipartiteGraph> {
    repair_traced(graph).map(|(g, _)| g)
}

pub fn repair_traced(mut graph: SparseBipartiteGraph) -> Result<(SparseBipartiteGraph, RepairTrace)> {
    let n = graph.n();
    let k = graph.k();
    if let Some(i) = (0..n).find(|&i| graph.deg_x(i) != k) {
        return Err(Error::Precondition(format!(
            "instance {i} has degree {} before repair, expected {k}",
            graph.deg_x(i)
        )));
    }

    let mut trace = RepairTrace::default();
    // per grid vertex: (weight, instance), heaviest first, ties by higher instance
    let mut adj_y: Vec<Vec<(f64, usize)>> = vec![Vec::new(); n];
    for i in 0..n {
        for e in graph.edges(i) {
            adj_y[e.grid].push((graph.geometric_weight(i, e.grid), i));
        }
    }
    for list in &mut adj_y {
        list.sort_unstable_by(heaviest_first);
    }

    let mut under = UnderSet::new(&graph);
    let mut heap = BinaryHeap::new();
    for j in 0..n {
        if graph.deg_y(j) > k {
            heap.push(priority(&graph, &adj_y, j));
        }
    }
    let mut unbalanced = under.len() + heap.len();
    trace.unbalanced.push(unbalanced);

    let expected_sum = 2 * k * n;
    let mut sum_x = graph.edge_count();
    let mut sum_y: usize = graph.deg_y_all().iter().sum();
    let op_cap = 2 * k * n;
    let mut ops = 0usize;
    let mut stamp = vec![0u32; n];
    let mut epoch = 0u32;

    while let Some(top) = heap.pop() {
        let y = top.vertex;
        if graph.deg_y(y) != top.degree || top.degree <= k {
            continue;
        }
        let mut swap = None;
        for &(_, x) in &adj_y[y] {
            epoch += 1;
            for e in graph.edges(x) {
                stamp[e.grid] = epoch;
            }
            if let Some((w, target)) = under.lightest_for(&graph, x, |j| stamp[j] != epoch) {
                swap = Some((x, target, w));
                break;
            }
        }
        let Some((x, target, w)) = swap else {
            return Err(Error::Internal(format!(
                "repair stalled: no admissible swap for grid vertex {y} (degree {})",
                graph.deg_y(y)
            )));
        };

        graph.remove_edge(x, y);
        sum_x -= 1;
        sum_y -= 1;
        graph.insert_edge(x, target, w);
        sum_x += 1;
        sum_y += 1;
        let pos = adj_y[y].iter().position(|&(_, i)| i == x).expect("adjacency in sync");
        adj_y[y].remove(pos);
        let entry = (graph.geometric_weight(x, target), x);
        let list = &mut adj_y[target];
        let at = list.partition_point(|e| heaviest_first(e, &entry).is_lt());
        list.insert(at, entry);
        ops += 2;

        if graph.deg_y(y) == k {
            unbalanced -= 1;
        }
        if graph.deg_y(target) == k {
            under.remove(target);
            unbalanced -= 1;
        }
        trace.removed.push((x, y));
        trace.added.push((x, target));
        trace.degree_sums.push(sum_x + sum_y);
        trace.unbalanced.push(unbalanced);
        if sum_x + sum_y != expected_sum {
            return Err(Error::Internal(format!(
                "degree sum {} after swap {}, expected {expected_sum}",
                sum_x + sum_y,
                trace.swaps()
            )));
        }
        if ops > op_cap {
            return Err(Error::Internal(format!("repair exceeded {op_cap} edge operations")));
        }

        if graph.deg_y(y) > k {
            heap.push(priority(&graph, &adj_y, y));
        }
    }

    if let Some(msg) = graph.regularity_violation() {
        return Err(Error::Internal(format!("repair finished with irregular graph: {msg}")));
    }
    Ok((graph, trace))
}

/// Y_<: grid vertices still below degree `k`.
struct UnderSet {
    /// Ascending, for zero-weight (dummy) rows where the lowest index wins.
    sorted: BTreeSet<usize>,
    /// Spatial index over the members present at the last rebuild.
    ids: Vec<usize>,
    index: Option<CenterIndex>,
    stale: usize,
}

impl UnderSet {
    fn new(graph: &SparseBipartiteGraph) -> Self {
        let sorted: BTreeSet<usize> = (0..graph.n()).filter(|&j| graph.deg_y(j) < graph.k()).collect();
        let mut u = UnderSet {
            sorted,
            ids: Vec::new(),
            index: None,
            stale: 0,
        };
        u.rebuild(graph);
        u
    }

    fn rebuild(&mut self, graph: &SparseBipartiteGraph) {
        self.ids = self.sorted.iter().copied().collect();
        let pts: Vec<_> = self.ids.iter().map(|&j| graph.centers()[j]).collect();
        self.index = Some(CenterIndex::new(&pts, graph.instances()));
        self.stale = 0;
    }

    fn len(&self) -> usize {
        self.sorted.len()
    }

    fn remove(&mut self, j: usize) {
        self.sorted.remove(&j);
        self.stale += 1;
    }

    /// Lightest member admissible for instance `x`, ties by lowest index.
    fn lightest_for(
        &mut self,
        graph: &SparseBipartiteGraph,
        x: usize,
        admissible: impl Fn(usize) -> bool,
    ) -> Option<(f64, usize)> {
        if graph.is_dummy(x) {
            return self.sorted.iter().copied().find(|&j| admissible(j)).map(|j| (0.0, j));
        }
        if self.stale * 2 > self.ids.len() {
            self.rebuild(graph);
        }
        let (ids, sorted) = (&self.ids, &self.sorted);
        let index = self.index.as_ref().expect("built");
        index
            .nearest_where(graph.instances()[x], |p| sorted.contains(&ids[p]) && admissible(ids[p]))
            .map(|(_, p)| (graph.geometric_weight(x, ids[p]), ids[p]))
    }
}

struct Priority {
    degree: usize,
    weight_sum: f64,
    vertex: usize,
}

fn heaviest_first(a: &(f64, usize), b: &(f64, usize)) -> Ordering {
    b.0.total_cmp(&a.0).then(b.1.cmp(&a.1))
}

fn priority(graph: &SparseBipartiteGraph, adj_y: &[Vec<(f64, usize)>], y: usize) -> Priority {
    Priority {
        degree: graph.deg_y(y),
        weight_sum: adj_y[y].iter().map(|e| e.0).sum(),
        vertex: y,
    }
}

impl PartialEq for Priority {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Priority {}
impl PartialOrd for Priority {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Priority {
    // max-heap: larger degree, then larger weight sum, then lower index first
    fn cmp(&self, other: &Self) -> Ordering {
        self.degree
            .cmp(&other.degree)
            .then(self.weight_sum.total_cmp(&other.weight_sum))
            .then(other.vertex.cmp(&self.vertex))
    }
}
