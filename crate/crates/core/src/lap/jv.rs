use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};
use crate::knn::SparseBipartiteGraph;

use super::CostMatrix;

const NONE: usize = usize::MAX;

/// Row-wise access to a cost structure. Rows are visited in ascending column order.
pub(super) trait Rows {
    fn size(&self) -> usize;
    fn for_each(&self, i: usize, f: impl FnMut(usize, f64));
    /// Cost of an edge known to exist.
    fn cost(&self, i: usize, j: usize) -> f64;
}

pub(super) struct DenseRows<'a>(pub &'a CostMatrix);

impl Rows for DenseRows<'_> {
    fn size(&self) -> usize {
        self.0.n()
    }

    #[inline]
    fn for_each(&self, i: usize, mut f: impl FnMut(usize, f64)) {
        for (j, &c) in self.0.row(i).iter().enumerate() {
            f(j, c);
        }
    }

    #[inline]
    fn cost(&self, i: usize, j: usize) -> f64 {
        self.0.get(i, j)
    }
}

pub(super) struct SparseRows<'a>(pub &'a SparseBipartiteGraph);

impl Rows for SparseRows<'_> {
    fn size(&self) -> usize {
        self.0.n()
    }

    #[inline]
    fn for_each(&self, i: usize, mut f: impl FnMut(usize, f64)) {
        for e in self.0.edges(i) {
            f(e.grid, e.weight);
        }
    }

    #[inline]
    fn cost(&self, i: usize, j: usize) -> f64 {
        self.0.weight(i, j).expect("edge exists")
    }
}

/// Selection structure for the Dijkstra step. Implementations must return the
/// column minimising `(dist, column)` among offered, unfinished columns.
pub(super) trait Frontier {
    fn reset(&mut self, n: usize);
    fn offer(&mut self, j: usize, d: f64);
    fn pop(&mut self, dist: &[f64], done: &[bool]) -> Option<usize>;
}

/// O(n) linear scan per pop; the classic dense choice.
#[derive(Default)]
pub(super) struct ScanFrontier {
    todo: Vec<usize>,
    queued: Vec<bool>,
}

impl Frontier for ScanFrontier {
    fn reset(&mut self, n: usize) {
        self.todo.clear();
        self.queued.clear();
        self.queued.resize(n, false);
    }

    #[inline]
    fn offer(&mut self, j: usize, _d: f64) {
        if !self.queued[j] {
            self.queued[j] = true;
            self.todo.push(j);
        }
    }

    fn pop(&mut self, dist: &[f64], _done: &[bool]) -> Option<usize> {
        let mut best: Option<(usize, usize)> = None;
        for (pos, &j) in self.todo.iter().enumerate() {
            match best {
                None => best = Some((pos, j)),
                Some((_, b)) => {
                    if key_cmp(dist[j], j, dist[b], b) == Ordering::Less {
                        best = Some((pos, j));
                    }
                }
            }
        }
        let (pos, j) = best?;
        self.todo.swap_remove(pos);
        Some(j)
    }
}

/// Lazy-deletion binary heap; O(log E) per offer.
#[derive(Default)]
pub(super) struct HeapFrontier {
    heap: BinaryHeap<MinEntry>,
}

struct MinEntry(f64, usize);

impl PartialEq for MinEntry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for MinEntry {}
impl PartialOrd for MinEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for MinEntry {
    fn cmp(&self, other: &Self) -> Ordering {
        // reversed: BinaryHeap is a max-heap
        key_cmp(other.0, other.1, self.0, self.1)
    }
}

impl Frontier for HeapFrontier {
    fn reset(&mut self, _n: usize) {
        self.heap.clear();
    }

    #[inline]
    fn offer(&mut self, j: usize, d: f64) {
        self.heap.push(MinEntry(d, j));
    }

    fn pop(&mut self, _dist: &[f64], done: &[bool]) -> Option<usize> {
        // A fresh entry always precedes its stale duplicates, so skipping
        // finished columns is enough.
        while let Some(MinEntry(_, j)) = self.heap.pop() {
            if !done[j] {
                return Some(j);
            }
        }
        None
    }
}

#[inline]
fn key_cmp(da: f64, ja: usize, db: f64, jb: usize) -> Ordering {
    da.total_cmp(&db).then(ja.cmp(&jb))
}

/// Shortest augmenting path solver. Returns `(row -> column, column prices)`.
pub(super) fn solve<R: Rows, F: Frontier>(rows: &R, frontier: &mut F) -> Result<(Vec<usize>, Vec<f64>)> {
    let n = rows.size();
    let mut x = vec![NONE; n];
    let mut y = vec![NONE; n];
    let mut v = vec![f64::INFINITY; n];

    // column reduction
    let mut argmin = vec![NONE; n];
    for i in 0..n {
        rows.for_each(i, |j, c| {
            if c < v[j] {
                v[j] = c;
                argmin[j] = i;
            }
        });
    }
    if let Some(j) = argmin.iter().position(|&i| i == NONE) {
        return Err(Error::Precondition(format!("column {j} has no incident edge")));
    }
    let mut matches = vec![0u32; n];
    for j in (0..n).rev() {
        let i = argmin[j];
        matches[i] += 1;
        if matches[i] == 1 {
            x[i] = j;
            y[j] = i;
        } else if v[j] < v[x[i]] {
            let j1 = x[i];
            x[i] = j;
            y[j] = i;
            y[j1] = NONE;
        }
    }

    // reduction transfer
    let mut free = Vec::new();
    for i in 0..n {
        match matches[i] {
            0 => free.push(i),
            1 => {
                let j1 = x[i];
                let mut min = f64::INFINITY;
                rows.for_each(i, |j, c| {
                    if j != j1 {
                        min = min.min(c - v[j]);
                    }
                });
                if min.is_finite() {
                    v[j1] -= min;
                }
            }
            _ => {}
        }
    }

    // augmenting row reduction, two passes
    let displacement_cap = 8 * n + 64;
    for _ in 0..2 {
        if free.is_empty() {
            break;
        }
        let mut queue = std::mem::take(&mut free);
        let mut k = 0;
        let mut displaced = 0usize;
        while k < queue.len() {
            let i = queue[k];
            k += 1;
            let (mut umin, mut j1) = (f64::INFINITY, NONE);
            let (mut usub, mut j2) = (f64::INFINITY, NONE);
            rows.for_each(i, |j, c| {
                let h = c - v[j];
                if h < usub {
                    if h >= umin {
                        usub = h;
                        j2 = j;
                    } else {
                        usub = umin;
                        j2 = j1;
                        umin = h;
                        j1 = j;
                    }
                }
            });
            if j1 == NONE {
                return Err(Error::Precondition(format!("row {i} has no incident edge")));
            }
            let mut i0 = y[j1];
            if j2 == NONE || usub.is_infinite() {
                // single-edge row: take the column if free, else defer to augmentation
                if i0 == NONE {
                    x[i] = j1;
                    y[j1] = i;
                } else {
                    free.push(i);
                }
                continue;
            }
            if umin < usub {
                v[j1] -= usub - umin;
            } else if i0 != NONE {
                j1 = j2;
                i0 = y[j2];
            }
            if i0 != NONE {
                x[i0] = NONE;
            }
            x[i] = j1;
            y[j1] = i;
            if i0 != NONE {
                displaced += 1;
                if umin < usub && displaced < displacement_cap {
                    k -= 1;
                    queue[k] = i0;
                } else {
                    free.push(i0);
                }
            }
        }
    }

    // augmentation
    let mut dist = vec![f64::INFINITY; n];
    let mut pred = vec![NONE; n];
    let mut done = vec![false; n];
    let mut touched: Vec<usize> = Vec::new();
    let mut scanned: Vec<usize> = Vec::new();
    for &f in &free {
        for &j in &touched {
            dist[j] = f64::INFINITY;
            done[j] = false;
        }
        touched.clear();
        frontier.reset(n);

        rows.for_each(f, |j, c| {
            let d = c - v[j];
            dist[j] = d;
            pred[j] = f;
            touched.push(j);
            frontier.offer(j, d);
        });

        let end = loop {
            let Some(j) = frontier.pop(&dist, &done) else {
                return Err(Error::Infeasible { row: f });
            };
            done[j] = true;
            scanned.push(j);
            if y[j] == NONE {
                break j;
            }
            let i = y[j];
            let mu = dist[j];
            let h = rows.cost(i, j) - v[j];
            rows.for_each(i, |j2, c| {
                if !done[j2] {
                    let nd = mu + (c - v[j2]) - h;
                    if nd < dist[j2] {
                        if dist[j2] == f64::INFINITY {
                            touched.push(j2);
                        }
                        dist[j2] = nd;
                        pred[j2] = i;
                        frontier.offer(j2, nd);
                    }
                }
            });
        };

        let mu = dist[end];
        for &j in &scanned {
            v[j] += dist[j] - mu;
        }
        scanned.clear();

        let mut j = end;
        loop {
            let i = pred[j];
            y[j] = i;
            let prev = x[i];
            x[i] = j;
            if i == f {
                break;
            }
            j = prev;
        }
    }

    debug_assert!(x.iter().all(|&j| j != NONE));
    Ok((x, v))
}
