use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::geom::{distance, BBox, Point};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub grid: usize,
    pub weight: f64,
}

/// Instance vertices X (rows) against grid vertices Y (columns).
///
/// Rows `0..n_real` are projected points; rows `n_real..n` are dummy instances
/// whose edges all weigh zero. Edge lists are kept sorted by grid index and
/// every weight is the Euclidean distance from the row's point to the cell
/// center.
#[derive(Debug, Clone)]
pub struct SparseBipartiteGraph {
    k: usize,
    instances: Vec<Point>,
    centers: Vec<Point>,
    edges: Vec<Vec<Edge>>,
    deg_y: Vec<usize>,
}

impl SparseBipartiteGraph {
    /// Builds a graph from explicit adjacency lists (`adjacency[i]` = grid
    /// indices joined to row `i`). Weights come from the geometry.
    pub fn from_adjacency(
        instances: Vec<Point>,
        centers: Vec<Point>,
        k: usize,
        adjacency: &[Vec<usize>],
    ) -> Result<Self> {
        let n = centers.len();
        if instances.len() > n {
            return Err(Error::InvalidInput(format!(
                "{} instances but only {n} grid cells",
                instances.len()
            )));
        }
        if adjacency.len() != n {
            return Err(Error::InvalidInput(format!(
                "adjacency has {} rows, expected {n}",
                adjacency.len()
            )));
        }
        let mut g = SparseBipartiteGraph {
            k,
            instances,
            centers,
            edges: vec![Vec::new(); n],
            deg_y: vec![0; n],
        };
        for (i, row) in adjacency.iter().enumerate() {
            for &j in row {
                if j >= n {
                    return Err(Error::InvalidInput(format!("edge ({i}, {j}) out of range")));
                }
                if g.contains(i, j) {
                    return Err(Error::InvalidInput(format!("duplicate edge ({i}, {j})")));
                }
                let w = g.geometric_weight(i, j);
                g.insert_edge(i, j, w);
            }
        }
        Ok(g)
    }

    /// Number of vertices on each side.
    pub fn n(&self) -> usize {
        self.centers.len()
    }

    pub fn n_real(&self) -> usize {
        self.instances.len()
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn is_dummy(&self, i: usize) -> bool {
        i >= self.instances.len()
    }

    pub fn instances(&self) -> &[Point] {
        &self.instances
    }

    pub fn centers(&self) -> &[Point] {
        &self.centers
    }

    pub fn edges(&self, i: usize) -> &[Edge] {
        &self.edges[i]
    }

    pub fn deg_x(&self, i: usize) -> usize {
        self.edges[i].len()
    }

    pub fn deg_y(&self, j: usize) -> usize {
        self.deg_y[j]
    }

    pub fn deg_y_all(&self) -> &[usize] {
        &self.deg_y
    }

    pub fn edge_count(&self) -> usize {
        self.edges.iter().map(Vec::len).sum()
    }

    /// Σ deg over both vertex sets.
    pub fn degree_sum(&self) -> usize {
        self.edge_count() + self.deg_y.iter().sum::<usize>()
    }

    pub fn contains(&self, i: usize, j: usize) -> bool {
        self.position(i, j).is_ok()
    }

    pub fn weight(&self, i: usize, j: usize) -> Option<f64> {
        self.position(i, j).ok().map(|p| self.edges[i][p].weight)
    }

    /// Weight the edge (i, j) has or would have.
    #[inline]
    pub fn geometric_weight(&self, i: usize, j: usize) -> f64 {
        match self.instances.get(i) {
            Some(&p) => distance(p, self.centers[j]),
            None => 0.0,
        }
    }

    /// Describes the first vertex whose degree is not `k`, if any.
    pub fn regularity_violation(&self) -> Option<String> {
        let k = self.k;
        if let Some(i) = (0..self.n()).find(|&i| self.deg_x(i) != k) {
            return Some(format!("instance {i} has degree {}, expected {k}", self.deg_x(i)));
        }
        if let Some(j) = (0..self.n()).find(|&j| self.deg_y[j] != k) {
            return Some(format!("grid vertex {j} has degree {}, expected {k}", self.deg_y[j]));
        }
        None
    }

    pub fn is_regular(&self) -> bool {
        self.regularity_violation().is_none()
    }

    /// All edges as `(instance, grid)` pairs in row-major order.
    pub fn edge_pairs(&self) -> Vec<(usize, usize)> {
        self.edges
            .iter()
            .enumerate()
            .flat_map(|(i, es)| es.iter().map(move |e| (i, e.grid)))
            .collect()
    }

    fn position(&self, i: usize, j: usize) -> std::result::Result<usize, usize> {
        self.edges[i].binary_search_by(|e| e.grid.cmp(&j))
    }

    pub(crate) fn insert_edge(&mut self, i: usize, j: usize, weight: f64) {
        match self.position(i, j) {
            Ok(_) => panic!("edge ({i}, {j}) already present"),
            Err(p) => self.edges[i].insert(p, Edge { grid: j, weight }),
        }
        self.deg_y[j] += 1;
    }

    pub(crate) fn remove_edge(&mut self, i: usize, j: usize) {
        let p = self.position(i, j).expect("edge present");
        self.edges[i].remove(p);
        self.deg_y[j] -= 1;
    }
}

/// Step-1 graph: each instance joined to its `k` nearest grid centers.
pub fn build_knn_graph(points: &[Point], grid_centers: &[Point], k: usize) -> Result<SparseBipartiteGraph> {
    if points.len() != grid_centers.len() {
        return Err(Error::InvalidInput(format!(
            "{} points but {} grid centers",
            points.len(),
            grid_centers.len()
        )));
    }
    build_padded_knn_graph(points, grid_centers, k)
}

/// Like [`build_knn_graph`] but allows fewer points than cells; the missing
/// rows become zero-cost dummy instances. Since every cell is equally near to
/// a dummy, each dummy takes the `k` cells with the lowest current degree
/// (ties by lowest index), which leaves the repair step less to do.
pub fn build_padded_knn_graph(points: &[Point], grid_centers: &[Point], k: usize) -> Result<SparseBipartiteGraph> {
    let n = grid_centers.len();
    if k == 0 || k > n {
        return Err(Error::InvalidK { k, n });
    }
    if points.len() > n {
        return Err(Error::InvalidInput(format!(
            "{} points but only {n} grid centers",
            points.len()
        )));
    }
    if let Some(p) = points.iter().chain(grid_centers).find(|p| !p[0].is_finite() || !p[1].is_finite()) {
        return Err(Error::InvalidInput(format!("non-finite coordinate {p:?}")));
    }
    let mut g = SparseBipartiteGraph {
        k,
        instances: points.to_vec(),
        centers: grid_centers.to_vec(),
        edges: vec![Vec::new(); n],
        deg_y: vec![0; n],
    };
    let index = CenterIndex::new(grid_centers, points);
    let mut found = Vec::with_capacity(4 * k);
    for (i, &p) in points.iter().enumerate() {
        index.nearest(p, k, &mut found);
        let mut row: Vec<Edge> = found.iter().map(|&(w, j)| Edge { grid: j, weight: w }).collect();
        row.sort_unstable_by_key(|e| e.grid);
        for e in &row {
            g.deg_y[e.grid] += 1;
        }
        g.edges[i] = row;
    }
    if points.len() < n {
        let mut by_degree: BTreeSet<(usize, usize)> = (0..n).map(|j| (g.deg_y[j], j)).collect();
        for i in points.len()..n {
            let picked: Vec<(usize, usize)> = (0..k).map(|_| by_degree.pop_first().expect("k <= n")).collect();
            let mut row: Vec<Edge> = picked.iter().map(|&(_, j)| Edge { grid: j, weight: 0.0 }).collect();
            row.sort_unstable_by_key(|e| e.grid);
            for (d, j) in picked {
                g.deg_y[j] += 1;
                by_degree.insert((d + 1, j));
            }
            g.edges[i] = row;
        }
    }
    Ok(g)
}

/// Uniform bucket grid over the centers for exact kNN queries.
pub(crate) struct CenterIndex {
    centers: Vec<Point>,
    bbox: BBox,
    nx: usize,
    ny: usize,
    cell_w: f64,
    cell_h: f64,
    start: Vec<usize>,
    items: Vec<usize>,
}

impl CenterIndex {
    /// `queries` only widens the indexed box so every query falls inside it.
    pub(crate) fn new(centers: &[Point], queries: &[Point]) -> Self {
        let bbox = match (BBox::around(centers), BBox::around(queries)) {
            (Some(a), Some(b)) => a.union(&b),
            (Some(a), None) => a,
            _ => BBox {
                min_x: 0.0,
                min_y: 0.0,
                max_x: 0.0,
                max_y: 0.0,
            },
        }
        .expand_degenerate(0.5);
        let side = ((centers.len() as f64 / 2.0).sqrt().ceil() as usize).max(1);
        let (nx, ny) = (side, side);
        let cell_w = bbox.width() / nx as f64;
        let cell_h = bbox.height() / ny as f64;
        let mut idx = CenterIndex {
            centers: centers.to_vec(),
            bbox,
            nx,
            ny,
            cell_w,
            cell_h,
            start: vec![0; nx * ny + 1],
            items: vec![0; centers.len()],
        };
        let cells: Vec<usize> = centers.iter().map(|&c| idx.cell_of(c)).collect();
        for &c in &cells {
            idx.start[c + 1] += 1;
        }
        for c in 0..nx * ny {
            idx.start[c + 1] += idx.start[c];
        }
        let mut fill = idx.start.clone();
        for (j, &c) in cells.iter().enumerate() {
            idx.items[fill[c]] = j;
            fill[c] += 1;
        }
        idx
    }

    fn coords_of(&self, p: Point) -> (usize, usize) {
        let cx = ((p[0] - self.bbox.min_x) / self.cell_w).floor();
        let cy = ((p[1] - self.bbox.min_y) / self.cell_h).floor();
        let cx = (cx.max(0.0) as usize).min(self.nx - 1);
        let cy = (cy.max(0.0) as usize).min(self.ny - 1);
        (cx, cy)
    }

    fn cell_of(&self, p: Point) -> usize {
        let (cx, cy) = self.coords_of(p);
        cy * self.nx + cx
    }

    /// Writes the `k` nearest centers to `out` as `(distance, index)`, sorted
    /// by distance then index. Exact, including the tie-break.
    pub(crate) fn nearest(&self, q: Point, k: usize, out: &mut Vec<(f64, usize)>) {
        out.clear();
        let k = k.min(self.centers.len());
        if k == 0 {
            return;
        }
        let (cx, cy) = self.coords_of(q);
        let (cx, cy) = (cx as isize, cy as isize);
        let max_r = self.nx.max(self.ny) as isize;
        for r in 0..=max_r {
            for gy in (cy - r)..=(cy + r) {
                if gy < 0 || gy >= self.ny as isize {
                    continue;
                }
                let on_edge_row = gy == cy - r || gy == cy + r;
                let step = if on_edge_row { 1 } else { (2 * r).max(1) };
                let mut gx = cx - r;
                while gx <= cx + r {
                    if gx >= 0 && gx < self.nx as isize {
                        let c = gy as usize * self.nx + gx as usize;
                        for &j in &self.items[self.start[c]..self.start[c + 1]] {
                            out.push((distance(q, self.centers[j]), j));
                        }
                    }
                    gx += step;
                }
            }
            if out.len() >= k {
                out.sort_unstable_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
                out.truncate(k);
                if out[k - 1].0 < self.unvisited_bound(q, cx, cy, r) {
                    return;
                }
            }
        }
        out.sort_unstable_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        out.truncate(k);
    }

    /// Nearest center accepted by `accept`, ties by lower index.
    pub(crate) fn nearest_where(&self, q: Point, mut accept: impl FnMut(usize) -> bool) -> Option<(f64, usize)> {
        let (cx, cy) = self.coords_of(q);
        let (cx, cy) = (cx as isize, cy as isize);
        let max_r = self.nx.max(self.ny) as isize;
        let mut best: Option<(f64, usize)> = None;
        for r in 0..=max_r {
            for gy in (cy - r)..=(cy + r) {
                if gy < 0 || gy >= self.ny as isize {
                    continue;
                }
                let on_edge_row = gy == cy - r || gy == cy + r;
                let step = if on_edge_row { 1 } else { (2 * r).max(1) };
                let mut gx = cx - r;
                while gx <= cx + r {
                    if gx >= 0 && gx < self.nx as isize {
                        let c = gy as usize * self.nx + gx as usize;
                        for &j in &self.items[self.start[c]..self.start[c + 1]] {
                            let d = distance(q, self.centers[j]);
                            let better = best.is_none_or(|(bd, bj)| d.total_cmp(&bd).then(j.cmp(&bj)).is_lt());
                            if better && accept(j) {
                                best = Some((d, j));
                            }
                        }
                    }
                    gx += step;
                }
            }
            if let Some((d, _)) = best {
                if d < self.unvisited_bound(q, cx, cy, r) {
                    break;
                }
            }
        }
        best
    }

    /// Lower bound on the distance from `q` to any cell outside rings `0..=r`.
    fn unvisited_bound(&self, q: Point, cx: isize, cy: isize, r: isize) -> f64 {
        let mut bound = f64::INFINITY;
        if cx - r > 0 {
            let edge = self.bbox.min_x + (cx - r) as f64 * self.cell_w;
            bound = bound.min(q[0] - edge);
        }
        if cx + r + 1 < self.nx as isize {
            let edge = self.bbox.min_x + (cx + r + 1) as f64 * self.cell_w;
            bound = bound.min(edge - q[0]);
        }
        if cy - r > 0 {
            let edge = self.bbox.min_y + (cy - r) as f64 * self.cell_h;
            bound = bound.min(q[1] - edge);
        }
        if cy + r + 1 < self.ny as isize {
            let edge = self.bbox.min_y + (cy + r + 1) as f64 * self.cell_h;
            bound = bound.min(edge - q[1]);
        }
        bound.max(0.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Four instances and four cells in two columns, k = 2. x0 sits high
    /// enough that y1 carries the largest weight sum and is repaired first.
    pub(crate) fn four_point_example() -> (Vec<Point>, Vec<Point>) {
        let xs = vec![[0.0, 2.8], [0.0, 1.6], [0.0, 1.0], [0.0, 0.0]];
        let ys = vec![[1.5, 2.4], [1.5, 1.6], [1.5, 1.0], [1.5, 0.0]];
        (xs, ys)
    }

    #[test]
    fn four_point_example_initial_graph() {
        let (xs, ys) = four_point_example();
        let g = build_knn_graph(&xs, &ys, 2).unwrap();
        let adj: Vec<Vec<usize>> = (0..4).map(|i| g.edges(i).iter().map(|e| e.grid).collect()).collect();
        assert_eq!(adj, vec![vec![0, 1], vec![1, 2], vec![1, 2], vec![2, 3]]);
        assert_eq!(g.deg_y_all(), &[1, 3, 3, 1]);
    }

    #[test]
    fn complete_graph_when_k_equals_n() {
        let (xs, ys) = four_point_example();
        let g = build_knn_graph(&xs, &ys, 4).unwrap();
        assert!(g.is_regular());
        assert_eq!(g.edge_count(), 16);
    }

    #[test]
    fn invalid_k() {
        let (xs, ys) = four_point_example();
        assert!(matches!(build_knn_graph(&xs, &ys, 5), Err(Error::InvalidK { k: 5, n: 4 })));
        assert!(matches!(build_knn_graph(&xs, &ys, 0), Err(Error::InvalidK { .. })));
    }

    #[test]
    fn mismatched_sizes() {
        let (xs, ys) = four_point_example();
        assert!(matches!(build_knn_graph(&xs[..3], &ys, 2), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn index_matches_brute_force_knn() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for trial in 0..40 {
            let n = rng.random_range(1..300);
            let centers: Vec<Point> = if trial % 2 == 0 {
                let side = (n as f64).sqrt().ceil() as usize;
                (0..n).map(|j| [(j % side) as f64, (j / side) as f64]).collect()
            } else {
                (0..n).map(|_| [rng.random::<f64>() * 10.0, rng.random::<f64>()]).collect()
            };
            let queries: Vec<Point> = (0..20)
                .map(|_| [rng.random_range(-3.0..13.0), rng.random_range(-2.0..3.0)])
                .collect();
            let idx = CenterIndex::new(&centers, &queries);
            let mut out = Vec::new();
            for &q in &queries {
                let k = rng.random_range(1..=n);
                idx.nearest(q, k, &mut out);
                let mut all: Vec<(f64, usize)> = centers.iter().enumerate().map(|(j, &c)| (distance(q, c), j)).collect();
                all.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
                all.truncate(k);
                assert_eq!(out, all);
            }
        }
    }

    #[test]
    fn grid_45_by_45_degree_counts() {
        let side = 45;
        let centers: Vec<Point> = (0..side * side)
            .map(|j| [(j % side) as f64 + 0.5, (j / side) as f64 + 0.5])
            .collect();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let points: Vec<Point> = (0..side * side)
            .map(|_| [rng.random::<f64>() * 45.0, rng.random::<f64>() * 45.0])
            .collect();
        let g = build_knn_graph(&points, &centers, 100).unwrap();
        assert!((0..g.n()).all(|i| g.deg_x(i) == 100));
        assert_eq!(g.deg_y_all().iter().sum::<usize>(), 202_500);
    }

    #[test]
    fn dummies_spread_over_low_degree_cells() {
        let centers: Vec<Point> = (0..9).map(|j| [(j % 3) as f64, (j / 3) as f64]).collect();
        let points = vec![[0.0, 0.0], [0.1, 0.0]];
        let g = build_padded_knn_graph(&points, &centers, 2).unwrap();
        assert_eq!(g.n_real(), 2);
        assert!(g.is_dummy(2));
        assert!((0..9).all(|i| g.deg_x(i) == 2));
        assert_eq!(g.deg_y_all().iter().sum::<usize>(), 18);
        assert!(g.edges(5).iter().all(|e| e.weight == 0.0));
    }

    #[test]
    fn from_adjacency_rejects_duplicates() {
        let (xs, ys) = four_point_example();
        let adj = vec![vec![0, 0], vec![1], vec![2], vec![3]];
        assert!(SparseBipartiteGraph::from_adjacency(xs, ys, 1, &adj).is_err());
    }
}
