//! Square grid over the projection's bounding box and the padded assignment
//! of points to its cells.

use serde::{Deserialize, Serialize};

use crate::dataset::Split;
use crate::error::{Error, Result};
use crate::geom::{BBox, Point};
use crate::knn::{approx_layout_padded, ApproxReport};

/// Degenerate bbox axes are widened by this much on each side.
pub const DEGENERATE_EPS: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub m: usize,
    pub n: usize,
    pub bbox: BBox,
    /// Cell centers in row-major order, in the points' own coordinates.
    pub centers: Vec<Point>,
}

impl GridSpec {
    /// Builds an `m × n` grid over `bbox` with centers at cell midpoints.
    pub fn over(bbox: BBox, m: usize, n: usize) -> GridSpec {
        let bbox = bbox.expand_degenerate(DEGENERATE_EPS);
        let mut centers = Vec::with_capacity(m * n);
        for r in 0..m {
            for c in 0..n {
                centers.push([
                    bbox.min_x + (c as f64 + 0.5) * bbox.width() / n as f64,
                    bbox.min_y + (r as f64 + 0.5) * bbox.height() / m as f64,
                ]);
            }
        }
        GridSpec { m, n, bbox, centers }
    }

    pub fn cells(&self) -> usize {
        self.m * self.n
    }

    /// `(row, col)` of a row-major cell index.
    pub fn row_col(&self, cell: usize) -> (usize, usize) {
        (cell / self.n, cell % self.n)
    }

    /// Centers in unit-square bbox coordinates.
    pub fn normalized_centers(&self) -> Vec<Point> {
        (0..self.cells())
            .map(|cell| {
                let (r, c) = self.row_col(cell);
                [(c as f64 + 0.5) / self.n as f64, (r as f64 + 0.5) / self.m as f64]
            })
            .collect()
    }
}

/// `m = n = ceil(√n_real)` over the tight bounding box of `points`.
pub fn make_grid(points: &[Point], n_real: usize) -> Result<GridSpec> {
    if n_real == 0 {
        return Err(Error::InvalidInput("grid needs at least one sample".into()));
    }
    let bbox = BBox::around(points).ok_or_else(|| Error::InvalidInput("no points to grid".into()))?;
    let side = ceil_sqrt(n_real);
    Ok(GridSpec::over(bbox, side, side))
}

/// Smallest `r` with `r * r >= v`.
pub fn ceil_sqrt(v: usize) -> usize {
    let mut r = (v as f64).sqrt() as usize;
    while r * r < v {
        r += 1;
    }
    while r > 0 && (r - 1) * (r - 1) >= v {
        r -= 1;
    }
    r
}

/// Maps points into the grid's unit-square coordinates.
pub fn normalize_points(points: &[Point], spec: &GridSpec) -> Vec<Point> {
    let b = &spec.bbox;
    points
        .iter()
        .map(|p| [(p[0] - b.min_x) / b.width(), (p[1] - b.min_y) / b.height()])
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridAssignment {
    pub m: usize,
    pub n: usize,
    /// Indexed by input position; dummies excluded.
    pub cell_of_sample: Vec<usize>,
    /// `None` where a dummy instance landed.
    pub sample_of_cell: Vec<Option<usize>>,
    pub total_cost: f64,
    pub k_used: usize,
    /// The requested k exceeded the cell count and was clamped.
    pub k_clamped: bool,
    pub report: ApproxReport,
}

#[derive(Debug, Clone, Copy)]
pub struct LayoutOptions {
    pub k: usize,
    pub with_baseline: bool,
}

impl Default for LayoutOptions {
    fn default() -> Self {
        LayoutOptions {
            k: DEFAULT_K,
            with_baseline: false,
        }
    }
}

pub const DEFAULT_K: usize = 100;

/// Grids `points` with [`make_grid`] and assigns them with the kNN route.
pub fn layout(points: &[Point], k: usize) -> Result<GridAssignment> {
    layout_with(points, &LayoutOptions { k, with_baseline: false })
}

pub fn layout_with(points: &[Point], options: &LayoutOptions) -> Result<GridAssignment> {
    let spec = make_grid(points, points.len())?;
    layout_on_grid(points, &spec, options)
}

/// Assigns `points` to the cells of a given grid. Dummy instances pad the
/// problem to `m·n` rows at zero cost.
pub fn layout_on_grid(points: &[Point], spec: &GridSpec, options: &LayoutOptions) -> Result<GridAssignment> {
    if options.k == 0 {
        return Err(Error::InvalidK { k: 0, n: spec.cells() });
    }
    if points.len() > spec.cells() {
        return Err(Error::InvalidInput(format!(
            "{} points do not fit a {}x{} grid",
            points.len(),
            spec.m,
            spec.n
        )));
    }
    let cells = spec.cells();
    let k_clamped = options.k > cells;
    let k_used = options.k.min(cells);
    if k_clamped {
        log::warn!("k = {} exceeds the {cells} grid cells; clamped to {cells}", options.k);
    }
    let normalized = normalize_points(points, spec);
    let centers = spec.normalized_centers();
    let (assignment, report) = approx_layout_padded(&normalized, &centers, k_used, options.with_baseline)?;

    let cell_of_sample = assignment.perm[..points.len()].to_vec();
    let mut sample_of_cell = vec![None; cells];
    for (s, &c) in cell_of_sample.iter().enumerate() {
        sample_of_cell[c] = Some(s);
    }
    Ok(GridAssignment {
        m: spec.m,
        n: spec.n,
        cell_of_sample,
        sample_of_cell,
        total_cost: assignment.total_cost,
        k_used,
        k_clamped,
        report,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridSize {
    pub m: usize,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellEntry {
    pub cell: usize,
    pub sample_id: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub split: Option<Split>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub class: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ood_norm: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub matching_seconds: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub baseline_seconds: Option<f64>,
}

/// Serialized layout: `{grid: {m, n}, cells: [{cell, sample_id|null}], total_cost, k, cr?, timings}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayoutDocument {
    pub grid: GridSize,
    pub cells: Vec<CellEntry>,
    pub total_cost: f64,
    pub k: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cr: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timings: Option<Timings>,
}

impl GridAssignment {
    /// Document with dataset sample ids (`ids[position]`) and timings.
    pub fn to_document(&self, ids: &[usize]) -> LayoutDocument {
        LayoutDocument {
            grid: GridSize { m: self.m, n: self.n },
            cells: self
                .sample_of_cell
                .iter()
                .enumerate()
                .map(|(cell, s)| CellEntry {
                    cell,
                    sample_id: s.map(|p| ids[p]),
                    split: None,
                    class: None,
                    ood_norm: None,
                })
                .collect(),
            total_cost: self.total_cost,
            k: self.k_used,
            cr: self.report.cr,
            timings: Some(Timings {
                matching_seconds: self.report.t_seconds,
                baseline_seconds: self.report.t_baseline_seconds,
            }),
        }
    }

    /// Cell `(row, col)` of the sample at input position `s`.
    pub fn position_of(&self, s: usize) -> (usize, usize) {
        let c = self.cell_of_sample[s];
        (c / self.n, c % self.n)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lap::{brute_force, solve_dense, CostMatrix};
    use crate::geom::distance;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn grid_sizes() {
        let pts = vec![[0.0, 0.0], [1.0, 1.0]];
        let g = make_grid(&pts, 2025).unwrap();
        assert_eq!((g.m, g.n), (45, 45));
        let g = make_grid(&pts, 5).unwrap();
        assert_eq!((g.m, g.n, g.cells() - 5), (3, 3, 4));
    }

    #[test]
    fn single_point_grid_centers_on_point() {
        let g = make_grid(&[[2.0, -3.0]], 1).unwrap();
        assert_eq!((g.m, g.n), (1, 1));
        assert!(distance(g.centers[0], [2.0, -3.0]) < 1e-15);
        let a = layout(&[[2.0, -3.0]], 100).unwrap();
        assert_eq!(a.cell_of_sample, vec![0]);
        assert!(a.k_clamped);
        assert!(a.total_cost.abs() < 1e-12);
    }

    #[test]
    fn ceil_sqrt_values() {
        for (v, r) in [(1, 1), (2, 2), (4, 2), (5, 3), (9, 3), (10, 4), (2025, 45), (2026, 46)] {
            assert_eq!(ceil_sqrt(v), r);
        }
    }

    #[test]
    fn points_on_given_centers_cost_nothing() {
        let spec = GridSpec::over(
            BBox {
                min_x: 0.0,
                min_y: 0.0,
                max_x: 2.0,
                max_y: 2.0,
            },
            2,
            2,
        );
        let pts = vec![spec.centers[3], spec.centers[0], spec.centers[2], spec.centers[1]];
        let a = layout_on_grid(&pts, &spec, &LayoutOptions { k: 2, with_baseline: false }).unwrap();
        assert_eq!(a.cell_of_sample, vec![3, 0, 2, 1]);
        assert_eq!(a.total_cost, 0.0);
    }

    #[test]
    fn corner_points_take_corner_cells() {
        let pts = vec![[1.0, 1.0], [0.0, 0.0], [0.0, 1.0], [1.0, 0.0]];
        let a = layout(&pts, 2).unwrap();
        assert_eq!(a.cell_of_sample, vec![3, 0, 2, 1]);
    }

    #[test]
    fn full_k_matches_dense_optimum() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let pts: Vec<Point> = (0..30).map(|_| [rng.random(), rng.random()]).collect();
        let a = layout(&pts, 36).unwrap();
        let spec = make_grid(&pts, 30).unwrap();
        let norm = normalize_points(&pts, &spec);
        let centers = spec.normalized_centers();
        let w = CostMatrix::from_fn(36, |i, j| if i < 30 { distance(norm[i], centers[j]) } else { 0.0 }).unwrap();
        assert_eq!(a.total_cost, solve_dense(&w).unwrap().total_cost);
    }

    #[test]
    fn padding_is_neutral_against_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..40 {
            let n_real = rng.random_range(2..=8usize);
            let pts: Vec<Point> = (0..n_real).map(|_| [rng.random(), rng.random()]).collect();
            let spec = make_grid(&pts, n_real).unwrap();
            let cells = spec.cells();
            if cells > 9 {
                continue;
            }
            let a = layout_on_grid(&pts, &spec, &LayoutOptions { k: cells, with_baseline: false }).unwrap();
            let norm = normalize_points(&pts, &spec);
            let centers = spec.normalized_centers();
            let w = CostMatrix::from_fn(cells, |i, j| if i < n_real { distance(norm[i], centers[j]) } else { 0.0 })
                .unwrap();
            let b = brute_force(&w).unwrap();
            assert_eq!(a.cell_of_sample, b.perm[..n_real].to_vec());
            assert!((a.total_cost - b.total_cost).abs() < 1e-12);
        }
    }

    #[test]
    fn occupied_cells_equal_real_samples() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let pts: Vec<Point> = (0..50).map(|_| [rng.random(), rng.random::<f64>() * 3.0]).collect();
        let a = layout(&pts, 10).unwrap();
        assert_eq!(a.sample_of_cell.iter().filter(|s| s.is_some()).count(), 50);
        for (s, &c) in a.cell_of_sample.iter().enumerate() {
            assert_eq!(a.sample_of_cell[c], Some(s));
        }
    }

    #[test]
    fn document_shape() {
        let pts = vec![[0.0, 0.0], [1.0, 1.0]];
        let a = layout(&pts, 4).unwrap();
        let doc = a.to_document(&[10, 20]);
        let json = serde_json::to_value(&doc).unwrap();
        assert_eq!(json["grid"], serde_json::json!({"m": 2, "n": 2}));
        assert_eq!(json["cells"].as_array().unwrap().len(), 4);
        assert_eq!(json["k"], 4);
        let ids: Vec<_> = json["cells"].as_array().unwrap().iter().map(|c| c["sample_id"].clone()).collect();
        assert!(ids.contains(&serde_json::json!(10)));
        assert!(ids.contains(&serde_json::Value::Null));
        let back: LayoutDocument = serde_json::from_value(json).unwrap();
        assert_eq!(back, doc);
    }
}
