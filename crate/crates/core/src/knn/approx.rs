use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::geom::{distance, Point};
use crate::lap::{self, Assignment, CostMatrix};

use super::{build_padded_knn_graph, repair};

/// Quality and timing of one kNN-approximate assignment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApproxReport {
    pub k: usize,
    /// Cost reached by the kNN route.
    pub c_k: f64,
    /// Optimal cost, present when the dense baseline ran.
    pub c_opt: Option<f64>,
    /// `(c_k - c_opt) / c_opt`; zero when `c_opt` is zero and the costs agree.
    pub cr: Option<f64>,
    /// Wall time of build + repair + sparse solve.
    pub t_seconds: f64,
    /// Wall time of cost-matrix construction + dense solve.
    pub t_baseline_seconds: Option<f64>,
}

/// Relative excess cost of an approximate solution over the optimum.
pub fn cost_ratio(c_k: f64, c_opt: f64) -> f64 {
    if c_opt == 0.0 {
        if c_k == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        (c_k - c_opt) / c_opt
    }
}

/// kNN graph → repair → sparse JV, optionally against the dense optimum.
/// `points.len()` must equal `grid_centers.len()`.
pub fn approx_layout(
    points: &[Point],
    grid_centers: &[Point],
    k: usize,
    with_baseline: bool,
) -> Result<(Assignment, ApproxReport)> {
    if points.len() != grid_centers.len() {
        return Err(crate::Error::InvalidInput(format!(
            "{} points but {} grid centers",
            points.len(),
            grid_centers.len()
        )));
    }
    approx_layout_padded(points, grid_centers, k, with_baseline)
}

/// As [`approx_layout`], padding with zero-cost dummy rows when there are
/// fewer points than centers. Rows `points.len()..` of the result are dummies.
pub fn approx_layout_padded(
    points: &[Point],
    grid_centers: &[Point],
    k: usize,
    with_baseline: bool,
) -> Result<(Assignment, ApproxReport)> {
    let start = Instant::now();
    let graph = build_padded_knn_graph(points, grid_centers, k)?;
    let graph = repair(graph)?;
    let assignment = lap::solve_sparse(&graph)?;
    let t_seconds = start.elapsed().as_secs_f64();

    let mut report = ApproxReport {
        k,
        c_k: assignment.total_cost,
        c_opt: None,
        cr: None,
        t_seconds,
        t_baseline_seconds: None,
    };
    if with_baseline {
        let (optimal, t) = dense_baseline(points, grid_centers)?;
        report.c_opt = Some(optimal.total_cost);
        report.cr = Some(cost_ratio(assignment.total_cost, optimal.total_cost));
        report.t_baseline_seconds = Some(t);
    }
    Ok((assignment, report))
}

/// Full cost matrix (dummy rows at zero) solved by dense JV; returns the
/// optimum and the elapsed seconds.
pub fn dense_baseline(points: &[Point], grid_centers: &[Point]) -> Result<(Assignment, f64)> {
    let start = Instant::now();
    let costs = dense_costs(points, grid_centers)?;
    let a = lap::solve_dense(&costs)?;
    Ok((a, start.elapsed().as_secs_f64()))
}

pub fn dense_costs(points: &[Point], grid_centers: &[Point]) -> Result<CostMatrix> {
    CostMatrix::from_fn(grid_centers.len(), |i, j| match points.get(i) {
        Some(&p) => distance(p, grid_centers[j]),
        None => 0.0,
    })
}
