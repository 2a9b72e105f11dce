//! Cost-ratio / timing sweep over k against the dense baseline.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{make_grid, normalize_points};
use crate::synthetic::clustered_points;

use super::approx::{cost_ratio, dense_baseline};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub dataset: String,
    #[serde(rename = "N")]
    pub n: usize,
    pub k: usize,
    pub trial: usize,
    pub c_k: f64,
    pub c_opt: f64,
    pub cr: f64,
    pub t_knn_seconds: f64,
    pub t_baseline_seconds: f64,
}

#[derive(Debug, Clone)]
pub struct BenchConfig {
    pub n: usize,
    pub ks: Vec<usize>,
    pub trials: usize,
    pub seed: u64,
}

pub const BENCH_DATASET: &str = "synthetic-clusters";

/// One row per (trial, k). Each trial draws a fresh clustered point set of
/// size `n`, grids it `ceil(√n)` square, and solves the dense baseline once.
pub fn run_bench(config: &BenchConfig) -> Result<Vec<BenchRow>> {
    if config.n == 0 {
        return Err(Error::InvalidInput("bench needs n >= 1".into()));
    }
    if config.ks.is_empty() {
        return Err(Error::InvalidInput("bench needs at least one k".into()));
    }
    let mut rows = Vec::with_capacity(config.trials * config.ks.len());
    for trial in 0..config.trials {
        let raw = clustered_points(config.n, config.seed.wrapping_add(trial as u64));
        let spec = make_grid(&raw, config.n)?;
        let points = normalize_points(&raw, &spec);
        let centers = spec.normalized_centers();
        let (optimal, t_baseline) = dense_baseline(&points, &centers)?;
        for &k in &config.ks {
            let k = k.clamp(1, centers.len());
            let (assignment, report) = crate::knn::approx_layout_padded(&points, &centers, k, false)?;
            rows.push(BenchRow {
                dataset: BENCH_DATASET.to_string(),
                n: config.n,
                k,
                trial,
                c_k: assignment.total_cost,
                c_opt: optimal.total_cost,
                cr: cost_ratio(assignment.total_cost, optimal.total_cost),
                t_knn_seconds: report.t_seconds,
                t_baseline_seconds: t_baseline,
            });
        }
    }
    Ok(rows)
}

/// Mean `(cr, t_knn, t_baseline)` per k, in first-seen k order.
pub fn summarize(rows: &[BenchRow]) -> Vec<(usize, f64, f64, f64)> {
    let mut ks: Vec<usize> = Vec::new();
    for r in rows {
        if !ks.contains(&r.k) {
            ks.push(r.k);
        }
    }
    ks.into_iter()
        .map(|k| {
            let sel: Vec<&BenchRow> = rows.iter().filter(|r| r.k == k).collect();
            let m = sel.len() as f64;
            (
                k,
                sel.iter().map(|r| r.cr).sum::<f64>() / m,
                sel.iter().map(|r| r.t_knn_seconds).sum::<f64>() / m,
                sel.iter().map(|r| r.t_baseline_seconds).sum::<f64>() / m,
            )
        })
        .collect()
}

pub fn write_csv<W: Write>(rows: &[BenchRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r).map_err(|e| Error::Internal(format!("csv: {e}")))?;
    }
    w.flush().map_err(|e| Error::io("<bench output>", e))?;
    Ok(())
}
