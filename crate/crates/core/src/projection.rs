//! 2D embeddings: exact t-SNE over z-scored features, or coordinates read
//! from a `x,y` CSV.

use std::fs;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::dataset::{write_file, FeatureMatrix};
use crate::error::{Error, Result};
use crate::geom::Point;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProjectionSource {
    Computed,
    Precomputed,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProjectedPoints {
    pub coords: Vec<Point>,
    pub source: ProjectionSource,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TsneConfig {
    pub perplexity: f64,
    pub iterations: usize,
    pub learning_rate: f64,
    pub early_exaggeration: f64,
    pub exaggeration_iterations: usize,
    pub initial_momentum: f64,
    pub final_momentum: f64,
    pub momentum_switch: usize,
    pub init_sigma: f64,
    pub seed: u64,
}

impl Default for TsneConfig {
    fn default() -> Self {
        TsneConfig {
            perplexity: 30.0,
            iterations: 1000,
            learning_rate: 200.0,
            early_exaggeration: 12.0,
            exaggeration_iterations: 250,
            initial_momentum: 0.5,
            final_momentum: 0.8,
            momentum_switch: 250,
            init_sigma: 1e-4,
            seed: 0,
        }
    }
}

const PERPLEXITY_STEPS: usize = 50;
const PERPLEXITY_TOL: f64 = 1e-5;

pub fn tsne(features: &FeatureMatrix, perplexity: f64, iterations: usize, seed: u64) -> Result<ProjectedPoints> {
    tsne_with(
        features,
        &TsneConfig {
            perplexity,
            iterations,
            seed,
            ..TsneConfig::default()
        },
    )
}

pub fn tsne_with(features: &FeatureMatrix, config: &TsneConfig) -> Result<ProjectedPoints> {
    let n = features.rows();
    if n < 4 {
        return Err(Error::InvalidInput(format!("t-SNE needs at least 4 samples, got {n}")));
    }
    if !(config.perplexity > 0.0 && config.perplexity < n as f64 / 3.0) {
        return Err(Error::InvalidInput(format!(
            "perplexity {} must be positive and below N/3 = {:.3}",
            config.perplexity,
            n as f64 / 3.0
        )));
    }
    let x = zscore(features);
    let d2 = squared_distances(&x, n, features.dim());
    let (cond, _) = conditional_affinities(&d2, n, config.perplexity)?;

    let mut p = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            if i != j {
                p[i * n + j] = ((cond[i * n + j] + cond[j * n + i]) / (2.0 * n as f64)).max(1e-12);
            }
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let init = Normal::new(0.0, config.init_sigma)
        .map_err(|e| Error::InvalidInput(format!("init_sigma: {e}")))?;
    let mut y: Vec<f64> = (0..2 * n).map(|_| init.sample(&mut rng)).collect();
    let mut update = vec![0.0; 2 * n];
    let mut gains = vec![1.0f64; 2 * n];
    let mut grad = vec![0.0; 2 * n];
    let mut num = vec![0.0; n * n];

    for iter in 0..config.iterations {
        let exaggeration = if iter < config.exaggeration_iterations {
            config.early_exaggeration
        } else {
            1.0
        };
        let momentum = if iter < config.momentum_switch {
            config.initial_momentum
        } else {
            config.final_momentum
        };

        let mut z = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                let dx = y[2 * i] - y[2 * j];
                let dy = y[2 * i + 1] - y[2 * j + 1];
                let q = 1.0 / (1.0 + dx * dx + dy * dy);
                num[i * n + j] = q;
                num[j * n + i] = q;
                z += 2.0 * q;
            }
        }
        for i in 0..n {
            let (mut gx, mut gy) = (0.0, 0.0);
            for j in 0..n {
                if i == j {
                    continue;
                }
                let q = num[i * n + j];
                let mult = (exaggeration * p[i * n + j] - q / z) * q;
                gx += mult * (y[2 * i] - y[2 * j]);
                gy += mult * (y[2 * i + 1] - y[2 * j + 1]);
            }
            grad[2 * i] = 4.0 * gx;
            grad[2 * i + 1] = 4.0 * gy;
        }
        for t in 0..2 * n {
            gains[t] = if (grad[t] > 0.0) != (update[t] > 0.0) {
                gains[t] + 0.2
            } else {
                (gains[t] * 0.8).max(0.01)
            };
            update[t] = momentum * update[t] - config.learning_rate * gains[t] * grad[t];
            y[t] += update[t];
        }
        center(&mut y, n);
    }
    center(&mut y, n);
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::Degenerate("t-SNE diverged to non-finite coordinates".into()));
    }
    Ok(ProjectedPoints {
        coords: (0..n).map(|i| [y[2 * i], y[2 * i + 1]]).collect(),
        source: ProjectionSource::Computed,
        seed: config.seed,
    })
}

fn center(y: &mut [f64], n: usize) {
    for axis in 0..2 {
        let mean = (0..n).map(|i| y[2 * i + axis]).sum::<f64>() / n as f64;
        for i in 0..n {
            y[2 * i + axis] -= mean;
        }
    }
}

/// Per-dimension standardization; constant dimensions become zero.
pub fn zscore(features: &FeatureMatrix) -> Vec<f64> {
    let (n, d) = (features.rows(), features.dim());
    let mut out = features.data().to_vec();
    for c in 0..d {
        let mean = (0..n).map(|i| out[i * d + c]).sum::<f64>() / n as f64;
        let var = (0..n).map(|i| (out[i * d + c] - mean).powi(2)).sum::<f64>() / n as f64;
        let sd = var.sqrt();
        for i in 0..n {
            out[i * d + c] = if sd > 0.0 { (out[i * d + c] - mean) / sd } else { 0.0 };
        }
    }
    out
}

fn squared_distances(x: &[f64], n: usize, d: usize) -> Vec<f64> {
    let mut out = vec![0.0; n * n];
    for i in 0..n {
        for j in (i + 1)..n {
            let s: f64 = (0..d).map(|c| (x[i * d + c] - x[j * d + c]).powi(2)).sum();
            out[i * n + j] = s;
            out[j * n + i] = s;
        }
    }
    out
}

/// Row-conditional Gaussian affinities whose perplexity matches the target.
/// Returns the row-major `P(j|i)` matrix and the achieved per-row perplexity.
pub fn conditional_affinities(d2: &[f64], n: usize, perplexity: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    let target = perplexity.ln();
    let mut p = vec![0.0; n * n];
    let mut achieved = vec![0.0; n];
    let mut row = vec![0.0; n];
    for i in 0..n {
        let d_min = (0..n).filter(|&j| j != i).map(|j| d2[i * n + j]).fold(f64::INFINITY, f64::min);
        let (mut beta, mut lo, mut hi) = (1.0, 0.0, f64::INFINITY);
        let mut converged = false;
        let mut h = 0.0;
        for _ in 0..PERPLEXITY_STEPS {
            let mut sum = 0.0;
            let mut weighted = 0.0;
            for j in 0..n {
                if j == i {
                    row[j] = 0.0;
                    continue;
                }
                let shifted = d2[i * n + j] - d_min;
                row[j] = (-beta * shifted).exp();
                sum += row[j];
                weighted += shifted * row[j];
            }
            h = sum.ln() + beta * weighted / sum;
            if (h.exp() - perplexity).abs() < PERPLEXITY_TOL {
                converged = true;
                break;
            }
            if h > target {
                lo = beta;
                beta = if hi.is_finite() { (beta + hi) / 2.0 } else { beta * 2.0 };
            } else {
                hi = beta;
                beta = (beta + lo) / 2.0;
            }
        }
        if !converged {
            return Err(Error::Degenerate(format!(
                "perplexity search for row {i} did not converge in {PERPLEXITY_STEPS} steps (reached {:.6})",
                h.exp()
            )));
        }
        let sum: f64 = row.iter().sum();
        for j in 0..n {
            p[i * n + j] = row[j] / sum;
        }
        achieved[i] = h.exp();
    }
    Ok((p, achieved))
}

/// Reads an `x,y` CSV. The row count must equal `expected_rows`.
pub fn load_precomputed(path: &Path, expected_rows: usize) -> Result<ProjectedPoints> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file);
    let headers = rdr
        .headers()
        .map_err(|e| Error::parse(path, 1, e.to_string()))?
        .clone();
    if headers.len() != 2 || &headers[0] != "x" || &headers[1] != "y" {
        return Err(Error::parse(path, 1, "header must be `x,y`"));
    }
    let mut coords = Vec::new();
    for (r, rec) in rdr.records().enumerate() {
        let line = r + 2;
        let rec = rec.map_err(|e| Error::parse(path, line, e.to_string()))?;
        let mut xy = [0.0; 2];
        for (slot, cell) in xy.iter_mut().zip(rec.iter()) {
            *slot = cell
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::parse(path, line, format!("`{cell}` is not a finite number")))?;
        }
        coords.push(xy);
    }
    if coords.len() != expected_rows {
        return Err(Error::ManifestMismatch {
            path: path.to_path_buf(),
            expected: expected_rows,
            found: coords.len(),
        });
    }
    Ok(ProjectedPoints {
        coords,
        source: ProjectionSource::Precomputed,
        seed: 0,
    })
}

pub fn save_precomputed(path: &Path, coords: &[Point]) -> Result<()> {
    let mut text = String::from("x,y\n");
    for p in coords {
        text.push_str(&format!("{},{}\n", p[0], p[1]));
    }
    write_file(path, &text)
}
