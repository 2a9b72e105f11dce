//! Independent oracles and fixtures shared by the integration suites.
#![allow(dead_code)]

use std::path::{Path, PathBuf};

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use tower::ServiceExt;

use oodlens::synthetic::{self, ColorBiasConfig, ClustersConfig};

/// AUROC by counting every (positive, negative) pair; ties count one half.
pub fn auroc_pairs(scores: &[f64], is_ood: &[bool]) -> f64 {
    let mut wins = 0.0;
    let mut pairs = 0.0;
    for (i, &si) in scores.iter().enumerate() {
        if !is_ood[i] {
            continue;
        }
        for (j, &sj) in scores.iter().enumerate() {
            if is_ood[j] {
                continue;
            }
            pairs += 1.0;
            if si > sj {
                wins += 1.0;
            } else if si == sj {
                wins += 0.5;
            }
        }
    }
    wins / pairs
}

/// Ranking by descending score, ties by ascending index, via a plain
/// selection loop.
fn rank_slowly(scores: &[f64]) -> Vec<usize> {
    let mut left: Vec<usize> = (0..scores.len()).collect();
    let mut out = Vec::new();
    while !left.is_empty() {
        let mut best = 0;
        for p in 1..left.len() {
            let (a, b) = (left[p], left[best]);
            if scores[a] > scores[b] || (scores[a] == scores[b] && a < b) {
                best = p;
            }
        }
        out.push(left.remove(best));
    }
    out
}

/// Average precision: precision at each positive's rank, averaged.
pub fn aupr_ranks(scores: &[f64], is_ood: &[bool]) -> f64 {
    let order = rank_slowly(scores);
    let positives: Vec<usize> = (0..order.len()).filter(|&r| is_ood[order[r]]).collect();
    let total: f64 = positives
        .iter()
        .map(|&r| {
            let hits = order[..=r].iter().filter(|&&i| is_ood[i]).count();
            hits as f64 / (r + 1) as f64
        })
        .sum();
    total / positives.len() as f64
}

pub fn prec_top(scores: &[f64], is_ood: &[bool], k: usize) -> f64 {
    let order = rank_slowly(scores);
    order[..k].iter().filter(|&&i| is_ood[i]).count() as f64 / k as f64
}

/// Central differences of `f` at `w`, step `h`.
pub fn central_gradient(f: impl Fn(&[f64]) -> f64, w: &[f64], h: f64) -> Vec<f64> {
    let mut w = w.to_vec();
    (0..w.len())
        .map(|i| {
            let orig = w[i];
            w[i] = orig + h;
            let up = f(&w);
            w[i] = orig - h;
            let down = f(&w);
            w[i] = orig;
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// Writes the default color-bias dataset under `dir/color-bias`.
pub fn write_color_bias(dir: &Path) -> PathBuf {
    let ds = synthetic::color_bias(&ColorBiasConfig::default());
    oodlens::dataset::write_dataset(&dir.join("color-bias"), &ds).unwrap()
}

/// A smaller color-bias dataset, quick to train on.
pub fn write_small_color_bias(dir: &Path) -> PathBuf {
    let ds = synthetic::color_bias(&ColorBiasConfig {
        n_train: 160,
        n_test: 80,
        ..Default::default()
    });
    oodlens::dataset::write_dataset(&dir.join("color-bias"), &ds).unwrap()
}

pub fn write_clusters(dir: &Path) -> PathBuf {
    let ds = synthetic::clusters(&ClustersConfig::default());
    oodlens::dataset::write_dataset(&dir.join("clusters"), &ds).unwrap()
}

pub fn app(data_dir: &Path) -> Router {
    let state = std::sync::Arc::new(oodlens::server::AppState::open(data_dir).unwrap());
    oodlens::server::router(state)
}

/// One request; returns status and raw body bytes.
pub async fn call(app: &Router, method: &str, uri: &str, body: Option<serde_json::Value>) -> (StatusCode, Vec<u8>) {
    let builder = Request::builder().method(method).uri(uri);
    let req = match body {
        Some(v) => builder
            .header("content-type", "application/json")
            .body(Body::from(serde_json::to_vec(&v).unwrap()))
            .unwrap(),
        None => builder.body(Body::empty()).unwrap(),
    };
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes().to_vec();
    (status, bytes)
}

pub async fn call_json(
    app: &Router,
    method: &str,
    uri: &str,
    body: Option<serde_json::Value>,
) -> (StatusCode, serde_json::Value) {
    let (s, b) = call(app, method, uri, body).await;
    let v = if b.is_empty() {
        serde_json::Value::Null
    } else {
        serde_json::from_slice(&b).unwrap_or_else(|_| serde_json::Value::String(String::from_utf8_lossy(&b).into()))
    };
    (s, v)
}
