//! Dataset-level pipelines shared by the CLI and the HTTP API.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::dataset::{Dataset, FeatureMatrix, Split};
use crate::ensemble::{self, OoDScoreTable, ScoreOptions};
use crate::error::{Error, Result};
use crate::geom::Point;
use crate::metrics::{self, EvalResult};
use crate::projection::{self, TsneConfig};

const MAX_TSNE_PERPLEXITY: f64 = 30.0;

#[derive(Debug, Clone, Serialize)]
pub struct DetectSummary {
    pub n_classifiers: usize,
    pub feature_sets: Vec<String>,
    pub coefficients: Vec<f64>,
    pub n_scored: usize,
    pub n_classes: usize,
    pub max_ood_score: f64,
    pub mean_ood_score: BTreeMap<Split, f64>,
    pub sample_types: BTreeMap<String, usize>,
    /// Test-split quality against the dataset's OoD flags, when available.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub evaluation: Option<EvalResult>,
}

/// Trains the classifier family on the training split and scores every sample.
pub fn run_detection(
    ds: &Dataset,
    n_models: usize,
    feature_sets: Option<&[String]>,
) -> Result<(OoDScoreTable, DetectSummary)> {
    let coefficients = ensemble::select_coefficients(n_models)?;
    let names: Vec<String> = match feature_sets {
        Some([]) => {
            return Err(Error::InvalidInput("feature_sets must not be empty".into()));
        }
        Some(names) => names.to_vec(),
        None => ds.features.iter().map(|f| f.name.clone()).collect(),
    };
    let mut chosen = Vec::with_capacity(names.len());
    for name in &names {
        let f = ds
            .feature_set(name)
            .ok_or_else(|| Error::InvalidInput(format!("unknown feature set `{name}`")))?;
        if chosen.iter().any(|c: &&FeatureMatrix| c.name == *name) {
            return Err(Error::InvalidInput(format!("feature set `{name}` listed twice")));
        }
        chosen.push(f);
    }
    let train = ds.ids_in(Split::Train);
    let train_features: Vec<_> = chosen.iter().map(|f| f.select(&train)).collect();
    let train_labels: Vec<usize> = train.iter().map(|&i| ds.labels[i]).collect();
    let classifiers = ensemble::train_family(&train_features, &train_labels, ds.n_classes(), &coefficients)?;

    let all: Vec<usize> = (0..ds.n_samples()).collect();
    let all_features: Vec<_> = chosen.iter().map(|&f| f.clone()).collect();
    let table = ensemble::score(&classifiers, &all_features, &all, &ScoreOptions::default())?;

    let mut sample_types = BTreeMap::new();
    let mut sums: BTreeMap<Split, (f64, usize)> = BTreeMap::new();
    for r in &table.rows {
        *sample_types.entry(r.sample_type.to_string()).or_insert(0) += 1;
        let e = sums.entry(ds.splits[r.sample_id]).or_insert((0.0, 0));
        e.0 += r.ood_score;
        e.1 += 1;
    }
    let evaluation = ds.ood_truth.as_ref().and_then(|truth| {
        let test = ds.ids_in(Split::Test);
        let scores: Vec<f64> = test.iter().map(|&i| table.rows[i].ood_score).collect();
        let flags: Vec<bool> = test.iter().map(|&i| truth[i]).collect();
        metrics::evaluate(&scores, &flags, &metrics::TABLE_KS).ok()
    });
    let summary = DetectSummary {
        n_classifiers: classifiers.len(),
        feature_sets: names,
        coefficients,
        n_scored: table.rows.len(),
        n_classes: table.n_classes,
        max_ood_score: (table.n_classes as f64).ln(),
        mean_ood_score: sums.into_iter().map(|(s, (t, c))| (s, t / c as f64)).collect(),
        sample_types,
        evaluation,
    };
    Ok((table, summary))
}


/// 2D coordinates for all samples: the stored projection, else t-SNE of the
/// first feature set.
pub fn project(ds: &Dataset, seed: u64) -> Result<Vec<Point>> {
    if let Some(c) = &ds.precomputed_2d {
        return Ok(c.clone());
    }
    let f = ds
        .features
        .first()
        .ok_or_else(|| Error::Config(format!("dataset `{}` has no feature sets", ds.name())))?;
    let n = f.rows() as f64;
    let perplexity = MAX_TSNE_PERPLEXITY.min((n / 3.0 - 1.0).max(1.0));
    log::info!("t-SNE on `{}` ({} samples, perplexity {perplexity})", f.name, f.rows());
    let p = projection::tsne_with(
        f,
        &TsneConfig {
            perplexity,
            seed,
            ..TsneConfig::default()
        },
    )?;
    Ok(p.coords)
}

