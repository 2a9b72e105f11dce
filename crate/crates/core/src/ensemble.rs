//! Ensemble OoD detection.
//!
//! Every feature set is paired with every regularization coefficient; each
//! pair trains a multinomial logistic regression. The class distributions of
//! all classifiers are averaged per sample and the OoD score is the entropy
//! of that average, in nats.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::FeatureMatrix;
use crate::error::{Error, Result};

pub const MAX_MODELS: usize = 11;
pub const GRAD_TOL: f64 = 1e-6;
pub const MAX_ITERATIONS: usize = 1000;

/// Regularization coefficients `10^e` with exponents spread evenly over
/// `[-5, 5]`: `round(linspace(-5, 5, n))`, deduplicated. `n = 1` gives `{1}`.
pub fn select_coefficients(n_models: usize) -> Result<Vec<f64>> {
    if !(1..=MAX_MODELS).contains(&n_models) {
        return Err(Error::InvalidCount(format!(
            "n_models = {n_models}, must be within 1..={MAX_MODELS}"
        )));
    }
    if n_models == 1 {
        return Ok(vec![1.0]);
    }
    let mut exps: Vec<i32> = (0..n_models)
        .map(|i| (-5.0 + 10.0 * i as f64 / (n_models - 1) as f64).round() as i32)
        .collect();
    exps.dedup();
    Ok(exps.into_iter().map(|e| 10f64.powi(e)).collect())
}

/// Per-dimension mean and standard deviation from the training rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Standardizer {
    pub fn fit(x: &FeatureMatrix) -> Standardizer {
        let (n, d) = (x.rows() as f64, x.dim());
        let mut mean = vec![0.0; d];
        for i in 0..x.rows() {
            for (m, v) in mean.iter_mut().zip(x.row(i)) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; d];
        for i in 0..x.rows() {
            for ((s, v), m) in var.iter_mut().zip(x.row(i)).zip(&mean) {
                *s += (v - m).powi(2);
            }
        }
        let scale = var.into_iter().map(|s| if s > 0.0 { (s / n).sqrt() } else { 1.0 }).collect();
        Standardizer { mean, scale }
    }

    pub fn apply(&self, x: &FeatureMatrix) -> Vec<f64> {
        let mut out = Vec::with_capacity(x.rows() * x.dim());
        for i in 0..x.rows() {
            for ((v, m), s) in x.row(i).iter().zip(&self.mean).zip(&self.scale) {
                out.push((v - m) / s);
            }
        }
        out
    }
}

/// Softmax regression weights. Row-major `(dim + 1) × classes`; the last row
/// is the bias.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticModel {
    pub dim: usize,
    pub classes: usize,
    pub weights: Vec<f64>,
}

impl LogisticModel {
    pub fn zeros(dim: usize, classes: usize) -> Self {
        LogisticModel {
            dim,
            classes,
            weights: vec![0.0; (dim + 1) * classes],
        }
    }

    /// Class distribution for one standardized feature row.
    pub fn predict_proba(&self, x: &[f64]) -> Vec<f64> {
        let mut z = vec![0.0; self.classes];
        logits(&self.weights, self.dim, self.classes, x, &mut z);
        softmax_in_place(&mut z);
        z
    }
}

fn logits(w: &[f64], dim: usize, classes: usize, x: &[f64], out: &mut [f64]) {
    out.copy_from_slice(&w[dim * classes..(dim + 1) * classes]);
    for (d, &xv) in x.iter().enumerate() {
        let row = &w[d * classes..(d + 1) * classes];
        for (o, &wv) in out.iter_mut().zip(row) {
            *o += xv * wv;
        }
    }
}

fn softmax_in_place(z: &mut [f64]) {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in z.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    for v in z.iter_mut() {
        *v /= sum;
    }
}

/// `0.5‖W‖² + c · Σ cross-entropy` (bias unregularized) and its gradient.
/// `x` is row-major `n × dim`, already standardized.
pub fn objective(w: &[f64], x: &[f64], y: &[usize], dim: usize, classes: usize, c: f64) -> (f64, Vec<f64>) {
    let mut grad = vec![0.0; w.len()];
    let mut f = 0.0;
    for (g, &wv) in grad[..dim * classes].iter_mut().zip(&w[..dim * classes]) {
        f += 0.5 * wv * wv;
        *g = wv;
    }
    let mut z = vec![0.0; classes];
    let mut ce = 0.0;
    for (i, &label) in y.iter().enumerate() {
        let xi = &x[i * dim..(i + 1) * dim];
        logits(w, dim, classes, xi, &mut z);
        let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + z.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
        ce += lse - z[label];
        for (k, zk) in z.iter_mut().enumerate() {
            let p = (*zk - lse).exp();
            *zk = c * (p - if k == label { 1.0 } else { 0.0 });
        }
        for (d, &xv) in xi.iter().enumerate() {
            for (g, r) in grad[d * classes..(d + 1) * classes].iter_mut().zip(&z) {
                *g += xv * r;
            }
        }
        for (g, r) in grad[dim * classes..].iter_mut().zip(&z) {
            *g += r;
        }
    }
    (f + c * ce, grad)
}

/// Mean cross-entropy of a model on standardized rows.
pub fn mean_cross_entropy(model: &LogisticModel, x: &[f64], y: &[usize]) -> f64 {
    let mut z = vec![0.0; model.classes];
    let mut total = 0.0;
    for (i, &label) in y.iter().enumerate() {
        logits(&model.weights, model.dim, model.classes, &x[i * model.dim..(i + 1) * model.dim], &mut z);
        let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + z.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
        total += lse - z[label];
    }
    total / y.len().max(1) as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainOutcome {
    pub iterations: usize,
    pub grad_inf_norm: f64,
    pub converged: bool,
}

/// Full-batch L-BFGS with Armijo backtracking from zero weights. Stops when
/// the gradient ∞-norm drops below [`GRAD_TOL`] or after [`MAX_ITERATIONS`].
pub fn train_logistic(x: &[f64], y: &[usize], dim: usize, classes: usize, c: f64) -> (LogisticModel, TrainOutcome) {
    const HISTORY: usize = 10;
    let mut w = vec![0.0; (dim + 1) * classes];
    let (mut f, mut g) = objective(&w, x, y, dim, classes, c);
    let mut s_hist: Vec<Vec<f64>> = Vec::new();
    let mut y_hist: Vec<Vec<f64>> = Vec::new();
    let mut iterations = 0;
    let inf_norm = |g: &[f64]| g.iter().fold(0.0f64, |m, v| m.max(v.abs()));

    while inf_norm(&g) >= GRAD_TOL && iterations < MAX_ITERATIONS {
        iterations += 1;
        let mut dir = lbfgs_direction(&g, &s_hist, &y_hist);
        let mut slope = dot(&dir, &g);
        if slope >= 0.0 {
            dir = g.iter().map(|v| -v).collect();
            slope = dot(&dir, &g);
            s_hist.clear();
            y_hist.clear();
        }
        let mut step = if s_hist.is_empty() { 1.0 / inf_norm(&g).max(1.0) } else { 1.0 };
        let mut accepted = None;
        for _ in 0..60 {
            let w_new: Vec<f64> = w.iter().zip(&dir).map(|(a, d)| a + step * d).collect();
            let (f_new, g_new) = objective(&w_new, x, y, dim, classes, c);
            if f_new.is_finite() && f_new <= f + 1e-4 * step * slope {
                accepted = Some((w_new, f_new, g_new));
                break;
            }
            step *= 0.5;
        }
        let Some((w_new, f_new, g_new)) = accepted else {
            break;
        };
        let s: Vec<f64> = w_new.iter().zip(&w).map(|(a, b)| a - b).collect();
        let yv: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
        if dot(&s, &yv) > 1e-12 * dot(&yv, &yv).max(f64::MIN_POSITIVE) {
            if s_hist.len() == HISTORY {
                s_hist.remove(0);
                y_hist.remove(0);
            }
            s_hist.push(s);
            y_hist.push(yv);
        }
        w = w_new;
        f = f_new;
        g = g_new;
    }
    let grad_inf_norm = inf_norm(&g);
    (
        LogisticModel {
            dim,
            classes,
            weights: w,
        },
        TrainOutcome {
            iterations,
            grad_inf_norm,
            converged: grad_inf_norm < GRAD_TOL,
        },
    )
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn lbfgs_direction(g: &[f64], s_hist: &[Vec<f64>], y_hist: &[Vec<f64>]) -> Vec<f64> {
    let mut q = g.to_vec();
    let m = s_hist.len();
    let mut alpha = vec![0.0; m];
    for k in (0..m).rev() {
        let rho = 1.0 / dot(&y_hist[k], &s_hist[k]);
        alpha[k] = rho * dot(&s_hist[k], &q);
        for (qv, yv) in q.iter_mut().zip(&y_hist[k]) {
            *qv -= alpha[k] * yv;
        }
    }
    if let (Some(s), Some(y)) = (s_hist.last(), y_hist.last()) {
        let gamma = dot(s, y) / dot(y, y);
        q.iter_mut().for_each(|v| *v *= gamma);
    }
    for k in 0..m {
        let rho = 1.0 / dot(&y_hist[k], &s_hist[k]);
        let beta = rho * dot(&y_hist[k], &q);
        for (qv, sv) in q.iter_mut().zip(&s_hist[k]) {
            *qv += (alpha[k] - beta) * sv;
        }
    }
    q.iter_mut().for_each(|v| *v = -*v);
    q
}

/// One trained member of the family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierSpec {
    pub feature_set: String,
    pub reg_coefficient: f64,
    pub standardizer: Standardizer,
    pub model: LogisticModel,
    pub outcome: TrainOutcome,
}

impl ClassifierSpec {
    /// Class distributions for every row of `x` (raw features).
    pub fn predict(&self, x: &FeatureMatrix) -> Result<Vec<Vec<f64>>> {
        if x.dim() != self.model.dim {
            return Err(Error::Config(format!(
                "feature set `{}` has {} dimensions, classifier expects {}",
                x.name,
                x.dim(),
                self.model.dim
            )));
        }
        let z = self.standardizer.apply(x);
        Ok((0..x.rows())
            .map(|i| self.model.predict_proba(&z[i * x.dim()..(i + 1) * x.dim()]))
            .collect())
    }
}

fn distinct_classes(labels: &[usize]) -> usize {
    let mut seen: Vec<usize> = labels.to_vec();
    seen.sort_unstable();
    seen.dedup();
    seen.len()
}

/// Trains `|features| × |coefficients|` classifiers, feature-major. Each
/// feature matrix holds the training rows, parallel to `labels`.
pub fn train_family(
    features: &[FeatureMatrix],
    labels: &[usize],
    n_classes: usize,
    coefficients: &[f64],
) -> Result<Vec<ClassifierSpec>> {
    let distinct = distinct_classes(labels);
    if distinct < 2 {
        return Err(Error::DegenerateLabels { classes: distinct });
    }
    if let Some(&bad) = labels.iter().find(|&&l| l >= n_classes) {
        return Err(Error::InvalidInput(format!("label {bad} out of range 0..{n_classes}")));
    }
    if let Some(&c) = coefficients.iter().find(|&&c| !(c > 0.0 && c.is_finite())) {
        return Err(Error::Config(format!("regularization coefficient {c} must be positive")));
    }
    let mut out = Vec::with_capacity(features.len() * coefficients.len());
    for f in features {
        if f.rows() != labels.len() {
            return Err(Error::InvalidInput(format!(
                "feature set `{}` has {} training rows for {} labels",
                f.name,
                f.rows(),
                labels.len()
            )));
        }
        let standardizer = Standardizer::fit(f);
        let x = standardizer.apply(f);
        for &c in coefficients {
            let (model, outcome) = train_logistic(&x, labels, f.dim(), n_classes, c);
            if !outcome.converged {
                log::debug!(
                    "{} C={c:e}: stopped after {} iterations, |grad|inf = {:.3e}",
                    f.name,
                    outcome.iterations,
                    outcome.grad_inf_norm
                );
            }
            out.push(ClassifierSpec {
                feature_set: f.name.clone(),
                reg_coefficient: c,
                standardizer: standardizer.clone(),
                model,
                outcome,
            });
        }
    }
    Ok(out)
}

/// "Deep ensembles"-style baseline: `members` classifiers of one coefficient
/// on one feature set, each fit to a seeded bootstrap resample.
pub fn train_bootstrap(
    feature: &FeatureMatrix,
    labels: &[usize],
    n_classes: usize,
    coefficient: f64,
    members: usize,
    seed: u64,
) -> Result<Vec<ClassifierSpec>> {
    if members == 0 {
        return Err(Error::InvalidCount("bootstrap ensemble needs at least one member".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = labels.len();
    let mut out = Vec::with_capacity(members);
    for _ in 0..members {
        let rows: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
        let sub = feature.select(&rows);
        let sub_labels: Vec<usize> = rows.iter().map(|&r| labels[r]).collect();
        out.extend(train_family(&[sub], &sub_labels, n_classes, &[coefficient])?);
    }
    Ok(out)
}

/// Entropy in nats, treating `0 ln 0` as zero.
pub fn entropy(p: &[f64]) -> f64 {
    -p.iter().filter(|&&v| v > 0.0).map(|&v| v * v.ln()).sum::<f64>()
}

/// Per-class mean over distributions. Values are summed in sorted order so
/// the result does not depend on the order of `dists`.
pub fn average_distributions(dists: &[&[f64]]) -> Vec<f64> {
    let classes = dists.first().map_or(0, |d| d.len());
    let mut column = Vec::with_capacity(dists.len());
    (0..classes)
        .map(|c| {
            column.clear();
            column.extend(dists.iter().map(|d| d[c]));
            column.sort_unstable_by(f64::total_cmp);
            column.iter().sum::<f64>() / dists.len() as f64
        })
        .collect()
}

/// Entropy of the averaged distribution, clamped to `[0, ln C]`.
pub fn ensemble_score(dists: &[&[f64]]) -> (Vec<f64>, f64) {
    let avg = average_distributions(dists);
    let max = (avg.len() as f64).ln();
    let h = entropy(&avg).clamp(0.0, max.max(0.0));
    (avg, h)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SampleType {
    KnownUnknown,
    UnknownUnknown,
    Reliable,
    Normal,
    Boundary,
}

impl SampleType {
    pub fn as_str(self) -> &'static str {
        match self {
            SampleType::KnownUnknown => "known_unknown",
            SampleType::UnknownUnknown => "unknown_unknown",
            SampleType::Reliable => "reliable",
            SampleType::Normal => "normal",
            SampleType::Boundary => "boundary",
        }
    }
}

impl fmt::Display for SampleType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SampleType {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        [
            SampleType::KnownUnknown,
            SampleType::UnknownUnknown,
            SampleType::Reliable,
            SampleType::Normal,
            SampleType::Boundary,
        ]
        .into_iter()
        .find(|t| t.as_str() == s)
        .ok_or_else(|| format!("unknown sample type `{s}`"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    pub ood_hi: f64,
    pub conf_hi: f64,
    pub conf_reliable: f64,
}

impl Thresholds {
    pub fn defaults(n_classes: usize) -> Thresholds {
        Thresholds {
            ood_hi: 0.6 * (n_classes as f64).ln(),
            conf_hi: 0.7,
            conf_reliable: 0.9,
        }
    }

    pub fn validate(&self, n_classes: usize) -> Result<()> {
        let ln_c = (n_classes as f64).ln();
        if !(self.ood_hi > 0.0 && self.ood_hi < ln_c) {
            return Err(Error::Config(format!("ood_hi = {} must lie in (0, ln C = {ln_c:.6})", self.ood_hi)));
        }
        if !(self.conf_hi > 0.0 && self.conf_hi <= self.conf_reliable && self.conf_reliable <= 1.0) {
            return Err(Error::Config(format!(
                "need 0 < conf_hi ({}) <= conf_reliable ({}) <= 1",
                self.conf_hi, self.conf_reliable
            )));
        }
        Ok(())
    }
}

pub fn classify_sample_type(ood_score: f64, confidence: f64, t: &Thresholds, n_classes: usize) -> Result<SampleType> {
    t.validate(n_classes)?;
    Ok(sample_type_unchecked(ood_score, confidence, t))
}

fn sample_type_unchecked(ood: f64, conf: f64, t: &Thresholds) -> SampleType {
    match (ood >= t.ood_hi, conf) {
        (true, c) if c < t.conf_hi => SampleType::KnownUnknown,
        (true, _) => SampleType::UnknownUnknown,
        (false, c) if c >= t.conf_reliable => SampleType::Reliable,
        (false, c) if c < t.conf_hi => SampleType::Boundary,
        (false, _) => SampleType::Normal,
    }
}

/// One exported score row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRow {
    pub sample_id: usize,
    pub ood_score: f64,
    /// `ood_score / ln C`.
    pub ood_score_normalized: f64,
    pub confidence: f64,
    pub predicted_class: usize,
    pub sample_type: SampleType,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OoDScoreTable {
    pub n_classes: usize,
    pub rows: Vec<ScoreRow>,
    /// Parallel to `rows`.
    pub avg_dist: Vec<Vec<f64>>,
}

impl OoDScoreTable {
    pub fn row_of(&self, sample_id: usize) -> Option<&ScoreRow> {
        self.rows.iter().find(|r| r.sample_id == sample_id)
    }
}

#[derive(Debug, Clone, Default)]
pub struct ScoreOptions {
    /// Index into the classifier list of the model whose confidence and
    /// prediction are reported. Defaults to [`default_prediction_model`].
    pub prediction_model: Option<usize>,
    pub thresholds: Option<Thresholds>,
}

/// The first classifier, in list order, whose coefficient is closest to 1
/// on a log scale.
pub fn default_prediction_model(classifiers: &[ClassifierSpec]) -> Option<usize> {
    let first = classifiers.first()?;
    classifiers
        .iter()
        .enumerate()
        .filter(|(_, c)| c.feature_set == first.feature_set)
        .min_by(|a, b| a.1.reg_coefficient.ln().abs().total_cmp(&b.1.reg_coefficient.ln().abs()))
        .map(|(i, _)| i)
}

/// Scores every row of the given feature matrices (all parallel to
/// `sample_ids`) with the full ensemble.
pub fn score(
    classifiers: &[ClassifierSpec],
    features: &[FeatureMatrix],
    sample_ids: &[usize],
    options: &ScoreOptions,
) -> Result<OoDScoreTable> {
    let first = classifiers
        .first()
        .ok_or_else(|| Error::Config("no classifiers to score with".into()))?;
    let n_classes = first.model.classes;
    let thresholds = options.thresholds.unwrap_or_else(|| Thresholds::defaults(n_classes));
    thresholds.validate(n_classes)?;
    let pm = match options.prediction_model {
        Some(i) if i < classifiers.len() => i,
        Some(i) => return Err(Error::Config(format!("prediction model {i} out of range"))),
        None => default_prediction_model(classifiers).expect("non-empty"),
    };

    let mut per_classifier = Vec::with_capacity(classifiers.len());
    for c in classifiers {
        let f = features
            .iter()
            .find(|f| f.name == c.feature_set)
            .ok_or_else(|| Error::Config(format!("feature set `{}` missing for scoring", c.feature_set)))?;
        if f.rows() != sample_ids.len() {
            return Err(Error::InvalidInput(format!(
                "feature set `{}` has {} rows for {} sample ids",
                f.name,
                f.rows(),
                sample_ids.len()
            )));
        }
        if c.model.classes != n_classes {
            return Err(Error::Config("classifiers disagree on the class count".into()));
        }
        per_classifier.push(c.predict(f)?);
    }

    let ln_c = (n_classes as f64).ln();
    let mut rows = Vec::with_capacity(sample_ids.len());
    let mut avg_dist = Vec::with_capacity(sample_ids.len());
    for (i, &sid) in sample_ids.iter().enumerate() {
        let dists: Vec<&[f64]> = per_classifier.iter().map(|p| p[i].as_slice()).collect();
        let (avg, h) = ensemble_score(&dists);
        let task = &per_classifier[pm][i];
        let (predicted_class, confidence) = task
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |best, (k, &p)| if p > best.1 { (k, p) } else { best });
        rows.push(ScoreRow {
            sample_id: sid,
            ood_score: h,
            ood_score_normalized: if ln_c > 0.0 { h / ln_c } else { 0.0 },
            confidence,
            predicted_class,
            sample_type: sample_type_unchecked(h, confidence, &thresholds),
        });
        avg_dist.push(avg);
    }
    Ok(OoDScoreTable {
        n_classes,
        rows,
        avg_dist,
    })
}
