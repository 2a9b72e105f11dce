//! Detection quality: AUROC, average-precision AUPR and top-K precision.
//! Positives are OoD samples; higher scores mean "more OoD".

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

fn check_lengths(scores: &[f64], is_ood: &[bool]) -> Result<()> {
    if scores.len() != is_ood.len() {
        return Err(Error::InvalidInput(format!(
            "{} scores for {} labels",
            scores.len(),
            is_ood.len()
        )));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::InvalidInput("NaN score".into()));
    }
    Ok(())
}

/// Mann-Whitney AUROC with ties counted as one half, via midranks.
pub fn auroc(scores: &[f64], is_ood: &[bool]) -> Result<f64> {
    check_lengths(scores, is_ood)?;
    let n_pos = is_ood.iter().filter(|&&b| b).count();
    let n_neg = is_ood.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::UndefinedMetric(format!(
            "AUROC needs both classes ({n_pos} positive, {n_neg} negative)"
        )));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    // twice the rank sum of positives keeps midranks integral
    let mut rank2_sum: u128 = 0;
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && scores[order[end]] == scores[order[start]] {
            end += 1;
        }
        let mid2 = (start + 1 + end) as u128; // 2 × mean of ranks start+1..=end
        let pos = order[start..end].iter().filter(|&&i| is_ood[i]).count() as u128;
        rank2_sum += mid2 * pos;
        start = end;
    }
    let (p, q) = (n_pos as u128, n_neg as u128);
    let u2 = rank2_sum - p * (p + 1);
    Ok(u2 as f64 / (2 * p * q) as f64)
}

/// Indices by descending score, ties by ascending index.
fn ranking(scores: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    order
}

/// Average precision: mean of precision@rank over the ranks of positives.
pub fn aupr(scores: &[f64], is_ood: &[bool]) -> Result<f64> {
    check_lengths(scores, is_ood)?;
    let n_pos = is_ood.iter().filter(|&&b| b).count();
    if n_pos == 0 {
        return Err(Error::UndefinedMetric("AUPR needs at least one positive".into()));
    }
    let mut hits = 0usize;
    let mut sum = 0.0;
    for (r, &i) in ranking(scores).iter().enumerate() {
        if is_ood[i] {
            hits += 1;
            sum += hits as f64 / (r + 1) as f64;
        }
    }
    Ok(sum / n_pos as f64)
}

/// Fraction of positives among the `k` highest scores.
pub fn prec_at_k(scores: &[f64], is_ood: &[bool], k: usize) -> Result<f64> {
    check_lengths(scores, is_ood)?;
    if k == 0 || k > scores.len() {
        return Err(Error::InvalidK { k, n: scores.len() });
    }
    let hits = ranking(scores)[..k].iter().filter(|&&i| is_ood[i]).count();
    Ok(hits as f64 / k as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    pub auroc: f64,
    pub aupr: f64,
    pub prec_k: BTreeMap<usize, f64>,
}

pub const TABLE_KS: [usize; 3] = [50, 100, 200];

/// All three measures; K values above the sample count are skipped.
pub fn evaluate(scores: &[f64], is_ood: &[bool], ks: &[usize]) -> Result<EvalResult> {
    let mut prec_k = BTreeMap::new();
    for &k in ks {
        if k <= scores.len() {
            prec_k.insert(k, prec_at_k(scores, is_ood, k)?);
        }
    }
    Ok(EvalResult {
        auroc: auroc(scores, is_ood)?,
        aupr: aupr(scores, is_ood)?,
        prec_k,
    })
}

/// One method's row of a comparison table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodRow {
    pub method: String,
    #[serde(rename = "AUROC")]
    pub auroc: f64,
    #[serde(rename = "AUPR")]
    pub aupr: f64,
    /// Keyed `Prec50`, `Prec100`, ...
    #[serde(flatten)]
    pub prec: BTreeMap<String, f64>,
}

impl MethodRow {
    pub fn new(method: impl Into<String>, r: &EvalResult) -> Self {
        MethodRow {
            method: method.into(),
            auroc: r.auroc,
            aupr: r.aupr,
            prec: r.prec_k.iter().map(|(k, v)| (format!("Prec{k}"), *v)).collect(),
        }
    }
}

/// Methods as rows, measures as columns, per dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub dataset: String,
    pub n_samples: usize,
    pub n_ood: usize,
    pub rows: Vec<MethodRow>,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn auroc_examples() {
        let y = [true, true, false, false];
        assert_eq!(auroc(&[0.9, 0.8, 0.2, 0.1], &y).unwrap(), 1.0);
        assert_eq!(auroc(&[0.1, 0.2, 0.8, 0.9], &y).unwrap(), 0.0);
        assert_eq!(auroc(&[0.9, 0.4, 0.6, 0.1], &y).unwrap(), 0.75);
        assert_eq!(auroc(&[0.5, 0.5, 0.5, 0.5], &y).unwrap(), 0.5);
        assert!(matches!(auroc(&[0.1, 0.2], &[true, true]), Err(Error::UndefinedMetric(_))));
    }

    #[test]
    fn aupr_examples() {
        assert_eq!(aupr(&[0.9, 0.8, 0.2, 0.1], &[true, true, false, false]).unwrap(), 1.0);
        assert_eq!(aupr(&[0.9, 0.8, 0.7, 0.1], &[false, true, false, true]).unwrap(), 0.5);
        assert_eq!(aupr(&[0.3, 0.1], &[true, true]).unwrap(), 1.0);
        assert!(matches!(aupr(&[0.3, 0.1], &[false, false]), Err(Error::UndefinedMetric(_))));
    }

    #[test]
    fn prec_examples() {
        let s = [0.9, 0.8, 0.7, 0.6, 0.1];
        assert_eq!(prec_at_k(&s, &[true, true, false, true, false], 4).unwrap(), 0.75);
        assert_eq!(prec_at_k(&s, &[true, true, true, false, false], 3).unwrap(), 1.0);
        // ties resolved by index: sample 0 ranks first
        assert_eq!(prec_at_k(&[0.5, 0.5], &[true, false], 1).unwrap(), 1.0);
        assert!(matches!(prec_at_k(&s, &[false; 5], 6), Err(Error::InvalidK { k: 6, n: 5 })));
        assert!(matches!(prec_at_k(&s, &[false; 5], 0), Err(Error::InvalidK { .. })));
    }

    #[test]
    fn report_serializes_table_columns() {
        let r = evaluate(&[0.9, 0.8, 0.2, 0.1], &[true, false, true, false], &[2, 50]).unwrap();
        let row = MethodRow::new("M-OoD", &r);
        let json = serde_json::to_value(&row).unwrap();
        assert_eq!(json["method"], "M-OoD");
        assert_eq!(json["Prec2"], 0.5);
        assert!(json.get("Prec50").is_none());
    }
}
