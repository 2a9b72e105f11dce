//! Seeded synthetic data: clustered 2D point clouds for layout benchmarks and
//! small labeled datasets with planted out-of-distribution samples.

use std::path::PathBuf;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::dataset::{Dataset, DatasetManifest, FeatureMatrix, FeatureSetEntry, Split};
use crate::error::{Error, Result};
use crate::geom::Point;

/// Gaussian blobs of uneven population plus a little uniform background,
/// shaped like a 2D embedding of image features: a blob's spread grows with
/// the square root of its share, so blobs have similar point density.
pub fn clustered_points(n: usize, seed: u64) -> Vec<Point> {
    const CLUSTERS: usize = 10;
    const BASE_SIGMA: f64 = 12.0;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let clusters: Vec<(Point, f64)> = (0..CLUSTERS)
        .map(|_| {
            let c = [rng.random_range(-40.0..40.0), rng.random_range(-40.0..40.0)];
            (c, rng.random_range(0.5..1.5))
        })
        .collect();
    let total: f64 = clusters.iter().map(|c| c.1).sum();
    let std = Normal::new(0.0, 1.0).expect("unit normal");
    (0..n)
        .map(|_| {
            if rng.random::<f64>() < 0.02 {
                return [rng.random_range(-50.0..50.0), rng.random_range(-50.0..50.0)];
            }
            let mut u = rng.random::<f64>() * total;
            let mut pick = clusters[CLUSTERS - 1];
            for &c in &clusters {
                if u < c.1 {
                    pick = c;
                    break;
                }
                u -= c.1;
            }
            let (center, share) = pick;
            let sigma = BASE_SIGMA * (share * CLUSTERS as f64 / total).sqrt();
            [center[0] + sigma * std.sample(&mut rng), center[1] + sigma * std.sample(&mut rng)]
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SyntheticKind {
    ColorBias,
    Clusters,
}

impl std::str::FromStr for SyntheticKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "color-bias" => Ok(SyntheticKind::ColorBias),
            "clusters" => Ok(SyntheticKind::Clusters),
            other => Err(Error::InvalidInput(format!(
                "unknown synthetic kind `{other}` (expected color-bias or clusters)"
            ))),
        }
    }
}

pub fn generate(kind: SyntheticKind, seed: u64) -> Dataset {
    match kind {
        SyntheticKind::ColorBias => color_bias(&ColorBiasConfig { seed, ..Default::default() }),
        SyntheticKind::Clusters => clusters(&ClustersConfig { seed, ..Default::default() }),
    }
}

#[derive(Debug, Clone)]
pub struct ColorBiasConfig {
    pub n_train: usize,
    pub n_test: usize,
    /// Fraction of test samples whose color is swapped to the other class.
    pub swapped_fraction: f64,
    pub seed: u64,
}

impl Default for ColorBiasConfig {
    fn default() -> Self {
        ColorBiasConfig {
            n_train: 600,
            n_test: 400,
            swapped_fraction: 0.5,
            seed: 7,
        }
    }
}

pub const COLOR_BIAS_DIM: usize = 8;

/// Two classes ("dog", "cat") driven by a shape signal and a color signal.
/// In training the color perfectly follows the class (dark dogs, light cats);
/// at test time a fraction of samples carry the other class's color and are
/// flagged OoD. Four feature sets see the latents through different mixes.
pub fn color_bias(config: &ColorBiasConfig) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let noise = Normal::new(0.0, 1.0).expect("unit normal");
    let n = config.n_train + config.n_test;

    // (feature set, color dims, shape dims); remaining dims are noise
    let views: [(&str, usize, usize); 4] = [
        ("mixed_early", 3, 3),
        ("color_hist", 5, 0),
        ("edge_shape", 0, 5),
        ("mixed_late", 2, 4),
    ];
    let loadings: Vec<Vec<f64>> = views
        .iter()
        .map(|_| {
            (0..COLOR_BIAS_DIM)
                .map(|_| {
                    let a: f64 = rng.random_range(0.6..1.4);
                    if rng.random::<bool>() {
                        a
                    } else {
                        -a
                    }
                })
                .collect()
        })
        .collect();

    let n_swapped = (config.n_test as f64 * config.swapped_fraction).round() as usize;
    let mut labels = Vec::with_capacity(n);
    let mut splits = Vec::with_capacity(n);
    let mut truth = Vec::with_capacity(n);
    let mut latents = Vec::with_capacity(n);
    for i in 0..n {
        let class = rng.random_range(0..2usize);
        let test_pos = i.checked_sub(config.n_train);
        let swapped = test_pos.is_some_and(|t| t < n_swapped);
        let sign = if class == 0 { 1.0 } else { -1.0 };
        let shape = sign + 0.6 * noise.sample(&mut rng);
        let color_sign = if swapped { -sign } else { sign };
        let color = 1.5 * color_sign + 0.5 * noise.sample(&mut rng);
        labels.push(class);
        splits.push(if test_pos.is_some() { Split::Test } else { Split::Train });
        truth.push(swapped);
        latents.push((color, shape));
    }

    let mut features = Vec::new();
    let mut entries = Vec::new();
    for ((name, n_color, n_shape), load) in views.iter().zip(&loadings) {
        let mut data = Vec::with_capacity(n * COLOR_BIAS_DIM);
        for &(color, shape) in &latents {
            for (d, &a) in load.iter().enumerate() {
                let signal = if d < *n_color {
                    a * color
                } else if d < n_color + n_shape {
                    a * shape
                } else {
                    0.0
                };
                data.push(signal + 0.3 * noise.sample(&mut rng));
            }
        }
        features.push(FeatureMatrix::new(*name, n, COLOR_BIAS_DIM, data).expect("finite features"));
        entries.push(FeatureSetEntry {
            name: name.to_string(),
            dim: COLOR_BIAS_DIM,
            path: PathBuf::from(format!("features/{name}.csv")),
        });
    }

    let coords = latents
        .iter()
        .map(|&(c, s)| [c + 0.15 * noise.sample(&mut rng), s + 0.15 * noise.sample(&mut rng)])
        .collect();
    assemble("color-bias", vec!["dog".into(), "cat".into()], entries, features, labels, splits, truth, Some(coords))
}

#[derive(Debug, Clone)]
pub struct ClustersConfig {
    pub n_classes: usize,
    pub dim: usize,
    pub train_per_class: usize,
    pub test_per_class: usize,
    /// Test-only samples from an unseen cluster, flagged OoD.
    pub n_novel: usize,
    pub seed: u64,
}

impl Default for ClustersConfig {
    fn default() -> Self {
        ClustersConfig {
            n_classes: 3,
            dim: 10,
            train_per_class: 80,
            test_per_class: 20,
            n_novel: 30,
            seed: 7,
        }
    }
}

/// Well-separated Gaussian classes plus a novel test-only cluster whose
/// samples carry random in-distribution labels. Two feature sets: the raw
/// coordinates and a noisy random rotation of them. No 2D coordinates are
/// stored, so consumers project the features themselves.
pub fn clusters(config: &ClustersConfig) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let noise = Normal::new(0.0, 1.0).expect("unit normal");
    let d = config.dim;
    let means: Vec<Vec<f64>> = (0..=config.n_classes)
        .map(|_| (0..d).map(|_| rng.random_range(-6.0..6.0)).collect())
        .collect();

    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut labels = Vec::new();
    let mut splits = Vec::new();
    let mut truth = Vec::new();
    let mut push = |rng: &mut ChaCha8Rng, mean: &[f64], label: usize, split: Split, ood: bool| {
        rows.push(mean.iter().map(|m| m + noise.sample(rng)).collect());
        labels.push(label);
        splits.push(split);
        truth.push(ood);
    };
    for c in 0..config.n_classes {
        for _ in 0..config.train_per_class {
            push(&mut rng, &means[c], c, Split::Train, false);
        }
    }
    for c in 0..config.n_classes {
        for _ in 0..config.test_per_class {
            push(&mut rng, &means[c], c, Split::Test, false);
        }
    }
    for _ in 0..config.n_novel {
        let label = rng.random_range(0..config.n_classes);
        push(&mut rng, &means[config.n_classes], label, Split::Test, true);
    }

    let n = rows.len();
    let rotation: Vec<Vec<f64>> = (0..d).map(|_| (0..d).map(|_| noise.sample(&mut rng) / (d as f64).sqrt()).collect()).collect();
    let raw: Vec<f64> = rows.iter().flatten().copied().collect();
    let mut mixed = Vec::with_capacity(n * d);
    for r in &rows {
        for rot in &rotation {
            let v: f64 = rot.iter().zip(r).map(|(a, b)| a * b).sum();
            mixed.push(v + 0.5 * noise.sample(&mut rng));
        }
    }
    let features = vec![
        FeatureMatrix::new("raw", n, d, raw).expect("finite features"),
        FeatureMatrix::new("rotated", n, d, mixed).expect("finite features"),
    ];
    let entries = features
        .iter()
        .map(|f| FeatureSetEntry {
            name: f.name.clone(),
            dim: d,
            path: PathBuf::from(format!("features/{}.csv", f.name)),
        })
        .collect();
    let classes = (0..config.n_classes).map(|c| format!("class{c}")).collect();
    assemble("clusters", classes, entries, features, labels, splits, truth, None)
}

#[allow(clippy::too_many_arguments)]
fn assemble(
    name: &str,
    classes: Vec<String>,
    entries: Vec<FeatureSetEntry>,
    features: Vec<FeatureMatrix>,
    labels: Vec<usize>,
    splits: Vec<Split>,
    truth: Vec<bool>,
    coords: Option<Vec<Point>>,
) -> Dataset {
    let manifest = DatasetManifest {
        name: name.to_string(),
        n_samples: labels.len(),
        classes,
        feature_sets: entries,
        labels_path: "labels.csv".into(),
        split_path: "split.csv".into(),
        image_dir: None,
        saliency_dir: None,
        precomputed_2d_path: coords.as_ref().map(|_| "projection.csv".into()),
        ood_truth_path: Some("ood_truth.csv".into()),
    };
    Dataset {
        manifest,
        root: PathBuf::new(),
        features,
        labels,
        splits,
        ood_truth: Some(truth),
        precomputed_2d: coords,
    }
}
