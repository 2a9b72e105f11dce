//! Dataset manifests, feature/label/split ingestion and artifact persistence.
//!
//! File formats (all CSV files carry a one-line header):
//!
//! * features: `f0,...,f{D-1}`, one row per sample in manifest order
//! * labels: `sample_id,class_index`
//! * split: `sample_id,split` with split in `{train, test}`
//! * OoD ground truth (optional): `sample_id,is_ood` with `0/1` or `true/false`
//! * projected coordinates (optional): `x,y`
//!
//! The manifest is JSON; relative paths resolve against its directory.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::ensemble::{SampleType, ScoreRow};
use crate::error::{Error, Result};
use crate::geom::Point;
use crate::grid::LayoutDocument;
use crate::hierarchy::HierarchyDocument;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Test => "test",
        })
    }
}

impl FromStr for Split {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.trim() {
            "train" => Ok(Split::Train),
            "test" => Ok(Split::Test),
            other => Err(format!("unknown split `{other}` (expected train or test)")),
        }
    }
}

/// Row-major `rows × dim` matrix of one named feature set.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub name: String,
    rows: usize,
    dim: usize,
    data: Vec<f64>,
}

impl FeatureMatrix {
    pub fn new(name: impl Into<String>, rows: usize, dim: usize, data: Vec<f64>) -> Result<Self> {
        let name = name.into();
        if dim == 0 {
            return Err(Error::InvalidInput(format!("feature set `{name}` has zero dimensions")));
        }
        if data.len() != rows * dim {
            return Err(Error::InvalidInput(format!(
                "feature set `{name}`: {} values for {rows}x{dim}",
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!("feature set `{name}` has non-finite entries")));
        }
        Ok(FeatureMatrix { name, rows, dim, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// New matrix holding the given rows, in order.
    pub fn select(&self, rows: &[usize]) -> FeatureMatrix {
        let mut data = Vec::with_capacity(rows.len() * self.dim);
        for &r in rows {
            data.extend_from_slice(self.row(r));
        }
        FeatureMatrix {
            name: self.name.clone(),
            rows: rows.len(),
            dim: self.dim,
            data,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSetEntry {
    pub name: String,
    pub dim: usize,
    pub path: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub name: String,
    pub n_samples: usize,
    pub classes: Vec<String>,
    pub feature_sets: Vec<FeatureSetEntry>,
    pub labels_path: PathBuf,
    pub split_path: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub image_dir: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub saliency_dir: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub precomputed_2d_path: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ood_truth_path: Option<PathBuf>,
}

impl DatasetManifest {
    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::parse(path, e.line(), e.to_string()))
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).expect("manifest serializes");
        fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }
}

/// Everything a manifest references, validated and in memory.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub manifest: DatasetManifest,
    /// Directory relative paths resolve against.
    pub root: PathBuf,
    pub features: Vec<FeatureMatrix>,
    /// Indexed by sample id.
    pub labels: Vec<usize>,
    pub splits: Vec<Split>,
    pub ood_truth: Option<Vec<bool>>,
    pub precomputed_2d: Option<Vec<Point>>,
}

impl Dataset {
    pub fn name(&self) -> &str {
        &self.manifest.name
    }

    pub fn n_samples(&self) -> usize {
        self.manifest.n_samples
    }

    pub fn n_classes(&self) -> usize {
        self.manifest.classes.len()
    }

    pub fn ids_in(&self, split: Split) -> Vec<usize> {
        (0..self.n_samples()).filter(|&i| self.splits[i] == split).collect()
    }

    pub fn feature_set(&self, name: &str) -> Option<&FeatureMatrix> {
        self.features.iter().find(|f| f.name == name)
    }

    pub fn resolve(&self, rel: &Path) -> PathBuf {
        self.root.join(rel)
    }

    pub fn class_index(&self, name: &str) -> Option<usize> {
        self.manifest.classes.iter().position(|c| c == name)
    }
}

/// Loads and cross-checks a dataset. All problems found are reported together.
pub fn load_dataset(manifest_path: &Path) -> Result<Dataset> {
    let manifest = DatasetManifest::read(manifest_path)?;
    let root = manifest_path.parent().map(Path::to_path_buf).unwrap_or_default();
    let n = manifest.n_samples;
    let n_classes = manifest.classes.len();
    let mut problems = Vec::new();

    if n == 0 {
        problems.push("manifest: n_samples must be at least 1".to_string());
    }
    if n_classes == 0 {
        problems.push("manifest: classes must not be empty".to_string());
    }
    let mut names: Vec<&str> = manifest.feature_sets.iter().map(|f| f.name.as_str()).collect();
    names.sort_unstable();
    if names.windows(2).any(|w| w[0] == w[1]) {
        problems.push("manifest: duplicate feature set names".to_string());
    }

    let mut features = Vec::new();
    for entry in &manifest.feature_sets {
        let path = root.join(&entry.path);
        match read_features(&path, &entry.name, entry.dim, n) {
            Ok(m) => features.push(m),
            Err(e) => problems.push(e.to_string()),
        }
    }

    let labels = match read_id_column(&root.join(&manifest.labels_path), "class_index", n, |s| {
        let c: usize = s.parse().map_err(|_| format!("class index `{s}` is not a non-negative integer"))?;
        if c >= n_classes {
            return Err(format!("class index {c} out of range 0..{n_classes}"));
        }
        Ok(c)
    }) {
        Ok(v) => Some(v),
        Err(e) => {
            problems.push(e.to_string());
            None
        }
    };
    let splits = match read_id_column(&root.join(&manifest.split_path), "split", n, |s| s.parse::<Split>()) {
        Ok(v) => Some(v),
        Err(e) => {
            problems.push(e.to_string());
            None
        }
    };
    let ood_truth = match &manifest.ood_truth_path {
        None => None,
        Some(p) => match read_id_column(&root.join(p), "is_ood", n, parse_flag) {
            Ok(v) => Some(v),
            Err(e) => {
                problems.push(e.to_string());
                None
            }
        },
    };
    let precomputed_2d = match &manifest.precomputed_2d_path {
        None => None,
        Some(p) => match crate::projection::load_precomputed(&root.join(p), n) {
            Ok(pp) => Some(pp.coords),
            Err(e) => {
                problems.push(e.to_string());
                None
            }
        },
    };
    for dir in [&manifest.image_dir, &manifest.saliency_dir].into_iter().flatten() {
        let d = root.join(dir);
        if !d.is_dir() {
            problems.push(format!("{}: directory not found", d.display()));
        }
    }

    if !problems.is_empty() {
        return Err(Error::Validation(problems));
    }
    Ok(Dataset {
        manifest,
        root,
        features,
        labels: labels.expect("validated"),
        splits: splits.expect("validated"),
        ood_truth,
        precomputed_2d,
    })
}

fn parse_flag(s: &str) -> std::result::Result<bool, String> {
    match s.trim() {
        "1" | "true" => Ok(true),
        "0" | "false" => Ok(false),
        other => Err(format!("`{other}` is not a boolean flag")),
    }
}

fn csv_reader(path: &Path) -> Result<csv::Reader<fs::File>> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(file))
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
    Error::parse(path, line, e.to_string())
}

fn read_features(path: &Path, name: &str, dim: usize, n: usize) -> Result<FeatureMatrix> {
    let mut rdr = csv_reader(path)?;
    let headers = rdr.headers().map_err(|e| csv_err(path, e))?.clone();
    let expected: Vec<String> = (0..dim).map(|d| format!("f{d}")).collect();
    if headers.iter().collect::<Vec<_>>() != expected.iter().map(String::as_str).collect::<Vec<_>>() {
        return Err(Error::parse(
            path,
            1,
            format!("header must be f0..f{} for dim {dim}", dim.saturating_sub(1)),
        ));
    }
    let mut data = Vec::with_capacity(n * dim);
    let mut rows = 0;
    for (r, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        for cell in rec.iter() {
            let v: f64 = cell
                .parse()
                .map_err(|_| Error::parse(path, r + 2, format!("`{cell}` is not a number")))?;
            if !v.is_finite() {
                return Err(Error::parse(path, r + 2, format!("non-finite value `{cell}`")));
            }
            data.push(v);
        }
        rows += 1;
    }
    if rows != n {
        return Err(Error::ManifestMismatch {
            path: path.to_path_buf(),
            expected: n,
            found: rows,
        });
    }
    FeatureMatrix::new(name, rows, dim, data)
}

/// Reads a `sample_id,<column>` file into a vector indexed by sample id.
fn read_id_column<T: Clone>(
    path: &Path,
    column: &str,
    n: usize,
    parse: impl Fn(&str) -> std::result::Result<T, String>,
) -> Result<Vec<T>> {
    let mut rdr = csv_reader(path)?;
    let headers = rdr.headers().map_err(|e| csv_err(path, e))?.clone();
    if headers.len() != 2 || &headers[0] != "sample_id" || &headers[1] != column {
        return Err(Error::parse(path, 1, format!("header must be `sample_id,{column}`")));
    }
    let mut out: Vec<Option<T>> = vec![None; n];
    let mut rows = 0;
    for (r, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        let line = r + 2;
        rows += 1;
        if rows > n {
            continue;
        }
        let id: usize = rec[0]
            .parse()
            .map_err(|_| Error::parse(path, line, format!("sample_id `{}` is not an integer", &rec[0])))?;
        if id >= n {
            return Err(Error::parse(path, line, format!("sample_id {id} out of range 0..{n}")));
        }
        let value = parse(&rec[1]).map_err(|m| Error::parse(path, line, m))?;
        if out[id].replace(value).is_some() {
            return Err(Error::parse(path, line, format!("duplicate sample_id {id}")));
        }
    }
    if rows != n {
        return Err(Error::ManifestMismatch {
            path: path.to_path_buf(),
            expected: n,
            found: rows,
        });
    }
    Ok(out.into_iter().map(|v| v.expect("all ids seen")).collect())
}

pub fn write_features(path: &Path, m: &FeatureMatrix) -> Result<()> {
    let mut text = (0..m.dim()).map(|d| format!("f{d}")).collect::<Vec<_>>().join(",");
    text.push('\n');
    for i in 0..m.rows() {
        let row: Vec<String> = m.row(i).iter().map(|v| v.to_string()).collect();
        text.push_str(&row.join(","));
        text.push('\n');
    }
    write_file(path, &text)
}

pub fn write_id_column<T: fmt::Display>(path: &Path, column: &str, values: &[T]) -> Result<()> {
    let mut text = format!("sample_id,{column}\n");
    for (i, v) in values.iter().enumerate() {
        text.push_str(&format!("{i},{v}\n"));
    }
    write_file(path, &text)
}

pub fn read_ood_truth(path: &Path) -> Result<Vec<(usize, bool)>> {
    let mut rdr = csv_reader(path)?;
    let headers = rdr.headers().map_err(|e| csv_err(path, e))?.clone();
    if headers.len() != 2 || &headers[0] != "sample_id" || &headers[1] != "is_ood" {
        return Err(Error::parse(path, 1, "header must be `sample_id,is_ood`"));
    }
    let mut out = Vec::new();
    for (r, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        let id: usize = rec[0]
            .parse()
            .map_err(|_| Error::parse(path, r + 2, format!("sample_id `{}` is not an integer", &rec[0])))?;
        let flag = parse_flag(&rec[1]).map_err(|m| Error::parse(path, r + 2, m))?;
        out.push((id, flag));
    }
    Ok(out)
}

pub(crate) fn write_file(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Writes a dataset's files plus `manifest.json` under `dir`, using the
/// relative paths recorded in its manifest.
pub fn write_dataset(dir: &Path, ds: &Dataset) -> Result<PathBuf> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for (entry, m) in ds.manifest.feature_sets.iter().zip(&ds.features) {
        write_features(&dir.join(&entry.path), m)?;
    }
    write_id_column(&dir.join(&ds.manifest.labels_path), "class_index", &ds.labels)?;
    write_id_column(&dir.join(&ds.manifest.split_path), "split", &ds.splits)?;
    if let (Some(p), Some(t)) = (&ds.manifest.ood_truth_path, &ds.ood_truth) {
        let flags: Vec<u8> = t.iter().map(|&b| b as u8).collect();
        write_id_column(&dir.join(p), "is_ood", &flags)?;
    }
    if let (Some(p), Some(c)) = (&ds.manifest.precomputed_2d_path, &ds.precomputed_2d) {
        crate::projection::save_precomputed(&dir.join(p), c)?;
    }
    let manifest_path = dir.join("manifest.json");
    ds.manifest.write(&manifest_path)?;
    Ok(manifest_path)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ArtifactKind {
    Layout,
    Scores,
    Hierarchy,
}

impl ArtifactKind {
    pub fn file_name(self) -> &'static str {
        match self {
            ArtifactKind::Layout => "layout.json",
            ArtifactKind::Scores => "scores.csv",
            ArtifactKind::Hierarchy => "hierarchy.json",
        }
    }
}

impl FromStr for ArtifactKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "layout" => Ok(ArtifactKind::Layout),
            "scores" => Ok(ArtifactKind::Scores),
            "hierarchy" => Ok(ArtifactKind::Hierarchy),
            other => Err(Error::InvalidKind(other.to_string())),
        }
    }
}

pub enum Artifact<'a> {
    Layout(&'a LayoutDocument),
    Scores(&'a [ScoreRow]),
    Hierarchy(&'a HierarchyDocument),
}

impl Artifact<'_> {
    pub fn kind(&self) -> ArtifactKind {
        match self {
            Artifact::Layout(_) => ArtifactKind::Layout,
            Artifact::Scores(_) => ArtifactKind::Scores,
            Artifact::Hierarchy(_) => ArtifactKind::Hierarchy,
        }
    }
}

/// Writes `artifact` to `<results_root>/<dataset>/<run_id>/<kind file>`,
/// overwriting any previous file of that kind for the run.
pub fn persist(results_root: &Path, dataset: &str, run_id: &str, artifact: Artifact<'_>) -> Result<PathBuf> {
    for (what, part) in [("dataset", dataset), ("run_id", run_id)] {
        if part.is_empty() || part.contains(['/', '\\']) || part == "." || part == ".." {
            return Err(Error::InvalidInput(format!("{what} `{part}` is not a valid directory name")));
        }
    }
    let path = results_root.join(dataset).join(run_id).join(artifact.kind().file_name());
    write_artifact(&path, &artifact)?;
    Ok(path)
}

/// Writes an artifact to an explicit path in its kind's format.
pub fn write_artifact(path: &Path, artifact: &Artifact<'_>) -> Result<()> {
    let text = match artifact {
        Artifact::Layout(doc) => serde_json::to_string_pretty(doc).expect("layout serializes") + "\n",
        Artifact::Scores(rows) => scores_csv(rows),
        Artifact::Hierarchy(doc) => serde_json::to_string_pretty(doc).expect("hierarchy serializes") + "\n",
    };
    write_file(path, &text)
}

pub const SCORES_HEADER: &str = "sample_id,ood_score,ood_score_normalized,confidence,predicted_class,sample_type";

pub fn scores_csv(rows: &[ScoreRow]) -> String {
    let mut text = String::from(SCORES_HEADER);
    text.push('\n');
    for r in rows {
        text.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.sample_id, r.ood_score, r.ood_score_normalized, r.confidence, r.predicted_class, r.sample_type
        ));
    }
    text
}

pub fn load_scores(path: &Path) -> Result<Vec<ScoreRow>> {
    let mut rdr = csv_reader(path)?;
    let headers = rdr.headers().map_err(|e| csv_err(path, e))?.clone();
    if headers.iter().collect::<Vec<_>>().join(",") != SCORES_HEADER {
        return Err(Error::parse(path, 1, format!("header must be `{SCORES_HEADER}`")));
    }
    let mut out = Vec::new();
    for (r, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        let line = r + 2;
        let num = |i: usize| -> Result<f64> {
            rec[i]
                .parse()
                .map_err(|_| Error::parse(path, line, format!("`{}` is not a number", &rec[i])))
        };
        let int = |i: usize| -> Result<usize> {
            rec[i]
                .parse()
                .map_err(|_| Error::parse(path, line, format!("`{}` is not an integer", &rec[i])))
        };
        out.push(ScoreRow {
            sample_id: int(0)?,
            ood_score: num(1)?,
            ood_score_normalized: num(2)?,
            confidence: num(3)?,
            predicted_class: int(4)?,
            sample_type: rec[5].parse::<SampleType>().map_err(|m| Error::parse(path, line, m))?,
        });
    }
    Ok(out)
}

pub fn load_layout(path: &Path) -> Result<LayoutDocument> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::parse(path, e.line(), e.to_string()))
}

pub fn load_hierarchy(path: &Path) -> Result<HierarchyDocument> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::parse(path, e.line(), e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn minimal(dir: &Path, n: usize, label_rows: usize) -> PathBuf {
        fs::write(dir.join("f.csv"), {
            let mut s = String::from("f0,f1\n");
            for i in 0..n {
                s.push_str(&format!("{i},{}\n", i as f64 * 0.5));
            }
            s
        })
        .unwrap();
        let mut labels = String::from("sample_id,class_index\n");
        for i in 0..label_rows {
            labels.push_str(&format!("{i},{}\n", i % 2));
        }
        fs::write(dir.join("labels.csv"), labels).unwrap();
        let mut split = String::from("sample_id,split\n");
        for i in 0..n {
            split.push_str(&format!("{i},{}\n", if i < n / 2 { "train" } else { "test" }));
        }
        fs::write(dir.join("split.csv"), split).unwrap();
        let m = DatasetManifest {
            name: "mini".into(),
            n_samples: n,
            classes: vec!["a".into(), "b".into()],
            feature_sets: vec![FeatureSetEntry {
                name: "f".into(),
                dim: 2,
                path: "f.csv".into(),
            }],
            labels_path: "labels.csv".into(),
            split_path: "split.csv".into(),
            image_dir: None,
            saliency_dir: None,
            precomputed_2d_path: None,
            ood_truth_path: None,
        };
        let p = dir.join("manifest.json");
        m.write(&p).unwrap();
        p
    }

    #[test]
    fn loads_minimal_dataset() {
        let dir = tempfile::tempdir().unwrap();
        let p = minimal(dir.path(), 4, 4);
        let ds = load_dataset(&p).unwrap();
        assert_eq!(ds.features[0].rows(), 4);
        assert_eq!(ds.features[0].dim(), 2);
        assert_eq!(ds.labels, vec![0, 1, 0, 1]);
        assert_eq!(ds.ids_in(Split::Test), vec![2, 3]);
    }

    #[test]
    fn label_row_count_error_names_file() {
        let dir = tempfile::tempdir().unwrap();
        let p = minimal(dir.path(), 4, 5);
        let err = load_dataset(&p).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("labels.csv"), "{msg}");
        assert!(msg.contains("expected 4 rows, found 5"), "{msg}");
    }

    #[test]
    fn problems_are_aggregated() {
        let dir = tempfile::tempdir().unwrap();
        let p = minimal(dir.path(), 4, 5);
        fs::write(dir.path().join("split.csv"), "sample_id,split\n0,train\n1,bogus\n2,test\n3,test\n").unwrap();
        fs::remove_file(dir.path().join("f.csv")).unwrap();
        match load_dataset(&p) {
            Err(Error::Validation(problems)) => {
                assert_eq!(problems.len(), 3, "{problems:?}");
                assert!(problems.iter().any(|m| m.contains("f.csv")));
                assert!(problems.iter().any(|m| m.contains("split.csv:3")));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unknown_class_index_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = minimal(dir.path(), 4, 4);
        fs::write(dir.path().join("labels.csv"), "sample_id,class_index\n0,0\n1,1\n2,7\n3,0\n").unwrap();
        let msg = load_dataset(&p).unwrap_err().to_string();
        assert!(msg.contains("labels.csv:4"), "{msg}");
        assert!(msg.contains("out of range"), "{msg}");
    }

    #[test]
    fn ten_feature_sets_register() {
        let dir = tempfile::tempdir().unwrap();
        let p = minimal(dir.path(), 4, 4);
        let mut m = DatasetManifest::read(&p).unwrap();
        let names = [
            "vgg_a", "vgg_b", "vgg_c", "inception", "mobilenet", "resnet", "sift", "orb", "brief", "superpixel",
        ];
        m.feature_sets = names
            .iter()
            .map(|n| FeatureSetEntry {
                name: n.to_string(),
                dim: 2,
                path: "f.csv".into(),
            })
            .collect();
        m.write(&p).unwrap();
        let ds = load_dataset(&p).unwrap();
        assert_eq!(ds.features.len(), 10);
        assert_eq!(ds.feature_set("orb").unwrap().rows(), 4);
    }

    #[test]
    fn artifact_kind_parsing() {
        assert_eq!("scores".parse::<ArtifactKind>().unwrap(), ArtifactKind::Scores);
        assert!(matches!("bogus".parse::<ArtifactKind>(), Err(Error::InvalidKind(k)) if k == "bogus"));
    }

    #[test]
    fn scores_round_trip_and_runs_coexist() {
        let dir = tempfile::tempdir().unwrap();
        let rows = vec![
            ScoreRow {
                sample_id: 3,
                ood_score: 0.1234567890123,
                ood_score_normalized: 0.178,
                confidence: 0.99,
                predicted_class: 1,
                sample_type: SampleType::Reliable,
            },
            ScoreRow {
                sample_id: 7,
                ood_score: std::f64::consts::LN_2,
                ood_score_normalized: 1.0,
                confidence: 0.5,
                predicted_class: 0,
                sample_type: SampleType::KnownUnknown,
            },
        ];
        let a = persist(dir.path(), "ds", "run1", Artifact::Scores(&rows)).unwrap();
        let b = persist(dir.path(), "ds", "run2", Artifact::Scores(&rows[..1])).unwrap();
        assert!(a.ends_with("ds/run1/scores.csv"));
        assert_eq!(load_scores(&a).unwrap(), rows);
        assert_eq!(load_scores(&b).unwrap(), rows[..1].to_vec());
        // idempotent overwrite
        persist(dir.path(), "ds", "run1", Artifact::Scores(&rows)).unwrap();
        assert_eq!(load_scores(&a).unwrap(), rows);
    }
}
