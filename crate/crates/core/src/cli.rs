//! Command-line entry points.

use std::collections::HashMap;
use std::ffi::OsString;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde::Serialize;

use crate::analysis;
use crate::dataset::{self, Artifact, Split};
use crate::error::{Error, Result};
use crate::grid::{self, LayoutOptions, DEFAULT_K};
use crate::knn::bench::{self, BenchConfig};
use crate::metrics::{self, EvalReport, MethodRow};
use crate::synthetic::{self, SyntheticKind};

#[derive(Debug, Parser)]
#[command(name = "oodlens", version, about = "Out-of-distribution analysis for image classification datasets")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Train the classifier ensemble and score every sample.
    Detect {
        manifest: PathBuf,
        #[arg(long, default_value_t = 3)]
        n_models: usize,
        /// Comma-separated feature set names; all by default.
        #[arg(long, value_delimiter = ',')]
        feature_sets: Option<Vec<String>>,
        /// `sample_id,is_ood` CSV; defaults to the dataset's own OoD flags (test split).
        #[arg(long)]
        truth: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Pack the 2D projection of a split into a square grid.
    Layout {
        manifest: PathBuf,
        #[arg(long, default_value = "both")]
        split: String,
        #[arg(long, default_value_t = DEFAULT_K)]
        k: usize,
        /// Also solve the dense problem and report the cost ratio.
        #[arg(long)]
        baseline: bool,
        /// Projection seed (used when the dataset has no stored 2D coordinates).
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Cost ratio and timing of the kNN layout against the dense solver.
    BenchLap {
        #[arg(long, default_value_t = 2025)]
        n: usize,
        #[arg(long, value_delimiter = ',', default_value = "50,100")]
        k: Vec<usize>,
        #[arg(long, default_value_t = 10)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// CSV destination; stdout by default.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// AUROC, AUPR and Prec@K of a scores file against OoD flags.
    EvalOod {
        scores: PathBuf,
        truth: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "50,100,200")]
        k: Vec<usize>,
        #[arg(long, default_value = "ensemble")]
        method: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Serve the HTTP API.
    Serve {
        #[arg(long)]
        data_dir: PathBuf,
        #[arg(long, default_value_t = crate::server::DEFAULT_PORT)]
        port: u16,
    },
    /// Write a seeded synthetic dataset.
    GenSynthetic {
        #[arg(long)]
        kind: String,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 7)]
        seed: u64,
    },
}

pub fn run<I: IntoIterator<Item = OsString>>(args: I) -> Result<()> {
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            // --help / --version
            print!("{e}");
            return Ok(());
        }
        Err(e) => {
            let text = e.to_string();
            let line = text.lines().find(|l| !l.trim().is_empty()).unwrap_or("invalid arguments");
            return Err(Error::InvalidInput(line.trim_start_matches("error: ").to_string()));
        }
    };
    match cli.command {
        Command::Detect {
            manifest,
            n_models,
            feature_sets,
            truth,
            out,
        } => detect(&manifest, n_models, feature_sets.as_deref(), truth.as_deref(), &out),
        Command::Layout {
            manifest,
            split,
            k,
            baseline,
            seed,
            out,
        } => layout(&manifest, &split, k, baseline, seed, &out),
        Command::BenchLap {
            n,
            k,
            trials,
            seed,
            out,
        } => bench_lap(&BenchConfig { n, ks: k, trials, seed }, out.as_deref()),
        Command::EvalOod {
            scores,
            truth,
            k,
            method,
            out,
        } => eval_ood(&scores, &truth, &k, &method, out.as_deref()),
        Command::Serve { data_dir, port } => serve(&data_dir, port),
        Command::GenSynthetic { kind, out, seed } => gen_synthetic(&kind, &out, seed),
    }
}

/// One line per problem.
pub fn diagnostics(e: &Error) -> Vec<String> {
    match e {
        Error::Validation(problems) => problems.clone(),
        other => other.to_string().lines().map(str::to_string).collect(),
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::Internal(e.to_string()))?;
    dataset::write_file(path, &(text + "\n"))
}

fn method_name(n_classifiers: usize) -> String {
    if n_classifiers == 1 {
        "S-OoD".into()
    } else {
        format!("M-OoD({n_classifiers})")
    }
}

fn detect(
    manifest: &Path,
    n_models: usize,
    feature_sets: Option<&[String]>,
    truth: Option<&Path>,
    out: &Path,
) -> Result<()> {
    let ds = dataset::load_dataset(manifest)?;
    let (table, summary) = analysis::run_detection(&ds, n_models, feature_sets)?;
    let scores_path = out.join("scores.csv");
    dataset::write_artifact(&scores_path, &Artifact::Scores(&table.rows))?;
    write_json(&out.join("summary.json"), &summary)?;

    let flags: Option<Vec<(usize, bool)>> = match truth {
        Some(p) => Some(dataset::read_ood_truth(p)?),
        None => ds
            .ood_truth
            .as_ref()
            .map(|t| ds.ids_in(Split::Test).into_iter().map(|i| (i, t[i])).collect()),
    };
    if let Some(flags) = flags {
        let mut scores = Vec::with_capacity(flags.len());
        for &(id, _) in &flags {
            let row = table
                .rows
                .get(id)
                .ok_or_else(|| Error::InvalidInput(format!("truth lists sample {id}, dataset has {}", ds.n_samples())))?;
            scores.push(row.ood_score);
        }
        let is_ood: Vec<bool> = flags.iter().map(|f| f.1).collect();
        let result = metrics::evaluate(&scores, &is_ood, &metrics::TABLE_KS)?;
        let report = EvalReport {
            dataset: ds.name().to_string(),
            n_samples: flags.len(),
            n_ood: is_ood.iter().filter(|&&b| b).count(),
            rows: vec![MethodRow::new(method_name(summary.n_classifiers), &result)],
        };
        write_json(&out.join("eval.json"), &report)?;
        println!("AUROC {:.4}  AUPR {:.4}", result.auroc, result.aupr);
    }
    println!("wrote {}", scores_path.display());
    Ok(())
}

fn layout(manifest: &Path, split: &str, k: usize, baseline: bool, seed: u64, out: &Path) -> Result<()> {
    let ds = dataset::load_dataset(manifest)?;
    let ids: Vec<usize> = match split {
        "both" => (0..ds.n_samples()).collect(),
        s => ds.ids_in(s.parse().map_err(Error::InvalidInput)?),
    };
    if ids.is_empty() {
        return Err(Error::EmptySelection(format!("split `{split}` has no samples")));
    }
    let coords = analysis::project(&ds, seed)?;
    let points: Vec<_> = ids.iter().map(|&i| coords[i]).collect();
    let assignment = grid::layout_with(&points, &LayoutOptions { k, with_baseline: baseline })?;
    let mut doc = assignment.to_document(&ids);
    for c in &mut doc.cells {
        if let Some(id) = c.sample_id {
            c.split = Some(ds.splits[id]);
            c.class = Some(ds.labels[id]);
        }
    }
    let layout_path = out.join("layout.json");
    dataset::write_artifact(&layout_path, &Artifact::Layout(&doc))?;
    write_json(&out.join("report.json"), &assignment.report)?;
    match assignment.report.cr {
        Some(cr) => println!("{}x{} grid, k = {}, cost {:.6}, Cr {cr:.3e}", doc.grid.m, doc.grid.n, doc.k, doc.total_cost),
        None => println!("{}x{} grid, k = {}, cost {:.6}", doc.grid.m, doc.grid.n, doc.k, doc.total_cost),
    }
    println!("wrote {}", layout_path.display());
    Ok(())
}

fn bench_lap(config: &BenchConfig, out: Option<&Path>) -> Result<()> {
    let rows = bench::run_bench(config)?;
    match out {
        Some(p) => {
            if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
            }
            let f = File::create(p).map_err(|e| Error::io(p, e))?;
            bench::write_csv(&rows, BufWriter::new(f))?;
        }
        None => bench::write_csv(&rows, io::stdout().lock())?,
    }
    for (k, cr, t_knn, t_base) in bench::summarize(&rows) {
        eprintln!("k = {k}: mean Cr {cr:.3e}, kNN {t_knn:.3} s, dense {t_base:.3} s");
    }
    Ok(())
}

fn eval_ood(scores: &Path, truth: &Path, ks: &[usize], method: &str, out: Option<&Path>) -> Result<()> {
    let rows = dataset::load_scores(scores)?;
    let by_id: HashMap<usize, f64> = rows.iter().map(|r| (r.sample_id, r.ood_score)).collect();
    let flags = dataset::read_ood_truth(truth)?;
    let mut s = Vec::with_capacity(flags.len());
    let mut missing = Vec::new();
    for &(id, _) in &flags {
        match by_id.get(&id) {
            Some(&v) => s.push(v),
            None => missing.push(format!("{}: no score for sample {id}", scores.display())),
        }
    }
    if !missing.is_empty() {
        return Err(Error::Validation(missing));
    }
    let is_ood: Vec<bool> = flags.iter().map(|f| f.1).collect();
    let result = metrics::evaluate(&s, &is_ood, ks)?;
    let report = EvalReport {
        dataset: scores
            .parent()
            .and_then(|p| p.file_name())
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default(),
        n_samples: s.len(),
        n_ood: is_ood.iter().filter(|&&b| b).count(),
        rows: vec![MethodRow::new(method, &result)],
    };
    match out {
        Some(p) => write_json(p, &report)?,
        None => {
            let text = serde_json::to_string_pretty(&report).map_err(|e| Error::Internal(e.to_string()))?;
            let mut stdout = io::stdout().lock();
            writeln!(stdout, "{text}").map_err(|e| Error::io("<stdout>", e))?;
        }
    }
    Ok(())
}

fn serve(data_dir: &Path, port: u16) -> Result<()> {
    let rt = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(|e| Error::Internal(format!("cannot start runtime: {e}")))?;
    rt.block_on(crate::server::serve(data_dir, port))
}

fn gen_synthetic(kind: &str, out: &Path, seed: u64) -> Result<()> {
    let kind: SyntheticKind = kind.parse()?;
    let ds = synthetic::generate(kind, seed);
    let manifest = dataset::write_dataset(out, &ds)?;
    println!("wrote {}", manifest.display());
    Ok(())
}
