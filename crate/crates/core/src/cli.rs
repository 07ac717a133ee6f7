//! Command-line front end: `gen`, `train`, `score` and `evaluate`.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::data::{encode, load_csv, FeatureSchema};
use crate::dpmm::{self, load_model, save_model, FitSettings, ModelDocument, PriorConfig};
use crate::error::{Error, Result};
use crate::eval::{self, ScoreReport};
use crate::rng::{stream_rng, Stream};
use crate::synth::{gen_dataset, SynthConfig};

#[derive(Debug, Parser)]
#[command(name = "dpmm", version, about = "Dirichlet process mixture novelty detection")]
pub struct Cli {
    /// Increase log verbosity (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic two-cluster dataset with uniform outliers.
    Gen(GenArgs),
    /// Fit a model to a CSV file.
    Train(TrainArgs),
    /// Score rows of a CSV file with a fitted model.
    Score(ScoreArgs),
    /// Compute AP and ROC AUC from scores and labels.
    Evaluate(EvaluateArgs),
}

#[derive(Debug, Args)]
pub struct GenArgs {
    #[arg(long, default_value_t = 1000)]
    pub n: usize,
    #[arg(long, default_value_t = 2)]
    pub features: usize,
    #[arg(long, default_value_t = 0.05)]
    pub outlier_fraction: f64,
    /// Half-width of the outlier box in nominal standard deviations.
    #[arg(long, default_value_t = 7.0)]
    pub half_width: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Also write a stratified train/test split with this training share.
    #[arg(long)]
    pub train_fraction: Option<f64>,
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub schema: PathBuf,
    /// key=value settings file; flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, default_value = "model.json")]
    pub model: PathBuf,
    /// Per-iteration ELBO output.
    #[arg(long, default_value = "elbo.csv")]
    pub elbo: PathBuf,
    #[command(flatten)]
    pub overrides: Overrides,
}

#[derive(Debug, Args, Default)]
pub struct Overrides {
    /// Truncation level K.
    #[arg(long)]
    pub truncation: Option<usize>,
    #[arg(long)]
    pub s0: Option<f64>,
    #[arg(long)]
    pub r0: Option<f64>,
    #[arg(long)]
    pub elbo_tol: Option<f64>,
    #[arg(long)]
    pub max_iters: Option<usize>,
    #[arg(long)]
    pub mc_samples: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct ScoreArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value = "scores.csv")]
    pub out: PathBuf,
    /// Exact Student-t mixture instead of Monte Carlo; Gaussian-only models.
    #[arg(long)]
    pub exact: bool,
    #[arg(long)]
    pub mc_samples: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// CSV with columns id,score (as written by `score`).
    #[arg(long)]
    pub scores: PathBuf,
    /// CSV with columns id,label.
    #[arg(long)]
    pub labels: PathBuf,
    #[arg(long, default_value = "metrics.json")]
    pub out: PathBuf,
    #[arg(long)]
    pub pr_out: Option<PathBuf>,
    #[arg(long)]
    pub roc_out: Option<PathBuf>,
}

/// Process exit code for an error: 3 for numerical failures, 2 otherwise.
pub fn exit_code(err: &Error) -> i32 {
    if err.is_numerical() {
        3
    } else {
        2
    }
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Gen(a) => cmd_gen(&a),
        Command::Train(a) => cmd_train(&a),
        Command::Score(a) => cmd_score(&a),
        Command::Evaluate(a) => cmd_evaluate(&a),
    }
}

fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::Input(format!("cannot read {}: {e}", path.display())))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::Input(format!("cannot write {}: {e}", path.display())))
}

/// Parses a `key=value` settings file into `settings`. Blank lines and `#`
/// comments are skipped.
pub fn apply_config_text(text: &str, settings: &mut FitSettings) -> Result<()> {
    let mut seen = HashMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("line {}: expected key=value", i + 1)))?;
        let (key, value) = (key.trim(), value.trim());
        if seen.insert(key.to_string(), i).is_some() {
            return Err(Error::Config(format!("line {}: '{key}' set twice", i + 1)));
        }
        let bad = |_| Error::Config(format!("line {}: invalid value '{value}' for '{key}'", i + 1));
        match key {
            "truncation" | "k" => settings.truncation = value.parse().map_err(|e: std::num::ParseIntError| bad(e.to_string()))?,
            "s0" => settings.s0 = value.parse().map_err(|e: std::num::ParseFloatError| bad(e.to_string()))?,
            "r0" => settings.r0 = value.parse().map_err(|e: std::num::ParseFloatError| bad(e.to_string()))?,
            "elbo_tol" => settings.elbo_tol = value.parse().map_err(|e: std::num::ParseFloatError| bad(e.to_string()))?,
            "max_iters" => settings.max_iters = value.parse().map_err(|e: std::num::ParseIntError| bad(e.to_string()))?,
            "mc_samples" => settings.mc_samples = value.parse().map_err(|e: std::num::ParseIntError| bad(e.to_string()))?,
            "seed" => settings.seed = value.parse().map_err(|e: std::num::ParseIntError| bad(e.to_string()))?,
            _ => return Err(Error::Config(format!("line {}: unknown key '{key}'", i + 1))),
        }
    }
    Ok(())
}

fn apply_overrides(o: &Overrides, s: &mut FitSettings) {
    if let Some(v) = o.truncation {
        s.truncation = v;
    }
    if let Some(v) = o.s0 {
        s.s0 = v;
    }
    if let Some(v) = o.r0 {
        s.r0 = v;
    }
    if let Some(v) = o.elbo_tol {
        s.elbo_tol = v;
    }
    if let Some(v) = o.max_iters {
        s.max_iters = v;
    }
    if let Some(v) = o.mc_samples {
        s.mc_samples = v;
    }
    if let Some(v) = o.seed {
        s.seed = v;
    }
}

fn cmd_gen(a: &GenArgs) -> Result<()> {
    let cfg = SynthConfig {
        n_samples: a.n,
        n_features: a.features,
        outlier_fraction: a.outlier_fraction,
        outlier_half_width: a.half_width,
        seed: a.seed,
    };
    let data = gen_dataset(&cfg, &mut stream_rng(a.seed, Stream::Synth))?;
    std::fs::create_dir_all(&a.out_dir)?;
    let names: Vec<String> = (0..a.features).map(|j| format!("x{j}")).collect();
    let schema: String = names.iter().map(|n| format!("{n}:real\n")).collect();
    write_text(&a.out_dir.join("schema.txt"), &schema)?;

    let write_part = |rows: &[usize], data_name: &str, label_name: &str| -> Result<()> {
        let mut csv = format!("id,{}\n", names.join(","));
        let mut labels = String::from("id,label\n");
        for &i in rows {
            let values: Vec<String> = data.view.row(i).iter().map(|v| v.to_string()).collect();
            let _ = writeln!(csv, "{},{}", i + 1, values.join(","));
            let _ = writeln!(labels, "{},{}", i + 1, data.labels[i]);
        }
        write_text(&a.out_dir.join(data_name), &csv)?;
        write_text(&a.out_dir.join(label_name), &labels)
    };
    let all: Vec<usize> = (0..data.view.len()).collect();
    write_part(&all, "data.csv", "labels.csv")?;
    if let Some(f) = a.train_fraction {
        let (train, test) = eval::stratified_split(&data.labels, f, &mut stream_rng(a.seed, Stream::Split))?;
        write_part(&train, "train.csv", "train_labels.csv")?;
        write_part(&test, "test.csv", "test_labels.csv")?;
    }
    Ok(())
}

fn cmd_train(a: &TrainArgs) -> Result<()> {
    let schema = FeatureSchema::parse(&read_text(&a.schema)?)?;
    let raw = load_csv(&a.data, &schema)?;
    if raw.is_empty() {
        return Err(Error::Input(format!("{} has no data rows", a.data.display())));
    }
    let mut settings = FitSettings::default();
    if let Some(path) = &a.config {
        apply_config_text(&read_text(path)?, &mut settings)?;
    }
    apply_overrides(&a.overrides, &mut settings);
    let (view, prep) = encode(&raw, &schema, None)?;
    let config = PriorConfig::for_data(&view, settings)?;
    let (model, trace) = dpmm::fit(&view, &config)?;
    log::info!(
        "fitted {} iterations, {} active components",
        trace.len(),
        model.active_components(1e-3).len()
    );
    save_model(&a.model, &ModelDocument::new(model, Some(prep)))?;
    let mut csv = String::from("iteration,elbo\n");
    for (i, v) in trace.iter().enumerate() {
        let _ = writeln!(csv, "{},{}", i + 1, v);
    }
    write_text(&a.elbo, &csv)
}

/// Values of an `id` column when present, else 1-based row numbers.
fn row_ids(path: &Path, n: usize) -> Result<Vec<String>> {
    let mut rdr = csv::Reader::from_path(path)?;
    let pos = rdr.headers()?.iter().position(|h| h.trim() == "id");
    match pos {
        Some(p) => rdr
            .records()
            .map(|r| Ok(r?.get(p).unwrap_or("").trim().to_string()))
            .collect(),
        None => Ok((1..=n).map(|i| i.to_string()).collect()),
    }
}

fn cmd_score(a: &ScoreArgs) -> Result<()> {
    let doc = load_model(&a.model)?;
    let prep = doc
        .preprocessing
        .as_ref()
        .ok_or_else(|| Error::Input("model has no preprocessing section".into()))?;
    if a.exact && !doc.model.layout.is_all_gaussian() {
        return Err(Error::UnsupportedSchema(
            "--exact needs a schema whose columns are all continuous".into(),
        ));
    }
    let raw = load_csv(&a.data, &prep.schema)?;
    if raw.is_empty() {
        return Err(Error::Input(format!("{} has no data rows", a.data.display())));
    }
    let view = prep.encode(&raw)?;
    let log_p: Vec<f64> = if a.exact {
        dpmm::score_exact_gaussian_batch(&doc.model, &view)?
    } else {
        let settings = &doc.model.config.settings;
        let m = a.mc_samples.unwrap_or(settings.mc_samples);
        let seed = a.seed.unwrap_or(settings.seed);
        dpmm::score_mc_batch(&doc.model, &view, m, &mut stream_rng(seed, Stream::Score))?
            .into_iter()
            .map(|s| s.log_density)
            .collect()
    };
    let scores: Vec<f64> = log_p.iter().map(|v| -v).collect();
    let ids = row_ids(&a.data, view.len())?;
    let ranks = eval::ranks(&scores);
    let mut csv = String::from("id,score,rank\n");
    for ((id, s), r) in ids.iter().zip(&scores).zip(&ranks) {
        let _ = writeln!(csv, "{id},{s},{r}");
    }
    write_text(&a.out, &csv)
}

fn read_keyed(path: &Path, column: &str) -> Result<Vec<(String, String)>> {
    let mut rdr = csv::Reader::from_path(path)
        .map_err(|e| Error::Input(format!("cannot read {}: {e}", path.display())))?;
    let header = rdr.headers()?.clone();
    let find = |name: &str| {
        header
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| Error::Input(format!("{} lacks a '{name}' column", path.display())))
    };
    let (id, val) = (find("id")?, find(column)?);
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        out.push((
            rec.get(id).unwrap_or("").trim().to_string(),
            rec.get(val).unwrap_or("").trim().to_string(),
        ));
    }
    Ok(out)
}

fn cmd_evaluate(a: &EvaluateArgs) -> Result<()> {
    let scores = read_keyed(&a.scores, "score")?;
    let labels: HashMap<String, String> = read_keyed(&a.labels, "label")?.into_iter().collect();
    if labels.len() != scores.len() {
        return Err(Error::Input(format!(
            "{} scores but {} labels",
            scores.len(),
            labels.len()
        )));
    }
    let mut ids = Vec::new();
    let mut values = Vec::new();
    let mut ys = Vec::new();
    for (i, (id, s)) in scores.into_iter().enumerate() {
        let v: f64 = s.parse().map_err(|_| Error::Parse {
            row: i + 1,
            column: "score".into(),
            msg: format!("'{s}' is not a number"),
        })?;
        let y = match labels.get(&id).map(String::as_str) {
            Some("0") => 0,
            Some("1") => 1,
            Some(other) => return Err(Error::Input(format!("label '{other}' for id {id} is not 0/1"))),
            None => return Err(Error::Input(format!("id {id} has no label"))),
        };
        ids.push(id);
        values.push(v);
        ys.push(y);
    }
    let report = ScoreReport::new(ids, values, Some(ys)).map_err(|e| Error::Input(e.to_string()))?;
    let ap = report.average_precision.unwrap_or(f64::NAN);
    let auc = report.roc_auc.unwrap_or(f64::NAN);
    let metrics = serde_json::json!({
        "n": report.scores.len(),
        "positives": report.labels.as_ref().map(|l| l.iter().filter(|v| **v == 1).count()),
        "average_precision": ap,
        "roc_auc": auc,
    });
    write_text(&a.out, &(serde_json::to_string_pretty(&metrics)? + "\n"))?;
    if let Some(path) = &a.pr_out {
        let mut csv = String::from("threshold,precision,recall\n");
        for p in &report.pr_curve {
            let _ = writeln!(csv, "{},{},{}", p.threshold, p.precision, p.recall);
        }
        write_text(path, &csv)?;
    }
    if let Some(path) = &a.roc_out {
        let mut csv = String::from("threshold,fpr,tpr\n");
        for p in &report.roc_curve {
            let _ = writeln!(csv, "{},{},{}", p.threshold, p.fpr, p.tpr);
        }
        write_text(path, &csv)?;
    }
    println!("average_precision {ap}");
    println!("roc_auc {auc}");
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_text_sets_fields() {
        let mut s = FitSettings::default();
        apply_config_text("# run\nk = 4\nseed=9\nr0=0.5\n", &mut s).unwrap();
        assert_eq!((s.truncation, s.seed, s.r0), (4, 9, 0.5));
        assert!(apply_config_text("bogus=1\n", &mut s).is_err());
        assert!(apply_config_text("k\n", &mut s).is_err());
        assert!(apply_config_text("k=x\n", &mut s).is_err());
    }

    #[test]
    fn flags_override_file() {
        let mut s = FitSettings::default();
        apply_config_text("k=4\n", &mut s).unwrap();
        apply_overrides(
            &Overrides {
                truncation: Some(7),
                ..Overrides::default()
            },
            &mut s,
        );
        assert_eq!(s.truncation, 7);
    }
}
