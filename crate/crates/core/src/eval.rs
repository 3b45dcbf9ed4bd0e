//! Error metrics, test-set evaluation and the generalization experiments
//! (cross-shape, zero boundary values, resolution transfer, variant comparison).

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::dataset::DatasetSpec;
use crate::domain::derive_seed;
use crate::error::{BenoError, Result};
use crate::fvm::{BcKind, SolutionSample};
use crate::io::{write_dataset, Config};
use crate::model::{ModelConfig, Variant};
use crate::train::{train, Checkpoint, EpochRecord, Example, TrainConfig};

fn check_lengths(pred: &[f64], truth: &[f64]) -> Result<()> {
    if pred.len() != truth.len() {
        return Err(BenoError::ShapeMismatch(format!(
            "prediction length {} vs ground truth length {}",
            pred.len(),
            truth.len()
        )));
    }
    if truth.is_empty() {
        return Err(BenoError::UndefinedMetric("empty field".into()));
    }
    Ok(())
}

/// `‖û − u‖₂ / ‖u‖₂`.
pub fn rel_l2(pred: &[f64], truth: &[f64]) -> Result<f64> {
    check_lengths(pred, truth)?;
    let den = truth.iter().map(|v| v * v).sum::<f64>().sqrt();
    if den == 0.0 {
        return Err(BenoError::UndefinedMetric("relative L2 error of an all-zero ground truth".into()));
    }
    let num = pred.iter().zip(truth).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
    Ok(num / den)
}

/// Mean absolute error.
pub fn mae(pred: &[f64], truth: &[f64]) -> Result<f64> {
    check_lengths(pred, truth)?;
    Ok(pred.iter().zip(truth).map(|(a, b)| (a - b).abs()).sum::<f64>() / truth.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SampleMetrics {
    pub index: usize,
    pub rel_l2: f64,
    pub mae: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricReport {
    pub samples: Vec<SampleMetrics>,
    pub rel_l2_mean: f64,
    pub rel_l2_std: f64,
    pub mae_mean: f64,
    pub mae_std: f64,
}

fn mean_std(v: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = v.clone().count() as f64;
    let mean = v.clone().sum::<f64>() / n;
    let var = v.map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

impl MetricReport {
    /// Aggregates per-sample metrics (population standard deviation).
    pub fn from_samples(samples: Vec<SampleMetrics>) -> Result<MetricReport> {
        if samples.is_empty() {
            return Err(BenoError::EmptySplit("no samples to report".into()));
        }
        let (rel_l2_mean, rel_l2_std) = mean_std(samples.iter().map(|s| s.rel_l2));
        let (mae_mean, mae_std) = mean_std(samples.iter().map(|s| s.mae));
        Ok(MetricReport {
            samples,
            rel_l2_mean,
            rel_l2_std,
            mae_mean,
            mae_std,
        })
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("index,rel_l2,mae\n");
        for m in &self.samples {
            writeln!(s, "{},{:.17e},{:.17e}", m.index, m.rel_l2, m.mae).unwrap();
        }
        s
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_csv())?;
        Ok(())
    }
}

/// Metrics of given predictions against the samples' solutions.
pub fn evaluate_predictions(predictions: &[Vec<f64>], samples: &[SolutionSample]) -> Result<MetricReport> {
    if predictions.len() != samples.len() {
        return Err(BenoError::ShapeMismatch(format!(
            "{} predictions for {} samples",
            predictions.len(),
            samples.len()
        )));
    }
    let per = predictions
        .iter()
        .zip(samples)
        .enumerate()
        .map(|(index, (p, s))| {
            if !s.is_solved() {
                return Err(BenoError::NonFinite(format!("ground truth of sample {index} (unsolved)")));
            }
            Ok(SampleMetrics {
                index,
                rel_l2: rel_l2(p, &s.u)?,
                mae: mae(p, &s.u)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    MetricReport::from_samples(per)
}

/// De-standardized checkpoint predictions scored on `samples`.
pub fn evaluate(checkpoint: &Checkpoint, samples: &[SolutionSample]) -> Result<MetricReport> {
    let preds = samples
        .iter()
        .map(|s| checkpoint.predict_sample(s))
        .collect::<Result<Vec<_>>>()?;
    evaluate_predictions(&preds, samples)
}

/// What to train and what to test on. Every trained variant is scored on
/// every test set, so a cross-shape run yields a 1 × 5 grid per variant.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub name: String,
    pub train_set: DatasetSpec,
    pub test_corners: Vec<usize>,
    pub test_base_n: usize,
    pub test_count: usize,
    pub test_homogeneous: bool,
    pub test_seed: u64,
    pub variants: Vec<Variant>,
    pub train: TrainConfig,
    pub model: ModelConfig,
}

pub const EXPERIMENT_KEYS: &[&str] = &[
    "experiment",
    "name",
    "out",
    "train_corners",
    "train_count",
    "base_n",
    "bc",
    "seed",
    "test_corners",
    "test_base_n",
    "test_count",
    "test_homogeneous",
    "test_seed",
    "variants",
    "learning_rate",
    "weight_decay",
    "epochs",
    "restart_period",
    "val_fraction",
    "knn",
    "embed_dim",
    "mp_steps",
    "transformer_layers",
    "attention_heads",
    "mlp_layers",
];

fn parse_list<T: std::str::FromStr>(key: &str, v: &str) -> Result<Vec<T>> {
    v.split(',')
        .map(|t| t.trim())
        .filter(|t| !t.is_empty())
        .map(|t| t.parse::<T>().map_err(|_| BenoError::Config(format!("bad entry {t:?} in {key}"))))
        .collect()
}

impl ExperimentSpec {
    /// Desk-scale defaults for one of the named experiments:
    /// `cross_shape`, `zero_boundary`, `resolution`, `variants`.
    pub fn preset(kind: &str) -> Result<ExperimentSpec> {
        let mut s = ExperimentSpec {
            name: kind.to_string(),
            train_set: DatasetSpec::new(4, 16, 20, 0),
            test_corners: vec![4],
            test_base_n: 16,
            test_count: 10,
            test_homogeneous: false,
            test_seed: 1,
            variants: vec![Variant::Full],
            train: TrainConfig {
                learning_rate: 5e-4,
                epochs: 500,
                ..TrainConfig::default()
            },
            model: ModelConfig {
                embed_dim: 32,
                ..ModelConfig::default()
            },
        };
        match kind {
            "cross_shape" => s.test_corners = vec![0, 1, 2, 3, 4],
            "zero_boundary" => {
                s.test_corners = vec![0, 1, 2, 3, 4];
                s.test_homogeneous = true;
            }
            "resolution" => {
                s.test_base_n = 32;
                s.test_corners = vec![4];
            }
            "variants" => s.variants = Variant::ALL.to_vec(),
            _ => {
                return Err(BenoError::Config(format!(
                    "unknown experiment {kind:?} (expected cross_shape, zero_boundary, resolution or variants)"
                )))
            }
        }
        Ok(s)
    }

    /// Preset named by `experiment`, overridden by any other key.
    pub fn from_config(cfg: &Config) -> Result<ExperimentSpec> {
        cfg.check_keys(EXPERIMENT_KEYS)?;
        let mut s = ExperimentSpec::preset(cfg.require("experiment")?)?;
        if let Some(v) = cfg.get("name") {
            s.name = v.to_string();
        }
        macro_rules! set {
            ($field:expr, $key:literal) => {
                if let Some(v) = cfg.parse($key)? {
                    $field = v;
                }
            };
        }
        set!(s.train_set.corners, "train_corners");
        set!(s.train_set.count, "train_count");
        if let Some(n) = cfg.parse::<usize>("base_n")? {
            // test grids keep the preset's ratio to the training grid
            s.test_base_n = s.test_base_n * n / s.train_set.base_n;
            s.train_set.base_n = n;
        }
        set!(s.train_set.seed, "seed");
        set!(s.test_base_n, "test_base_n");
        set!(s.test_count, "test_count");
        set!(s.test_homogeneous, "test_homogeneous");
        set!(s.test_seed, "test_seed");
        set!(s.train.learning_rate, "learning_rate");
        set!(s.train.weight_decay, "weight_decay");
        set!(s.train.epochs, "epochs");
        set!(s.train.restart_period, "restart_period");
        set!(s.train.val_fraction, "val_fraction");
        set!(s.train.knn, "knn");
        set!(s.model.embed_dim, "embed_dim");
        set!(s.model.mp_steps, "mp_steps");
        set!(s.model.transformer_layers, "transformer_layers");
        set!(s.model.attention_heads, "attention_heads");
        set!(s.model.mlp_layers, "mlp_layers");
        if let Some(v) = cfg.get("bc") {
            s.train_set.bc = BcKind::parse(v)?;
        }
        if let Some(v) = cfg.get("test_corners") {
            s.test_corners = parse_list("test_corners", v)?;
        }
        if let Some(v) = cfg.get("variants") {
            s.variants = parse_list("variants", v)?;
        }
        s.train.seed = s.train_set.seed;
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.variants.is_empty() || self.test_corners.is_empty() {
            return Err(BenoError::Config("experiment needs at least one variant and one test set".into()));
        }
        if self.test_count == 0 {
            return Err(BenoError::Config("test_count must be at least 1".into()));
        }
        if self.test_corners.iter().any(|&c| c > 4) {
            return Err(BenoError::Config("test_corners entries must lie in 0..=4".into()));
        }
        self.train.validate()?;
        self.model.validate()
    }

    pub fn test_set(&self, corners: usize) -> DatasetSpec {
        DatasetSpec {
            corners,
            base_n: self.test_base_n,
            count: self.test_count,
            seed: derive_seed(self.test_seed, corners as u64),
            homogeneous: self.test_homogeneous,
            bc: self.train_set.bc,
            tol: self.train_set.tol,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentCell {
    pub variant: String,
    pub train_corners: usize,
    pub train_base_n: usize,
    pub test_corners: usize,
    pub test_base_n: usize,
    pub test_homogeneous: bool,
    pub report: MetricReport,
}

#[derive(Debug, Clone)]
pub struct ExperimentReport {
    pub cells: Vec<ExperimentCell>,
    pub histories: Vec<(Variant, Vec<EpochRecord>)>,
    pub checkpoints: Vec<(Variant, Checkpoint)>,
}

impl ExperimentReport {
    pub fn cell(&self, variant: Variant, test_corners: usize) -> Option<&ExperimentCell> {
        self.cells
            .iter()
            .find(|c| c.variant == variant.name() && c.test_corners == test_corners)
    }
}

#[derive(Serialize)]
struct SummaryRow<'a> {
    variant: &'a str,
    train_corners: usize,
    train_base_n: usize,
    test_corners: usize,
    test_base_n: usize,
    test_homogeneous: bool,
    samples: usize,
    rel_l2_mean: f64,
    rel_l2_std: f64,
    mae_mean: f64,
    mae_std: f64,
}

#[derive(Serialize)]
struct Summary<'a> {
    name: &'a str,
    config: Vec<(String, String)>,
    results: Vec<SummaryRow<'a>>,
}

fn echo_config(spec: &ExperimentSpec) -> Vec<(String, String)> {
    let t = &spec.train;
    let m = &spec.model;
    [
        ("train_corners", spec.train_set.corners.to_string()),
        ("train_count", spec.train_set.count.to_string()),
        ("base_n", spec.train_set.base_n.to_string()),
        ("bc", spec.train_set.bc.name().to_string()),
        ("seed", spec.train_set.seed.to_string()),
        (
            "test_corners",
            spec.test_corners.iter().map(|c| c.to_string()).collect::<Vec<_>>().join(","),
        ),
        ("test_base_n", spec.test_base_n.to_string()),
        ("test_count", spec.test_count.to_string()),
        ("test_homogeneous", spec.test_homogeneous.to_string()),
        ("test_seed", spec.test_seed.to_string()),
        ("learning_rate", format!("{:?}", t.learning_rate)),
        ("weight_decay", format!("{:?}", t.weight_decay)),
        ("epochs", t.epochs.to_string()),
        ("restart_period", t.restart_period.to_string()),
        ("val_fraction", format!("{:?}", t.val_fraction)),
        ("knn", t.knn.to_string()),
        ("embed_dim", m.embed_dim.to_string()),
        ("mp_steps", m.mp_steps.to_string()),
        ("transformer_layers", m.transformer_layers.to_string()),
        ("attention_heads", m.attention_heads.to_string()),
        ("mlp_layers", m.mlp_layers.to_string()),
    ]
    .into_iter()
    .map(|(k, v)| (k.to_string(), v))
    .collect()
}

/// JSON summary: config echo plus per-cell means and standard deviations.
pub fn summary_json(spec: &ExperimentSpec, cells: &[ExperimentCell]) -> Result<String> {
    let summary = Summary {
        name: &spec.name,
        config: echo_config(spec),
        results: cells
            .iter()
            .map(|c| SummaryRow {
                variant: &c.variant,
                train_corners: c.train_corners,
                train_base_n: c.train_base_n,
                test_corners: c.test_corners,
                test_base_n: c.test_base_n,
                test_homogeneous: c.test_homogeneous,
                samples: c.report.samples.len(),
                rel_l2_mean: c.report.rel_l2_mean,
                rel_l2_std: c.report.rel_l2_std,
                mae_mean: c.report.mae_mean,
                mae_std: c.report.mae_std,
            })
            .collect(),
    };
    serde_json::to_string_pretty(&summary).map_err(|e| BenoError::Parse(e.to_string()))
}

/// Generates the data, trains each variant and scores it on every test set.
/// With `out`, every stage is persisted as it completes: datasets, then per
/// variant the checkpoint, history and per-test-set CSVs, and `summary.json`
/// after each evaluation.
pub fn run_experiment(
    spec: &ExperimentSpec,
    out: Option<&Path>,
    on_epoch: &mut dyn FnMut(Variant, &EpochRecord),
) -> Result<ExperimentReport> {
    spec.validate()?;
    let train_samples = spec.train_set.generate()?;
    let tests: Vec<(usize, Vec<SolutionSample>)> = spec
        .test_corners
        .iter()
        .map(|&c| Ok((c, spec.test_set(c).generate()?)))
        .collect::<Result<_>>()?;
    let dir = |p: &str| -> Option<PathBuf> { out.map(|o| o.join(p)) };
    if let Some(d) = dir("data/train") {
        write_dataset(&d, "train", &spec.train_set, &train_samples)?;
    }
    for (c, samples) in &tests {
        if let Some(d) = dir(&format!("data/test_c{c}")) {
            write_dataset(&d, &format!("test_c{c}"), &spec.test_set(*c), samples)?;
        }
    }
    let examples = train_samples
        .iter()
        .map(|s| Example::from_sample(s, spec.train.knn))
        .collect::<Result<Vec<_>>>()?;

    let mut report = ExperimentReport {
        cells: Vec::new(),
        histories: Vec::new(),
        checkpoints: Vec::new(),
    };
    for &variant in &spec.variants {
        let model = ModelConfig { variant, ..spec.model };
        let outcome = train(&spec.train, model, &examples, &mut |r| on_epoch(variant, r))?;
        let vdir = dir(variant.name());
        if let Some(d) = &vdir {
            fs::create_dir_all(d)?;
            outcome.best.save(&d.join("checkpoint.bin"))?;
            outcome.write_history(&d.join("history.csv"))?;
        }
        for (c, samples) in &tests {
            let metrics = evaluate(&outcome.best, samples)?;
            if let Some(d) = &vdir {
                metrics.write_csv(&d.join(format!("eval_c{c}.csv")))?;
            }
            report.cells.push(ExperimentCell {
                variant: variant.name().to_string(),
                train_corners: spec.train_set.corners,
                train_base_n: spec.train_set.base_n,
                test_corners: *c,
                test_base_n: spec.test_base_n,
                test_homogeneous: spec.test_homogeneous,
                report: metrics,
            });
            if let Some(o) = out {
                fs::write(o.join("summary.json"), summary_json(spec, &report.cells)?)?;
            }
        }
        report.histories.push((variant, outcome.history));
        report.checkpoints.push((variant, outcome.best));
    }
    Ok(report)
}
