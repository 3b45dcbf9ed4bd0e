//! The `beno` command line: dataset generation, training, evaluation,
//! experiments, solver self-checks and plotting.
//!
//! Every flag also reads from the `--config` file under the same name
//! (`--base-n` ↔ `base_n`). Flags win over the file; `BENO_SEED` supplies
//! the seed when neither does.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};

use crate::dataset::DatasetSpec;
use crate::error::{BenoError, Result};
use crate::eval::{evaluate, run_experiment, ExperimentSpec};
use crate::fvm::{green_check_suite, BcKind, DEFAULT_TOL};
use crate::io::{plot_comparison, plot_field, read_dataset, read_sample, read_values, write_dataset, Config};
use crate::model::{ModelConfig, Variant};
use crate::train::{train, Checkpoint, Example, TrainConfig};

pub const SEED_ENV: &str = "BENO_SEED";

#[derive(Debug, Parser)]
#[command(name = "beno", version, about = "Boundary-embedded neural operator workbench")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate and solve random samples into a dataset directory.
    Generate(GenerateArgs),
    /// Train a model on a dataset directory.
    Train(TrainArgs),
    /// Score a checkpoint on a dataset directory.
    Evaluate(EvaluateArgs),
    /// Run a generalization experiment described by a spec file.
    Experiment(ExperimentArgs),
    /// Superposition, Green's function symmetry and reconstruction checks.
    GreenCheck(GreenCheckArgs),
    /// Render a sample (and optionally a prediction) to PNG.
    Plot(PlotArgs),
}

#[derive(Debug, Args)]
struct GenerateArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    corners: Option<usize>,
    #[arg(long)]
    base_n: Option<usize>,
    #[arg(long)]
    count: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Sample-name prefix (`<set>_<index>_interior.csv`).
    #[arg(long)]
    set: Option<String>,
    /// g ≡ 0 on every boundary face.
    #[arg(long)]
    homogeneous: bool,
    #[arg(long)]
    neumann: bool,
    #[arg(long)]
    tol: Option<f64>,
}

#[derive(Debug, Args)]
struct TrainArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// full, w_M or wo_D.
    #[arg(long)]
    variant: Option<Variant>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    weight_decay: Option<f64>,
    #[arg(long)]
    restart_period: Option<usize>,
    #[arg(long)]
    val_fraction: Option<f64>,
    #[arg(long)]
    knn: Option<usize>,
    #[arg(long)]
    embed_dim: Option<usize>,
    #[arg(long)]
    mp_steps: Option<usize>,
    #[arg(long)]
    transformer_layers: Option<usize>,
    #[arg(long)]
    attention_heads: Option<usize>,
    #[arg(long)]
    mlp_layers: Option<usize>,
    /// Print only the final line.
    #[arg(long)]
    quiet: bool,
}

#[derive(Debug, Args)]
struct EvaluateArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    #[arg(long)]
    data: Option<PathBuf>,
    /// Per-sample metrics CSV.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ExperimentArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    spec: Option<PathBuf>,
    /// Overrides `out` in the experiment file.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    quiet: bool,
}

#[derive(Debug, Args)]
struct GreenCheckArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    base_n: Option<usize>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    tol: Option<f64>,
    /// Largest accepted defect.
    #[arg(long)]
    threshold: Option<f64>,
}

#[derive(Debug, Args)]
struct PlotArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    sample: Option<PathBuf>,
    /// Predicted field, one value per line; without it the sample's u is drawn.
    #[arg(long)]
    pred: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Flag values layered over a config file.
struct Layered {
    cfg: Config,
}

impl Layered {
    fn load(path: Option<&Path>, allowed: &[&str]) -> Result<Layered> {
        let cfg = match path {
            Some(p) => Config::load(p)?,
            None => Config::default(),
        };
        cfg.check_keys(allowed)?;
        Ok(Layered { cfg })
    }

    fn get<T: FromStr>(&self, flag: Option<T>, key: &str) -> Result<Option<T>> {
        match flag {
            Some(v) => Ok(Some(v)),
            None => self.cfg.parse(key),
        }
    }

    fn or<T: FromStr>(&self, flag: Option<T>, key: &str, default: T) -> Result<T> {
        Ok(self.get(flag, key)?.unwrap_or(default))
    }

    fn need<T: FromStr>(&self, flag: Option<T>, key: &str) -> Result<T> {
        self.get(flag, key)?
            .ok_or_else(|| BenoError::Config(format!("missing --{} (or `{key}` in the config file)", key.replace('_', "-"))))
    }

    fn switch(&self, flag: bool, key: &str) -> Result<bool> {
        Ok(flag || self.cfg.parse(key)?.unwrap_or(false))
    }

    fn seed(&self, flag: Option<u64>) -> Result<u64> {
        if let Some(s) = self.get(flag, "seed")? {
            return Ok(s);
        }
        match std::env::var(SEED_ENV) {
            Ok(v) => v
                .trim()
                .parse()
                .map_err(|_| BenoError::Config(format!("{SEED_ENV}={v:?} is not an unsigned integer"))),
            Err(_) => Ok(0),
        }
    }
}

fn generate(a: GenerateArgs, out: &mut dyn Write) -> Result<()> {
    let l = Layered::load(
        a.config.as_deref(),
        &["corners", "base_n", "count", "seed", "out", "set", "homogeneous", "neumann", "tol"],
    )?;
    let spec = DatasetSpec {
        corners: l.need(a.corners, "corners")?,
        base_n: l.need(a.base_n, "base_n")?,
        count: l.need(a.count, "count")?,
        seed: l.seed(a.seed)?,
        homogeneous: l.switch(a.homogeneous, "homogeneous")?,
        bc: if l.switch(a.neumann, "neumann")? { BcKind::Neumann } else { BcKind::Dirichlet },
        tol: l.or(a.tol, "tol", DEFAULT_TOL)?,
    };
    let dir: PathBuf = l.need(a.out, "out")?;
    let set = l.or(a.set, "set", "sample".to_string())?;
    let samples = spec.generate()?;
    let stems = write_dataset(&dir, &set, &spec, &samples)?;
    let unsolved = samples.iter().filter(|s| !s.is_solved()).count();
    writeln!(out, "wrote {} samples to {} ({unsolved} unsolved)", stems.len(), dir.display())?;
    Ok(())
}

fn train_cmd(a: TrainArgs, out: &mut dyn Write) -> Result<()> {
    let l = Layered::load(
        a.config.as_deref(),
        &[
            "data",
            "out",
            "variant",
            "seed",
            "epochs",
            "learning_rate",
            "weight_decay",
            "restart_period",
            "val_fraction",
            "knn",
            "embed_dim",
            "mp_steps",
            "transformer_layers",
            "attention_heads",
            "mlp_layers",
            "quiet",
        ],
    )?;
    let td = TrainConfig::default();
    let config = TrainConfig {
        learning_rate: l.or(a.learning_rate, "learning_rate", td.learning_rate)?,
        weight_decay: l.or(a.weight_decay, "weight_decay", td.weight_decay)?,
        epochs: l.or(a.epochs, "epochs", td.epochs)?,
        restart_period: l.or(a.restart_period, "restart_period", td.restart_period)?,
        seed: l.seed(a.seed)?,
        val_fraction: l.or(a.val_fraction, "val_fraction", td.val_fraction)?,
        knn: l.or(a.knn, "knn", td.knn)?,
    };
    let md = ModelConfig::default();
    let model = ModelConfig {
        embed_dim: l.or(a.embed_dim, "embed_dim", md.embed_dim)?,
        mp_steps: l.or(a.mp_steps, "mp_steps", md.mp_steps)?,
        transformer_layers: l.or(a.transformer_layers, "transformer_layers", md.transformer_layers)?,
        attention_heads: l.or(a.attention_heads, "attention_heads", md.attention_heads)?,
        mlp_layers: l.or(a.mlp_layers, "mlp_layers", md.mlp_layers)?,
        variant: l.or(a.variant, "variant", md.variant)?,
    };
    config.validate()?;
    model.validate()?;
    let data: PathBuf = l.need(a.data, "data")?;
    let dir: PathBuf = l.need(a.out, "out")?;
    let quiet = l.switch(a.quiet, "quiet")?;
    let samples = read_dataset(&data)?;
    let examples = samples
        .iter()
        .map(|s| Example::from_sample(s, config.knn))
        .collect::<Result<Vec<_>>>()?;
    let mut io_err = None;
    let outcome = train(&config, model, &examples, &mut |r| {
        if !quiet && io_err.is_none() {
            if let Err(e) = writeln!(out, "epoch {} lr={:.4e} train_mse={:.6e} val_mse={:.6e}", r.epoch, r.lr, r.train_mse, r.val_mse) {
                io_err = Some(e);
            }
        }
    })?;
    if let Some(e) = io_err {
        return Err(e.into());
    }
    std::fs::create_dir_all(&dir)?;
    outcome.best.save(&dir.join("checkpoint.bin"))?;
    outcome.write_history(&dir.join("history.csv"))?;
    writeln!(
        out,
        "best epoch {} val_mse={:.6e}; wrote {}",
        outcome.best_epoch,
        outcome.best_val_mse,
        dir.display()
    )?;
    Ok(())
}

fn evaluate_cmd(a: EvaluateArgs, out: &mut dyn Write) -> Result<()> {
    let l = Layered::load(a.config.as_deref(), &["checkpoint", "data", "out"])?;
    let ckpt = Checkpoint::load(&l.need::<PathBuf>(a.checkpoint, "checkpoint")?)?;
    let samples = read_dataset(&l.need::<PathBuf>(a.data, "data")?)?;
    let dest: PathBuf = l.need(a.out, "out")?;
    let report = evaluate(&ckpt, &samples)?;
    if let Some(parent) = dest.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent)?;
    }
    report.write_csv(&dest)?;
    writeln!(
        out,
        "samples={} rel_l2={:.6e}±{:.6e} mae={:.6e}±{:.6e}",
        report.samples.len(),
        report.rel_l2_mean,
        report.rel_l2_std,
        report.mae_mean,
        report.mae_std
    )?;
    Ok(())
}

fn experiment_cmd(a: ExperimentArgs, out: &mut dyn Write) -> Result<()> {
    let l = Layered::load(a.config.as_deref(), &["spec", "out", "quiet"])?;
    let spec_path: PathBuf = l.need(a.spec, "spec")?;
    let cfg = Config::load(&spec_path)?;
    let dest: PathBuf = match l.get(a.out, "out")? {
        Some(p) => p,
        None => cfg
            .get("out")
            .map(PathBuf::from)
            .ok_or_else(|| BenoError::Config("missing --out (or `out` in the spec file)".into()))?,
    };
    let spec = ExperimentSpec::from_config(&cfg)?;
    let quiet = l.switch(a.quiet, "quiet")?;
    std::fs::create_dir_all(&dest)?;
    let mut io_err = None;
    let report = run_experiment(&spec, Some(&dest), &mut |v, r| {
        if !quiet && io_err.is_none() {
            if let Err(e) = writeln!(out, "{v} epoch {} train_mse={:.6e} val_mse={:.6e}", r.epoch, r.train_mse, r.val_mse) {
                io_err = Some(e);
            }
        }
    })?;
    if let Some(e) = io_err {
        return Err(e.into());
    }
    writeln!(out, "variant,test_corners,test_base_n,rel_l2_mean,rel_l2_std,mae_mean,mae_std")?;
    for c in &report.cells {
        writeln!(
            out,
            "{},{},{},{:.6e},{:.6e},{:.6e},{:.6e}",
            c.variant, c.test_corners, c.test_base_n, c.report.rel_l2_mean, c.report.rel_l2_std, c.report.mae_mean, c.report.mae_std
        )?;
    }
    Ok(())
}

fn green_check(a: GreenCheckArgs, out: &mut dyn Write) -> Result<()> {
    let l = Layered::load(a.config.as_deref(), &["base_n", "trials", "seed", "tol", "threshold"])?;
    let base_n = l.or(a.base_n, "base_n", 8)?;
    let trials = l.or(a.trials, "trials", 5)?;
    let tol = l.or(a.tol, "tol", DEFAULT_TOL)?;
    let threshold = l.or(a.threshold, "threshold", 1e-8)?;
    let r = green_check_suite(base_n, trials, l.seed(a.seed)?, tol)?;
    for (k, d) in r.superposition_defects.iter().enumerate() {
        writeln!(out, "superposition trial {k}: {d:.3e}")?;
    }
    writeln!(out, "green symmetry: {:.3e}", r.symmetry_defect)?;
    writeln!(out, "green reconstruction: {:.3e}", r.reconstruction_error)?;
    let worst = r.max_superposition().max(r.symmetry_defect).max(r.reconstruction_error);
    if worst.is_nan() || worst > threshold {
        return Err(BenoError::InvalidParameter(format!(
            "green-check defect {worst:.3e} exceeds threshold {threshold:.1e}"
        )));
    }
    writeln!(out, "all defects <= {threshold:.1e}")?;
    Ok(())
}

fn plot(a: PlotArgs, out: &mut dyn Write) -> Result<()> {
    let l = Layered::load(a.config.as_deref(), &["sample", "pred", "out"])?;
    let sample = read_sample(&l.need::<PathBuf>(a.sample, "sample")?)?;
    let dest: PathBuf = l.need(a.out, "out")?;
    match l.get::<PathBuf>(a.pred, "pred")? {
        Some(p) => plot_comparison(&sample.domain, &read_values(&p)?, &sample.u, &dest)?,
        None => plot_field(&sample.domain, &sample.u, &dest)?,
    }
    writeln!(out, "wrote {}", dest.display())?;
    Ok(())
}

/// Single-line diagnostic: `beno: error[<code>]: <message>`.
pub fn diagnostic(code: &str, message: &str) -> String {
    let flat: Vec<&str> = message.split_whitespace().collect();
    format!("beno: error[{code}]: {}", flat.join(" "))
}

/// Runs one invocation and returns the process exit status.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = write!(out, "{}", e.render());
                return 0;
            }
            let rendered = e.render().to_string();
            let first = rendered.lines().next().unwrap_or("invalid arguments").trim_start_matches("error: ");
            let _ = writeln!(err, "{}", diagnostic("usage", first));
            let _ = write!(err, "{rendered}");
            return 2;
        }
    };
    let result = match cli.command {
        Command::Generate(a) => generate(a, out),
        Command::Train(a) => train_cmd(a, out),
        Command::Evaluate(a) => evaluate_cmd(a, out),
        Command::Experiment(a) => experiment_cmd(a, out),
        Command::GreenCheck(a) => green_check(a, out),
        Command::Plot(a) => plot(a, out),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "{}", diagnostic(e.code(), &e.to_string()));
            1
        }
    }
}
