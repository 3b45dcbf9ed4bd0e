//! Supervised training: z-score statistics, Adam with coupled weight decay,
//! cosine annealing with warm restarts, and best-validation selection.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;
use std::rc::Rc;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::diff::ParamStore;
use crate::error::{BenoError, Result};
use crate::fvm::SolutionSample;
use crate::graph::{build_graph, PdeGraph, BOUNDARY_FEATURES, DEFAULT_K, EDGE_FEATURES, NODE_FEATURES};
use crate::model::{Beno, ModelConfig, ModelInput};

pub const STD_FLOOR: f64 = 1e-8;

/// Per-column mean and (floored) population standard deviation.
#[derive(Debug, Clone, PartialEq)]
pub struct ColumnStats {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl ColumnStats {
    pub fn fit<'a, I>(width: usize, rows: I) -> Result<ColumnStats>
    where
        I: IntoIterator<Item = &'a [f64]> + Clone,
    {
        let mut count = 0usize;
        let mut sum = vec![0.0; width];
        for r in rows.clone() {
            for (s, v) in sum.iter_mut().zip(r) {
                *s += v;
            }
            count += 1;
        }
        if count == 0 {
            return Err(BenoError::EmptySplit("no rows to fit normalization statistics".into()));
        }
        let mean: Vec<f64> = sum.iter().map(|s| s / count as f64).collect();
        let mut sq = vec![0.0; width];
        for r in rows {
            for ((s, v), m) in sq.iter_mut().zip(r).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        let std = sq.iter().map(|s| (s / count as f64).sqrt().max(STD_FLOOR)).collect();
        Ok(ColumnStats { mean, std })
    }

    pub fn apply(&self, row: &mut [f64]) {
        for ((v, m), s) in row.iter_mut().zip(&self.mean).zip(&self.std) {
            *v = (*v - m) / s;
        }
    }

    pub fn invert(&self, row: &mut [f64]) {
        for ((v, m), s) in row.iter_mut().zip(&self.mean).zip(&self.std) {
            *v = *v * s + m;
        }
    }

    fn to_meta(&self, name: &str) -> String {
        let join = |v: &[f64]| v.iter().map(|x| format!("{x:?}")).collect::<Vec<_>>().join(",");
        format!("norm {name} {} {}", join(&self.mean), join(&self.std))
    }

    fn from_meta(fields: &[&str], width: usize) -> Result<ColumnStats> {
        let parse = |s: &str| -> Result<Vec<f64>> {
            let v = s
                .split(',')
                .map(|x| x.parse::<f64>().map_err(|_| BenoError::Parse(format!("bad statistic {x:?}"))))
                .collect::<Result<Vec<_>>>()?;
            if v.len() != width {
                return Err(BenoError::Parse(format!("expected {width} statistics, got {}", v.len())));
            }
            Ok(v)
        };
        match fields {
            [m, s] => Ok(ColumnStats {
                mean: parse(m)?,
                std: parse(s)?,
            }),
            _ => Err(BenoError::Parse("bad normalization line".into())),
        }
    }
}

/// Z-score statistics for every model input table and the target.
#[derive(Debug, Clone, PartialEq)]
pub struct NormStats {
    pub node: ColumnStats,
    pub edge: ColumnStats,
    pub boundary: ColumnStats,
    pub target: ColumnStats,
}

impl NormStats {
    /// Fits on training examples only.
    pub fn fit(train: &[Example]) -> Result<NormStats> {
        if train.len() < 2 {
            return Err(BenoError::EmptySplit(format!(
                "normalization needs at least 2 training samples, got {}",
                train.len()
            )));
        }
        let graphs = train.iter().map(|e| &e.graph);
        Ok(NormStats {
            node: ColumnStats::fit(NODE_FEATURES, graphs.clone().flat_map(|g| g.node_features.iter().map(|r| r.as_slice())))?,
            edge: ColumnStats::fit(EDGE_FEATURES, graphs.clone().flat_map(|g| g.edge_features.iter().map(|r| r.as_slice())))?,
            boundary: ColumnStats::fit(
                BOUNDARY_FEATURES,
                graphs.flat_map(|g| g.boundary_sequence.iter().map(|r| r.as_slice())),
            )?,
            target: ColumnStats::fit(1, train.iter().flat_map(|e| e.target.chunks(1)))?,
        })
    }

    pub fn apply_graph(&self, g: &PdeGraph) -> PdeGraph {
        let mut out = g.clone();
        out.node_features.iter_mut().for_each(|r| self.node.apply(r));
        out.edge_features.iter_mut().for_each(|r| self.edge.apply(r));
        out.boundary_sequence.iter_mut().for_each(|r| self.boundary.apply(r));
        out
    }

    pub fn standardize_target(&self, u: &[f64]) -> Vec<f64> {
        let (m, s) = (self.target.mean[0], self.target.std[0]);
        u.iter().map(|v| (v - m) / s).collect()
    }

    pub fn destandardize_target(&self, z: &[f64]) -> Vec<f64> {
        let (m, s) = (self.target.mean[0], self.target.std[0]);
        z.iter().map(|v| v * s + m).collect()
    }

    pub fn to_meta(&self) -> Vec<String> {
        vec![
            self.node.to_meta("node"),
            self.edge.to_meta("edge"),
            self.boundary.to_meta("boundary"),
            self.target.to_meta("target"),
        ]
    }

    pub fn from_meta(lines: &[String]) -> Result<NormStats> {
        let find = |name: &str, width: usize| -> Result<ColumnStats> {
            let prefix = format!("norm {name} ");
            let line = lines
                .iter()
                .find_map(|l| l.strip_prefix(&prefix))
                .ok_or_else(|| BenoError::Parse(format!("missing {name} statistics")))?;
            ColumnStats::from_meta(&line.split(' ').collect::<Vec<_>>(), width)
        };
        Ok(NormStats {
            node: find("node", NODE_FEATURES)?,
            edge: find("edge", EDGE_FEATURES)?,
            boundary: find("boundary", BOUNDARY_FEATURES)?,
            target: find("target", 1)?,
        })
    }
}

/// A solved sample in graph form, before normalization.
#[derive(Debug, Clone)]
pub struct Example {
    pub graph: PdeGraph,
    pub target: Vec<f64>,
}

impl Example {
    /// Builds the graph; refuses samples carrying the unsolved sentinel.
    pub fn from_sample(sample: &SolutionSample, k: usize) -> Result<Example> {
        if !sample.is_solved() {
            return Err(BenoError::NonFinite("sample target (unsolved sample)".into()));
        }
        let (graph, _) = build_graph(sample, k)?;
        Ok(Example {
            graph,
            target: sample.u.clone(),
        })
    }
}

/// An example ready for the model: normalized input and standardized target.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub input: ModelInput,
    pub target: Rc<[f64]>,
}

impl Prepared {
    pub fn new(example: &Example, norm: &NormStats) -> Result<Prepared> {
        Ok(Prepared {
            input: ModelInput::from_graph(&norm.apply_graph(&example.graph))?,
            target: norm.standardize_target(&example.target).into(),
        })
    }
}

/// Mean of squared differences.
pub fn mse_loss(pred: &[f64], target: &[f64]) -> Result<f64> {
    if pred.len() != target.len() {
        return Err(BenoError::ShapeMismatch(format!(
            "prediction length {} vs target length {}",
            pred.len(),
            target.len()
        )));
    }
    if pred.is_empty() {
        return Err(BenoError::ShapeMismatch("empty prediction".into()));
    }
    Ok(pred.iter().zip(target).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / pred.len() as f64)
}

/// Adam with the weight decay folded into the gradient (`g + wd·θ`).
#[derive(Debug, Clone)]
pub struct Adam {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

impl Adam {
    pub fn new(len: usize, weight_decay: f64) -> Adam {
        Adam {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay,
            m: vec![0.0; len],
            v: vec![0.0; len],
            t: 0,
        }
    }

    pub fn steps(&self) -> u64 {
        self.t
    }

    pub fn step(&mut self, params: &mut [f64], grads: &[f64], lr: f64) -> Result<()> {
        if params.len() != self.m.len() || grads.len() != self.m.len() {
            return Err(BenoError::ShapeMismatch("optimizer state does not match parameters".into()));
        }
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t as i32);
        let c2 = 1.0 - self.beta2.powi(self.t as i32);
        for k in 0..params.len() {
            let g = grads[k] + self.weight_decay * params[k];
            self.m[k] = self.beta1 * self.m[k] + (1.0 - self.beta1) * g;
            self.v[k] = self.beta2 * self.v[k] + (1.0 - self.beta2) * g * g;
            let mh = self.m[k] / c1;
            let vh = self.v[k] / c2;
            params[k] -= lr * mh / (vh.sqrt() + self.eps);
        }
        Ok(())
    }
}

/// Cosine annealing with warm restarts (cycle length `t0`, multiplier 1,
/// floor 0), stepped once per epoch.
pub fn lr_schedule(epoch: usize, base_lr: f64, t0: usize) -> f64 {
    let t0 = t0.max(1);
    let t_cur = (epoch % t0) as f64;
    base_lr * (1.0 + (std::f64::consts::PI * t_cur / t0 as f64).cos()) / 2.0
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub epochs: usize,
    pub restart_period: usize,
    pub seed: u64,
    pub val_fraction: f64,
    pub knn: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 5e-5,
            weight_decay: 5e-4,
            epochs: 1000,
            restart_period: 16,
            seed: 0,
            val_fraction: 1.0 / 9.0,
            knn: DEFAULT_K,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(BenoError::InvalidParameter(m.to_string()));
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be positive");
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return bad("weight_decay must be non-negative");
        }
        if self.epochs == 0 {
            return bad("epochs must be at least 1");
        }
        if self.restart_period == 0 {
            return bad("restart_period must be at least 1");
        }
        if !(self.val_fraction > 0.0 && self.val_fraction < 1.0) {
            return bad("val_fraction must lie in (0, 1)");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochRecord {
    /// 1-based.
    pub epoch: usize,
    pub lr: f64,
    /// Mean step loss over the epoch (standardized units).
    pub train_mse: f64,
    pub val_mse: f64,
}

/// Deterministic train/validation split of `n` items.
pub fn split_indices(n: usize, val_fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    let n_val = ((n as f64 * val_fraction).round() as usize).max(1);
    if n < n_val + 2 {
        return Err(BenoError::EmptySplit(format!(
            "{n} samples leave fewer than 2 for training after holding out {n_val}"
        )));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_5b17));
    let (val, train) = idx.split_at(n_val);
    let (mut train, mut val) = (train.to_vec(), val.to_vec());
    train.sort_unstable();
    val.sort_unstable();
    Ok((train, val))
}

/// Model, statistics and parameters: everything needed to predict.
#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub model: Beno,
    pub norm: NormStats,
    pub params: ParamStore,
    pub knn: usize,
}

impl Checkpoint {
    /// De-standardized prediction for a raw example graph.
    pub fn predict(&self, graph: &PdeGraph) -> Result<Vec<f64>> {
        let input = ModelInput::from_graph(&self.norm.apply_graph(graph))?;
        let z = self.model.predict(&self.params, &input)?;
        Ok(self.norm.destandardize_target(&z))
    }

    pub fn predict_sample(&self, sample: &SolutionSample) -> Result<Vec<f64>> {
        let (graph, _) = build_graph(sample, self.knn)?;
        self.predict(&graph)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut meta = vec![self.model.config.to_meta(), format!("knn {}", self.knn)];
        meta.extend(self.norm.to_meta());
        let mut w = BufWriter::new(File::create(path)?);
        self.params.write_checkpoint(&mut w, &meta)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Checkpoint> {
        if !path.exists() {
            return Err(BenoError::MissingFile(path.to_path_buf()));
        }
        let (params, meta) = ParamStore::read_checkpoint(BufReader::new(File::open(path)?))?;
        let line = meta
            .iter()
            .find(|l| l.starts_with("model "))
            .ok_or_else(|| BenoError::Parse("checkpoint has no model line".into()))?;
        let config = ModelConfig::from_meta(line)?;
        let knn = meta
            .iter()
            .find_map(|l| l.strip_prefix("knn "))
            .ok_or_else(|| BenoError::Parse("checkpoint has no knn line".into()))?
            .parse()
            .map_err(|_| BenoError::Parse("bad knn line".into()))?;
        let norm = NormStats::from_meta(&meta)?;
        let (model, fresh) = Beno::new(config, 0)?;
        if fresh.specs() != params.specs() {
            return Err(BenoError::Parse("checkpoint parameters do not match its model configuration".into()));
        }
        Ok(Checkpoint {
            model,
            norm,
            params,
            knn,
        })
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Parameters of the epoch with the lowest validation loss.
    pub best: Checkpoint,
    pub best_epoch: usize,
    pub best_val_mse: f64,
    pub history: Vec<EpochRecord>,
    pub train_indices: Vec<usize>,
    pub val_indices: Vec<usize>,
}

impl TrainOutcome {
    pub fn write_history(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        write_history(&mut w, &self.history)?;
        w.flush()?;
        Ok(())
    }
}

pub fn write_history<W: Write>(w: &mut W, history: &[EpochRecord]) -> Result<()> {
    writeln!(w, "epoch,lr,train_mse,val_mse")?;
    for r in history {
        writeln!(w, "{},{:.17e},{:.17e},{:.17e}", r.epoch, r.lr, r.train_mse, r.val_mse)?;
    }
    Ok(())
}

/// Trains on `examples`, holding out a seeded validation split.
/// `on_epoch` sees every history record as it is produced.
pub fn train(
    config: &TrainConfig,
    model_config: ModelConfig,
    examples: &[Example],
    on_epoch: &mut dyn FnMut(&EpochRecord),
) -> Result<TrainOutcome> {
    config.validate()?;
    model_config.validate()?;
    let (train_idx, val_idx) = split_indices(examples.len(), config.val_fraction, config.seed)?;
    let train_set: Vec<Example> = train_idx.iter().map(|&i| examples[i].clone()).collect();
    let norm = NormStats::fit(&train_set)?;
    let prep = |i: &usize| Prepared::new(&examples[*i], &norm);
    let train_data = train_idx.iter().map(prep).collect::<Result<Vec<_>>>()?;
    let val_data = val_idx.iter().map(prep).collect::<Result<Vec<_>>>()?;

    let (model, mut params) = Beno::new(model_config, config.seed)?;
    let mut adam = Adam::new(params.len(), config.weight_decay);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(1));
    let mut order: Vec<usize> = (0..train_data.len()).collect();
    let mut history = Vec::with_capacity(config.epochs);
    let mut best: Option<(usize, f64, ParamStore)> = None;

    for epoch in 0..config.epochs {
        let lr = lr_schedule(epoch, config.learning_rate, config.restart_period);
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for &k in &order {
            let ex = &train_data[k];
            let (loss, grads) = model
                .loss_and_grad(&params, &ex.input, &ex.target)
                .map_err(|e| BenoError::Diverged {
                    epoch: epoch + 1,
                    detail: e.to_string(),
                })?;
            if !loss.is_finite() {
                return Err(BenoError::Diverged {
                    epoch: epoch + 1,
                    detail: format!("training loss {loss}"),
                });
            }
            total += loss;
            adam.step(params.values_mut(), &grads, lr)?;
        }
        let mut val = 0.0;
        for ex in &val_data {
            val += model.loss(&params, &ex.input, &ex.target).map_err(|e| BenoError::Diverged {
                epoch: epoch + 1,
                detail: e.to_string(),
            })?;
        }
        let rec = EpochRecord {
            epoch: epoch + 1,
            lr,
            train_mse: total / train_data.len() as f64,
            val_mse: val / val_data.len() as f64,
        };
        if !rec.val_mse.is_finite() {
            return Err(BenoError::Diverged {
                epoch: rec.epoch,
                detail: format!("validation loss {}", rec.val_mse),
            });
        }
        if best.as_ref().is_none_or(|b| rec.val_mse < b.1) {
            best = Some((rec.epoch, rec.val_mse, params.clone()));
        }
        on_epoch(&rec);
        history.push(rec);
    }
    let (best_epoch, best_val_mse, best_params) = best.expect("at least one epoch");
    Ok(TrainOutcome {
        best: Checkpoint {
            model,
            norm,
            params: best_params,
            knn: config.knn,
        },
        best_epoch,
        best_val_mse,
        history,
        train_indices: train_idx,
        val_indices: val_idx,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{generate_domain, sample_boundary_values, sample_source};
    use crate::fvm::{solve_poisson, BcKind};
    use crate::model::Variant;

    fn solved(base_n: usize, corners: usize, seed: u64) -> SolutionSample {
        let d = generate_domain(base_n, corners, seed).unwrap();
        let f = sample_source(&d, seed + 1);
        let b = sample_boundary_values(&d.boundary, seed + 2, false);
        solve_poisson(&d, &f, &b, BcKind::Dirichlet, 1e-10).unwrap()
    }

    fn examples(n: usize, base_n: usize) -> Vec<Example> {
        (0..n)
            .map(|i| Example::from_sample(&solved(base_n, 4, 100 + 7 * i as u64), 8).unwrap())
            .collect()
    }

    fn tiny_model() -> ModelConfig {
        ModelConfig {
            embed_dim: 8,
            mp_steps: 2,
            ..ModelConfig::default()
        }
    }

    #[test]
    fn fitted_stats_standardize_the_training_set() {
        let ex = examples(4, 8);
        let norm = NormStats::fit(&ex).unwrap();
        let rows: Vec<[f64; NODE_FEATURES]> = ex.iter().flat_map(|e| norm.apply_graph(&e.graph).node_features).collect();
        for c in 0..NODE_FEATURES {
            let n = rows.len() as f64;
            let mean = rows.iter().map(|r| r[c]).sum::<f64>() / n;
            let std = (rows.iter().map(|r| (r[c] - mean).powi(2)).sum::<f64>() / n).sqrt();
            assert!(mean.abs() <= 1e-10, "col {c} mean {mean}");
            assert!((std - 1.0).abs() <= 1e-6, "col {c} std {std}");
        }
        let z: Vec<f64> = ex.iter().flat_map(|e| norm.standardize_target(&e.target)).collect();
        let mean = z.iter().sum::<f64>() / z.len() as f64;
        assert!(mean.abs() <= 1e-10);
        for e in &ex {
            let back = norm.destandardize_target(&norm.standardize_target(&e.target));
            for (a, b) in back.iter().zip(&e.target) {
                assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0));
            }
        }
    }

    #[test]
    fn constant_columns_are_floored() {
        let mut ex = examples(3, 8);
        for e in ex.iter_mut() {
            e.graph.boundary_sequence.iter_mut().for_each(|r| r[2] = 0.0);
        }
        let norm = NormStats::fit(&ex).unwrap();
        assert_eq!(norm.boundary.std[2], STD_FLOOR);
        let g = norm.apply_graph(&ex[0].graph);
        assert!(g.boundary_sequence.iter().all(|r| r[2] == 0.0));
    }

    #[test]
    fn fit_needs_two_samples() {
        let ex = examples(2, 8);
        assert!(matches!(NormStats::fit(&ex[..1]), Err(BenoError::EmptySplit(_))));
        assert!(matches!(NormStats::fit(&[]), Err(BenoError::EmptySplit(_))));
    }

    #[test]
    fn stats_meta_round_trips() {
        let norm = NormStats::fit(&examples(3, 8)).unwrap();
        assert_eq!(NormStats::from_meta(&norm.to_meta()).unwrap(), norm);
    }

    #[test]
    fn mse_values_and_gradient() {
        let u = [1.0, -2.0, 0.5];
        assert_eq!(mse_loss(&u, &u).unwrap(), 0.0);
        let shifted: Vec<f64> = u.iter().map(|v| v + 1.0).collect();
        assert_eq!(mse_loss(&shifted, &u).unwrap(), 1.0);
        assert!(mse_loss(&u[..2], &u).is_err());
        // finite-difference gradient equals 2(û − u)/N
        let p = [0.3, 0.1, -0.7];
        for k in 0..3 {
            let eps = 1e-6;
            let mut a = p;
            a[k] += eps;
            let mut b = p;
            b[k] -= eps;
            let fd = (mse_loss(&a, &u).unwrap() - mse_loss(&b, &u).unwrap()) / (2.0 * eps);
            let exact = 2.0 * (p[k] - u[k]) / 3.0;
            assert!((fd - exact).abs() <= 1e-8);
        }
    }

    #[test]
    fn adam_first_step_is_signed_lr() {
        let mut p = vec![1.0, -2.0, 0.5, 3.0];
        let g = [0.3, -4.0, 1e-3, 0.0];
        let mut adam = Adam::new(4, 0.0);
        adam.step(&mut p, &g, 0.01).unwrap();
        let expect = [1.0 - 0.01, -2.0 + 0.01, 0.5 - 0.01, 3.0];
        for (a, b) in p.iter().zip(expect) {
            // m̂/(√v̂ + ε) = g/(|g| + ε): the smallest gradient is off by ε/|g| = 1e-5 relative
            assert!((a - b).abs() <= 0.01 * 1e-5 + 1e-15, "{a} vs {b}");
        }
        let mut q = vec![1.0, -2.0];
        let mut still = Adam::new(2, 0.0);
        still.step(&mut q, &[0.0, 0.0], 0.1).unwrap();
        assert_eq!(q, vec![1.0, -2.0]);
        let mut decay = Adam::new(2, 5e-4);
        for _ in 0..3 {
            decay.step(&mut q, &[0.0, 0.0], 0.1).unwrap();
        }
        assert!(q[0] < 1.0 && q[0] > 0.0 && q[1] > -2.0 && q[1] < 0.0);
    }

    #[test]
    fn schedule_values() {
        assert_eq!(lr_schedule(0, 1e-3, 16), 1e-3);
        assert!((lr_schedule(8, 1e-3, 16) - 5e-4).abs() <= 1e-18);
        assert_eq!(lr_schedule(16, 1e-3, 16), 1e-3);
        for e in 0..100 {
            assert_eq!(lr_schedule(e, 2e-4, 16), lr_schedule(e + 16, 2e-4, 16));
            assert!(lr_schedule(e, 2e-4, 16) > 0.0);
        }
    }

    #[test]
    fn split_is_deterministic_and_disjoint() {
        let (t, v) = split_indices(20, 1.0 / 9.0, 3).unwrap();
        assert_eq!((t.len(), v.len()), (18, 2));
        assert_eq!(split_indices(20, 1.0 / 9.0, 3).unwrap(), (t.clone(), v.clone()));
        let mut all: Vec<usize> = t.iter().chain(&v).cloned().collect();
        all.sort_unstable();
        assert_eq!(all, (0..20).collect::<Vec<_>>());
        assert!(split_indices(2, 0.5, 0).is_err());
    }

    #[test]
    fn stats_ignore_validation_samples() {
        let ex = examples(6, 8);
        let cfg = TrainConfig {
            epochs: 1,
            val_fraction: 0.34,
            ..TrainConfig::default()
        };
        let a = train(&cfg, tiny_model(), &ex, &mut |_| {}).unwrap();
        let mut scrambled = ex.clone();
        for &i in &a.val_indices {
            scrambled[i].target.iter_mut().for_each(|v| *v = *v * 10.0 + 3.0);
            scrambled[i].graph.node_features.iter_mut().for_each(|r| r[2] *= -7.0);
        }
        let b = train(&cfg, tiny_model(), &scrambled, &mut |_| {}).unwrap();
        assert_eq!(a.best.norm, b.best.norm);
    }

    #[test]
    fn training_is_deterministic_and_selects_best() {
        let ex = examples(5, 8);
        let cfg = TrainConfig {
            epochs: 6,
            learning_rate: 1e-3,
            val_fraction: 0.2,
            restart_period: 4,
            seed: 7,
            ..TrainConfig::default()
        };
        let mut seen = 0;
        let a = train(&cfg, tiny_model(), &ex, &mut |_| seen += 1).unwrap();
        assert_eq!(seen, 6);
        let b = train(&cfg, tiny_model(), &ex, &mut |_| {}).unwrap();
        let bits = |h: &[EpochRecord]| h.iter().map(|r| (r.train_mse.to_bits(), r.val_mse.to_bits())).collect::<Vec<_>>();
        assert_eq!(bits(&a.history), bits(&b.history));
        let min = a.history.iter().map(|r| r.val_mse).fold(f64::INFINITY, f64::min);
        assert_eq!(a.best_val_mse, min);
        assert_eq!(a.history[a.best_epoch - 1].val_mse, min);
        // the stored parameters reproduce the recorded validation loss
        let val: f64 = a
            .val_indices
            .iter()
            .map(|&i| {
                let p = Prepared::new(&ex[i], &a.best.norm).unwrap();
                a.best.model.loss(&a.best.params, &p.input, &p.target).unwrap()
            })
            .sum::<f64>()
            / a.val_indices.len() as f64;
        assert_eq!(val, min);
        assert_eq!(a.history[2].lr, lr_schedule(2, 1e-3, 4));
    }

    #[test]
    fn diverging_training_aborts() {
        let ex = examples(4, 8);
        let cfg = TrainConfig {
            epochs: 3,
            learning_rate: 1e300,
            val_fraction: 0.25,
            ..TrainConfig::default()
        };
        match train(&cfg, tiny_model(), &ex, &mut |_| {}) {
            Err(BenoError::Diverged { .. }) => {}
            other => panic!("expected divergence, got {:?}", other.map(|o| o.history)),
        }
    }

    #[test]
    fn unsolved_samples_are_refused() {
        let s = solved(8, 1, 3);
        let bad = SolutionSample::unsolved(s.domain.clone(), s.f.clone(), BcKind::Dirichlet);
        assert!(Example::from_sample(&bad, 8).is_err());
    }

    #[test]
    fn checkpoint_round_trip() {
        let ex = examples(4, 8);
        let cfg = TrainConfig {
            epochs: 1,
            val_fraction: 0.25,
            ..TrainConfig::default()
        };
        let out = train(
            &cfg,
            ModelConfig {
                variant: Variant::WM,
                ..tiny_model()
            },
            &ex,
            &mut |_| {},
        )
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.ckpt");
        out.best.save(&path).unwrap();
        let back = Checkpoint::load(&path).unwrap();
        assert_eq!(back.model.config, out.best.model.config);
        assert_eq!(back.norm, out.best.norm);
        assert_eq!(back.params.values(), out.best.params.values());
        assert_eq!(back.predict(&ex[0].graph).unwrap(), out.best.predict(&ex[0].graph).unwrap());
        assert!(matches!(Checkpoint::load(&dir.path().join("nope")), Err(BenoError::MissingFile(_))));
        let mut hist = Vec::new();
        write_history(&mut hist, &out.history).unwrap();
        assert!(String::from_utf8(hist).unwrap().starts_with("epoch,lr,train_mse,val_mse\n1,"));
    }
}
