//! Building models from settings, the multi-run protocol and grid search.

use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::RngCore;
use rayon::prelude::*;

use super::metrics::{mean_std, Metric};
use super::split::{make_random_split, Split, SplitProfile};
use super::trainer::{train_observed, EpochRecord, TrainConfig, TrainOutcome};
use crate::autodiff::{ParamStore, Tape, Var};
use crate::data::kv::{render, KeyValues};
use crate::data::{dataset_hash, Dataset};
use crate::error::{Error, Result};
use crate::graph::{renormalized_affinity, NodeFeatures};
use crate::model::{augment_features, Mlp, Mode, ModelConfig, NodeClassifier, PathMlp, Variant};
use crate::rng::{stream_rng, DROPOUT_STREAM, INIT_STREAM, SPLIT_STREAM};
use crate::sampler::{par_sample_all, PathTable, SamplerConfig, Strategy};

/// Path-model hyper-parameters, including how paths are sampled.
#[derive(Debug, Clone, PartialEq)]
pub struct PathMlpSettings {
    pub f_prime: usize,
    pub f_h: usize,
    pub d: usize,
    pub n_paths: usize,
    pub beta: f64,
    pub dropout: f64,
    pub variant: Variant,
    pub m: usize,
    pub strategy: Strategy,
    /// For the plus variant, rank neighbors by augmented instead of raw
    /// features when sampling.
    pub augment_before_sampling: bool,
}

impl Default for PathMlpSettings {
    fn default() -> Self {
        PathMlpSettings {
            f_prime: 24,
            f_h: 64,
            d: 3,
            n_paths: 8,
            beta: 0.0,
            dropout: 0.5,
            variant: Variant::Base,
            m: 1,
            strategy: Strategy::Similarity,
            augment_before_sampling: false,
        }
    }
}

impl PathMlpSettings {
    /// Model config file body (`key=value`).
    pub fn to_config_text(&self, seed: u64) -> String {
        render(&[
            ("f_prime", self.f_prime.to_string()),
            ("f_h", self.f_h.to_string()),
            ("d", self.d.to_string()),
            ("n_paths", self.n_paths.to_string()),
            ("beta", self.beta.to_string()),
            ("dropout", self.dropout.to_string()),
            ("variant", self.variant.to_string()),
            ("m", self.m.to_string()),
            ("strategy", self.strategy.to_string()),
            ("augment_before_sampling", self.augment_before_sampling.to_string()),
            ("seed", seed.to_string()),
        ])
    }

    /// Reads a model config; missing keys keep their defaults. Returns the
    /// settings and the seed (0 when absent).
    pub fn from_config(kv: &KeyValues) -> Result<(Self, u64)> {
        let d = PathMlpSettings::default();
        let s = PathMlpSettings {
            f_prime: kv.parsed_or("f_prime", d.f_prime)?,
            f_h: kv.parsed_or("f_h", d.f_h)?,
            d: kv.parsed_or("d", d.d)?,
            n_paths: kv.parsed_or("n_paths", d.n_paths)?,
            beta: kv.parsed_or("beta", d.beta)?,
            dropout: kv.parsed_or("dropout", d.dropout)?,
            variant: kv.parsed_or("variant", d.variant)?,
            m: kv.parsed_or("m", d.m)?,
            strategy: kv.parsed_or("strategy", d.strategy)?,
            augment_before_sampling: kv.parsed_or("augment_before_sampling", d.augment_before_sampling)?,
        };
        Ok((s, kv.parsed_or("seed", 0)?))
    }
}

/// Which classifier an experiment trains.
#[derive(Debug, Clone, PartialEq)]
pub enum ModelSpec {
    PathMlp(PathMlpSettings),
    /// Features-only two-layer perceptron.
    Mlp { hidden: usize, dropout: f64 },
    /// Two-layer perceptron with an adjacency-row embedding.
    MlpA { hidden: usize, dropout: f64 },
}

impl ModelSpec {
    pub fn label(&self) -> &'static str {
        match self {
            ModelSpec::PathMlp(s) if s.variant == Variant::Plus => "pathmlp+",
            ModelSpec::PathMlp(_) => "pathmlp",
            ModelSpec::Mlp { .. } => "mlp",
            ModelSpec::MlpA { .. } => "mlp+a",
        }
    }
}

/// A constructed classifier of either family.
#[derive(Debug, Clone)]
pub enum AnyModel {
    Path(PathMlp),
    Mlp(Mlp),
}

impl NodeClassifier for AnyModel {
    fn forward(&self, tape: &mut Tape, store: &ParamStore, mode: Mode, rng: &mut dyn RngCore) -> Result<Var> {
        match self {
            AnyModel::Path(m) => m.forward(tape, store, mode, rng),
            AnyModel::Mlp(m) => m.forward(tape, store, mode, rng),
        }
    }

    fn node_count(&self) -> usize {
        match self {
            AnyModel::Path(m) => m.node_count(),
            AnyModel::Mlp(m) => m.node_count(),
        }
    }
}

/// A freshly initialized model, its parameters and (for path models) the
/// paths it was bound to.
#[derive(Debug, Clone)]
pub struct BuiltModel {
    pub model: AnyModel,
    pub store: ParamStore,
    pub paths: Option<PathTable>,
}

/// Samples paths for `data` under `settings` with the given seed.
pub fn sample_for(data: &Dataset, settings: &PathMlpSettings, seed: u64) -> Result<PathTable> {
    let cfg = SamplerConfig::new(settings.d, settings.n_paths, settings.strategy, seed)?;
    if settings.variant == Variant::Plus && settings.augment_before_sampling {
        let aug = augmented(data, settings.m)?;
        par_sample_all(&data.graph, &aug, &cfg)
    } else {
        par_sample_all(&data.graph, &data.features, &cfg)
    }
}

fn augmented(data: &Dataset, m: usize) -> Result<NodeFeatures> {
    augment_features(&data.features, &renormalized_affinity(&data.graph), m)
}

/// Builds the model for run `seed`. Paths are sampled unless supplied.
pub fn build_model(data: &Dataset, spec: &ModelSpec, seed: u64, paths: Option<PathTable>) -> Result<BuiltModel> {
    let mut store = ParamStore::new();
    let mut init = stream_rng(seed, INIT_STREAM);
    let classes = data.labels.class_count();
    match spec {
        ModelSpec::PathMlp(s) => {
            let paths = match paths {
                Some(p) => p,
                None => sample_for(data, s, seed)?,
            };
            let features = match s.variant {
                Variant::Plus => augmented(data, s.m)?,
                Variant::Base => data.features.clone(),
            };
            let config = ModelConfig {
                input_dim: features.dim(),
                f_prime: s.f_prime,
                f_h: s.f_h,
                classes,
                d: s.d,
                n_paths: s.n_paths,
                beta: s.beta,
                dropout: s.dropout,
                variant: s.variant,
                m: s.m,
            };
            let model = PathMlp::new(config, &data.graph, &features, &paths, &mut store, &mut init)?;
            Ok(BuiltModel { model: AnyModel::Path(model), store, paths: Some(paths) })
        }
        ModelSpec::Mlp { hidden, dropout } | ModelSpec::MlpA { hidden, dropout } => {
            let graph = matches!(spec, ModelSpec::MlpA { .. }).then_some(&data.graph);
            let model = Mlp::new(&data.features, graph, *hidden, classes, *dropout, &mut store, &mut init)?;
            Ok(BuiltModel { model: AnyModel::Mlp(model), store, paths: None })
        }
    }
}

/// One model family, its optimizer settings and the evaluation protocol.
#[derive(Debug, Clone, PartialEq)]
pub struct Experiment {
    pub model: ModelSpec,
    pub train: TrainConfig,
    pub profile: SplitProfile,
    pub runs: usize,
}

impl Experiment {
    pub fn new(model: ModelSpec) -> Self {
        Experiment {
            model,
            train: TrainConfig::default(),
            profile: SplitProfile::Standard,
            runs: 10,
        }
    }
}

/// Everything one run produced.
#[derive(Debug, Clone)]
pub struct RunArtifacts {
    pub seed: u64,
    pub split: Split,
    pub built: BuiltModel,
    pub outcome: TrainOutcome,
}

/// Trains run `seed`: split, paths, initialization and dropout all derive
/// from it.
pub fn run_once(data: &Dataset, exp: &Experiment, seed: u64) -> Result<RunArtifacts> {
    run_once_observed(data, exp, seed, |_, _, _| {})
}

/// [`run_once`], calling `observer` with the model after every epoch.
pub fn run_once_observed<F>(data: &Dataset, exp: &Experiment, seed: u64, mut observer: F) -> Result<RunArtifacts>
where
    F: FnMut(&AnyModel, &EpochRecord, &ParamStore),
{
    let split = make_random_split(data.graph.node_count(), exp.profile, seed)?;
    let mut built = build_model(data, &exp.model, seed, None)?;
    let mut drop_rng = stream_rng(seed, DROPOUT_STREAM);
    let model = &built.model;
    let outcome = train_observed(
        model,
        &mut built.store,
        &data.labels,
        &split,
        &exp.train,
        &mut drop_rng,
        |rec, store| observer(model, rec, store),
    )?;
    Ok(RunArtifacts { seed, split, built, outcome })
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub seed: u64,
    pub best_epoch: usize,
    pub epochs: usize,
    pub val: f64,
    pub test: f64,
    pub history: Vec<EpochRecord>,
}

/// Scores of a completed multi-run protocol.
#[derive(Debug, Clone, PartialEq)]
pub struct Metrics {
    pub runs: Vec<RunSummary>,
    pub test_mean: f64,
    /// Population standard deviation over the runs.
    pub test_std: f64,
    pub val_mean: f64,
    pub val_std: f64,
}

impl Metrics {
    pub fn from_runs(runs: Vec<RunSummary>) -> Self {
        let test: Vec<f64> = runs.iter().map(|r| r.test).collect();
        let val: Vec<f64> = runs.iter().map(|r| r.val).collect();
        let (test_mean, test_std) = mean_std(&test);
        let (val_mean, val_std) = mean_std(&val);
        Metrics { runs, test_mean, test_std, val_mean, val_std }
    }
}

fn summarize(run: &RunArtifacts) -> RunSummary {
    RunSummary {
        seed: run.seed,
        best_epoch: run.outcome.best_epoch,
        epochs: run.outcome.history.len(),
        val: run.outcome.best_val,
        test: run.outcome.test_score,
        history: run.outcome.history.clone(),
    }
}

/// Runs seeds `0..runs` in parallel.
pub fn run_protocol(data: &Dataset, exp: &Experiment) -> Result<Metrics> {
    if exp.runs == 0 {
        return Err(Error::InvalidArgument("runs must be at least 1".into()));
    }
    let runs = (0..exp.runs as u64)
        .into_par_iter()
        .map(|seed| run_once(data, exp, seed).map(|r| summarize(&r)))
        .collect::<Result<Vec<_>>>()?;
    Ok(Metrics::from_runs(runs))
}

/// Value lists swept by [`grid_search`].
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub f_prime: Vec<usize>,
    pub f_h: Vec<usize>,
    pub n_paths: Vec<usize>,
    pub d: Vec<usize>,
    pub beta: Vec<f64>,
    /// Only swept for the plus variant.
    pub m: Vec<usize>,
    pub lr: Vec<f64>,
    pub weight_decay: Vec<f64>,
    pub dropout: Vec<f64>,
}

impl Default for Grid {
    fn default() -> Self {
        Grid {
            f_prime: vec![12, 24, 32],
            f_h: vec![64],
            n_paths: vec![2, 4, 6, 8, 10, 12, 15, 18],
            d: vec![3, 4, 5],
            beta: vec![0.0, 0.3, 0.5],
            m: vec![1, 2],
            lr: vec![0.005, 0.01, 0.05, 0.1],
            weight_decay: vec![5e-5, 1e-5, 5e-4, 1e-4, 5e-3],
            dropout: vec![0.1, 0.3, 0.5, 0.7, 0.9],
        }
    }
}

/// One grid point.
#[derive(Debug, Clone, PartialEq)]
pub struct GridCell {
    pub id: usize,
    pub settings: PathMlpSettings,
    pub lr: f64,
    pub weight_decay: f64,
}

impl Grid {
    /// Every combination, in a fixed nested order. `template` supplies the
    /// variant, strategy and sampling flag.
    pub fn cells(&self, template: &PathMlpSettings) -> Vec<GridCell> {
        let ms: &[usize] = if template.variant == Variant::Plus { &self.m } else { &[1] };
        let mut out = Vec::new();
        for &f_prime in &self.f_prime {
            for &f_h in &self.f_h {
                for &n_paths in &self.n_paths {
                    for &d in &self.d {
                        for &beta in &self.beta {
                            for &m in ms {
                                for &dropout in &self.dropout {
                                    for &lr in &self.lr {
                                        for &weight_decay in &self.weight_decay {
                                            out.push(GridCell {
                                                id: out.len(),
                                                settings: PathMlpSettings {
                                                    f_prime,
                                                    f_h,
                                                    d,
                                                    n_paths,
                                                    beta,
                                                    dropout,
                                                    m,
                                                    ..template.clone()
                                                },
                                                lr,
                                                weight_decay,
                                            });
                                        }
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridResult {
    pub cells: Vec<(GridCell, Metrics)>,
    /// Index into `cells` of the highest mean validation score; the
    /// earliest cell wins ties.
    pub best: usize,
}

impl GridResult {
    pub fn best_cell(&self) -> &(GridCell, Metrics) {
        &self.cells[self.best]
    }
}

/// Sweeps the grid; `cap` keeps a seeded random subset of that many cells.
/// Each cell runs the full protocol of `base` with the cell's settings.
pub fn grid_search(
    data: &Dataset,
    grid: &Grid,
    template: &PathMlpSettings,
    base: &Experiment,
    cap: Option<usize>,
    seed: u64,
) -> Result<GridResult> {
    let mut cells = grid.cells(template);
    if cells.is_empty() {
        return Err(Error::InvalidArgument("grid has no cells".into()));
    }
    if let Some(cap) = cap {
        if cap < cells.len() {
            cells.shuffle(&mut stream_rng(seed, SPLIT_STREAM - 16));
            cells.truncate(cap);
            cells.sort_by_key(|c| c.id);
        }
    }
    let scored = cells
        .into_par_iter()
        .map(|cell| {
            let exp = Experiment {
                model: ModelSpec::PathMlp(cell.settings.clone()),
                train: TrainConfig { lr: cell.lr, weight_decay: cell.weight_decay, ..base.train.clone() },
                ..base.clone()
            };
            run_protocol(data, &exp).map(|m| (cell, m))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut best = 0;
    for (i, (_, m)) in scored.iter().enumerate() {
        if m.val_mean > scored[best].1.val_mean {
            best = i;
        }
    }
    Ok(GridResult { cells: scored, best })
}

/// Results table rows `dataset,variant,config_id,run,metric`.
pub fn results_csv_rows(out: &mut String, dataset: &str, variant: &str, config_id: usize, metrics: &Metrics) {
    for r in &metrics.runs {
        writeln!(out, "{dataset},{variant},{config_id},{},{}", r.seed, r.test).unwrap();
    }
}

pub const RESULTS_CSV_HEADER: &str = "dataset,variant,config_id,run,metric\n";

/// `key=value` record of everything that determines a run.
pub fn run_manifest(data: &Dataset, exp: &Experiment, run: &RunArtifacts) -> String {
    let mut pairs: Vec<(&str, String)> = vec![
        ("dataset", data.name.clone()),
        ("dataset_sha256", dataset_hash(data)),
        ("model", exp.model.label().to_string()),
    ];
    match &exp.model {
        ModelSpec::PathMlp(s) => {
            pairs.extend([
                ("f_prime", s.f_prime.to_string()),
                ("f_h", s.f_h.to_string()),
                ("d", s.d.to_string()),
                ("n_paths", s.n_paths.to_string()),
                ("beta", s.beta.to_string()),
                ("dropout", s.dropout.to_string()),
                ("variant", s.variant.to_string()),
                ("m", s.m.to_string()),
                ("strategy", s.strategy.to_string()),
                ("augment_before_sampling", s.augment_before_sampling.to_string()),
                ("eps_logits_weight_decay", "false".to_string()),
            ]);
        }
        ModelSpec::Mlp { hidden, dropout } | ModelSpec::MlpA { hidden, dropout } => {
            pairs.extend([("hidden", hidden.to_string()), ("dropout", dropout.to_string())]);
        }
    }
    pairs.extend([
        ("lr", exp.train.lr.to_string()),
        ("weight_decay", exp.train.weight_decay.to_string()),
        ("max_epochs", exp.train.max_epochs.to_string()),
        ("patience", exp.train.patience.to_string()),
        ("metric", exp.train.metric.to_string()),
        ("split", exp.profile.to_string()),
        ("seed", run.seed.to_string()),
        ("best_epoch", run.outcome.best_epoch.to_string()),
        ("epochs", run.outcome.history.len().to_string()),
        ("best_val", run.outcome.best_val.to_string()),
        ("test", run.outcome.test_score.to_string()),
    ]);
    render(&pairs)
}

/// Reconstructs the experiment recorded in a run manifest, returning it
/// with the run seed and the recorded best validation score.
pub fn experiment_from_manifest(kv: &KeyValues) -> Result<(Experiment, u64, f64)> {
    let model = match kv.require("model")? {
        "pathmlp" | "pathmlp+" => ModelSpec::PathMlp(PathMlpSettings::from_config(kv)?.0),
        "mlp" => ModelSpec::Mlp { hidden: kv.parsed("hidden")?, dropout: kv.parsed("dropout")? },
        "mlp+a" => ModelSpec::MlpA { hidden: kv.parsed("hidden")?, dropout: kv.parsed("dropout")? },
        other => return Err(Error::InvalidArgument(format!("unknown model '{other}' in manifest"))),
    };
    let train = TrainConfig {
        lr: kv.parsed("lr")?,
        weight_decay: kv.parsed("weight_decay")?,
        max_epochs: kv.parsed("max_epochs")?,
        patience: kv.parsed("patience")?,
        metric: kv.parsed::<Metric>("metric")?,
    };
    let exp = Experiment { model, train, profile: kv.parsed("split")?, runs: 1 };
    Ok((exp, kv.parsed("seed")?, kv.parsed("best_val")?))
}
