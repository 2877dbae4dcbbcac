use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use pathmlp::data::kv::KeyValues;
use pathmlp::data::{self, Dataset, SyntheticConfig, SyntheticKind};
use pathmlp::graph::{adjusted_homophily, edge_homophily, order_homophily};
use pathmlp::model::Variant;
use pathmlp::sampler::{average_path_order, par_sample_all, path_smoothness, PathTable, SamplerConfig, Strategy};
use pathmlp::train::experiment::{self, experiment_from_manifest, results_csv_rows, run_manifest, RESULTS_CSV_HEADER};
use pathmlp::train::{
    make_random_split, run_protocol, score, Experiment, Grid, Metric, ModelSpec, PathMlpSettings, SplitProfile,
    TrainConfig,
};
use pathmlp::{Error, Result};

#[derive(Parser)]
#[command(name = "pathmlp", version, about = "Path-based MLP node classification toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print edge, adjusted and per-order homophily.
    Homophily {
        #[command(flatten)]
        data: DataArg,
        /// Highest order for order homophily.
        #[arg(long, default_value_t = 3)]
        max_order: usize,
    },
    /// Sample paths for every node and write a path cache.
    Sample {
        #[command(flatten)]
        data: DataArg,
        #[arg(long, default_value = "similarity")]
        strategy: Strategy,
        #[arg(long, default_value_t = 3)]
        d: usize,
        #[arg(long, default_value_t = 8)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train over several seeded runs; writes checkpoints, manifests and a
    /// metrics CSV.
    Train(TrainArgs),
    /// Re-evaluate a checkpoint written by `train`.
    Eval {
        #[command(flatten)]
        data: DataArg,
        /// Run manifest written beside the checkpoint.
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        checkpoint: PathBuf,
        /// Path cache to bind instead of resampling.
        #[arg(long)]
        paths: Option<PathBuf>,
    },
    /// Compare similarity, BFS and DFS sampling on one dataset.
    BenchSamplers {
        #[command(flatten)]
        data: DataArg,
        #[arg(long, default_value_t = 4)]
        d: usize,
        #[arg(long, default_value_t = 8)]
        n: usize,
        /// Sampling seeds averaged for the path statistics.
        #[arg(long, default_value_t = 10)]
        seeds: u64,
        /// Also train the path model with each sampler for this many runs.
        #[arg(long, default_value_t = 0)]
        runs: usize,
    },
    /// Measure duplicate adjacency rows and optionally probe MLP vs MLP+A.
    Leakage {
        #[command(flatten)]
        data: DataArg,
        #[arg(long)]
        verify: bool,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "48/32/20")]
        split: SplitProfile,
    },
    /// Write a synthetic dataset.
    Gen {
        #[arg(long, value_enum)]
        kind: GenKind,
        #[arg(long, default_value_t = 500)]
        nodes: usize,
        #[arg(long, default_value_t = 16)]
        features: usize,
        #[arg(long, default_value_t = 4)]
        classes: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Sweep the hyper-parameter grid and report the best cell.
    Grid {
        #[command(flatten)]
        data: DataArg,
        #[arg(long, default_value = "base")]
        variant: Variant,
        /// Evaluate a seeded random subset of this many cells.
        #[arg(long)]
        cap: Option<usize>,
        #[arg(long, default_value_t = 10)]
        runs: usize,
        #[arg(long, default_value_t = 500)]
        max_epochs: usize,
        #[arg(long, default_value_t = 100)]
        patience: usize,
        #[arg(long, default_value = "accuracy")]
        metric: Metric,
        #[arg(long, default_value = "48/32/20")]
        split: SplitProfile,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Results CSV (one row per cell and run).
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct DataArg {
    /// Dataset manifest, or the name of a fixture under $PATHMLP_FIXTURES.
    #[arg(long)]
    data: String,
}

impl DataArg {
    fn load(&self) -> Result<Dataset> {
        let direct = Path::new(&self.data);
        if direct.is_file() {
            return data::load_manifest(direct);
        }
        data::load_fixture(&self.data).unwrap_or_else(|| {
            Err(Error::InvalidArgument(format!(
                "'{}' is neither a manifest file nor a fixture in {}",
                self.data,
                data::fixtures_dir().display()
            )))
        })
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum GenKind {
    Homophilous,
    Heterophilous,
    Leaked,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ModelKind {
    Pathmlp,
    #[value(name = "pathmlp+")]
    PathmlpPlus,
    Mlp,
    #[value(name = "mlp+a")]
    MlpA,
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    data: DataArg,
    #[arg(long, value_enum, default_value = "pathmlp")]
    model: ModelKind,
    /// Model config file (key=value); flags below override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    d: Option<usize>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    f_prime: Option<usize>,
    /// Hidden width of the path model or the perceptron baselines.
    #[arg(long)]
    f_h: Option<usize>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    dropout: Option<f64>,
    #[arg(long)]
    m: Option<usize>,
    #[arg(long)]
    strategy: Option<Strategy>,
    #[arg(long)]
    augment_before_sampling: bool,
    #[arg(long, default_value_t = 0.01)]
    lr: f64,
    #[arg(long, default_value_t = 5e-4)]
    weight_decay: f64,
    #[arg(long, default_value_t = 500)]
    max_epochs: usize,
    #[arg(long, default_value_t = 100)]
    patience: usize,
    #[arg(long, default_value = "accuracy")]
    metric: Metric,
    /// Split profile; defaults to the dataset's own, else 48/32/20.
    #[arg(long)]
    split: Option<SplitProfile>,
    #[arg(long, default_value_t = 10)]
    runs: usize,
    /// First run seed; run i uses seed + i.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Homophily { data, max_order } => homophily(&data.load()?, max_order),
        Command::Sample { data, strategy, d, n, seed, out } => {
            let ds = data.load()?;
            let cfg = SamplerConfig::new(d, n, strategy, seed)?;
            let table = par_sample_all(&ds.graph, &ds.features, &cfg)?;
            table.save(&out, &cfg)?;
            println!(
                "wrote {} paths to {} (average order {:.4})",
                ds.graph.node_count() * n,
                out.display(),
                average_path_order(table.iter(), &ds.graph)?
            );
            Ok(())
        }
        Command::Train(args) => train(args),
        Command::Eval { data, manifest, checkpoint, paths } => eval(&data.load()?, &manifest, &checkpoint, paths),
        Command::BenchSamplers { data, d, n, seeds, runs } => bench_samplers(&data.load()?, d, n, seeds, runs),
        Command::Leakage { data, verify, seed, split } => leakage(&data.load()?, verify, seed, split),
        Command::Gen { kind, nodes, features, classes, seed, out } => generate(kind, nodes, features, classes, seed, &out),
        Command::Grid { data, variant, cap, runs, max_epochs, patience, metric, split, seed, out } => {
            let ds = data.load()?;
            let base = Experiment {
                model: ModelSpec::PathMlp(PathMlpSettings::default()),
                train: TrainConfig { max_epochs, patience, metric, ..TrainConfig::default() },
                profile: split,
                runs,
            };
            let template = PathMlpSettings { variant, ..PathMlpSettings::default() };
            let result = experiment::grid_search(&ds, &Grid::default(), &template, &base, cap, seed)?;
            let mut csv = String::from(RESULTS_CSV_HEADER);
            println!("config_id,f_prime,f_h,n_paths,d,beta,m,dropout,lr,weight_decay,val_mean,test_mean,test_std");
            for (cell, m) in &result.cells {
                let s = &cell.settings;
                println!(
                    "{},{},{},{},{},{},{},{},{},{},{:.4},{:.4},{:.4}",
                    cell.id, s.f_prime, s.f_h, s.n_paths, s.d, s.beta, s.m, s.dropout, cell.lr,
                    cell.weight_decay, m.val_mean, m.test_mean, m.test_std
                );
                results_csv_rows(&mut csv, &ds.name, &variant.to_string(), cell.id, m);
            }
            write_file(&out, &csv)?;
            let (best, m) = result.best_cell();
            println!("best config_id={} test={:.4} ± {:.4}", best.id, m.test_mean, m.test_std);
            Ok(())
        }
    }
}

fn write_file(path: &Path, body: &str) -> Result<()> {
    std::fs::write(path, body).map_err(|e| Error::Io { path: path.to_path_buf(), source: e })
}

fn homophily(ds: &Dataset, max_order: usize) -> Result<()> {
    println!("edge_homophily\t{:.4}", edge_homophily(&ds.graph, &ds.labels)?);
    match adjusted_homophily(&ds.graph, &ds.labels) {
        Ok(h) => println!("adjusted_homophily\t{h:.4}"),
        Err(e) => println!("adjusted_homophily\tundefined ({e})"),
    }
    for h in 1..=max_order {
        match order_homophily(&ds.graph, &ds.labels, h) {
            Ok(v) => println!("order_homophily_{h}\t{v:.4}"),
            Err(e) => println!("order_homophily_{h}\tundefined ({e})"),
        }
    }
    Ok(())
}

fn model_spec(args: &TrainArgs) -> Result<ModelSpec> {
    let hidden = args.f_h.unwrap_or(64);
    let dropout = args.dropout.unwrap_or(0.5);
    Ok(match args.model {
        ModelKind::Mlp => ModelSpec::Mlp { hidden, dropout },
        ModelKind::MlpA => ModelSpec::MlpA { hidden, dropout },
        ModelKind::Pathmlp | ModelKind::PathmlpPlus => {
            let mut s = match &args.config {
                Some(path) => PathMlpSettings::from_config(&KeyValues::read(path)?)?.0,
                None => PathMlpSettings::default(),
            };
            if args.model == ModelKind::PathmlpPlus {
                s.variant = Variant::Plus;
            }
            s.d = args.d.unwrap_or(s.d);
            s.n_paths = args.n.unwrap_or(s.n_paths);
            s.f_prime = args.f_prime.unwrap_or(s.f_prime);
            s.f_h = args.f_h.unwrap_or(s.f_h);
            s.beta = args.beta.unwrap_or(s.beta);
            s.dropout = args.dropout.unwrap_or(s.dropout);
            s.m = args.m.unwrap_or(s.m);
            s.strategy = args.strategy.unwrap_or(s.strategy);
            s.augment_before_sampling |= args.augment_before_sampling;
            ModelSpec::PathMlp(s)
        }
    })
}

fn train(args: TrainArgs) -> Result<()> {
    let ds = args.data.load()?;
    let exp = Experiment {
        model: model_spec(&args)?,
        train: TrainConfig {
            lr: args.lr,
            weight_decay: args.weight_decay,
            max_epochs: args.max_epochs,
            patience: args.patience,
            metric: args.metric,
        },
        profile: args.split.or(ds.split).unwrap_or(SplitProfile::Standard),
        runs: args.runs,
    };
    if args.runs == 0 {
        return Err(Error::InvalidArgument("runs must be at least 1".into()));
    }
    std::fs::create_dir_all(&args.out).map_err(|e| Error::Io { path: args.out.clone(), source: e })?;
    let mut summaries = Vec::new();
    for seed in args.seed..args.seed + args.runs as u64 {
        let run = experiment::run_once(&ds, &exp, seed)?;
        let stem = args.out.join(format!("run-{seed}"));
        data::save_checkpoint(&run.outcome.best_params, &stem.with_extension("ckpt"))?;
        write_file(&stem.with_extension("manifest"), &run_manifest(&ds, &exp, &run))?;
        if let (Some(paths), ModelSpec::PathMlp(s)) = (&run.built.paths, &exp.model) {
            let cfg = SamplerConfig::new(s.d, s.n_paths, s.strategy, seed)?;
            paths.save(&stem.with_extension("paths"), &cfg)?;
        }
        println!(
            "run {seed}: best epoch {} val {:.4} test {:.4}",
            run.outcome.best_epoch, run.outcome.best_val, run.outcome.test_score
        );
        summaries.push(experiment::RunSummary {
            seed,
            best_epoch: run.outcome.best_epoch,
            epochs: run.outcome.history.len(),
            val: run.outcome.best_val,
            test: run.outcome.test_score,
            history: run.outcome.history,
        });
    }
    let metrics = experiment::Metrics::from_runs(summaries);
    let mut csv = String::from(RESULTS_CSV_HEADER);
    results_csv_rows(&mut csv, &ds.name, exp.model.label(), 0, &metrics);
    write_file(&args.out.join("metrics.csv"), &csv)?;
    println!("{} {}: {:.4} ± {:.4} over {} runs", exp.model.label(), exp.train.metric, metrics.test_mean, metrics.test_std, args.runs);
    Ok(())
}

fn eval(ds: &Dataset, manifest: &Path, checkpoint: &Path, paths: Option<PathBuf>) -> Result<()> {
    let kv = KeyValues::read(manifest)?;
    let recorded_hash = kv.require("dataset_sha256")?;
    if recorded_hash != data::dataset_hash(ds) {
        return Err(Error::InvalidArgument(format!(
            "dataset does not match the one recorded in {}",
            manifest.display()
        )));
    }
    let (exp, seed, recorded_val) = experiment_from_manifest(&kv)?;
    let paths = match paths {
        Some(p) => Some(PathTable::load(&p, ds.graph.node_count())?.0),
        None => None,
    };
    let mut built = experiment::build_model(ds, &exp.model, seed, paths)?;
    data::load_checkpoint_into(&mut built.store, checkpoint)?;
    let split = make_random_split(ds.graph.node_count(), exp.profile, seed)?;
    let metric = exp.train.metric;
    let val = score(&built.model, &built.store, &ds.labels, &split.val, metric)?;
    let test = score(&built.model, &built.store, &ds.labels, &split.test, metric)?;
    println!("val\t{val}");
    println!("test\t{test}");
    println!("recorded_val\t{recorded_val}");
    if val != recorded_val {
        return Err(Error::InvalidArgument(format!(
            "validation score {val} differs from the recorded {recorded_val}"
        )));
    }
    Ok(())
}

fn bench_samplers(ds: &Dataset, d: usize, n: usize, seeds: u64, runs: usize) -> Result<()> {
    if seeds == 0 {
        return Err(Error::InvalidArgument("seeds must be at least 1".into()));
    }
    println!("strategy\taverage_order\tsmoothness{}", if runs > 0 { "\taccuracy\tstd" } else { "" });
    for strategy in [Strategy::Similarity, Strategy::Bfs, Strategy::Dfs] {
        let (mut order, mut smooth) = (0.0, 0.0);
        for seed in 0..seeds {
            let table = par_sample_all(&ds.graph, &ds.features, &SamplerConfig::new(d, n, strategy, seed)?)?;
            order += average_path_order(table.iter(), &ds.graph)?;
            smooth += path_smoothness(table.iter(), &ds.features);
        }
        let k = seeds as f64;
        print!("{strategy}\t{:.4}\t{:.4}", order / k, smooth / k);
        if runs > 0 {
            let settings = PathMlpSettings { d, n_paths: n, strategy, ..PathMlpSettings::default() };
            let exp = Experiment { runs, ..Experiment::new(ModelSpec::PathMlp(settings)) };
            let m = run_protocol(ds, &exp)?;
            print!("\t{:.4}\t{:.4}", m.test_mean, m.test_std);
        }
        println!();
    }
    Ok(())
}

fn leakage(ds: &Dataset, verify: bool, seed: u64, profile: SplitProfile) -> Result<()> {
    if verify {
        let split = make_random_split(ds.graph.node_count(), profile, seed)?;
        let cfg = data::ProbeConfig { seed, ..data::ProbeConfig::default() };
        print!("{}", data::verify_leakage(ds, &split, &cfg)?.render());
    } else {
        let r = data::detect_leakage(&ds.graph, &ds.labels)?;
        println!("duplication_a={:.6}\nduplication_a_y={:.6}", r.adjacency, r.adjacency_label);
    }
    Ok(())
}

fn generate(kind: GenKind, nodes: usize, features: usize, classes: usize, seed: u64, out: &Path) -> Result<()> {
    let ds = match kind {
        GenKind::Leaked => data::generate_leaked(&data::LeakedConfig {
            nodes,
            feature_dim: features,
            classes,
            seed,
            ..data::LeakedConfig::default()
        })?,
        GenKind::Homophilous | GenKind::Heterophilous => {
            let k = if matches!(kind, GenKind::Homophilous) { SyntheticKind::Homophilous } else { SyntheticKind::Heterophilous };
            let s = data::generate(&SyntheticConfig::new(k, nodes, features, classes, seed))?;
            for (h, v) in s.order_homophily.iter().enumerate() {
                println!("order_homophily_{}\t{v:.4}", h + 1);
            }
            s.dataset
        }
    };
    let manifest = data::save_dataset(&ds, out)?;
    println!("wrote {}", manifest.display());
    Ok(())
}
