use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use stackopt::bench::{
    experiment_dropout_weights, experiment_layer_improvement, experiment_overfitting_gap, experiment_theorem1,
    render_table, run_baseline, run_bench, BaselineStrategy, BenchManifest, BenchMethod, DEFAULT_GAMMA_GRID,
};
use stackopt::data::{load_csv, split_dataset, Dataset, Part, Schema};
use stackopt::loss::task_metric;
use stackopt::opt::{optimize, write_history_jsonl, Budget};
use stackopt::stack::{predict_stack, EnsembleConfig};
use stackopt::subset::{build_error_covariance, weight_matrix};
use stackopt::synth::DEFAULT_FRACTIONS;
use stackopt::zoo::{build_pool, CandidatePool, PoolMeta};
use stackopt::StackError;

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error(transparent)]
    Stack(#[from] StackError),
    #[error("{0}")]
    Usage(String),
    #[error("cannot write {path}: {source}")]
    Write {
        path: PathBuf,
        source: std::io::Error,
    },
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Stack(StackError::Budget(_)) => 3,
            CliError::Stack(e) if e.is_validation() => 2,
            CliError::Usage(_) => 2,
            _ => 1,
        }
    }
}

type Result<T> = std::result::Result<T, CliError>;

/// Post-hoc stacking ensemble optimizer.
#[derive(Parser)]
#[command(name = "stackopt", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Candidate pool operations.
    Pool {
        #[command(subcommand)]
        command: PoolCommand,
    },
    /// Search ensemble configurations on a saved pool.
    Optimize(OptimizeArgs),
    /// Evaluate one fixed stacking strategy on a saved pool.
    Baseline(BaselineArgs),
    /// Run a method grid over a dataset manifest.
    Bench(BenchArgs),
    /// Diagnostic experiments.
    Experiment {
        #[command(subcommand)]
        command: ExperimentCommand,
    },
}

#[derive(Subcommand)]
enum PoolCommand {
    /// Split a CSV dataset, fit a random pool and save it.
    Build(PoolBuildArgs),
}

#[derive(Args)]
struct PoolBuildArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    schema: PathBuf,
    #[arg(long, default_value_t = 40)]
    size: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

/// Locates the dataset a pool was built from. Explicit paths override the
/// ones recorded in the pool.
#[derive(Args)]
struct PoolSource {
    #[arg(long)]
    pool: PathBuf,
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    schema: Option<PathBuf>,
}

#[derive(Args)]
struct OptimizeArgs {
    #[command(flatten)]
    source: PoolSource,
    /// Iterations (`25`) or seconds (`30s`).
    #[arg(long, default_value = "25")]
    budget: Budget,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    cache: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    /// Write the evaluation history as JSON lines.
    #[arg(long)]
    history: Option<PathBuf>,
    /// Save the best stack to this directory.
    #[arg(long)]
    stack_out: Option<PathBuf>,
    /// Dump the weighted covariance used by the best configuration as CSV.
    #[arg(long)]
    dump_g_tilde: Option<PathBuf>,
}

#[derive(Args)]
struct BaselineArgs {
    #[command(flatten)]
    source: PoolSource,
    /// `single-best`, `es25`, or `<all|best>-<es|linear>-<l1|l2>`.
    #[arg(long)]
    strategy: BaselineStrategy,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long)]
    datasets: PathBuf,
    /// Comma-separated method names; the standard grid when omitted.
    #[arg(long, value_delimiter = ',')]
    methods: Vec<BenchMethod>,
    /// Overrides the manifest's pool size.
    #[arg(long)]
    pool_size: Option<usize>,
    /// Overrides the manifest's seed.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Subcommand)]
enum ExperimentCommand {
    /// Largest ES weight share across dropout rates.
    DropoutWeights {
        #[command(flatten)]
        source: PoolSource,
        #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_GAMMA_GRID)]
        grid: Vec<f64>,
        /// Number of seeds, counted from `--seed`.
        #[arg(long, default_value_t = 10)]
        seeds: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Per-layer improvement over layer 1, with Retain on and off.
    LayerImprovement {
        #[command(flatten)]
        source: PoolSource,
        #[arg(long, default_value_t = 5)]
        max_layers: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Monte Carlo weight shrinkage of masked least squares.
    Theorem1 {
        #[arg(long, default_value_t = 6)]
        features: usize,
        #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_GAMMA_GRID)]
        grid: Vec<f64>,
        #[arg(long, default_value_t = 2000)]
        samplings: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Blender train/test gap across dropout rates.
    OverfittingGap {
        #[command(flatten)]
        source: PoolSource,
        #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_GAMMA_GRID)]
        grid: Vec<f64>,
        #[arg(long, default_value_t = 2)]
        layers: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(StackError::from)?;
    std::fs::write(path, text + "\n").map_err(|source| CliError::Write {
        path: path.to_path_buf(),
        source,
    })
}

fn f(v: f64) -> String {
    format!("{v:.6}")
}

fn load_split(data: &Path, schema: &Path, seed: u64, fractions: (f64, f64, f64)) -> Result<Dataset> {
    let schema = Schema::from_json_file(schema)?;
    let ds = load_csv(data, &schema)?;
    Ok(split_dataset(&ds, fractions, seed)?)
}

impl PoolSource {
    /// The pool and its dataset, split exactly as when the pool was built.
    fn load(&self) -> Result<(CandidatePool, Dataset)> {
        let (pool, meta) = CandidatePool::load(&self.pool)?;
        let meta = meta.ok_or_else(|| CliError::Usage(format!("pool {} records no data source", self.pool.display())))?;
        let data = self.data.clone().unwrap_or(meta.data);
        let schema = self.schema.clone().unwrap_or(meta.schema);
        let ds = load_split(&data, &schema, meta.split_seed, meta.fractions)?;
        pool.check_dataset(&ds)?;
        Ok((pool, ds))
    }
}

#[derive(Serialize)]
struct PoolSummary<'a> {
    out: &'a Path,
    size: usize,
    models: Vec<PoolRow>,
}

#[derive(Serialize)]
struct PoolRow {
    index: usize,
    model: String,
    val_loss: f64,
}

fn pool_build(a: PoolBuildArgs) -> Result<()> {
    let ds = load_split(&a.data, &a.schema, a.seed, DEFAULT_FRACTIONS)?;
    let pool = build_pool(&ds, a.size, a.seed)?;
    let meta = PoolMeta {
        data: std::path::absolute(&a.data).unwrap_or(a.data.clone()),
        schema: std::path::absolute(&a.schema).unwrap_or(a.schema.clone()),
        split_seed: a.seed,
        fractions: DEFAULT_FRACTIONS,
    };
    pool.save(&a.out, Some(meta))?;
    let models: Vec<PoolRow> = pool
        .entries
        .iter()
        .enumerate()
        .map(|(index, e)| PoolRow {
            index,
            model: e.config.label(),
            val_loss: e.val_loss,
        })
        .collect();
    let rows: Vec<Vec<String>> = models
        .iter()
        .map(|m| vec![m.index.to_string(), m.model.clone(), f(m.val_loss)])
        .collect();
    println!("{}", render_table(&["#".into(), "model".into(), "val_loss".into()], &rows));
    let summary = PoolSummary {
        out: &a.out,
        size: pool.len(),
        models,
    };
    println!("{}", serde_json::to_string(&summary).map_err(StackError::from)?);
    Ok(())
}

#[derive(Serialize)]
struct OptimizeOutput {
    best_config: EnsembleConfig,
    best_val_loss: f64,
    test_loss: f64,
    subset: Vec<usize>,
    budget: Budget,
    seed: u64,
    history: Vec<stackopt::opt::Observation>,
}

fn run_optimize(a: OptimizeArgs) -> Result<()> {
    let (pool, ds) = a.source.load()?;
    let r = optimize(&pool, &ds, a.budget, a.seed, a.cache.as_deref())?;
    let pred = predict_stack(&r.best_stack, &ds.x(Part::Test))?;
    let test_loss = task_metric(&pred, &ds.y(Part::Test), ds.kind())?;
    if let Some(path) = &a.history {
        write_history_jsonl(path, &r.history)?;
    }
    if let Some(dir) = &a.stack_out {
        r.best_stack.save(dir)?;
    }
    if let Some(path) = &a.dump_g_tilde {
        let g = build_error_covariance(&pool, &ds.y(Part::Val), ds.kind())?;
        let wc = weight_matrix(&g, r.best_config.diversity_weight)?;
        std::fs::write(path, wc.g_tilde_csv()).map_err(|source| CliError::Write {
            path: path.clone(),
            source,
        })?;
    }
    let best = r.best_so_far();
    let rows: Vec<Vec<String>> = r
        .history
        .iter()
        .zip(&best)
        .enumerate()
        .map(|(i, (o, b))| vec![i.to_string(), o.config.to_string(), f(o.val_loss), f(*b)])
        .collect();
    println!(
        "{}",
        render_table(&["iter".into(), "config".into(), "val_loss".into(), "best".into()], &rows)
    );
    println!("best {} val {} test {}", r.best_config, f(r.best_stack.val_loss), f(test_loss));
    let out = OptimizeOutput {
        best_config: r.best_config,
        best_val_loss: r.best_stack.val_loss,
        test_loss,
        subset: r.best_stack.subset.indices.clone(),
        budget: a.budget,
        seed: a.seed,
        history: r.history,
    };
    write_json(&a.out, &out)
}

#[derive(Serialize)]
struct BaselineOutput {
    strategy: BaselineStrategy,
    test_loss: f64,
    seed: u64,
}

fn run_baseline_cmd(a: BaselineArgs) -> Result<()> {
    let (pool, ds) = a.source.load()?;
    let test_loss = run_baseline(&a.strategy, &pool, &ds, a.seed)?;
    println!("{} test {}", a.strategy.name, f(test_loss));
    write_json(
        &a.out,
        &BaselineOutput {
            strategy: a.strategy,
            test_loss,
            seed: a.seed,
        },
    )
}

fn run_bench_cmd(a: BenchArgs) -> Result<()> {
    let manifest = BenchManifest::from_json_file(&a.datasets)?;
    let base = a.datasets.parent().map(Path::to_path_buf).unwrap_or_default();
    let methods = if a.methods.is_empty() {
        BenchMethod::standard_grid()
    } else {
        a.methods
    };
    let mut datasets = Vec::with_capacity(manifest.datasets.len());
    for entry in &manifest.datasets {
        datasets.push((entry.name.clone(), entry.load(&base)?));
    }
    let report = run_bench(
        &datasets,
        &methods,
        a.pool_size.unwrap_or(manifest.pool_size),
        a.seed.unwrap_or(manifest.seed),
    )?;
    println!("{}", report.table());
    write_json(&a.out, &report)
}

fn run_experiment(command: ExperimentCommand) -> Result<()> {
    match command {
        ExperimentCommand::DropoutWeights {
            source,
            grid,
            seeds,
            seed,
            out,
        } => {
            let (pool, ds) = source.load()?;
            let seeds: Vec<u64> = (seed..seed + seeds).collect();
            let rows = experiment_dropout_weights(&pool, &ds, &grid, &seeds)?;
            let table: Vec<Vec<String>> = rows
                .iter()
                .map(|r| vec![f(r.gamma0), f(r.max_weight_proportion)])
                .collect();
            println!("{}", render_table(&["gamma0".into(), "max_weight_share".into()], &table));
            write_json(&out, &rows)
        }
        ExperimentCommand::LayerImprovement {
            source,
            max_layers,
            seed,
            out,
        } => {
            let (pool, ds) = source.load()?;
            let rows = experiment_layer_improvement(&pool, &ds, max_layers, seed)?;
            let table: Vec<Vec<String>> = rows
                .iter()
                .map(|r| vec![r.retain.to_string(), r.layer.to_string(), f(r.test_improvement), f(r.val_improvement)])
                .collect();
            println!(
                "{}",
                render_table(&["retain".into(), "layer".into(), "test".into(), "val".into()], &table)
            );
            write_json(&out, &rows)
        }
        ExperimentCommand::Theorem1 {
            features,
            grid,
            samplings,
            seed,
            out,
        } => {
            let report = experiment_theorem1(features, &grid, samplings, seed)?;
            let table: Vec<Vec<String>> = report
                .rows
                .iter()
                .map(|r| vec![f(r.gamma0), f(r.proportion), f(r.expected_proportion)])
                .collect();
            println!(
                "{}",
                render_table(&["gamma0".into(), "proportion".into(), "expected".into()], &table)
            );
            write_json(&out, &report)
        }
        ExperimentCommand::OverfittingGap {
            source,
            grid,
            layers,
            seed,
            out,
        } => {
            let (pool, ds) = source.load()?;
            let base = EnsembleConfig {
                ensemble_size: EnsembleConfig::default().ensemble_size.min(pool.len()),
                num_layers: layers,
                retain: false,
                ..Default::default()
            };
            let rows = experiment_overfitting_gap(&pool, &ds, &base, &grid, seed)?;
            let table: Vec<Vec<String>> = rows
                .iter()
                .map(|r| vec![f(r.gamma0), f(r.train_loss), f(r.test_loss), f(r.gap)])
                .collect();
            println!(
                "{}",
                render_table(&["gamma0".into(), "train".into(), "test".into(), "gap".into()], &table)
            );
            write_json(&out, &rows)
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Pool {
            command: PoolCommand::Build(a),
        } => pool_build(a),
        Command::Optimize(a) => run_optimize(a),
        Command::Baseline(a) => run_baseline_cmd(a),
        Command::Bench(a) => run_bench_cmd(a),
        Command::Experiment { command } => run_experiment(command),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
