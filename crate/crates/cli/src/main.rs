use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::Context;
use clap::{Args, Parser, Subcommand};

use monocard_core::evaluation::{emit_report, OracleReplay, ReportMeta};
use monocard_core::relation::{generate_relation, load_relation_csv, load_schema_json, Relation};
use monocard_core::training::{
    best_by_monom_per_lambda, grid_search, read_grid_json, train, write_diagnostics_csv, write_grid_csv, Grid,
    GridRun,
};
use monocard_core::workload::generate_workload;
use monocard_core::{
    evaluate, CardinalityEstimator, DistanceKind, EstimatorModel, HistogramBaseline, Hyperparams, RegPairs,
    RegSpace, Workload, DEFAULT_SEED,
};

/// Monotonicity-regularized learned cardinality estimation.
///
/// Standard output carries headline metrics and `#`-prefixed progress lines;
/// diagnostics go to standard error. Exit status: 0 success, 1 runtime
/// failure, 2 usage error.
#[derive(Parser, Debug)]
#[command(name = "monocard", version)]
struct Cli {
    /// Seed for every randomized step of the chosen subcommand.
    #[arg(long, global = true, default_value_t = DEFAULT_SEED)]
    seed: u64,

    /// Upper bound on worker threads; 0 lets the runtime decide.
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Synthesize a relation from a JSON column schema and write it as CSV.
    GenRelation(GenRelationArgs),
    /// Generate a labeled workload of queries and comparable (loose, tight) pairs.
    GenWorkload(GenWorkloadArgs),
    /// Train an estimator with the Q-error loss plus the monotonic regularizer.
    Train(TrainArgs),
    /// Score an estimator on a labeled workload and write a metrics report.
    Eval(EvalArgs),
    /// Train and evaluate one model per point of a hyperparameter grid.
    GridSearch(GridArgs),
    /// Check that every constraint pair is directly comparable, loose first.
    Validate(ValidateArgs),
}

#[derive(Args, Debug)]
struct GenRelationArgs {
    /// Column schema (JSON array of {name, kind, domain_lo, domain_hi, distribution}).
    #[arg(long)]
    schema: PathBuf,
    /// Number of rows to generate; must be positive.
    #[arg(long)]
    rows: usize,
    /// Output CSV path (header row, then one row per tuple).
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct GenWorkloadArgs {
    /// Relation CSV used for labels and domain bounds.
    #[arg(long)]
    relation: PathBuf,
    /// Total number of queries to emit.
    #[arg(long, default_value_t = 5000)]
    queries: usize,
    /// Number of (loose, tight) constraint pairs to emit.
    #[arg(long, default_value_t = 5000)]
    constraints: usize,
    /// Largest number of predicates in one query.
    #[arg(long, default_value_t = 2)]
    max_predicates: usize,
    /// Output JSON Lines file with one query per line.
    #[arg(long)]
    out_queries: PathBuf,
    /// Output CSV file of `loose_id,tight_id` rows.
    #[arg(long)]
    out_constraints: PathBuf,
}

/// Hyperparameters shared by `train` and `grid-search`.
#[derive(Args, Debug)]
struct ModelArgs {
    /// Hidden width of every layer.
    #[arg(long, default_value_t = 256)]
    hidden: usize,
    /// Training epochs.
    #[arg(long, default_value_t = 50)]
    epochs: usize,
    /// Training queries per mini-batch.
    #[arg(long, default_value_t = 1024)]
    batch: usize,
    /// Adam learning rate.
    #[arg(long, default_value_t = 1e-3)]
    lr: f64,
    /// Space in which estimated pair distances are measured: normalized-log or raw-cardinality.
    #[arg(long, default_value = "normalized-log")]
    reg_space: RegSpace,
    /// Light pairs used per update: `all`, or a positive sample size drawn per batch.
    #[arg(long, default_value = "all")]
    reg_pairs: RegPairs,
}

/// Input files shared by `train` and `grid-search`.
#[derive(Args, Debug)]
struct DataArgs {
    /// Relation CSV; its columns and domain bounds define the featurization.
    #[arg(long)]
    relation: PathBuf,
    /// Labeled training queries (JSON Lines).
    #[arg(long)]
    queries: PathBuf,
    /// Queries referenced by the light constraint file [default: the training queries].
    #[arg(long)]
    light_queries: Option<PathBuf>,
    /// Light constraint pairs (CSV) used by the regularizer.
    #[arg(long)]
    constraints_light: PathBuf,
    /// Labeled validation queries for the per-epoch diagnostics.
    #[arg(long)]
    val_queries: PathBuf,
    /// Validation constraint pairs [default: none, the light pairs are used instead].
    #[arg(long)]
    val_constraints: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct TrainArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Regularization weight; 0 trains on the Q-error loss alone.
    #[arg(long, default_value_t = 0.1)]
    lambda: f64,
    /// Distance between the two cardinalities of a pair: jaccard or difference.
    #[arg(long, default_value = "jaccard")]
    distance: DistanceKind,
    /// Sharpness of the softened sign.
    #[arg(long, default_value_t = 1e4)]
    c: f64,
    #[command(flatten)]
    model: ModelArgs,
    /// Output model file (JSON).
    #[arg(long)]
    out: PathBuf,
    /// Per-epoch diagnostics CSV [default: not written].
    #[arg(long)]
    diagnostics: Option<PathBuf>,
}

#[derive(Args, Debug)]
#[command(group = clap::ArgGroup::new("estimator").required(true).args(["model", "baseline", "oracle"]))]
struct EvalArgs {
    /// Trained model file.
    #[arg(long)]
    model: Option<PathBuf>,
    /// Use a built-in baseline instead of a model; only `histogram` exists.
    #[arg(long, value_parser = ["histogram"])]
    baseline: Option<String>,
    /// Relation CSV the baseline is built from (required with --baseline).
    #[arg(long)]
    relation: Option<PathBuf>,
    /// Equi-width buckets per column for the histogram baseline.
    #[arg(long, default_value_t = 64)]
    buckets: usize,
    /// Replay the true labels as estimates (debugging aid).
    #[arg(long)]
    oracle: bool,
    /// Labeled evaluation queries (JSON Lines).
    #[arg(long)]
    queries: PathBuf,
    /// Constraint pairs (CSV) scored by MonoM.
    #[arg(long)]
    constraints: PathBuf,
    /// Output report (JSON).
    #[arg(long)]
    report: PathBuf,
    /// Leave the creation timestamp out of the report so reruns are byte-identical.
    #[arg(long)]
    no_meta_time: bool,
}

#[derive(Args, Debug)]
struct GridArgs {
    /// Grid file `{"lambda": [...], "distance": [...], "c": [...]}` [default: the 40-point grid].
    #[arg(long)]
    grid: Option<PathBuf>,
    #[command(flatten)]
    data: DataArgs,
    /// Labeled evaluation queries.
    #[arg(long)]
    eval_queries: PathBuf,
    /// Evaluation constraint pairs.
    #[arg(long)]
    eval_constraints: PathBuf,
    #[command(flatten)]
    model: ModelArgs,
    /// Output CSV with one row per grid point.
    #[arg(long)]
    out: PathBuf,
    /// Grid points trained concurrently.
    #[arg(long, default_value_t = 1)]
    parallel: usize,
}

#[derive(Args, Debug)]
struct ValidateArgs {
    /// Queries (JSON Lines).
    #[arg(long)]
    queries: PathBuf,
    /// Constraint pairs (CSV).
    #[arg(long)]
    constraints: PathBuf,
}

/// A problem with the invocation rather than with the data or computation.
#[derive(Debug)]
struct Usage(String);

impl std::fmt::Display for Usage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    Usage(msg.into()).into()
}

fn is_usage(err: &anyhow::Error) -> bool {
    err.chain().any(|cause| {
        cause.is::<Usage>()
            || cause
                .downcast_ref::<monocard_core::Error>()
                .is_some_and(|e| e.is_usage())
    })
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(2) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(if is_usage(&e) { 2 } else { 1 })
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    if cli.threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cli.threads)
            .build_global()
            .context("configuring worker threads")?;
    }
    let seed = cli.seed;
    match cli.command {
        Command::GenRelation(a) => gen_relation(a, seed),
        Command::GenWorkload(a) => gen_workload(a, seed),
        Command::Train(a) => train_cmd(a, seed),
        Command::Eval(a) => eval_cmd(a, seed),
        Command::GridSearch(a) => grid_cmd(a, seed),
        Command::Validate(a) => validate_cmd(a),
    }
}

fn gen_relation(a: GenRelationArgs, seed: u64) -> anyhow::Result<()> {
    if a.rows == 0 {
        return Err(usage("--rows must be positive"));
    }
    let schema = load_schema_json(&a.schema)?;
    let rel = generate_relation(&schema, a.rows, seed)?;
    rel.write_csv(&a.out)?;
    println!("# wrote {} rows to {}", rel.row_count(), a.out.display());
    Ok(())
}

fn gen_workload(a: GenWorkloadArgs, seed: u64) -> anyhow::Result<()> {
    let rel = load_relation_csv(&a.relation)?;
    let wl = generate_workload(&rel, a.queries, a.constraints, a.max_predicates, seed)?;
    wl.save(&a.out_queries, &a.out_constraints)?;
    println!(
        "# wrote {} queries and {} pairs",
        wl.queries().len(),
        wl.constraints().len()
    );
    Ok(())
}

struct Data {
    relation: Relation,
    train: Workload,
    light: Workload,
    val: Workload,
}

fn require_labels(wl: &Workload, path: &Path) -> anyhow::Result<()> {
    if !wl.is_labeled() {
        return Err(usage(format!("{}: every query needs a `card` label", path.display())));
    }
    Ok(())
}

fn load_data(d: &DataArgs) -> anyhow::Result<Data> {
    let relation = load_relation_csv(&d.relation)?;
    let train = Workload::load(&d.queries, None)?;
    require_labels(&train, &d.queries)?;
    let light_queries = d.light_queries.as_deref().unwrap_or(&d.queries);
    let light = Workload::load(light_queries, Some(&d.constraints_light))?;
    let val = Workload::load(&d.val_queries, d.val_constraints.as_deref())?;
    require_labels(&val, &d.val_queries)?;
    Ok(Data {
        relation,
        train,
        light,
        val,
    })
}

fn base_hyperparams(m: &ModelArgs, seed: u64) -> Hyperparams {
    Hyperparams {
        hidden_units: m.hidden,
        epochs: m.epochs,
        batch_size: m.batch,
        learning_rate: m.lr,
        reg_space: m.reg_space,
        reg_pairs_per_batch: m.reg_pairs,
        seed,
        ..Hyperparams::default()
    }
}

fn train_cmd(a: TrainArgs, seed: u64) -> anyhow::Result<()> {
    let data = load_data(&a.data)?;
    let hp = Hyperparams {
        lambda: a.lambda,
        distance: a.distance,
        c: a.c,
        ..base_hyperparams(&a.model, seed)
    };
    hp.validate()?;
    let out = train(&data.relation, &data.train, &data.light, &data.val, &hp)?;
    for d in &out.diagnostics {
        println!(
            "# epoch {} loss {:.6} val_qerror {:.6} val_reg {:.6} {:.3}s",
            d.epoch, d.train_loss, d.val_qerror_component, d.val_reg_component, d.wall_time_seconds
        );
    }
    out.model.save(&a.out)?;
    if let Some(path) = &a.diagnostics {
        write_diagnostics_csv(&out.diagnostics, path)?;
    }
    Ok(())
}

fn eval_cmd(a: EvalArgs, seed: u64) -> anyhow::Result<()> {
    let wl = Workload::load(&a.queries, Some(&a.constraints))?;
    require_labels(&wl, &a.queries)?;
    if wl.constraints().is_empty() {
        return Err(usage(format!("{}: no constraint pairs to score", a.constraints.display())));
    }
    let (estimator, name): (Box<dyn CardinalityEstimator>, String) = if let Some(path) = &a.model {
        (Box::new(EstimatorModel::load(path)?), path.display().to_string())
    } else if a.baseline.is_some() {
        let rel_path = a
            .relation
            .as_ref()
            .ok_or_else(|| usage("--baseline histogram needs --relation"))?;
        let rel = load_relation_csv(rel_path)?;
        let h = HistogramBaseline::build(&rel, a.buckets)?;
        (Box::new(h), format!("histogram:{}", a.buckets))
    } else {
        (Box::new(OracleReplay), "oracle".to_string())
    };
    let report = evaluate(estimator.as_ref(), &wl)?;
    let meta = ReportMeta {
        model: Some(name),
        workload: Some(a.queries.display().to_string()),
        seed: Some(seed),
        created_unix: if a.no_meta_time {
            None
        } else {
            SystemTime::now().duration_since(UNIX_EPOCH).ok().map(|d| d.as_secs())
        },
    };
    emit_report(&report, &meta, &a.report)?;
    println!(
        "median_qerror={} mean_monom={}",
        report.qerror.median, report.monom.mean
    );
    Ok(())
}

fn grid_cmd(a: GridArgs, seed: u64) -> anyhow::Result<()> {
    let grid = match &a.grid {
        Some(path) => read_grid_json(path)?,
        None => Grid::default(),
    };
    if a.parallel == 0 {
        return Err(usage("--parallel must be at least 1"));
    }
    let data = load_data(&a.data)?;
    let complete = Workload::load(&a.eval_queries, Some(&a.eval_constraints))?;
    require_labels(&complete, &a.eval_queries)?;
    let base = base_hyperparams(&a.model, seed);
    let run = GridRun {
        relation: &data.relation,
        train: &data.train,
        light: &data.light,
        val: &data.val,
        complete: &complete,
    };
    println!("# {} grid points", grid.points().len());
    let rows = grid_search(run, &grid, &base, a.parallel)?;
    write_grid_csv(&rows, &a.out)?;
    for best in best_by_monom_per_lambda(&rows) {
        let (q, m) = best.metrics.expect("best rows carry metrics");
        println!(
            "# best lambda={} distance={} c={} median_qerror={} mean_monom={}",
            best.lambda, best.distance, best.c, q.median, m.mean
        );
    }
    Ok(())
}

fn validate_cmd(a: ValidateArgs) -> anyhow::Result<()> {
    let wl = Workload::load(&a.queries, Some(&a.constraints))?;
    wl.validate_constraints()?;
    println!("# {} pairs are directly comparable", wl.constraints().len());
    Ok(())
}
