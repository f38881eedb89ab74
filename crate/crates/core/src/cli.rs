//! Command-line front end: `gen`, `solve`, `bench` and `sweep`.
//!
//! Settings are merged as flags over config file over built-in defaults and
//! the merged result is written to `config.json` in the output directory.
//! Output files are written only after the computation succeeds, each one
//! through a temp file and an atomic rename.
//!
//! Exit codes: 0 success, 2 configuration error, 3 solver guard rail,
//! 4 I/O error.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::harness::{
    relative_difference_cdf, run_algorithm, run_sweep, run_trials, summary_stats, Algorithm, AlgorithmConfig,
    CdfSeries, Experiment, TrialResults,
};
use crate::instances::{self, load_instance, save_instance, Instance, InstanceError, PoolSpec, SCHEMA_VERSION};
use crate::io::{csv_bytes, write_atomic};
use crate::model::{SearchSpace, Weights};
use crate::solver::{Budget, SolverError, SolverReport};

pub const THREADS_ENV: &str = "CHAINOPT_THREADS";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("solver error: {0}")]
    Solver(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Solver(_) => 3,
            CliError::Io(_) => 4,
        }
    }
}

impl From<InstanceError> for CliError {
    fn from(e: InstanceError) -> Self {
        match e {
            InstanceError::Io { .. } => CliError::Io(e.to_string()),
            other => CliError::Config(other.to_string()),
        }
    }
}

impl From<SolverError> for CliError {
    fn from(e: SolverError) -> Self {
        match e {
            SolverError::InstanceTooLarge(_) => CliError::Solver(e.to_string()),
            other => CliError::Config(other.to_string()),
        }
    }
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

#[derive(Debug, Parser)]
#[command(name = "chainopt", version, about = "Verifier selection and block sizing by adaptive discrete particle swarm")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate an instance file.
    Gen(GenArgs),
    /// Run one solver.
    Solve(SolveArgs),
    /// Paired multi-trial comparison of several solvers.
    Bench(BenchArgs),
    /// Paired comparison under randomly drawn weights.
    Sweep(SweepArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Preset {
    /// 1000 verifiers, m and theta in [2, 1000].
    Table1,
    /// 8 verifiers, m in [2, 8], theta in [2, 20].
    Toy,
}

#[derive(Debug, Args)]
pub struct GenArgs {
    #[arg(long, value_enum, default_value = "table1")]
    pub preset: Preset,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub pool_size: Option<usize>,
    #[arg(long)]
    pub m_min: Option<usize>,
    #[arg(long)]
    pub m_max: Option<usize>,
    #[arg(long)]
    pub theta_min: Option<usize>,
    #[arg(long)]
    pub theta_max: Option<usize>,
    #[arg(long, value_parser = parse_weights)]
    pub weights: Option<Weights>,
}

/// Flags shared by the run commands.
#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    #[arg(long)]
    pub instance: Option<PathBuf>,
    /// JSON config file; flags take precedence over it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, conflicts_with = "seconds")]
    pub iters: Option<usize>,
    #[arg(long)]
    pub seconds: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Override the instance weights, e.g. `0.4,0.2,0.4`.
    #[arg(long, value_parser = parse_weights)]
    pub weights: Option<Weights>,
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long)]
    pub algo: Option<Algorithm>,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long, value_delimiter = ',')]
    pub algos: Option<Vec<Algorithm>>,
    #[arg(long)]
    pub trials: Option<usize>,
    /// Algorithm the relative differences are measured from.
    #[arg(long)]
    pub reference: Option<Algorithm>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long, value_delimiter = ',')]
    pub algos: Option<Vec<Algorithm>>,
    #[arg(long)]
    pub runs: Option<usize>,
    #[arg(long)]
    pub reference: Option<Algorithm>,
    /// Redraw the verifier pool for every run instead of only the weights.
    #[arg(long)]
    pub regenerate_pool: bool,
}

impl clap::ValueEnum for Algorithm {
    fn value_variants<'a>() -> &'a [Self] {
        &Algorithm::ALL
    }

    fn to_possible_value(&self) -> Option<clap::builder::PossibleValue> {
        Some(clap::builder::PossibleValue::new(self.name()))
    }
}

pub fn parse_weights(s: &str) -> Result<Weights, String> {
    let parts: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|e| format!("{p:?}: {e}")))
        .collect::<Result<_, _>>()?;
    if parts.len() != 3 {
        return Err(format!("expected three comma-separated weights, got {}", parts.len()));
    }
    Weights::new(parts[0], parts[1], parts[2]).map_err(|e| e.to_string())
}

/// Optional settings read from `--config`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    pub instance: Option<PathBuf>,
    pub weights: Option<Weights>,
    pub algorithms: Option<Vec<Algorithm>>,
    pub iterations: Option<usize>,
    pub seconds: Option<f64>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub trials: Option<usize>,
    pub runs: Option<usize>,
    pub reference: Option<Algorithm>,
    pub threads: Option<usize>,
    pub params: Option<AlgorithmConfig>,
}

/// Effective settings of one invocation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub command: String,
    pub schema: String,
    pub instance: PathBuf,
    pub instance_hash: String,
    pub weights: Weights,
    pub algorithms: Vec<Algorithm>,
    pub params: AlgorithmConfig,
    pub budget: Budget,
    pub deterministic: bool,
    pub seed: u64,
    pub seed_generated: bool,
    pub out: PathBuf,
    pub trials: usize,
    pub runs: usize,
    pub reference: Algorithm,
    pub threads: Option<usize>,
    pub regenerate_pool: bool,
}

pub const DEFAULT_ITERATIONS: usize = 500;

fn load_file_config(path: Option<&Path>) -> Result<FileConfig, CliError> {
    let Some(path) = path else { return Ok(FileConfig::default()) };
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

fn threads_from_env() -> Result<Option<usize>, CliError> {
    match std::env::var(THREADS_ENV) {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .ok()
            .filter(|&n| n >= 1)
            .map(Some)
            .ok_or_else(|| CliError::Config(format!("{THREADS_ENV}={v:?} is not a positive integer"))),
        Err(_) => Ok(None),
    }
}

struct Resolved {
    config: RunConfig,
    instance: Instance,
}

#[allow(clippy::too_many_arguments)]
fn resolve(
    command: &str,
    common: &CommonArgs,
    algorithms: Option<Vec<Algorithm>>,
    default_algorithms: Vec<Algorithm>,
    trials: Option<usize>,
    runs: Option<usize>,
    reference: Option<Algorithm>,
    regenerate_pool: bool,
) -> Result<Resolved, CliError> {
    let file = load_file_config(common.config.as_deref())?;

    let instance_path = common
        .instance
        .clone()
        .or(file.instance.clone())
        .ok_or_else(|| CliError::Config("no instance given (use --instance)".into()))?;
    let instance = load_instance(&instance_path)?;

    let budget = match (common.iters, common.seconds) {
        (Some(n), _) => Budget::Iterations(n),
        (None, Some(s)) => seconds_budget(s)?,
        (None, None) => match (file.iterations, file.seconds) {
            (Some(_), Some(_)) => {
                return Err(CliError::Config("config file sets both iterations and seconds".into()))
            }
            (Some(n), None) => Budget::Iterations(n),
            (None, Some(s)) => seconds_budget(s)?,
            (None, None) => Budget::Iterations(DEFAULT_ITERATIONS),
        },
    };
    if budget == Budget::Iterations(0) {
        return Err(CliError::Config("iteration budget must be >= 1".into()));
    }

    let (seed, seed_generated) = match common.seed.or(file.seed) {
        Some(s) => (s, false),
        None => (rand::random::<u64>(), true),
    };
    let weights = common.weights.or(file.weights).unwrap_or(instance.weights);
    weights.validate().map_err(|e| CliError::Config(e.to_string()))?;
    let algorithms = algorithms.or(file.algorithms.clone()).unwrap_or(default_algorithms);
    if algorithms.is_empty() {
        return Err(CliError::Config("no algorithms selected".into()));
    }
    let reference = reference.or(file.reference).unwrap_or(Algorithm::Adpsa);
    let threads = match threads_from_env()? {
        Some(t) => Some(t),
        None => file.threads,
    };

    let config = RunConfig {
        command: command.into(),
        schema: SCHEMA_VERSION.into(),
        instance_hash: instance.hash(),
        instance: instance_path,
        weights,
        algorithms,
        params: file.params.clone().unwrap_or_default(),
        deterministic: budget.is_deterministic(),
        budget,
        seed,
        seed_generated,
        out: common.out.clone().or(file.out.clone()).unwrap_or_else(|| PathBuf::from(format!("chainopt-{command}"))),
        trials: trials.or(file.trials).unwrap_or(100),
        runs: runs.or(file.runs).unwrap_or(500),
        reference,
        threads,
        regenerate_pool,
    };
    eprintln!(
        "chainopt {command}: instance {} (hash {}), seed {}{}, budget {:?}",
        config.instance.display(),
        config.instance_hash,
        config.seed,
        if seed_generated { " (generated)" } else { "" },
        config.budget
    );
    Ok(Resolved { config, instance })
}

fn seconds_budget(s: f64) -> Result<Budget, CliError> {
    Duration::try_from_secs_f64(s)
        .ok()
        .filter(|d| !d.is_zero())
        .map(Budget::WallClock)
        .ok_or_else(|| CliError::Config(format!("invalid --seconds value {s}")))
}

struct OutputSet {
    dir: PathBuf,
    files: Vec<(String, Vec<u8>)>,
}

impl OutputSet {
    fn new(dir: &Path) -> Self {
        Self { dir: dir.to_path_buf(), files: Vec::new() }
    }

    fn add(&mut self, name: impl Into<String>, bytes: Vec<u8>) {
        self.files.push((name.into(), bytes));
    }

    fn add_json<T: Serialize>(&mut self, name: &str, value: &T) {
        let mut bytes = serde_json::to_vec_pretty(value).expect("serializable");
        bytes.push(b'\n');
        self.add(name, bytes);
    }

    fn add_csv<I, R>(&mut self, name: &str, header: &[&str], rows: I) -> Result<(), CliError>
    where
        I: IntoIterator<Item = R>,
        R: IntoIterator,
        R::Item: AsRef<[u8]>,
    {
        let bytes = csv_bytes(header, rows).map_err(|e| io_err(&self.dir.join(name), e))?;
        self.add(name, bytes);
        Ok(())
    }

    fn write(self) -> Result<(), CliError> {
        fs::create_dir_all(&self.dir).map_err(|e| io_err(&self.dir, e))?;
        for (name, bytes) in &self.files {
            let path = self.dir.join(name);
            write_atomic(&path, bytes).map_err(|e| io_err(&path, e))?;
        }
        Ok(())
    }
}

fn trace_rows(report: &SolverReport, with_timing: bool) -> Vec<[String; 3]> {
    report
        .trace
        .points()
        .iter()
        .map(|p| {
            [
                p.iteration.to_string(),
                p.best_utility.to_string(),
                if with_timing { p.elapsed_ms.to_string() } else { String::new() },
            ]
        })
        .collect()
}

pub fn cmd_gen(args: &GenArgs) -> Result<Instance, CliError> {
    let (size, mut space) = match args.preset {
        Preset::Table1 => (1000, SearchSpace { m_min: 2, m_max: 1000, theta_min: 2, theta_max: 1000 }),
        Preset::Toy => (8, SearchSpace { m_min: 2, m_max: 8, theta_min: 2, theta_max: 20 }),
    };
    let size = args.pool_size.unwrap_or(size);
    if args.pool_size.is_some() && args.m_max.is_none() {
        space.m_max = space.m_max.min(size);
    }
    space.m_min = args.m_min.unwrap_or(space.m_min);
    space.m_max = args.m_max.unwrap_or(space.m_max);
    space.theta_min = args.theta_min.unwrap_or(space.theta_min);
    space.theta_max = args.theta_max.unwrap_or(space.theta_max);
    space.m_min = space.m_min.min(space.m_max);

    let mut inst = instances::generate_instance(PoolSpec::table1(size), space, args.seed)?;
    if let Some(w) = args.weights {
        inst.weights = w;
    }
    save_instance(&inst, &args.out)?;
    println!("wrote {} (M = {size}, hash {})", args.out.display(), inst.hash());
    Ok(inst)
}

pub fn cmd_solve(args: &SolveArgs) -> Result<SolverReport, CliError> {
    let algorithms = args.algo.map(|a| vec![a]);
    let Resolved { config, instance } =
        resolve("solve", &args.common, algorithms, vec![Algorithm::Adpsa], None, None, None, false)?;
    if config.algorithms.len() != 1 {
        return Err(CliError::Config("solve runs exactly one algorithm".into()));
    }
    let objective = instance
        .objective()
        .and_then(|o| o.with_weights(config.weights))
        .map_err(|e| CliError::Config(e.to_string()))?;
    let report = run_algorithm(config.algorithms[0], &objective, &config.params, config.budget, config.seed)?;
    let timing = !config.deterministic;

    let mut out = OutputSet::new(&config.out);
    out.add_json("config.json", &config);
    out.add_json("report.json", &report.to_json(timing));
    out.add_csv("trace.csv", &["iteration", "best_utility", "elapsed_ms"], trace_rows(&report, timing))?;
    if !timing {
        out.add_csv("timing.csv", &["iteration", "elapsed_ms"], report.trace.points().iter().map(|p| {
            [p.iteration.to_string(), p.elapsed_ms.to_string()]
        }))?;
    }
    out.write()?;

    let selected: Vec<usize> = report.best.selected().collect();
    println!("algorithm     {}", report.algorithm);
    println!("best utility  {}", report.best_utility);
    println!("m             {}", report.best.m);
    println!("theta         {}", report.best.theta);
    println!("iterations    {}", report.iterations);
    println!("selected      {} verifiers{}", selected.len(), preview(&selected));
    println!("outputs       {}", config.out.display());
    Ok(report)
}

fn preview(selected: &[usize]) -> String {
    const SHOW: usize = 12;
    let head: Vec<String> = selected.iter().take(SHOW).map(|i| i.to_string()).collect();
    let more = if selected.len() > SHOW { ", ..." } else { "" };
    format!(" [{}{more}]", head.join(", "))
}

#[derive(Debug, Serialize)]
struct CdfSummary<'a> {
    algorithm: Algorithm,
    fraction_nonnegative: f64,
    max_difference: f64,
    points: usize,
    excluded_zero_utility: usize,
    excluded_failed: usize,
    #[serde(skip)]
    _series: &'a CdfSeries,
}

fn cdf_summaries(cdfs: &[CdfSeries]) -> Vec<CdfSummary<'_>> {
    cdfs.iter()
        .map(|c| CdfSummary {
            algorithm: c.algorithm,
            fraction_nonnegative: c.fraction_nonnegative,
            max_difference: c.max_difference,
            points: c.points.len(),
            excluded_zero_utility: c.excluded_zero_utility,
            excluded_failed: c.excluded_failed,
            _series: c,
        })
        .collect()
}

fn add_batch_outputs(
    out: &mut OutputSet,
    results: &TrialResults,
    cdfs: &[CdfSeries],
    rows_name: &str,
    timing: bool,
) -> Result<(), CliError> {
    out.add_csv(rows_name, &TrialResults::CSV_HEADER, results.csv_rows(timing))?;
    if !timing {
        out.add_csv(
            "timing.csv",
            &["algorithm", "trial", "elapsed_seconds"],
            results.records.iter().map(|r| {
                [
                    r.algorithm.to_string(),
                    r.trial.to_string(),
                    r.report.as_ref().map(|x| x.elapsed_seconds.to_string()).unwrap_or_default(),
                ]
            }),
        )?;
    }
    for c in cdfs {
        out.add_csv(&format!("cdf_{}.csv", c.algorithm), &["x", "F"], c.csv_rows())?;
    }
    Ok(())
}

fn experiment(config: &RunConfig, trials: usize) -> Experiment {
    Experiment {
        algorithms: config.algorithms.clone(),
        config: config.params.clone(),
        budget: config.budget,
        trials,
        master_seed: config.seed,
        threads: config.threads,
    }
}

fn harness_err(e: crate::harness::HarnessError) -> CliError {
    CliError::Config(e.to_string())
}

pub fn cmd_bench(args: &BenchArgs) -> Result<TrialResults, CliError> {
    let defaults = vec![Algorithm::Adpsa, Algorithm::Pso, Algorithm::Sa, Algorithm::Pseudo];
    let Resolved { config, instance } =
        resolve("bench", &args.common, args.algos.clone(), defaults, args.trials, None, args.reference, false)?;
    let objective = instance
        .objective()
        .and_then(|o| o.with_weights(config.weights))
        .map_err(|e| CliError::Config(e.to_string()))?;
    let results = run_trials(&objective, &config.instance_hash, &experiment(&config, config.trials)).map_err(harness_err)?;
    let stats = summary_stats(&results).map_err(harness_err)?;
    let cdfs = if config.algorithms.contains(&config.reference) {
        relative_difference_cdf(&results, config.reference).map_err(harness_err)?
    } else {
        Vec::new()
    };
    let timing = !config.deterministic;

    let mut out = OutputSet::new(&config.out);
    out.add_json("config.json", &config);
    add_batch_outputs(&mut out, &results, &cdfs, "trials.csv", timing)?;
    out.add_json(
        "summary.json",
        &serde_json::json!({
            "meta": results.meta,
            "failed_trials": results.failures(),
            "stats": stats,
            "reference": config.reference,
            "relative_difference": cdf_summaries(&cdfs),
        }),
    );
    out.write()?;

    println!("{:<8} {:>10} {:>10} {:>10} {:>10} {:>10} {:>12}", "algo", "min", "q1", "median", "q3", "max", "variance");
    for s in &stats {
        let st = &s.stats;
        println!(
            "{:<8} {:>10.6} {:>10.6} {:>10.6} {:>10.6} {:>10.6} {:>12.3e}",
            s.algorithm.name(),
            st.min,
            st.q1,
            st.median,
            st.q3,
            st.max,
            st.variance
        );
    }
    print_fractions(&cdfs);
    println!("outputs  {}", config.out.display());
    Ok(results)
}

fn print_fractions(cdfs: &[CdfSeries]) {
    for c in cdfs {
        println!(
            "{} >= {}: {:.1}% of runs (max improvement {:.1}%)",
            c.reference,
            c.algorithm,
            100.0 * c.fraction_nonnegative,
            100.0 * c.max_difference
        );
    }
}

pub fn cmd_weights_sweep(args: &SweepArgs) -> Result<(TrialResults, Vec<CdfSeries>), CliError> {
    let defaults = vec![Algorithm::Adpsa, Algorithm::Pso, Algorithm::Sa, Algorithm::Pseudo];
    let Resolved { config, instance } = resolve(
        "sweep",
        &args.common,
        args.algos.clone(),
        defaults,
        None,
        args.runs,
        args.reference,
        args.regenerate_pool,
    )?;
    if !config.algorithms.contains(&config.reference) {
        return Err(CliError::Config(format!("reference algorithm {} is not selected", config.reference)));
    }
    let objective = instance.objective().map_err(|e| CliError::Config(e.to_string()))?;
    let regenerate = if config.regenerate_pool {
        Some(
            instance
                .generation
                .as_ref()
                .map(|g| g.spec.clone())
                .unwrap_or_else(|| PoolSpec::table1(instance.pool.len())),
        )
    } else {
        None
    };
    let results = run_sweep(&objective, &config.instance_hash, &experiment(&config, config.runs), regenerate.as_ref())
        .map_err(harness_err)?;
    let cdfs = relative_difference_cdf(&results, config.reference).map_err(harness_err)?;
    let timing = !config.deterministic;

    let mut out = OutputSet::new(&config.out);
    out.add_json("config.json", &config);
    add_batch_outputs(&mut out, &results, &cdfs, "runs.csv", timing)?;
    let weight_sums_ok = results
        .records
        .iter()
        .all(|r| ((r.weights.beta1 + r.weights.beta2 + r.weights.beta3) - 1.0).abs() <= crate::model::WEIGHT_SUM_TOLERANCE);
    out.add_json(
        "summary.json",
        &serde_json::json!({
            "meta": results.meta,
            "runs": config.runs,
            "failed_trials": results.failures(),
            "weights_sum_to_one": weight_sums_ok,
            "reference": config.reference,
            "relative_difference": cdf_summaries(&cdfs),
        }),
    );
    out.write()?;
    print_fractions(&cdfs);
    println!("outputs  {}", config.out.display());
    Ok((results, cdfs))
}

/// Dispatches a parsed command line.
pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Gen(a) => cmd_gen(&a).map(|_| ()),
        Command::Solve(a) => cmd_solve(&a).map(|_| ()),
        Command::Bench(a) => cmd_bench(&a).map(|_| ()),
        Command::Sweep(a) => cmd_weights_sweep(&a).map(|_| ()),
    }
}
