//! Paired-seed benchmark batches and their summaries: box-plot statistics
//! and the empirical CDF of relative utility differences.
//!
//! Trial `t` of every algorithm runs with `split_seed(master_seed, t)` on
//! the same instance, so per-trial differences come from the algorithms and
//! not from the draw. Trials may run on several threads; records are always
//! returned in `(trial, algorithm)` order.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, Exp1};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::adpsa::{self, SwarmParams};
use crate::baselines::{oracle, pseudo, pso, sa, PsoParams, SaParams};
use crate::instances::{generate_pool, PoolSpec};
use crate::model::{Objective, Weights};
use crate::solver::{rng_from_seed, split_seed, Budget, SolverError, SolverReport};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HarnessError {
    #[error("no results to summarize{}", .0.as_deref().map(|a| format!(" for {a}")).unwrap_or_default())]
    EmptyResults(Option<String>),
    #[error("unknown algorithm {0:?}")]
    UnknownAlgorithm(String),
    #[error("invalid experiment: {0}")]
    InvalidExperiment(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Adpsa,
    Pso,
    Sa,
    Pseudo,
    Oracle,
}

impl Algorithm {
    pub const ALL: [Algorithm; 5] =
        [Algorithm::Adpsa, Algorithm::Pso, Algorithm::Sa, Algorithm::Pseudo, Algorithm::Oracle];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Adpsa => "adpsa",
            Algorithm::Pso => "pso",
            Algorithm::Sa => "sa",
            Algorithm::Pseudo => "pseudo",
            Algorithm::Oracle => "oracle",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.name() == s.trim())
            .ok_or_else(|| HarnessError::UnknownAlgorithm(s.to_string()))
    }
}

/// Parameters of every solver.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AlgorithmConfig {
    pub adpsa: SwarmParams,
    pub pso: PsoParams,
    pub sa: SaParams,
}

pub fn run_algorithm(
    algorithm: Algorithm,
    objective: &Objective,
    config: &AlgorithmConfig,
    budget: Budget,
    seed: u64,
) -> Result<SolverReport, SolverError> {
    match algorithm {
        Algorithm::Adpsa => adpsa::solve(objective, &config.adpsa, budget, seed),
        Algorithm::Pso => pso::solve(objective, &config.pso, budget, seed),
        Algorithm::Sa => sa::solve(objective, &config.sa, budget, seed),
        Algorithm::Pseudo => pseudo::solve(objective, budget, seed),
        Algorithm::Oracle => oracle::solve(objective, seed),
    }
}

/// Uniform draw on the weight simplex (Dirichlet(1, 1, 1) via normalized
/// exponentials).
pub fn random_weights<R: Rng + ?Sized>(rng: &mut R) -> Weights {
    let e: [f64; 3] = [Exp1.sample(rng), Exp1.sample(rng), Exp1.sample(rng)];
    let sum = e[0] + e[1] + e[2];
    Weights { beta1: e[0] / sum, beta2: e[1] / sum, beta3: e[2] / sum }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Experiment {
    pub algorithms: Vec<Algorithm>,
    pub config: AlgorithmConfig,
    pub budget: Budget,
    pub trials: usize,
    pub master_seed: u64,
    /// Worker threads; `None` uses the rayon default. Wall-clock budgets
    /// always run one trial at a time.
    pub threads: Option<usize>,
}

impl Experiment {
    pub fn new(algorithms: Vec<Algorithm>, budget: Budget, trials: usize, master_seed: u64) -> Self {
        Self { algorithms, config: AlgorithmConfig::default(), budget, trials, master_seed, threads: None }
    }

    fn validate(&self) -> Result<(), HarnessError> {
        if self.algorithms.is_empty() {
            return Err(HarnessError::InvalidExperiment("at least one algorithm is required".into()));
        }
        if self.trials == 0 {
            return Err(HarnessError::InvalidExperiment("trials must be >= 1".into()));
        }
        Ok(())
    }

    fn pool(&self) -> rayon::ThreadPool {
        let threads = if self.budget.is_deterministic() { self.threads.unwrap_or(0) } else { 1 };
        rayon::ThreadPoolBuilder::new().num_threads(threads).build().expect("thread pool")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub algorithm: Algorithm,
    pub trial: usize,
    pub seed: u64,
    pub weights: Weights,
    pub report: Option<SolverReport>,
    pub error: Option<String>,
}

impl TrialRecord {
    pub fn utility(&self) -> Option<f64> {
        self.report.as_ref().map(|r| r.best_utility)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentMeta {
    pub instance_hash: String,
    pub budget: Budget,
    pub deterministic: bool,
    pub master_seed: u64,
    pub trials: usize,
    pub algorithms: Vec<Algorithm>,
    /// Shared weights, or `None` when every trial draws its own.
    pub weights: Option<Weights>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialResults {
    pub meta: ExperimentMeta,
    pub records: Vec<TrialRecord>,
}

fn run_jobs<F>(exp: &Experiment, objective_for: F) -> Vec<TrialRecord>
where
    F: Fn(usize) -> Result<Objective, String> + Sync,
{
    let jobs: Vec<(usize, Algorithm)> =
        (0..exp.trials).flat_map(|t| exp.algorithms.iter().map(move |&a| (t, a))).collect();
    exp.pool().install(|| {
        jobs.par_iter()
            .map(|&(trial, algorithm)| {
                let seed = split_seed(exp.master_seed, trial as u64);
                match objective_for(trial) {
                    Ok(objective) => {
                        let weights = objective.weights;
                        match run_algorithm(algorithm, &objective, &exp.config, exp.budget, seed) {
                            Ok(report) => TrialRecord { algorithm, trial, seed, weights, report: Some(report), error: None },
                            Err(e) => TrialRecord { algorithm, trial, seed, weights, report: None, error: Some(e.to_string()) },
                        }
                    }
                    Err(e) => TrialRecord {
                        algorithm,
                        trial,
                        seed,
                        weights: Weights { beta1: f64::NAN, beta2: f64::NAN, beta3: f64::NAN },
                        report: None,
                        error: Some(e),
                    },
                }
            })
            .collect()
    })
}

/// Runs every algorithm `trials` times on one instance with paired seeds.
/// Solver failures are recorded per trial and do not abort the batch.
pub fn run_trials(objective: &Objective, instance_hash: &str, exp: &Experiment) -> Result<TrialResults, HarnessError> {
    exp.validate()?;
    let records = run_jobs(exp, |_| Ok(objective.clone()));
    Ok(TrialResults {
        meta: ExperimentMeta {
            instance_hash: instance_hash.to_string(),
            budget: exp.budget,
            deterministic: exp.budget.is_deterministic(),
            master_seed: exp.master_seed,
            trials: exp.trials,
            algorithms: exp.algorithms.clone(),
            weights: Some(objective.weights),
        },
        records,
    })
}

/// Salt separating the weight stream from the solver seeds.
const WEIGHT_STREAM: u64 = 0x5745_4947_4854_5321;
const POOL_STREAM: u64 = 0x504f_4f4c_5354_524d;

/// Weights used by run `r` of a sweep with `master_seed`.
pub fn sweep_weights(master_seed: u64, run: usize) -> Weights {
    random_weights(&mut rng_from_seed(split_seed(master_seed ^ WEIGHT_STREAM, run as u64)))
}

/// Random-weight sweep: run `r` draws fresh weights and every algorithm
/// solves the instance under them with the paired seed of run `r`. With
/// `regenerate_pool` the verifier pool is also redrawn for every run.
pub fn run_sweep(
    objective: &Objective,
    instance_hash: &str,
    exp: &Experiment,
    regenerate_pool: Option<&PoolSpec>,
) -> Result<TrialResults, HarnessError> {
    exp.validate()?;
    if let Some(spec) = regenerate_pool {
        if spec.size < objective.space.m_max {
            return Err(HarnessError::InvalidExperiment(format!(
                "regenerated pool size {} is smaller than m_max {}",
                spec.size, objective.space.m_max
            )));
        }
    }
    let records = run_jobs(exp, |run| {
        let weights = sweep_weights(exp.master_seed, run);
        let mut obj = objective.with_weights(weights).map_err(|e| e.to_string())?;
        if let Some(spec) = regenerate_pool {
            let mut rng = rng_from_seed(split_seed(exp.master_seed ^ POOL_STREAM, run as u64));
            let pool = generate_pool(spec, &mut rng).map_err(|e| e.to_string())?;
            obj = Objective::new(obj.params, pool, obj.space, weights).map_err(|e| e.to_string())?;
        }
        Ok(obj)
    });
    Ok(TrialResults {
        meta: ExperimentMeta {
            instance_hash: instance_hash.to_string(),
            budget: exp.budget,
            deterministic: exp.budget.is_deterministic(),
            master_seed: exp.master_seed,
            trials: exp.trials,
            algorithms: exp.algorithms.clone(),
            weights: None,
        },
        records,
    })
}

impl TrialResults {
    /// Successful utilities of one algorithm in trial order.
    pub fn utilities(&self, algorithm: Algorithm) -> Vec<f64> {
        self.records.iter().filter(|r| r.algorithm == algorithm).filter_map(TrialRecord::utility).collect()
    }

    pub fn failures(&self) -> usize {
        self.records.iter().filter(|r| r.error.is_some()).count()
    }

    /// Checks the paired design: equal trial counts and equal seeds per trial.
    pub fn is_paired(&self) -> bool {
        let algos = &self.meta.algorithms;
        let count = |a: Algorithm| self.records.iter().filter(|r| r.algorithm == a).count();
        if algos.iter().any(|&a| count(a) != self.meta.trials) {
            return false;
        }
        (0..self.meta.trials).all(|t| {
            let mut seeds = self.records.iter().filter(|r| r.trial == t).map(|r| r.seed);
            let first = seeds.next();
            seeds.all(|s| Some(s) == first)
        })
    }

    pub const CSV_HEADER: [&'static str; 12] = [
        "algorithm",
        "trial",
        "seed",
        "beta1",
        "beta2",
        "beta3",
        "best_utility",
        "m",
        "theta",
        "iterations",
        "elapsed_seconds",
        "error",
    ];

    /// One row per algorithm and trial. Timing is blank when `with_timing`
    /// is false.
    pub fn csv_rows(&self, with_timing: bool) -> Vec<Vec<String>> {
        self.records
            .iter()
            .map(|r| {
                let rep = r.report.as_ref();
                vec![
                    r.algorithm.to_string(),
                    r.trial.to_string(),
                    r.seed.to_string(),
                    r.weights.beta1.to_string(),
                    r.weights.beta2.to_string(),
                    r.weights.beta3.to_string(),
                    rep.map(|x| x.best_utility.to_string()).unwrap_or_default(),
                    rep.map(|x| x.best.m.to_string()).unwrap_or_default(),
                    rep.map(|x| x.best.theta.to_string()).unwrap_or_default(),
                    rep.map(|x| x.iterations.to_string()).unwrap_or_default(),
                    rep.filter(|_| with_timing).map(|x| x.elapsed_seconds.to_string()).unwrap_or_default(),
                    r.error.clone().unwrap_or_default(),
                ]
            })
            .collect()
    }
}

/// Five-number summary plus mean and unbiased variance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub count: usize,
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
    pub mean: f64,
    pub variance: f64,
}

/// Quantile by linear interpolation between order statistics at position
/// `p * (n - 1)` of the sorted sample.
pub fn quantile(sorted: &[f64], p: f64) -> f64 {
    let pos = p * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}

impl Summary {
    /// Variance of a single value is reported as 0.
    pub fn of(values: &[f64]) -> Result<Self, HarnessError> {
        if values.is_empty() {
            return Err(HarnessError::EmptyResults(None));
        }
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        let n = sorted.len();
        let mean = sorted.iter().sum::<f64>() / n as f64;
        let variance = if n < 2 {
            0.0
        } else {
            sorted.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64
        };
        Ok(Self {
            count: n,
            min: sorted[0],
            q1: quantile(&sorted, 0.25),
            median: quantile(&sorted, 0.5),
            q3: quantile(&sorted, 0.75),
            max: sorted[n - 1],
            mean,
            variance,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlgorithmSummary {
    pub algorithm: Algorithm,
    pub failed: usize,
    #[serde(flatten)]
    pub stats: Summary,
}

/// Per-algorithm statistics of the best utilities, in experiment order.
pub fn summary_stats(results: &TrialResults) -> Result<Vec<AlgorithmSummary>, HarnessError> {
    if results.records.is_empty() {
        return Err(HarnessError::EmptyResults(None));
    }
    results
        .meta
        .algorithms
        .iter()
        .map(|&a| {
            let values = results.utilities(a);
            let failed = results.records.iter().filter(|r| r.algorithm == a && r.error.is_some()).count();
            let stats = Summary::of(&values).map_err(|_| HarnessError::EmptyResults(Some(a.to_string())))?;
            Ok(AlgorithmSummary { algorithm: a, failed, stats })
        })
        .collect()
}

/// Empirical CDF of `(U_ref - U_A) / U_A` over paired trials.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CdfSeries {
    pub reference: Algorithm,
    pub algorithm: Algorithm,
    /// Sorted `(x, F(x))` points.
    pub points: Vec<(f64, f64)>,
    /// Share of included trials with a non-negative difference.
    pub fraction_nonnegative: f64,
    pub max_difference: f64,
    /// Trials skipped because the comparison utility was zero.
    pub excluded_zero_utility: usize,
    /// Trials skipped because either solver failed.
    pub excluded_failed: usize,
}

impl CdfSeries {
    pub fn csv_rows(&self) -> Vec<[String; 2]> {
        self.points.iter().map(|(x, f)| [x.to_string(), f.to_string()]).collect()
    }
}

pub fn relative_difference(reference: f64, other: f64) -> f64 {
    (reference - other) / other
}

/// Builds one CDF per non-reference algorithm.
pub fn relative_difference_cdf(results: &TrialResults, reference: Algorithm) -> Result<Vec<CdfSeries>, HarnessError> {
    if !results.meta.algorithms.contains(&reference) {
        return Err(HarnessError::UnknownAlgorithm(reference.to_string()));
    }
    let lookup = |a: Algorithm, t: usize| {
        results.records.iter().find(|r| r.algorithm == a && r.trial == t).and_then(TrialRecord::utility)
    };
    let mut out = Vec::new();
    for &a in results.meta.algorithms.iter().filter(|&&a| a != reference) {
        let mut diffs = Vec::new();
        let mut excluded_zero_utility = 0;
        let mut excluded_failed = 0;
        for t in 0..results.meta.trials {
            match (lookup(reference, t), lookup(a, t)) {
                (Some(u_ref), Some(u_a)) => {
                    if u_a <= 0.0 {
                        excluded_zero_utility += 1;
                    } else {
                        diffs.push(relative_difference(u_ref, u_a));
                    }
                }
                _ => excluded_failed += 1,
            }
        }
        diffs.sort_by(f64::total_cmp);
        let n = diffs.len();
        let points: Vec<(f64, f64)> =
            diffs.iter().enumerate().map(|(i, &d)| (d, (i + 1) as f64 / n as f64)).collect();
        let nonneg = diffs.iter().filter(|&&d| d >= 0.0).count();
        out.push(CdfSeries {
            reference,
            algorithm: a,
            points,
            fraction_nonnegative: if n == 0 { f64::NAN } else { nonneg as f64 / n as f64 },
            max_difference: diffs.last().copied().unwrap_or(f64::NAN),
            excluded_zero_utility,
            excluded_failed,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instances::toy_instance;

    fn fake_results(pairs: &[(Algorithm, usize, f64)], trials: usize, algorithms: Vec<Algorithm>) -> TrialResults {
        let w = Weights { beta1: 0.4, beta2: 0.2, beta3: 0.4 };
        let records = pairs
            .iter()
            .map(|&(algorithm, trial, u)| TrialRecord {
                algorithm,
                trial,
                seed: trial as u64,
                weights: w,
                report: Some(SolverReport {
                    algorithm: algorithm.to_string(),
                    seed: trial as u64,
                    best_utility: u,
                    best: crate::model::Configuration { m: 1, theta: 1, z: vec![true] },
                    iterations: 1,
                    elapsed_seconds: 0.0,
                    trace: Default::default(),
                }),
                error: None,
            })
            .collect();
        TrialResults {
            meta: ExperimentMeta {
                instance_hash: "x".into(),
                budget: Budget::Iterations(1),
                deterministic: true,
                master_seed: 0,
                trials,
                algorithms,
                weights: Some(w),
            },
            records,
        }
    }

    #[test]
    fn algorithm_names_parse() {
        for a in Algorithm::ALL {
            assert_eq!(a.name().parse::<Algorithm>().unwrap(), a);
        }
        assert!("genetic".parse::<Algorithm>().is_err());
    }

    #[test]
    fn summary_of_one_to_five() {
        let s = Summary::of(&[5.0, 3.0, 1.0, 4.0, 2.0]).unwrap();
        assert_eq!((s.min, s.q1, s.median, s.q3, s.max), (1.0, 2.0, 3.0, 4.0, 5.0));
        assert_eq!(s.mean, 3.0);
        assert_eq!(s.variance, 2.5);
    }

    #[test]
    fn summary_singleton_and_constant() {
        let s = Summary::of(&[0.7]).unwrap();
        assert_eq!((s.min, s.q1, s.median, s.q3, s.max), (0.7, 0.7, 0.7, 0.7, 0.7));
        assert_eq!(s.variance, 0.0);
        assert_eq!(Summary::of(&[0.3; 9]).unwrap().variance, 0.0);
        assert!(Summary::of(&[]).is_err());
    }

    #[test]
    fn quantile_interpolates() {
        assert_eq!(quantile(&[1.0, 2.0, 3.0, 4.0], 0.5), 2.5);
        assert_eq!(quantile(&[1.0, 2.0, 3.0, 4.0], 0.25), 1.75);
    }

    #[test]
    fn cdf_identical_algorithms() {
        let a = Algorithm::Adpsa;
        let b = Algorithm::Pso;
        let r = fake_results(&[(a, 0, 0.5), (b, 0, 0.5), (a, 1, 0.6), (b, 1, 0.6)], 2, vec![a, b]);
        let cdf = relative_difference_cdf(&r, a).unwrap();
        assert_eq!(cdf.len(), 1);
        assert_eq!(cdf[0].points, vec![(0.0, 0.5), (0.0, 1.0)]);
        assert_eq!(cdf[0].fraction_nonnegative, 1.0);
    }

    #[test]
    fn cdf_single_point() {
        let a = Algorithm::Adpsa;
        let b = Algorithm::Sa;
        let r = fake_results(&[(a, 0, 0.6), (b, 0, 0.5)], 1, vec![a, b]);
        let cdf = relative_difference_cdf(&r, a).unwrap();
        assert_eq!(cdf[0].points.len(), 1);
        assert!((cdf[0].points[0].0 - 0.2).abs() < 1e-12);
        assert_eq!(cdf[0].points[0].1, 1.0);
    }

    #[test]
    fn cdf_excludes_zero_utility() {
        let a = Algorithm::Adpsa;
        let b = Algorithm::Sa;
        let r = fake_results(&[(a, 0, 0.6), (b, 0, 0.0), (a, 1, 0.4), (b, 1, 0.5)], 2, vec![a, b]);
        let cdf = relative_difference_cdf(&r, a).unwrap();
        assert_eq!(cdf[0].excluded_zero_utility, 1);
        assert_eq!(cdf[0].points.len(), 1);
        assert_eq!(cdf[0].fraction_nonnegative, 0.0);
        assert!(relative_difference_cdf(&r, Algorithm::Oracle).is_err());
    }

    #[test]
    fn random_weights_valid_and_deterministic() {
        let mut rng = rng_from_seed(1);
        for _ in 0..1000 {
            random_weights(&mut rng).validate().unwrap();
        }
        assert_eq!(random_weights(&mut rng_from_seed(3)), random_weights(&mut rng_from_seed(3)));
    }

    #[test]
    fn random_weights_means() {
        let mut rng = rng_from_seed(99);
        let n = 100_000;
        let mut sums = [0.0; 3];
        for _ in 0..n {
            let w = random_weights(&mut rng);
            sums[0] += w.beta1;
            sums[1] += w.beta2;
            sums[2] += w.beta3;
        }
        for s in sums {
            assert!((s / n as f64 - 1.0 / 3.0).abs() < 0.01);
        }
    }

    #[test]
    fn minimal_batch_and_determinism() {
        let inst = toy_instance(4);
        let obj = inst.objective().unwrap();
        let exp = Experiment::new(vec![Algorithm::Adpsa], Budget::Iterations(5), 1, 11);
        let a = run_trials(&obj, &inst.hash(), &exp).unwrap();
        assert_eq!(a.records.len(), 1);
        let b = run_trials(&obj, &inst.hash(), &exp).unwrap();
        assert_eq!(a.csv_rows(false), b.csv_rows(false));
        assert!(a.is_paired());
    }

    #[test]
    fn failures_are_recorded_not_fatal() {
        let inst = crate::instances::generate_instance(
            PoolSpec::table1(25),
            crate::model::SearchSpace { m_min: 1, m_max: 3, theta_min: 1, theta_max: 5 },
            1,
        )
        .unwrap();
        let obj = inst.objective().unwrap();
        let exp = Experiment::new(vec![Algorithm::Oracle, Algorithm::Pseudo], Budget::Iterations(3), 2, 0);
        let r = run_trials(&obj, "h", &exp).unwrap();
        assert_eq!(r.records.len(), 4);
        assert_eq!(r.failures(), 2);
        assert!(r.records.iter().filter(|x| x.algorithm == Algorithm::Oracle).all(|x| x.error.is_some()));
    }
}
