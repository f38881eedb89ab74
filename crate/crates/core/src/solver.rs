//! Types shared by every solver: budgets, traces and reports.

use std::time::{Duration, Instant};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{Configuration, ModelError};

/// Random source used by all solvers. ChaCha output is stable across
/// platforms and crate versions, which the reproducibility contract needs.
pub type SolverRng = ChaCha8Rng;

pub fn rng_from_seed(seed: u64) -> SolverRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Derives the seed of trial `index` from a master seed (SplitMix64 finalizer).
pub fn split_seed(master: u64, index: u64) -> u64 {
    let mut z = master.wrapping_add(index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Budget {
    Iterations(usize),
    WallClock(#[serde(with = "secs")] Duration),
}

mod secs {
    use std::time::Duration;

    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(d.as_secs_f64())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Duration, D::Error> {
        let v = f64::deserialize(d)?;
        Duration::try_from_secs_f64(v).map_err(serde::de::Error::custom)
    }
}

impl Budget {
    pub fn is_deterministic(&self) -> bool {
        matches!(self, Budget::Iterations(_))
    }
}

/// Tracks progress against a budget.
#[derive(Debug, Clone, Copy)]
pub(crate) struct BudgetClock {
    budget: Budget,
    start: Instant,
}

impl BudgetClock {
    pub fn start(budget: Budget) -> Self {
        Self { budget, start: Instant::now() }
    }

    pub fn elapsed(&self) -> Duration {
        self.start.elapsed()
    }

    /// Whether iteration `next` (1-based) may still run.
    pub fn allows(&self, next: usize) -> bool {
        match self.budget {
            Budget::Iterations(n) => next <= n,
            Budget::WallClock(limit) => self.start.elapsed() < limit,
        }
    }

    /// Fraction of the budget consumed when iteration `i` starts, in `[0, 1]`.
    pub fn progress(&self, i: usize) -> f64 {
        match self.budget {
            Budget::Iterations(n) => (i as f64 / n.max(1) as f64).min(1.0),
            Budget::WallClock(limit) => {
                (self.start.elapsed().as_secs_f64() / limit.as_secs_f64().max(f64::MIN_POSITIVE)).min(1.0)
            }
        }
    }
}

/// A configuration with its cached utility.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scored {
    pub config: Configuration,
    pub utility: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    pub iteration: usize,
    pub best_utility: f64,
    pub elapsed_ms: f64,
}

/// Best-so-far utility after each iteration; iteration 0 is the initial state.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Trace(pub Vec<TracePoint>);

impl Trace {
    pub fn push(&mut self, iteration: usize, best_utility: f64, elapsed: Duration) {
        self.0.push(TracePoint { iteration, best_utility, elapsed_ms: elapsed.as_secs_f64() * 1e3 });
    }

    pub fn points(&self) -> &[TracePoint] {
        &self.0
    }

    pub fn is_monotone(&self) -> bool {
        self.0.windows(2).all(|w| w[1].best_utility >= w[0].best_utility)
    }
}

/// Outcome of one solver run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverReport {
    pub algorithm: String,
    pub seed: u64,
    pub best_utility: f64,
    pub best: Configuration,
    pub iterations: usize,
    pub elapsed_seconds: f64,
    #[serde(skip)]
    pub trace: Trace,
}

impl SolverReport {
    /// Column order of [`SolverReport::csv_row`].
    pub const CSV_HEADER: [&'static str; 8] =
        ["algorithm", "seed", "best_utility", "m", "theta", "iterations", "elapsed_seconds", "z"];

    /// One CSV record. `elapsed_seconds` is left empty when `with_timing` is
    /// false so iteration-budget outputs stay byte-reproducible.
    pub fn csv_row(&self, with_timing: bool) -> Vec<String> {
        vec![
            self.algorithm.clone(),
            self.seed.to_string(),
            self.best_utility.to_string(),
            self.best.m.to_string(),
            self.best.theta.to_string(),
            self.iterations.to_string(),
            if with_timing { self.elapsed_seconds.to_string() } else { String::new() },
            self.best.z_bits(),
        ]
    }

    /// Copy with every wall-clock field zeroed, for comparing runs.
    pub fn without_timing(&self) -> Self {
        let mut r = self.clone();
        r.elapsed_seconds = 0.0;
        r.trace.0.iter_mut().for_each(|p| p.elapsed_ms = 0.0);
        r
    }

    /// JSON object with fields in `CSV_HEADER` order (`z` nested in `best`).
    pub fn to_json(&self, with_timing: bool) -> serde_json::Value {
        serde_json::json!({
            "algorithm": self.algorithm,
            "seed": self.seed,
            "best_utility": self.best_utility,
            "best": self.best,
            "iterations": self.iterations,
            "elapsed_seconds": if with_timing { serde_json::json!(self.elapsed_seconds) } else { serde_json::Value::Null },
        })
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error("instance too large for exhaustive enumeration: {0}")]
    InstanceTooLarge(String),
    #[error("invalid solver parameters: {0}")]
    InvalidParams(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}
