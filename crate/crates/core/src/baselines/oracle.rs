//! Exact optimum by enumeration, for small instances only.

use crate::model::{Configuration, Objective, SelectionSummary};
use crate::solver::{Scored, SolverError, SolverReport};

/// Largest pool the oracle will enumerate.
pub const MAX_POOL: usize = 20;
/// Largest `theta_max - theta_min` the oracle will enumerate.
pub const MAX_THETA_RANGE: usize = 10_000;

/// Enumerates every selection with `m_min <= sum(z) <= m_max` and every
/// `theta`. Ties go to the lexicographically smallest `(m, theta, z)`.
pub fn brute_force(objective: &Objective) -> Result<(Scored, usize), SolverError> {
    let space = objective.space;
    let pool = &objective.pool;
    let n = pool.len();
    if n > MAX_POOL {
        return Err(SolverError::InstanceTooLarge(format!("pool size {n} exceeds {MAX_POOL}")));
    }
    if space.theta_range() > MAX_THETA_RANGE {
        return Err(SolverError::InstanceTooLarge(format!(
            "theta range {} exceeds {MAX_THETA_RANGE}",
            space.theta_range()
        )));
    }

    let mut best: Option<Scored> = None;
    let mut evaluated = 0;
    for mask in 0u32..(1u32 << n) {
        let m = mask.count_ones() as usize;
        if m < space.m_min || m > space.m_max {
            continue;
        }
        let mut min_capacity = f64::INFINITY;
        let mut cost_mass = 0.0;
        for i in 0..n {
            if mask >> i & 1 == 1 {
                min_capacity = min_capacity.min(pool.x[i]);
                cost_mass += pool.rho[i] * pool.x[i];
            }
        }
        for theta in space.theta_min..=space.theta_max {
            let u = objective.fitness_of_summary(&SelectionSummary { m, theta, min_capacity, cost_mass });
            evaluated += 1;
            let replace = match &best {
                None => true,
                Some(b) if u > b.utility => true,
                Some(b) if u == b.utility => {
                    let cand = config_of(mask, n, m, theta);
                    cand < b.config
                }
                _ => false,
            };
            if replace {
                best = Some(Scored { config: config_of(mask, n, m, theta), utility: u });
            }
        }
    }
    // validated spaces always contain at least one feasible point
    Ok((best.expect("non-empty feasible set"), evaluated))
}

fn config_of(mask: u32, n: usize, m: usize, theta: usize) -> Configuration {
    Configuration { m, theta, z: (0..n).map(|i| mask >> i & 1 == 1).collect() }
}

pub fn solve(objective: &Objective, seed: u64) -> Result<SolverReport, SolverError> {
    let start = std::time::Instant::now();
    let (best, evaluated) = brute_force(objective)?;
    let elapsed = start.elapsed();
    let mut trace = crate::solver::Trace::default();
    trace.push(evaluated, best.utility, elapsed);
    Ok(SolverReport {
        algorithm: "oracle".into(),
        seed,
        best_utility: best.utility,
        best: best.config,
        iterations: evaluated,
        elapsed_seconds: elapsed.as_secs_f64(),
        trace,
    })
}
