//! Single-chain simulated annealing over configurations.
//!
//! Each proposal picks one of three moves with equal probability:
//! `m` by ±1 (adding or dropping one random verifier to keep `sum(z) == m`),
//! `theta` by a uniform nonzero step of at most `ceil(range / 20)`, or a swap
//! of one selected and one unselected verifier. Moves that cannot apply
//! (degenerate range, full or empty selection) leave the state unchanged.
//! Temperature follows `T_k = T_0 * cooling^k` with one step per iteration.

use rand::seq::IndexedRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::adpsa::resample_binaries;
use crate::model::{Configuration, Objective, SearchSpace};
use crate::solver::{rng_from_seed, Budget, BudgetClock, Scored, SolverError, SolverReport, Trace};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SaParams {
    pub cooling: f64,
    /// Proposals per iteration; the default matches the swarm's evaluations
    /// per iteration.
    pub moves_per_iteration: usize,
    /// Random feasible samples used to set `T_0` to their utility's standard
    /// deviation.
    pub initial_samples: usize,
    /// Overrides the sampled `T_0` when set.
    pub initial_temperature: Option<f64>,
}

impl Default for SaParams {
    fn default() -> Self {
        Self { cooling: 0.95, moves_per_iteration: 50, initial_samples: 100, initial_temperature: None }
    }
}

impl SaParams {
    pub fn validate(&self) -> Result<(), SolverError> {
        if !(self.cooling > 0.0 && self.cooling <= 1.0) {
            return Err(SolverError::InvalidParams(format!("cooling must be in (0, 1], got {}", self.cooling)));
        }
        if self.moves_per_iteration == 0 {
            return Err(SolverError::InvalidParams("moves_per_iteration must be >= 1".into()));
        }
        if let Some(t) = self.initial_temperature {
            if !(t.is_finite() && t >= 0.0) {
                return Err(SolverError::InvalidParams(format!("initial temperature must be >= 0, got {t}")));
            }
        }
        Ok(())
    }
}

/// Metropolis acceptance probability for a utility change `delta` (we
/// maximize) at temperature `t`.
pub fn acceptance_probability(delta: f64, t: f64) -> f64 {
    if delta >= 0.0 {
        1.0
    } else if t <= 0.0 {
        0.0
    } else {
        (delta / t).exp()
    }
}

pub fn random_configuration<R: Rng + ?Sized>(space: &SearchSpace, pool_size: usize, rng: &mut R) -> Configuration {
    let m = rng.random_range(space.m_min..=space.m_max);
    let theta = rng.random_range(space.theta_min..=space.theta_max);
    let mut z = vec![false; pool_size];
    resample_binaries(&mut z, m, rng);
    Configuration { m, theta, z }
}

fn pick<R: Rng + ?Sized>(z: &[bool], value: bool, rng: &mut R) -> Option<usize> {
    let idx: Vec<usize> = (0..z.len()).filter(|&i| z[i] == value).collect();
    idx.choose(rng).copied()
}

/// Draws a neighbor of `current`.
pub fn neighbor<R: Rng + ?Sized>(current: &Configuration, space: &SearchSpace, rng: &mut R) -> Configuration {
    let mut next = current.clone();
    let pool_size = next.z.len();
    match rng.random_range(0..3u8) {
        0 => {
            if space.m_min == space.m_max {
                return next;
            }
            let up = rng.random_bool(0.5);
            let up = if up { next.m < space.m_max } else { next.m == space.m_min };
            if up {
                if let Some(i) = pick(&next.z, false, rng) {
                    next.z[i] = true;
                    next.m += 1;
                }
            } else if let Some(i) = pick(&next.z, true, rng) {
                next.z[i] = false;
                next.m -= 1;
            }
        }
        1 => {
            let range = space.theta_range();
            if range == 0 {
                return next;
            }
            let max_step = range.div_ceil(20) as i64;
            let mut step = rng.random_range(-max_step..max_step);
            if step >= 0 {
                step += 1;
            }
            next.theta = space.clamp_theta(next.theta as i64 + step);
        }
        _ => {
            if next.m == 0 || next.m == pool_size {
                return next;
            }
            let on = pick(&next.z, true, rng).expect("m > 0");
            let off = pick(&next.z, false, rng).expect("m < M");
            next.z[on] = false;
            next.z[off] = true;
        }
    }
    next
}

fn sample_std(values: &[f64]) -> f64 {
    let n = values.len();
    if n < 2 {
        return 0.0;
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    var.sqrt()
}

/// Runs the annealing chain. RNG order: initial state, the `T_0` samples,
/// then per proposal: move choice, move draws, and an acceptance draw only
/// for worsening moves at positive temperature.
pub fn run<R: Rng + ?Sized>(
    objective: &Objective,
    params: &SaParams,
    budget: Budget,
    rng: &mut R,
) -> Result<(Scored, Trace, usize, f64), SolverError> {
    params.validate()?;
    let space = objective.space;
    let pool_size = objective.pool_size();
    let clock = BudgetClock::start(budget);

    let state = random_configuration(&space, pool_size, rng);
    let mut current = Scored { utility: objective.fitness(&state), config: state };
    let t0 = match params.initial_temperature {
        Some(t) => t,
        None => {
            let samples: Vec<f64> = (0..params.initial_samples)
                .map(|_| objective.fitness(&random_configuration(&space, pool_size, rng)))
                .collect();
            sample_std(&samples)
        }
    };
    let mut best = current.clone();
    let mut trace = Trace::default();
    trace.push(0, best.utility, clock.elapsed());

    let mut temperature = t0;
    let mut iterations = 0;
    while clock.allows(iterations + 1) {
        for _ in 0..params.moves_per_iteration {
            let cand = neighbor(&current.config, &space, rng);
            let utility = objective.fitness(&cand);
            let delta = utility - current.utility;
            let accept = if delta >= 0.0 {
                true
            } else {
                let p = acceptance_probability(delta, temperature);
                p > 0.0 && rng.random::<f64>() < p
            };
            if accept {
                current = Scored { config: cand, utility };
                if current.utility > best.utility {
                    best = current.clone();
                }
            }
        }
        iterations += 1;
        temperature *= params.cooling;
        trace.push(iterations, best.utility, clock.elapsed());
    }
    Ok((best, trace, iterations, clock.elapsed().as_secs_f64()))
}

pub fn solve(
    objective: &Objective,
    params: &SaParams,
    budget: Budget,
    seed: u64,
) -> Result<SolverReport, SolverError> {
    let (best, trace, iterations, elapsed_seconds) = run(objective, params, budget, &mut rng_from_seed(seed))?;
    Ok(SolverReport {
        algorithm: "sa".into(),
        seed,
        best_utility: best.utility,
        best: best.config,
        iterations,
        elapsed_seconds,
        trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{SystemParams, VerifierPool, Weights};
    use crate::solver::rng_from_seed;

    fn objective(space: SearchSpace, pool_size: usize) -> Objective {
        Objective::new(
            SystemParams { v_d: 1200.0, v_u: 1300.0, r: 2.0, p: 500.0, k: 59292098.2754, phi: 0.5, alpha: 5.0, kappa: 1.0 },
            VerifierPool::new(
                (0..pool_size).map(|i| 36000.0 + 900.0 * i as f64).collect(),
                (0..pool_size).map(|i| 97.0 + (i % 5) as f64).collect(),
            )
            .unwrap(),
            space,
            Weights::new(0.4, 0.2, 0.4).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn metropolis_values() {
        assert!((acceptance_probability(-0.1, 0.1) - (-1.0f64).exp()).abs() < 1e-15);
        assert!((acceptance_probability(-0.1, 0.1) - 0.367_879_441).abs() < 1e-9);
        assert_eq!(acceptance_probability(0.2, 0.0), 1.0);
        assert_eq!(acceptance_probability(0.2, 1e-300), 1.0);
        assert_eq!(acceptance_probability(-0.2, 0.0), 0.0);
    }

    #[test]
    fn greedy_limit_accepts_improvement() {
        // At T = 0 only improving (or equal) moves are taken.
        let space = SearchSpace { m_min: 2, m_max: 6, theta_min: 2, theta_max: 30 };
        let obj = objective(space, 6);
        let params = SaParams { initial_temperature: Some(0.0), ..Default::default() };
        let (best, trace, _, _) = run(&obj, &params, Budget::Iterations(20), &mut rng_from_seed(4)).unwrap();
        assert!(trace.points().last().unwrap().best_utility > trace.points()[0].best_utility);
        assert!(obj.validate(&best.config).is_feasible());
    }

    #[test]
    fn neighbors_stay_feasible() {
        let space = SearchSpace { m_min: 1, m_max: 5, theta_min: 1, theta_max: 100 };
        let obj = objective(space, 5);
        let mut rng = rng_from_seed(0);
        let mut c = random_configuration(&space, 5, &mut rng);
        for _ in 0..5000 {
            let n = neighbor(&c, &space, &mut rng);
            assert!(obj.validate(&n).is_feasible(), "{n:?}");
            let dt = n.theta.abs_diff(c.theta);
            assert!(dt <= 5);
            c = n;
        }
    }

    #[test]
    fn deterministic() {
        let space = SearchSpace { m_min: 2, m_max: 10, theta_min: 2, theta_max: 60 };
        let obj = objective(space, 10);
        let a = solve(&obj, &SaParams::default(), Budget::Iterations(30), 5).unwrap();
        let b = solve(&obj, &SaParams::default(), Budget::Iterations(30), 5).unwrap();
        assert_eq!(a.without_timing(), b.without_timing());
        assert!(a.trace.is_monotone());
    }

    #[test]
    fn single_point_space() {
        let space = SearchSpace { m_min: 3, m_max: 3, theta_min: 7, theta_max: 7 };
        let obj = objective(space, 3);
        let r = solve(&obj, &SaParams::default(), Budget::Iterations(5), 5).unwrap();
        assert_eq!(r.best, Configuration { m: 3, theta: 7, z: vec![true; 3] });
    }
}
