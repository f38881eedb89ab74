//! Two-phase pseudo-exhaustive search.
//!
//! Phase 1 scans every `(m, theta)` pair while ignoring the selection vector:
//! each pair is scored as if the `m` highest-capacity verifiers were chosen.
//! Phase 2 draws a uniformly random selection with `m` ones for the winning
//! pair and reports its true utility.

use rand::Rng;

use crate::adpsa::resample_binaries;
use crate::model::{Configuration, Objective, SelectionSummary, VerifierPool};
use crate::solver::{rng_from_seed, Budget, BudgetClock, Scored, SolverError, SolverReport, Trace};

/// Verifier indices by decreasing capacity, ties by index.
pub fn capacity_order(pool: &VerifierPool) -> Vec<usize> {
    let mut order: Vec<usize> = (0..pool.len()).collect();
    order.sort_by(|&a, &b| pool.x[b].total_cmp(&pool.x[a]).then(a.cmp(&b)));
    order
}

/// Scoring proxy for phase 1: summaries of "the `m` fastest verifiers" for
/// every `m`, indexed by `m` (entry 0 unused).
pub fn proxy_summaries(pool: &VerifierPool) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(pool.len() + 1);
    out.push((f64::INFINITY, 0.0));
    let mut mass = 0.0;
    for i in capacity_order(pool) {
        mass += pool.rho[i] * pool.x[i];
        // descending order: the newest member has the smallest capacity
        out.push((pool.x[i], mass));
    }
    out
}

pub fn run<R: Rng + ?Sized>(
    objective: &Objective,
    budget: Budget,
    rng: &mut R,
) -> Result<(Scored, Trace, usize, f64), SolverError> {
    let clock = BudgetClock::start(budget);
    let space = objective.space;
    let proxy = proxy_summaries(&objective.pool);

    let mut winner = (space.m_min, space.theta_min);
    let mut winner_score = f64::NEG_INFINITY;
    let mut scanned = 0;
    for (m, &(min_capacity, cost_mass)) in proxy.iter().enumerate().take(space.m_max + 1).skip(space.m_min) {
        // wall-clock budgets may cut the scan short, at row granularity
        if scanned > 0 && matches!(budget, Budget::WallClock(_)) && !clock.allows(usize::MAX) {
            break;
        }
        for theta in space.theta_min..=space.theta_max {
            let s = SelectionSummary { m, theta, min_capacity, cost_mass };
            let u = objective.fitness_of_summary(&s);
            scanned += 1;
            if u > winner_score {
                winner_score = u;
                winner = (m, theta);
            }
        }
    }

    let (m, theta) = winner;
    let mut z = vec![false; objective.pool_size()];
    resample_binaries(&mut z, m, rng);
    let config = Configuration { m, theta, z };
    let best = Scored { utility: objective.fitness(&config), config };

    let mut trace = Trace::default();
    trace.push(scanned, best.utility, clock.elapsed());
    Ok((best, trace, scanned, clock.elapsed().as_secs_f64()))
}

pub fn solve(objective: &Objective, budget: Budget, seed: u64) -> Result<SolverReport, SolverError> {
    let (best, trace, iterations, elapsed_seconds) = run(objective, budget, &mut rng_from_seed(seed))?;
    Ok(SolverReport {
        algorithm: "pseudo".into(),
        seed,
        best_utility: best.utility,
        best: best.config,
        iterations,
        elapsed_seconds,
        trace,
    })
}
