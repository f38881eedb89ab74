//! Plain discrete PSO baseline.
//!
//! Same loop as the adaptive swarm, but with uniformly random initial
//! positions and velocities, a constant inertia weight, and the selection
//! vector treated as `M` continuous coordinates in `[0, 1]`. A coordinate
//! counts as selected when it rounds to one; the rounded vector is then
//! repaired to exactly `m` ones by flipping the coordinates closest to 0.5.

use std::cmp::Ordering;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::adpsa::SwarmParams;
use crate::model::{Configuration, Objective};
use crate::solver::{rng_from_seed, Budget, BudgetClock, Scored, SolverError, SolverReport, Trace};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PsoParams {
    /// Population size, coefficients and velocity divisors; the inertia
    /// schedule and grid settings are ignored.
    pub swarm: SwarmParams,
    pub inertia: f64,
}

impl Default for PsoParams {
    fn default() -> Self {
        Self { swarm: SwarmParams::default(), inertia: 0.72 }
    }
}

/// Rounds continuous coordinates and repairs the result to exactly `m` ones.
///
/// Surplus ones are cleared starting from the coordinate nearest 0.5; missing
/// ones are set the same way among the zeros. Ties go to the lower index.
pub fn discretize(z: &[f64], m: usize) -> Vec<bool> {
    let mut bits: Vec<bool> = z.iter().map(|&v| v >= 0.5).collect();
    let ones = bits.iter().filter(|&&b| b).count();
    let closeness = |i: &usize, j: &usize| -> Ordering {
        let a = (z[*i] - 0.5).abs();
        let b = (z[*j] - 0.5).abs();
        a.total_cmp(&b).then(i.cmp(j))
    };
    if ones > m {
        let mut candidates: Vec<usize> = (0..z.len()).filter(|&i| bits[i]).collect();
        let k = ones - m;
        candidates.select_nth_unstable_by(k - 1, closeness);
        for &i in &candidates[..k] {
            bits[i] = false;
        }
    } else if ones < m {
        let mut candidates: Vec<usize> = (0..z.len()).filter(|&i| !bits[i]).collect();
        let k = m - ones;
        candidates.select_nth_unstable_by(k - 1, closeness);
        for &i in &candidates[..k] {
            bits[i] = true;
        }
    }
    bits
}

#[derive(Debug, Clone)]
struct PsoParticle {
    m: usize,
    theta: usize,
    z: Vec<f64>,
    v_m: f64,
    v_theta: f64,
    v_z: Vec<f64>,
    best: Scored,
    best_z: Vec<f64>,
}

#[derive(Debug, Clone)]
struct GlobalBest {
    scored: Scored,
    z: Vec<f64>,
}

fn evaluate(objective: &Objective, m: usize, theta: usize, z: &[f64]) -> Scored {
    let config = Configuration { m, theta, z: discretize(z, m) };
    let utility = objective.fitness(&config);
    Scored { config, utility }
}

/// Runs the baseline PSO. RNG order: per particle at init `m`, `theta`, the
/// `M` coordinates, `v_m`, `v_theta`, the `M` coordinate velocities; per
/// particle and iteration `(r, s)` then `(r_k, s_k)` for every coordinate.
pub fn run<R: Rng + ?Sized>(
    objective: &Objective,
    params: &PsoParams,
    budget: Budget,
    rng: &mut R,
) -> Result<(Scored, Trace, usize, f64), SolverError> {
    params.swarm.validate()?;
    if !(params.inertia.is_finite() && params.inertia >= 0.0) {
        return Err(SolverError::InvalidParams(format!("inertia must be >= 0, got {}", params.inertia)));
    }
    let sp = &params.swarm;
    let space = objective.space;
    let pool_size = objective.pool_size();
    let clock = BudgetClock::start(budget);

    let vm_scale = space.m_range() as f64 / sp.c_vm;
    let vt_scale = space.theta_range() as f64 / sp.c_vtheta;
    let vz_scale = 1.0 / sp.c_vm;
    let sym = |rng: &mut R, scale: f64| -> f64 { (2.0 * rng.random::<f64>() - 1.0) * scale };

    let mut particles = Vec::with_capacity(sp.swarm_size);
    for _ in 0..sp.swarm_size {
        let m = rng.random_range(space.m_min..=space.m_max);
        let theta = rng.random_range(space.theta_min..=space.theta_max);
        let z: Vec<f64> = (0..pool_size).map(|_| rng.random::<f64>()).collect();
        let v_m = sym(rng, vm_scale);
        let v_theta = sym(rng, vt_scale);
        let v_z: Vec<f64> = (0..pool_size).map(|_| sym(rng, vz_scale)).collect();
        let best = evaluate(objective, m, theta, &z);
        particles.push(PsoParticle { m, theta, best_z: z.clone(), z, v_m, v_theta, v_z, best });
    }
    let mut global = {
        let mut idx = 0;
        for (j, p) in particles.iter().enumerate().skip(1) {
            if p.best.utility > particles[idx].best.utility {
                idx = j;
            }
        }
        GlobalBest { scored: particles[idx].best.clone(), z: particles[idx].best_z.clone() }
    };

    let mut trace = Trace::default();
    trace.push(0, global.scored.utility, clock.elapsed());

    let w = params.inertia;
    let vm_max = space.m_range() as f64 / 2.0;
    let vt_max = space.theta_range() as f64 / 2.0;
    let mut iterations = 0;
    while clock.allows(iterations + 1) {
        let g = global.clone();
        for p in &mut particles {
            let r: f64 = rng.random();
            let s: f64 = rng.random();
            let m = p.m as f64;
            let theta = p.theta as f64;
            p.v_m = (w * p.v_m
                + sp.c1 * r * (p.best.config.m as f64 - m)
                + sp.c2 * s * (g.scored.config.m as f64 - m))
                .clamp(-vm_max, vm_max);
            p.v_theta = (w * p.v_theta
                + sp.c1 * r * (p.best.config.theta as f64 - theta)
                + sp.c2 * s * (g.scored.config.theta as f64 - theta))
                .clamp(-vt_max, vt_max);
            p.m = space.clamp_m((m + p.v_m).round() as i64);
            p.theta = space.clamp_theta((theta + p.v_theta).round() as i64);

            for k in 0..pool_size {
                let rk: f64 = rng.random();
                let sk: f64 = rng.random();
                let v = w * p.v_z[k] + sp.c1 * rk * (p.best_z[k] - p.z[k]) + sp.c2 * sk * (g.z[k] - p.z[k]);
                p.v_z[k] = v.clamp(-0.5, 0.5);
                p.z[k] = (p.z[k] + p.v_z[k]).clamp(0.0, 1.0);
            }
        }
        for p in &mut particles {
            let current = evaluate(objective, p.m, p.theta, &p.z);
            if current.utility > p.best.utility {
                p.best = current;
                p.best_z.clone_from(&p.z);
            }
            if p.best.utility > global.scored.utility {
                global = GlobalBest { scored: p.best.clone(), z: p.best_z.clone() };
            }
        }
        iterations += 1;
        trace.push(iterations, global.scored.utility, clock.elapsed());
    }

    Ok((global.scored, trace, iterations, clock.elapsed().as_secs_f64()))
}

pub fn solve(
    objective: &Objective,
    params: &PsoParams,
    budget: Budget,
    seed: u64,
) -> Result<SolverReport, SolverError> {
    let (best, trace, iterations, elapsed_seconds) = run(objective, params, budget, &mut rng_from_seed(seed))?;
    Ok(SolverReport {
        algorithm: "pso".into(),
        seed,
        best_utility: best.utility,
        best: best.config,
        iterations,
        elapsed_seconds,
        trace,
    })
}
