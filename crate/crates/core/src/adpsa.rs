//! Adaptive discrete particle swarm.
//!
//! Particles carry an integer position `(m, theta)` moved by classic PSO
//! velocity updates with a linearly decaying inertia weight, plus a binary
//! selection vector `z` that is redrawn uniformly every iteration with
//! exactly as many ones as the particle's current `m`. The initial `(m, theta)`
//! positions are laid on a regular grid over the search box.
//!
//! RNG consumption order (fixed, so a seed reproduces a run bit for bit):
//!
//! 1. init: `(m, theta)` for grid-shortfall particles, in particle order;
//!    then per particle: the `z` sample, `r_m`, `r_theta`.
//! 2. each iteration: `(r_j, s_j)` for every particle in order; then the `z`
//!    resample of every particle in order.

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::model::{Configuration, Objective, SearchSpace};
use crate::solver::{rng_from_seed, Budget, BudgetClock, Scored, SolverError, SolverReport, Trace};

/// Where the number of ones in a resampled `z` comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BinaryCount {
    /// The particle's own freshly updated `m`.
    #[default]
    ParticleM,
    /// The global best's `m`; the particle's `m` is overwritten to match so
    /// the position stays feasible.
    GlobalBestM,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SwarmParams {
    /// Population size `N`.
    pub swarm_size: usize,
    pub c1: f64,
    pub c2: f64,
    pub w_max: f64,
    pub w_min: f64,
    /// Grid points along the `m` axis; `None` means `ceil(sqrt(N))`.
    pub c_pm: Option<usize>,
    /// Grid points along the `theta` axis; `None` means `ceil(sqrt(N))`.
    pub c_ptheta: Option<usize>,
    /// Initial velocity scale divisors.
    pub c_vm: f64,
    pub c_vtheta: f64,
    pub binary_count: BinaryCount,
}

impl Default for SwarmParams {
    fn default() -> Self {
        Self {
            swarm_size: 50,
            c1: 2.0,
            c2: 2.0,
            w_max: 0.9,
            w_min: 0.4,
            c_pm: None,
            c_ptheta: None,
            c_vm: 10.0,
            c_vtheta: 10.0,
            binary_count: BinaryCount::ParticleM,
        }
    }
}

impl SwarmParams {
    pub fn validate(&self) -> Result<(), SolverError> {
        let bad = |msg: String| Err(SolverError::InvalidParams(msg));
        if self.swarm_size == 0 {
            return bad("swarm_size must be >= 1".into());
        }
        if !(self.c1 >= 0.0 && self.c2 >= 0.0) {
            return bad(format!("c1, c2 must be >= 0, got {}, {}", self.c1, self.c2));
        }
        if !(0.0 < self.w_min && self.w_min <= self.w_max) {
            return bad(format!("need 0 < w_min <= w_max, got {} and {}", self.w_min, self.w_max));
        }
        if self.c_pm == Some(0) || self.c_ptheta == Some(0) {
            return bad("grid divisors must be >= 1".into());
        }
        if !(self.c_vm >= 1.0 && self.c_vtheta >= 1.0) {
            return bad(format!("velocity divisors must be >= 1, got {}, {}", self.c_vm, self.c_vtheta));
        }
        Ok(())
    }

    fn grid_side(&self) -> usize {
        (self.swarm_size as f64).sqrt().ceil() as usize
    }

    pub fn grid_m(&self) -> usize {
        self.c_pm.unwrap_or_else(|| self.grid_side())
    }

    pub fn grid_theta(&self) -> usize {
        self.c_ptheta.unwrap_or_else(|| self.grid_side())
    }

    /// Linearly decaying inertia at iteration `i` of `n`.
    pub fn inertia(&self, i: usize, n: usize) -> f64 {
        self.inertia_at(i as f64 / n as f64)
    }

    /// Inertia for a budget fraction in `[0, 1]`.
    pub fn inertia_at(&self, progress: f64) -> f64 {
        self.w_max - progress * (self.w_max - self.w_min)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Particle {
    pub position: Configuration,
    pub velocity_m: f64,
    pub velocity_theta: f64,
    pub fitness: f64,
    pub best: Scored,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SwarmState {
    pub particles: Vec<Particle>,
    pub global_best: Scored,
    pub iteration: usize,
    /// Particles placed at random because the grid had too few distinct cells.
    pub grid_shortfall: usize,
}

/// One axis of the initial grid: `offset + [i * range / divisions]` for
/// `i = 1..=divisions`, clipped to the range.
pub fn grid_axis(min: usize, max: usize, divisions: usize) -> Vec<usize> {
    let range = (max - min) as f64;
    (1..=divisions)
        .map(|i| {
            let step = (i as f64 * range / divisions as f64).round().clamp(0.0, range);
            min + step as usize
        })
        .collect()
}

/// Distinct `(m, theta)` cells of the initial grid in row-major order, at
/// most `limit` of them.
pub fn grid_cells(space: &SearchSpace, params: &SwarmParams, limit: usize) -> Vec<(usize, usize)> {
    let ms = grid_axis(space.m_min, space.m_max, params.grid_m());
    let thetas = grid_axis(space.theta_min, space.theta_max, params.grid_theta());
    let mut seen = std::collections::HashSet::new();
    let mut cells = Vec::with_capacity(limit);
    for &m in &ms {
        for &t in &thetas {
            if cells.len() == limit {
                return cells;
            }
            if seen.insert((m, t)) {
                cells.push((m, t));
            }
        }
    }
    cells
}

/// Zeroes `z` and sets `count` distinct uniformly chosen entries to one.
pub fn resample_binaries<R: Rng + ?Sized>(z: &mut [bool], count: usize, rng: &mut R) {
    z.iter_mut().for_each(|b| *b = false);
    for i in index::sample(rng, z.len(), count) {
        z[i] = true;
    }
}

/// Velocity and position update of the integer coordinates for one particle.
///
/// `r` and `s` are the particle's shared cognitive/social draws for this
/// iteration. Velocities are clamped to half the dimension's range, positions
/// are rounded to the nearest integer and clamped into bounds. `z` is left
/// untouched; [`resample_binaries`] restores `sum(z) == m` afterwards.
pub fn update_continuous(
    particle: &mut Particle,
    global: &Configuration,
    inertia: f64,
    r: f64,
    s: f64,
    params: &SwarmParams,
    space: &SearchSpace,
) {
    let m = particle.position.m as f64;
    let theta = particle.position.theta as f64;
    let pb = &particle.best.config;

    let vm_max = space.m_range() as f64 / 2.0;
    let vt_max = space.theta_range() as f64 / 2.0;

    let vm = inertia * particle.velocity_m
        + params.c1 * r * (pb.m as f64 - m)
        + params.c2 * s * (global.m as f64 - m);
    let vt = inertia * particle.velocity_theta
        + params.c1 * r * (pb.theta as f64 - theta)
        + params.c2 * s * (global.theta as f64 - theta);
    particle.velocity_m = vm.clamp(-vm_max, vm_max);
    particle.velocity_theta = vt.clamp(-vt_max, vt_max);

    particle.position.m = space.clamp_m((m + particle.velocity_m).round() as i64);
    particle.position.theta = space.clamp_theta((theta + particle.velocity_theta).round() as i64);
}

impl SwarmState {
    /// Grid initialization of positions, random selection vectors and
    /// positive initial velocities scaled by the range divisors.
    pub fn init<R: Rng + ?Sized>(
        objective: &Objective,
        params: &SwarmParams,
        rng: &mut R,
    ) -> Result<Self, SolverError> {
        params.validate()?;
        let space = objective.space;
        let pool_size = objective.pool_size();
        let n = params.swarm_size;

        let mut cells = grid_cells(&space, params, n);
        let grid_shortfall = n - cells.len();
        while cells.len() < n {
            let m = rng.random_range(space.m_min..=space.m_max);
            let t = rng.random_range(space.theta_min..=space.theta_max);
            cells.push((m, t));
        }

        let vm_scale = space.m_range() as f64 / params.c_vm;
        let vt_scale = space.theta_range() as f64 / params.c_vtheta;
        let mut particles = Vec::with_capacity(n);
        for (m, theta) in cells {
            let mut z = vec![false; pool_size];
            resample_binaries(&mut z, m, rng);
            let r_m: f64 = rng.random();
            let r_theta: f64 = rng.random();
            let position = Configuration { m, theta, z };
            let fitness = objective.fitness(&position);
            particles.push(Particle {
                best: Scored { config: position.clone(), utility: fitness },
                position,
                velocity_m: r_m * vm_scale,
                velocity_theta: r_theta * vt_scale,
                fitness,
            });
        }

        let mut global_best = particles[0].best.clone();
        for p in &particles[1..] {
            if p.best.utility > global_best.utility {
                global_best = p.best.clone();
            }
        }
        Ok(Self { particles, global_best, iteration: 0, grid_shortfall })
    }

    /// One full iteration with the given inertia weight.
    pub fn step<R: Rng + ?Sized>(
        &mut self,
        objective: &Objective,
        params: &SwarmParams,
        inertia: f64,
        rng: &mut R,
    ) {
        let draws: Vec<(f64, f64)> =
            (0..self.particles.len()).map(|_| (rng.random(), rng.random())).collect();
        let global = self.global_best.config.clone();

        for (p, &(r, s)) in self.particles.iter_mut().zip(&draws) {
            update_continuous(p, &global, inertia, r, s, params, &objective.space);
        }
        for p in &mut self.particles {
            let count = match params.binary_count {
                BinaryCount::ParticleM => p.position.m,
                BinaryCount::GlobalBestM => {
                    p.position.m = global.m;
                    global.m
                }
            };
            resample_binaries(&mut p.position.z, count, rng);
        }
        for p in &mut self.particles {
            p.fitness = objective.fitness(&p.position);
            if p.fitness > p.best.utility {
                p.best = Scored { config: p.position.clone(), utility: p.fitness };
            }
            if p.best.utility > self.global_best.utility {
                self.global_best = p.best.clone();
            }
        }
        self.iteration += 1;
    }
}

/// Result of [`run`].
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub best: Scored,
    pub trace: Trace,
    pub iterations: usize,
    pub elapsed_seconds: f64,
}

/// Runs the swarm until the budget is spent and returns the global best.
///
/// Under an iteration budget `n` the inertia at iteration `i` is
/// `w_max - i (w_max - w_min) / n`; under a wall-clock budget the elapsed
/// fraction of the limit stands in for `i / n`.
pub fn run<R: Rng + ?Sized>(
    objective: &Objective,
    params: &SwarmParams,
    budget: Budget,
    rng: &mut R,
) -> Result<RunOutcome, SolverError> {
    let clock = BudgetClock::start(budget);
    let mut state = SwarmState::init(objective, params, rng)?;
    let mut trace = Trace::default();
    trace.push(0, state.global_best.utility, clock.elapsed());

    let mut i = 1;
    while clock.allows(i) {
        let w = params.inertia_at(clock.progress(i));
        state.step(objective, params, w, rng);
        trace.push(i, state.global_best.utility, clock.elapsed());
        i += 1;
    }

    Ok(RunOutcome {
        best: state.global_best,
        trace,
        iterations: state.iteration,
        elapsed_seconds: clock.elapsed().as_secs_f64(),
    })
}

/// Seeded run packaged as a report.
pub fn solve(
    objective: &Objective,
    params: &SwarmParams,
    budget: Budget,
    seed: u64,
) -> Result<SolverReport, SolverError> {
    let mut rng = rng_from_seed(seed);
    let out = run(objective, params, budget, &mut rng)?;
    Ok(SolverReport {
        algorithm: "adpsa".into(),
        seed,
        best_utility: out.best.utility,
        best: out.best.config,
        iterations: out.iterations,
        elapsed_seconds: out.elapsed_seconds,
        trace: out.trace,
    })
}
