//! Latency, security and cost of a verifier-selection configuration, and the
//! normalized weighted utility that combines them.
//!
//! Units are fixed: sizes in kilobits, rates in kilobits per second, times in
//! seconds, costs in dollars. Capacities `x` and the workload `K` share the
//! same resource unit.
//!
//! All metric arithmetic is done in `f64`; feasibility checks are exact
//! integer comparisons.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Absolute tolerance on `beta1 + beta2 + beta3 == 1`.
pub const WEIGHT_SUM_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("no verifier selected")]
    NoVerifierSelected,
    #[error("infeasible configuration: {}", join_violations(.0))]
    InfeasibleConfiguration(Vec<Violation>),
    #[error("invalid {what}: {reason}")]
    InvalidInput { what: &'static str, reason: String },
}

fn join_violations(v: &[Violation]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join("; ")
}

fn invalid(what: &'static str, reason: impl Into<String>) -> ModelError {
    ModelError::InvalidInput { what, reason: reason.into() }
}

/// Physical and protocol constants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemParams {
    /// Downlink rate, kb/s.
    pub v_d: f64,
    /// Uplink rate, kb/s.
    pub v_u: f64,
    /// Transaction size, kb.
    #[serde(rename = "R")]
    pub r: f64,
    /// Feedback size, kb.
    #[serde(rename = "P")]
    pub p: f64,
    /// Verification workload, resource units.
    #[serde(rename = "K")]
    pub k: f64,
    /// Broadcast/validation coefficient, s per kb per verifier.
    pub phi: f64,
    pub alpha: f64,
    pub kappa: f64,
}

impl SystemParams {
    pub fn validate(&self) -> Result<(), ModelError> {
        let fields = [
            ("v_d", self.v_d),
            ("v_u", self.v_u),
            ("R", self.r),
            ("P", self.p),
            ("K", self.k),
            ("phi", self.phi),
            ("alpha", self.alpha),
            ("kappa", self.kappa),
        ];
        for (name, v) in fields {
            if !(v.is_finite() && v > 0.0) {
                return Err(invalid("system params", format!("{name} must be finite and > 0, got {v}")));
            }
        }
        Ok(())
    }
}

/// Candidate verifiers: capacities `x` and per-unit costs `rho`, index-aligned.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifierPool {
    pub x: Vec<f64>,
    pub rho: Vec<f64>,
}

impl VerifierPool {
    pub fn new(x: Vec<f64>, rho: Vec<f64>) -> Result<Self, ModelError> {
        let pool = Self { x, rho };
        pool.validate()?;
        Ok(pool)
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if self.x.is_empty() {
            return Err(invalid("verifier pool", "pool must contain at least one verifier"));
        }
        if self.x.len() != self.rho.len() {
            return Err(invalid(
                "verifier pool",
                format!("x has {} entries but rho has {}", self.x.len(), self.rho.len()),
            ));
        }
        for (i, (&x, &rho)) in self.x.iter().zip(&self.rho).enumerate() {
            if !(x.is_finite() && x > 0.0) {
                return Err(invalid("verifier pool", format!("x[{i}] = {x} must be > 0")));
            }
            if !(rho.is_finite() && rho > 0.0) {
                return Err(invalid("verifier pool", format!("rho[{i}] = {rho} must be > 0")));
            }
        }
        Ok(())
    }
}

/// Integer bounds on the verifier count `m` and transactions per block `theta`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchSpace {
    pub m_min: usize,
    pub m_max: usize,
    pub theta_min: usize,
    pub theta_max: usize,
}

impl SearchSpace {
    pub fn validate(&self, pool_size: usize) -> Result<(), ModelError> {
        if !(1 <= self.m_min && self.m_min <= self.m_max && self.m_max <= pool_size) {
            return Err(invalid(
                "search space",
                format!(
                    "need 1 <= m_min <= m_max <= M, got m_min={} m_max={} M={pool_size}",
                    self.m_min, self.m_max
                ),
            ));
        }
        if !(1 <= self.theta_min && self.theta_min <= self.theta_max) {
            return Err(invalid(
                "search space",
                format!(
                    "need 1 <= theta_min <= theta_max, got theta_min={} theta_max={}",
                    self.theta_min, self.theta_max
                ),
            ));
        }
        Ok(())
    }

    pub fn m_range(&self) -> usize {
        self.m_max - self.m_min
    }

    pub fn theta_range(&self) -> usize {
        self.theta_max - self.theta_min
    }

    pub fn clamp_m(&self, m: i64) -> usize {
        m.clamp(self.m_min as i64, self.m_max as i64) as usize
    }

    pub fn clamp_theta(&self, theta: i64) -> usize {
        theta.clamp(self.theta_min as i64, self.theta_max as i64) as usize
    }
}

/// Relative importance of latency, security and cost.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Weights {
    pub beta1: f64,
    pub beta2: f64,
    pub beta3: f64,
}

impl Weights {
    pub fn new(beta1: f64, beta2: f64, beta3: f64) -> Result<Self, ModelError> {
        let w = Self { beta1, beta2, beta3 };
        w.validate()?;
        Ok(w)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        for (name, b) in [("beta1", self.beta1), ("beta2", self.beta2), ("beta3", self.beta3)] {
            if !(b.is_finite() && b >= 0.0) {
                return Err(invalid("weights", format!("{name} = {b} must be >= 0")));
            }
        }
        let sum = self.beta1 + self.beta2 + self.beta3;
        if (sum - 1.0).abs() > WEIGHT_SUM_TOLERANCE {
            return Err(invalid("weights", format!("weights sum to {sum}, expected 1")));
        }
        Ok(())
    }
}

/// One decision point `(m, theta, z)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Configuration {
    pub m: usize,
    pub theta: usize,
    #[serde(with = "bitstring")]
    pub z: Vec<bool>,
}

impl Configuration {
    /// Builds a configuration selecting exactly the given indices.
    pub fn from_selected(theta: usize, pool_size: usize, selected: &[usize]) -> Self {
        let mut z = vec![false; pool_size];
        for &i in selected {
            z[i] = true;
        }
        let m = z.iter().filter(|&&b| b).count();
        Self { m, theta, z }
    }

    pub fn selected_count(&self) -> usize {
        self.z.iter().filter(|&&b| b).count()
    }

    pub fn selected(&self) -> impl Iterator<Item = usize> + '_ {
        self.z.iter().enumerate().filter_map(|(i, &b)| b.then_some(i))
    }

    pub fn z_bits(&self) -> String {
        bitstring::encode(&self.z)
    }
}

mod bitstring {
    use serde::{de::Error, Deserialize, Deserializer, Serializer};

    pub fn encode(z: &[bool]) -> String {
        z.iter().map(|&b| if b { '1' } else { '0' }).collect()
    }

    pub fn serialize<S: Serializer>(z: &[bool], s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&encode(z))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<bool>, D::Error> {
        let s = String::deserialize(d)?;
        s.chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                other => Err(D::Error::custom(format!("invalid selection bit {other:?}"))),
            })
            .collect()
    }
}

/// A violated constraint of the feasible set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    MOutOfBounds { m: usize, min: usize, max: usize },
    ThetaOutOfBounds { theta: usize, min: usize, max: usize },
    SelectionLength { expected: usize, actual: usize },
    SelectionCount { m: usize, selected: usize },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::MOutOfBounds { m, min, max } => {
                write!(f, "m out of bounds: {m} not in [{min}, {max}]")
            }
            Violation::ThetaOutOfBounds { theta, min, max } => {
                write!(f, "θ out of bounds: {theta} not in [{min}, {max}]")
            }
            Violation::SelectionLength { expected, actual } => {
                write!(f, "z has length {actual}, expected {expected}")
            }
            Violation::SelectionCount { m, selected } => {
                write!(f, "sum(z) ≠ m: sum(z) = {selected}, m = {m}")
            }
        }
    }
}

/// Result of a feasibility check; empty means feasible.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Feasibility {
    pub violations: Vec<Violation>,
}

impl Feasibility {
    pub fn is_feasible(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn into_result(self) -> Result<(), ModelError> {
        if self.is_feasible() {
            Ok(())
        } else {
            Err(ModelError::InfeasibleConfiguration(self.violations))
        }
    }
}

/// Checks every constraint of the feasible set and lists all violations.
pub fn validate(config: &Configuration, space: &SearchSpace, pool: &VerifierPool) -> Feasibility {
    let mut violations = Vec::new();
    if config.m < space.m_min || config.m > space.m_max {
        violations.push(Violation::MOutOfBounds { m: config.m, min: space.m_min, max: space.m_max });
    }
    if config.theta < space.theta_min || config.theta > space.theta_max {
        violations.push(Violation::ThetaOutOfBounds {
            theta: config.theta,
            min: space.theta_min,
            max: space.theta_max,
        });
    }
    if config.z.len() != pool.len() {
        violations.push(Violation::SelectionLength { expected: pool.len(), actual: config.z.len() });
    }
    let selected = config.selected_count();
    if selected != config.m {
        violations.push(Violation::SelectionCount { m: config.m, selected });
    }
    Feasibility { violations }
}

/// Structural checks that do not need the search space: z length and
/// `sum(z) == m`.
fn check_structure(config: &Configuration, pool_size: Option<usize>) -> Result<(), ModelError> {
    let mut violations = Vec::new();
    if let Some(len) = pool_size {
        if config.z.len() != len {
            violations.push(Violation::SelectionLength { expected: len, actual: config.z.len() });
        }
    }
    let selected = config.selected_count();
    if selected != config.m {
        violations.push(Violation::SelectionCount { m: config.m, selected });
    }
    if config.theta == 0 {
        violations.push(Violation::ThetaOutOfBounds { theta: 0, min: 1, max: usize::MAX });
    }
    if violations.is_empty() {
        Ok(())
    } else {
        Err(ModelError::InfeasibleConfiguration(violations))
    }
}

/// Aggregates of the selected verifiers that fully determine the metrics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SelectionSummary {
    pub m: usize,
    pub theta: usize,
    /// Smallest capacity among the selected verifiers.
    pub min_capacity: f64,
    /// `sum_i rho_i * x_i` over the selected verifiers.
    pub cost_mass: f64,
}

impl SelectionSummary {
    /// Scans the selection. Returns `None` when nothing is selected.
    pub fn of(config: &Configuration, pool: &VerifierPool) -> Option<Self> {
        let mut min_capacity = f64::INFINITY;
        let mut cost_mass = 0.0;
        let mut any = false;
        for ((&on, &x), &rho) in config.z.iter().zip(&pool.x).zip(&pool.rho) {
            if on {
                any = true;
                min_capacity = min_capacity.min(x);
                cost_mass += rho * x;
            }
        }
        any.then_some(Self { m: config.m, theta: config.theta, min_capacity, cost_mass })
    }

    pub fn latency(&self, params: &SystemParams) -> f64 {
        let theta = self.theta as f64;
        let m = self.m as f64;
        theta * params.r / params.v_d
            + params.k / self.min_capacity
            + params.phi * theta * params.r * m
            + params.p / params.v_u
    }

    pub fn security(&self, params: &SystemParams) -> f64 {
        security_of(self.m, params)
    }

    pub fn cost(&self) -> f64 {
        self.cost_mass / self.theta as f64
    }

    pub fn utility(&self, params: &SystemParams, weights: &Weights, norms: &NormConstants) -> f64 {
        let l = self.latency(params);
        let s = self.security(params);
        let c = self.cost();
        weights.beta1 * (norms.latency_max - l) / norms.latency_max
            + weights.beta2 * s / norms.security_max
            + weights.beta3 * (norms.cost_max - c) / norms.cost_max
    }
}

fn security_of(m: usize, params: &SystemParams) -> f64 {
    params.alpha * (m as f64).powf(params.kappa)
}

/// Latency in seconds. The verification term is taken over selected
/// verifiers only, so the slowest participating verifier dominates.
pub fn latency(config: &Configuration, params: &SystemParams, pool: &VerifierPool) -> Result<f64, ModelError> {
    check_structure(config, Some(pool.len()))?;
    let summary = SelectionSummary::of(config, pool).ok_or(ModelError::NoVerifierSelected)?;
    Ok(summary.latency(params))
}

/// Dimensionless security rating `alpha * m^kappa`.
pub fn security(config: &Configuration, params: &SystemParams) -> Result<f64, ModelError> {
    check_structure(config, None)?;
    if config.m == 0 {
        return Err(ModelError::NoVerifierSelected);
    }
    Ok(security_of(config.m, params))
}

/// Cost in dollars amortized over the `theta` transactions of a block.
pub fn cost(config: &Configuration, pool: &VerifierPool) -> Result<f64, ModelError> {
    check_structure(config, Some(pool.len()))?;
    let mass: f64 = config
        .z
        .iter()
        .zip(&pool.x)
        .zip(&pool.rho)
        .filter(|((&on, _), _)| on)
        .map(|((_, &x), &rho)| rho * x)
        .sum();
    Ok(mass / config.theta as f64)
}

/// Upper bounds of the three metrics over the feasible set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormConstants {
    #[serde(rename = "L_m")]
    pub latency_max: f64,
    #[serde(rename = "S_m")]
    pub security_max: f64,
    #[serde(rename = "C_m")]
    pub cost_max: f64,
}

impl NormConstants {
    /// Term-wise maxima: every latency term is non-decreasing in `theta` and
    /// `m` and the verification term is at most `K / min_i x_i`; security is
    /// increasing in `m`; cost is largest with every verifier selected at the
    /// smallest `theta`.
    pub fn compute(params: &SystemParams, pool: &VerifierPool, space: &SearchSpace) -> Self {
        let theta_max = space.theta_max as f64;
        let m_max = space.m_max as f64;
        let min_x = pool.x.iter().copied().fold(f64::INFINITY, f64::min);
        let latency_max = theta_max * params.r / params.v_d
            + params.k / min_x
            + params.phi * theta_max * params.r * m_max
            + params.p / params.v_u;
        let security_max = security_of(space.m_max, params);
        let total_mass: f64 = pool.x.iter().zip(&pool.rho).map(|(x, rho)| rho * x).sum();
        let cost_max = total_mass / space.theta_min as f64;
        Self { latency_max, security_max, cost_max }
    }
}

/// Normalized weighted utility; lies in `[0, 1]` for feasible configurations
/// when `norms` were computed on the same instance.
pub fn utility(
    config: &Configuration,
    params: &SystemParams,
    pool: &VerifierPool,
    weights: &Weights,
    norms: &NormConstants,
) -> Result<f64, ModelError> {
    let l = latency(config, params, pool)?;
    let s = security(config, params)?;
    let c = cost(config, pool)?;
    Ok(weights.beta1 * (norms.latency_max - l) / norms.latency_max
        + weights.beta2 * s / norms.security_max
        + weights.beta3 * (norms.cost_max - c) / norms.cost_max)
}

/// A validated instance together with its weights and normalization
/// constants. Solvers evaluate fitness through this.
#[derive(Debug, Clone)]
pub struct Objective {
    pub params: SystemParams,
    pub pool: VerifierPool,
    pub space: SearchSpace,
    pub weights: Weights,
    pub norms: NormConstants,
}

impl Objective {
    pub fn new(
        params: SystemParams,
        pool: VerifierPool,
        space: SearchSpace,
        weights: Weights,
    ) -> Result<Self, ModelError> {
        params.validate()?;
        pool.validate()?;
        space.validate(pool.len())?;
        weights.validate()?;
        let norms = NormConstants::compute(&params, &pool, &space);
        Ok(Self { params, pool, space, weights, norms })
    }

    pub fn with_weights(&self, weights: Weights) -> Result<Self, ModelError> {
        weights.validate()?;
        Ok(Self { weights, ..self.clone() })
    }

    pub fn pool_size(&self) -> usize {
        self.pool.len()
    }

    /// Fitness of a configuration assumed feasible. Returns `-inf` when
    /// nothing is selected.
    pub fn fitness(&self, config: &Configuration) -> f64 {
        match SelectionSummary::of(config, &self.pool) {
            Some(s) => s.utility(&self.params, &self.weights, &self.norms),
            None => f64::NEG_INFINITY,
        }
    }

    pub fn fitness_of_summary(&self, summary: &SelectionSummary) -> f64 {
        summary.utility(&self.params, &self.weights, &self.norms)
    }

    /// Checked utility: validates feasibility first.
    pub fn utility(&self, config: &Configuration) -> Result<f64, ModelError> {
        validate(config, &self.space, &self.pool).into_result()?;
        utility(config, &self.params, &self.pool, &self.weights, &self.norms)
    }

    pub fn validate(&self, config: &Configuration) -> Feasibility {
        validate(config, &self.space, &self.pool)
    }
}
