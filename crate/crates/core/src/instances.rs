//! Problem instances: random verifier pools, presets, and the JSON file
//! format.
//!
//! Instance files carry a schema tag, the model inputs in the units of
//! [`crate::model`], and optionally the seed and pool spec they were
//! generated from, so a published instance can be regenerated exactly.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::model::{ModelError, Objective, SearchSpace, SystemParams, VerifierPool, Weights};
use crate::solver::rng_from_seed;

pub const SCHEMA_VERSION: &str = "chainopt-instance/1";

/// Megabits to kilobits.
pub const KB_PER_MB: f64 = 1000.0;

#[derive(Debug, Error)]
pub enum InstanceError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("parse error in {path} at line {line}, column {column}, field `{field}`: {message}")]
    Parse { path: PathBuf, line: usize, column: usize, field: String, message: String },
    #[error("schema version mismatch: expected {SCHEMA_VERSION:?}, found {found:?}")]
    SchemaVersionMismatch { found: String },
    #[error("invalid instance: {0}")]
    Invalid(#[from] ModelError),
    #[error("degenerate {which} law: more than 99% of draws fall below the floor {floor}")]
    DegenerateLaw { which: &'static str, floor: f64 },
    #[error("invalid pool spec: {0}")]
    InvalidSpec(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LawFamily {
    /// Normal with mean `location` and standard deviation `scale`.
    Normal,
    /// Uniform on `[location, location + scale]`.
    Uniform,
    /// Always `location`.
    PointMass,
}

/// A sampling law truncated from below at `floor`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Law {
    pub family: LawFamily,
    pub location: f64,
    pub scale: f64,
    pub floor: f64,
}

impl Law {
    pub fn normal(mean: f64, sd: f64) -> Self {
        Self { family: LawFamily::Normal, location: mean, scale: sd, floor: 1.0 }
    }

    pub fn point(value: f64) -> Self {
        Self { family: LawFamily::PointMass, location: value, scale: 0.0, floor: 1.0 }
    }

    fn validate(&self, which: &str) -> Result<(), InstanceError> {
        let ok = self.location.is_finite()
            && self.scale.is_finite()
            && self.scale >= 0.0
            && self.floor.is_finite()
            && self.floor > 0.0;
        if ok {
            Ok(())
        } else {
            Err(InstanceError::InvalidSpec(format!("{which} law {self:?}")))
        }
    }

    fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self.family {
            LawFamily::Normal => Normal::new(self.location, self.scale).expect("validated").sample(rng),
            LawFamily::Uniform => self.location + self.scale * rng.random::<f64>(),
            LawFamily::PointMass => self.location,
        }
    }
}

/// Description of a random verifier pool.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoolSpec {
    #[serde(rename = "M")]
    pub size: usize,
    pub rho_law: Law,
    pub x_law: Law,
}

impl PoolSpec {
    /// Costs near 100 $/unit and capacities near 40000 units.
    pub fn table1(size: usize) -> Self {
        Self { size, rho_law: Law::normal(100.0, 5.0), x_law: Law::normal(40000.0, 4000.0) }
    }
}

/// Draws from `law` until a value reaches the floor. Gives up once rejections
/// exceed 99 per accepted draw (with a little slack for the first draws).
fn truncated<R: Rng + ?Sized>(
    law: &Law,
    which: &'static str,
    n: usize,
    rng: &mut R,
) -> Result<Vec<f64>, InstanceError> {
    let mut out = Vec::with_capacity(n);
    let mut rejected = 0usize;
    while out.len() < n {
        let v = law.draw(rng);
        if v >= law.floor {
            out.push(v);
        } else {
            rejected += 1;
            if rejected > 99 * (out.len() + 1) + 100 {
                return Err(InstanceError::DegenerateLaw { which, floor: law.floor });
            }
        }
    }
    Ok(out)
}

/// Samples a pool: all `rho` values first, then all `x` values.
pub fn generate_pool<R: Rng + ?Sized>(spec: &PoolSpec, rng: &mut R) -> Result<VerifierPool, InstanceError> {
    if spec.size == 0 {
        return Err(InstanceError::InvalidSpec("pool size must be >= 1".into()));
    }
    spec.rho_law.validate("rho")?;
    spec.x_law.validate("x")?;
    let rho = truncated(&spec.rho_law, "rho", spec.size, rng)?;
    let x = truncated(&spec.x_law, "x", spec.size, rng)?;
    Ok(VerifierPool::new(x, rho)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationRecord {
    pub seed: u64,
    pub spec: PoolSpec,
}

/// Everything a solver needs, as stored on disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Instance {
    pub schema: String,
    pub params: SystemParams,
    pub pool: VerifierPool,
    pub space: SearchSpace,
    pub weights: Weights,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generation: Option<GenerationRecord>,
}

impl Instance {
    pub fn validate(&self) -> Result<(), InstanceError> {
        if self.schema != SCHEMA_VERSION {
            return Err(InstanceError::SchemaVersionMismatch { found: self.schema.clone() });
        }
        self.params.validate()?;
        self.pool.validate()?;
        self.space.validate(self.pool.len())?;
        self.weights.validate()?;
        Ok(())
    }

    pub fn objective(&self) -> Result<Objective, ModelError> {
        Objective::new(self.params.clone(), self.pool.clone(), self.space, self.weights)
    }

    /// Hex SHA-256 of the canonical JSON encoding (first 16 hex digits).
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("instance serializes");
        hex::encode(&Sha256::digest(&bytes)[..8])
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("instance serializes")
    }

    pub fn from_json_str(text: &str, path: &Path) -> Result<Self, InstanceError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let inst: Instance = serde_path_to_error::deserialize(de).map_err(|e| {
            let field = e.path().to_string();
            let inner = e.into_inner();
            InstanceError::Parse {
                path: path.to_path_buf(),
                line: inner.line(),
                column: inner.column(),
                field,
                message: inner.to_string(),
            }
        })?;
        inst.validate()?;
        Ok(inst)
    }
}

/// Default system constants, converted to kilobits.
pub fn table1_params() -> SystemParams {
    SystemParams {
        v_d: 1.2 * KB_PER_MB,
        v_u: 1.3 * KB_PER_MB,
        r: 2.0,
        p: 0.5 * KB_PER_MB,
        k: 59292098.2754,
        phi: 0.5,
        alpha: 5.0,
        kappa: 1.0,
    }
}

pub fn table1_weights() -> Weights {
    Weights { beta1: 0.4, beta2: 0.2, beta3: 0.4 }
}

/// Builds an instance with the default constants and weights, a pool drawn
/// from `spec` with `seed`, and the given search space.
pub fn generate_instance(spec: PoolSpec, space: SearchSpace, seed: u64) -> Result<Instance, InstanceError> {
    let pool = generate_pool(&spec, &mut rng_from_seed(seed))?;
    let inst = Instance {
        schema: SCHEMA_VERSION.into(),
        params: table1_params(),
        pool,
        space,
        weights: table1_weights(),
        generation: Some(GenerationRecord { seed, spec }),
    };
    inst.validate()?;
    Ok(inst)
}

/// Full-scale instance: 1000 verifiers, `m` and `theta` in `[2, 1000]`.
pub fn table1_instance(seed: u64) -> Instance {
    let space = SearchSpace { m_min: 2, m_max: 1000, theta_min: 2, theta_max: 1000 };
    generate_instance(PoolSpec::table1(1000), space, seed).expect("default spec is valid")
}

/// Small instance for oracle checks: 8 verifiers, `m` in `[2, 8]`, `theta`
/// in `[2, 20]`.
pub fn toy_instance(seed: u64) -> Instance {
    let space = SearchSpace { m_min: 2, m_max: 8, theta_min: 2, theta_max: 20 };
    generate_instance(PoolSpec::table1(8), space, seed).expect("toy spec is valid")
}

pub fn load_instance(path: impl AsRef<Path>) -> Result<Instance, InstanceError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| InstanceError::Io { path: path.to_path_buf(), source })?;
    Instance::from_json_str(&text, path)
}

/// Writes the instance atomically (temp file in the same directory, then
/// rename).
pub fn save_instance(instance: &Instance, path: impl AsRef<Path>) -> Result<(), InstanceError> {
    let path = path.as_ref();
    crate::io::write_atomic(path, instance.to_json_string().as_bytes())
        .map_err(|source| InstanceError::Io { path: path.to_path_buf(), source })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn point_mass_pool() {
        let spec = PoolSpec { size: 1, rho_law: Law::point(100.0), x_law: Law::point(40000.0) };
        let pool = generate_pool(&spec, &mut rng_from_seed(0)).unwrap();
        assert_eq!(pool, VerifierPool { x: vec![40000.0], rho: vec![100.0] });
    }

    #[test]
    fn table1_pool_moments() {
        let pool = generate_pool(&PoolSpec::table1(1000), &mut rng_from_seed(17)).unwrap();
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        assert!((mean(&pool.rho) - 100.0).abs() <= 2.0);
        assert!((mean(&pool.x) - 40000.0).abs() <= 2000.0);
        assert!(pool.x.iter().chain(&pool.rho).all(|&v| v >= 1.0));
    }

    #[test]
    fn generation_is_deterministic() {
        let a = generate_pool(&PoolSpec::table1(50), &mut rng_from_seed(5)).unwrap();
        let b = generate_pool(&PoolSpec::table1(50), &mut rng_from_seed(5)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn degenerate_law_rejected() {
        let spec = PoolSpec {
            size: 10,
            rho_law: Law { family: LawFamily::Normal, location: -100.0, scale: 1.0, floor: 1.0 },
            x_law: Law::point(1.0),
        };
        assert!(matches!(
            generate_pool(&spec, &mut rng_from_seed(0)),
            Err(InstanceError::DegenerateLaw { which: "rho", .. })
        ));
    }

    #[test]
    fn table1_constants_in_kilobits() {
        let p = table1_params();
        assert_eq!((p.v_d, p.v_u, p.p), (1200.0, 1300.0, 500.0));
    }

    #[test]
    fn malformed_json_names_field() {
        let inst = toy_instance(1);
        let text = inst.to_json_string().replace("\"K\": 59292098.2754", "\"K\": \"lots\"");
        let err = Instance::from_json_str(&text, Path::new("x.json")).unwrap_err();
        match err {
            InstanceError::Parse { field, line, .. } => {
                assert_eq!(field, "params.K");
                assert!(line > 1);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn bad_weights_are_an_invariant_error_not_a_schema_error() {
        let mut inst = toy_instance(1);
        inst.weights = Weights { beta1: 0.4, beta2: 0.2, beta3: 0.399 };
        let text = serde_json::to_string(&inst).unwrap();
        let err = Instance::from_json_str(&text, Path::new("x.json")).unwrap_err();
        assert!(matches!(err, InstanceError::Invalid(ModelError::InvalidInput { what: "weights", .. })));
    }

    #[test]
    fn schema_mismatch() {
        let mut inst = toy_instance(1);
        inst.schema = "chainopt-instance/0".into();
        let text = serde_json::to_string(&inst).unwrap();
        assert!(matches!(
            Instance::from_json_str(&text, Path::new("x.json")),
            Err(InstanceError::SchemaVersionMismatch { .. })
        ));
    }

    #[test]
    fn save_load_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t1.json");
        let inst = table1_instance(2024);
        save_instance(&inst, &path).unwrap();
        let back = load_instance(&path).unwrap();
        assert_eq!(back, inst);
        assert_eq!(back.hash(), inst.hash());
        for (a, b) in back.pool.x.iter().zip(&inst.pool.x) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn missing_file_is_io_error() {
        assert!(matches!(load_instance("/nonexistent/inst.json"), Err(InstanceError::Io { .. })));
    }
}
