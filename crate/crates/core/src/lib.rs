//! Joint latency/security/cost optimization of DPoS verifier selection and
//! block size.
//!
//! * [`model`]: metrics, normalization and the weighted utility.
//! * [`adpsa`]: the adaptive discrete particle swarm solver.
//! * [`baselines`]: plain PSO, simulated annealing, pseudo-exhaustive search
//!   and an exact enumeration oracle.
//! * [`instances`]: random pools and the instance file format.
//! * [`harness`]: paired-seed benchmark batches and their statistics.
//! * [`cli`]: the `chainopt` command line.

pub mod adpsa;
pub mod baselines;
pub mod cli;
pub mod harness;
pub mod instances;
pub mod io;
pub mod model;
pub mod solver;

pub use model::{Configuration, NormConstants, Objective, SearchSpace, SystemParams, VerifierPool, Weights};
pub use solver::{Budget, SolverError, SolverReport};
