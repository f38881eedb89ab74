//! Reference solvers the adaptive swarm is compared against.

pub mod oracle;
pub mod pseudo;
pub mod pso;
pub mod sa;

pub use pso::PsoParams;
pub use sa::SaParams;
