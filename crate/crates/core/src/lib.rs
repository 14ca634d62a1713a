//! Optimal discrimination of two equiprobable pure states under an error
//! margin.
//!
//! The crate covers:
//!
//! - [`linalg`]: qubit states, Bloch vectors and `alpha + beta·sigma` operators;
//! - [`margin`]: closed-form optimal success probabilities and POVMs for the
//!   strong (per-outcome) and weak (mean) error-margin conditions;
//! - [`validator`]: measurement-theoretic recomputation of every probability;
//! - [`oracle`]: brute-force numerical optimizers used as independent checks;
//! - [`simulator`]: seeded Monte Carlo of the discrimination experiment;
//! - [`locc`]: one-way LOCC realization of rank-one three-outcome POVMs for
//!   bipartite states;
//! - [`curve`]: success-probability curves over the margin.

#[cfg(test)]
#[macro_use]
mod testing;

pub mod curve;
pub mod error;
pub mod exec;
pub mod linalg;
pub mod locc;
pub mod margin;
pub mod oracle;
pub mod simulator;
pub mod validator;

pub use error::{Error, Result};
pub use exec::Exec;
pub use linalg::{BlochVector, Observable2, Povm3, PureState, StatePair};
pub use margin::{ConditionKind, MarginCondition, ReducedParams, Regime};
pub use validator::DiscriminationReport;

/// Complex scalar used throughout.
pub type C64 = num_complex::Complex64;
