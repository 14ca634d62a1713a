//! Brute-force numerical optimizers that serve as independent checks on the
//! closed forms in [`crate::margin`].
//!
//! [`oracle_reduced`] searches the symmetry-reduced one-parameter family;
//! [`oracle_general`] searches all eight Pauli coordinates of `(E1, E2)`
//! with no symmetry assumption at all.

mod general;
mod nelder_mead;
mod reduced;

use serde::{Deserialize, Serialize};

use crate::margin::ReducedParams;

pub use general::{general_constraints, general_objective, oracle_general, oracle_general_with, GeneralOptions};
pub use nelder_mead::{minimize, NelderMeadOptions, NelderMeadResult};
pub use reduced::{f_poly, g_poly, oracle_reduced, oracle_reduced_with, scan_branch, BranchScan, XBranch};

/// Constraint tolerance satisfied by every reported maximizer.
pub const ORACLE_FEASIBILITY_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Argmax {
    Reduced(ReducedParams),
    /// `(alpha1, beta1, alpha2, beta2)` flattened.
    General {
        params: [f64; 8],
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleResult {
    pub p_best: f64,
    pub argmax: Argmax,
    pub evaluations: usize,
    pub feasible: bool,
}
