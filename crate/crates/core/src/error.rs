use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Failure modes shared by every module of the crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An input lies outside the domain of a closed-form expression.
    #[error("domain error: {0}")]
    Domain(String),

    /// Identical (or numerically identical) hypotheses were supplied.
    #[error("the two states must satisfy |<phi1|phi2>| != 1 (got fidelity {fidelity})")]
    IndistinguishableStates { fidelity: f64 },

    /// A value violated a structural invariant; the message names it.
    #[error("validation failed: {0}")]
    Validation(String),

    /// The margin lies above the critical margin, where the minimum-error
    /// measurement applies instead.
    #[error("margin {m} exceeds the critical margin {critical}; use the minimum-error measurement")]
    OutOfRegime { m: f64, critical: f64 },

    /// Prior/overlap combination outside the two-outcome unambiguous regime.
    #[error("regime error: {0}")]
    Regime(String),

    /// A POVM cannot be read as an optimal unambiguous measurement.
    #[error("POVM not representable as an unambiguous measurement: {0}")]
    NotRepresentable(String),

    /// The Alice-side decomposition search exhausted its budget.
    #[error(
        "decomposition search failed after {evaluations} evaluations \
         (best residual {best_residual:.3e}, worst branch violation {worst_branch_violation:.3e})"
    )]
    SearchFailure {
        evaluations: usize,
        best_residual: f64,
        worst_branch_violation: f64,
    },

    #[error("thread pool: {0}")]
    ThreadPool(String),
}

impl Error {
    /// `true` for errors caused by user-supplied inputs (as opposed to a
    /// numerical procedure failing).
    pub fn is_input_error(&self) -> bool {
        !matches!(self, Error::SearchFailure { .. } | Error::ThreadPool(_))
    }
}
