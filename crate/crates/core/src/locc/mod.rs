//! One-way LOCC realization of rank-one three-outcome POVMs on the span of
//! two bipartite pure states.
//!
//! The pipeline reads the optimal margin POVM as the optimal unambiguous
//! POVM of an auxiliary pair, finds an ancilla-assisted measurement basis
//! for Alice under which every branch leaves Bob an unambiguous problem he
//! can solve locally, and certifies that the assembled protocol has the
//! same matrix elements as the global POVM on the span.

mod bipartite;
mod decomposition;
mod protocol;
mod unambiguous;

pub use bipartite::{lift_povm, BipartiteState, FullPovm, MAX_LOCAL_DIM};
pub use decomposition::{
    find_alice_decomposition, AliceDecomposition, BranchSlack, DecompositionCheck, SearchOptions, ACCEPT_TOL,
    DECOMPOSITION_TOL, ZERO_BRANCH,
};
pub use protocol::{
    build_locc_povm, canonical_basis, full_space_report, margin_povm_to_locc, verify_compression, LoccBranch,
    LoccOutcome, LoccPovm,
};
pub use unambiguous::{
    global_unambiguous_povm, povm_to_unambiguous, unambiguous_povm_vectors, unambiguous_to_povm, UnambiguousProblem,
};
