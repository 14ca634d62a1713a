use nalgebra::{DMatrix, DVector};

use super::bipartite::{hermitian_eigenvalues, lift_povm, outer, BipartiteState, FullPovm};
use super::decomposition::{
    find_alice_decomposition, AliceDecomposition, BranchSlack, SearchOptions, DECOMPOSITION_TOL,
};
use super::unambiguous::{global_unambiguous_povm, povm_to_unambiguous, UnambiguousProblem};
use crate::linalg::{StatePair, POVM_TOL};
use crate::margin::{optimal_povm, MarginCondition, Regime};
use crate::validator::{check_margin, DiscriminationReport};
use crate::{Error, Result, C64};

/// Bob overlaps this close to 1 leave nothing to discriminate.
const PARALLEL_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct LoccBranch {
    /// `e_I^A = <0|I><I|0>` on Alice's system.
    pub alice_effect: DMatrix<C64>,
    /// `e_mu^B(I)` on Bob's full space, `e_3` completed to the identity.
    pub bob_effects: [DMatrix<C64>; 3],
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoccPovm {
    pub dims: (usize, usize),
    pub branches: Vec<LoccBranch>,
}

impl LoccPovm {
    /// `E_mu^L = sum_I e_I^A (x) e_mu^B(I)`.
    pub fn effects(&self) -> FullPovm {
        let dim = self.dims.0 * self.dims.1;
        let mut out = FullPovm::zero(dim);
        for br in &self.branches {
            for mu in 0..3 {
                out.elements[mu] += br.alice_effect.kronecker(&br.bob_effects[mu]);
            }
        }
        out
    }

    /// `sum_I e_I^A - I` in max-abs norm.
    pub fn alice_completeness_deviation(&self) -> f64 {
        let da = self.dims.0;
        let mut sum = DMatrix::<C64>::zeros(da, da);
        for br in &self.branches {
            sum += &br.alice_effect;
        }
        (sum - DMatrix::identity(da, da))
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max)
    }

    /// Smallest eigenvalue over all local effects.
    pub fn min_local_eigenvalue(&self) -> f64 {
        self.branches
            .iter()
            .flat_map(|br| std::iter::once(&br.alice_effect).chain(br.bob_effects.iter()))
            .map(|e| hermitian_eigenvalues(e).min())
            .fold(f64::INFINITY, f64::min)
    }
}

/// Assembles Alice's effects and Bob's conditional unambiguous POVMs.
pub fn build_locc_povm(dec: &AliceDecomposition, s: f64, t: f64) -> Result<LoccPovm> {
    if !(s > 0.0 && t > 0.0) || (s + t - 1.0).abs() > 1e-12 {
        return Err(Error::Domain(format!(
            "priors must be positive and sum to 1 (s={s}, t={t})"
        )));
    }
    let (da, db) = dec.dims;
    let lambda = (s / t).sqrt();
    let mut branches = Vec::with_capacity(dec.branches());
    for i in 0..dec.branches() {
        let w = dec.alice_states[i].rows(0, da).into_owned();
        let (si, ti) = (dec.weights_s[i], dec.weights_t[i]);
        let (eta, gamma) = (&dec.bob_eta[i], &dec.bob_gamma[i]);
        let q = dec.q(i);
        let bound = (lambda * si).min(ti / lambda);
        if q.im.abs() > DECOMPOSITION_TOL || q.re < -DECOMPOSITION_TOL || q.re > bound + DECOMPOSITION_TOL {
            return Err(Error::Validation(format!(
                "branch {i} violates the overlap bounds (q = {q}, bound {bound})"
            )));
        }
        let id = DMatrix::<C64>::identity(db, db);
        let ov = eta.dotc(gamma);
        let c = ov.norm();
        let bob_effects = if 1.0 - c < PARALLEL_TOL {
            [DMatrix::zeros(db, db), DMatrix::zeros(db, db), id]
        } else {
            let den = 1.0 - c * c;
            // sqrt(t t_I / (s s_I)); a one-sided branch has c = 0 by construction
            let (coef1, coef2) = if si > 0.0 && ti > 0.0 {
                let ratio = (ti / si).sqrt() / lambda;
                ((1.0 - ratio * c) / den, (1.0 - c / ratio) / den)
            } else {
                (1.0, 1.0)
            };
            let coef1 = coef1.clamp(0.0, 1.0);
            let coef2 = coef2.clamp(0.0, 1.0);
            let gamma_perp = (eta - gamma * ov.conj()).normalize();
            let eta_perp = (gamma - eta * ov).normalize();
            let e1 = outer(&gamma_perp, &gamma_perp) * C64::from(coef1);
            let e2 = outer(&eta_perp, &eta_perp) * C64::from(coef2);
            let e3 = &id - &e1 - &e2;
            [e1, e2, e3]
        };
        branches.push(LoccBranch {
            alice_effect: outer(&w, &w),
            bob_effects,
        });
    }
    let povm = LoccPovm {
        dims: dec.dims,
        branches,
    };
    let min = povm.min_local_eigenvalue();
    if min < -POVM_TOL {
        return Err(Error::Validation(format!("local effect has eigenvalue {min:.3e}")));
    }
    Ok(povm)
}

/// `max |<v_i|E_mu - E_mu^L|v_j>|` over the basis of `V` and all outcomes.
pub fn verify_compression(global: &FullPovm, locc: &LoccPovm, basis: &[DVector<C64>; 2]) -> f64 {
    let effects = locc.effects();
    let mut worst: f64 = 0.0;
    for mu in 0..3 {
        for u in basis {
            for v in basis {
                let d = global.matrix_element(mu, u, v) - effects.matrix_element(mu, u, v);
                worst = worst.max(d.norm());
            }
        }
    }
    worst
}

/// Evaluates a full-space POVM on two bipartite states with equal priors.
pub fn full_space_report(
    povm: &FullPovm,
    phi1: &BipartiteState,
    phi2: &BipartiteState,
    basis: &[DVector<C64>; 2],
) -> DiscriminationReport {
    let vecs = [phi1.vector(), phi2.vector()];
    let mut joint = [[0.0; 3]; 2];
    for (a, v) in vecs.iter().enumerate() {
        for (mu, p) in joint[a].iter_mut().enumerate() {
            *p = 0.5 * povm.matrix_element(mu, v, v).re;
        }
    }
    let b = DMatrix::from_columns(basis);
    let ranks = [0, 1, 2].map(|mu| {
        let compressed = b.adjoint() * &povm.elements[mu] * &b;
        hermitian_eigenvalues(&compressed)
            .iter()
            .filter(|l| **l > POVM_TOL)
            .count()
    });
    DiscriminationReport::from_joint(
        joint,
        povm.min_eigenvalue() >= -POVM_TOL,
        povm.completeness_deviation() <= POVM_TOL,
        ranks,
    )
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoccOutcome {
    pub locc: LoccPovm,
    pub max_deviation: f64,
    pub regime: Regime,
    pub fidelity: f64,
    /// Orthonormal basis `(v1, v2)` of the span of the two states.
    pub basis: [DVector<C64>; 2],
    /// Optimal margin POVM lifted to the full space.
    pub global: FullPovm,
    pub problem: UnambiguousProblem,
    pub decomposition: AliceDecomposition,
    pub branch_slacks: Vec<BranchSlack>,
    pub global_report: DiscriminationReport,
    pub locc_report: DiscriminationReport,
    /// Margin slack of the LOCC report.
    pub margin_slack: f64,
}

/// Orthonormal basis of `span(phi1, phi2)` in which the pair takes the
/// canonical form of [`StatePair::from_fidelity`], after the phase of
/// `phi2` is fixed so the overlap is nonnegative.
pub fn canonical_basis(
    phi1: &BipartiteState,
    phi2: &BipartiteState,
) -> Result<(f64, BipartiteState, [DVector<C64>; 2])> {
    if phi1.dims() != phi2.dims() {
        return Err(Error::Domain("states live in different spaces".into()));
    }
    let ov = phi1.inner(phi2);
    let f = ov.norm();
    if 1.0 - f < 1e-12 {
        return Err(Error::IndistinguishableStates { fidelity: f });
    }
    let phase = if f > 0.0 { ov.conj() / f } else { C64::from(1.0) };
    let phi2 = phi2.with_phase(phase);
    let (u, v) = (phi1.vector(), phi2.vector());
    let cos = ((1.0 + f) / 2.0).sqrt();
    let sin = ((1.0 - f) / 2.0).sqrt();
    let v1 = (&u + &v) / C64::from(2.0 * cos);
    let v2 = (&u - &v) / C64::from(2.0 * sin);
    Ok((f, phi2, [v1, v2]))
}

/// Realizes the optimal margin POVM for a bipartite pair by one-way LOCC
/// and certifies the result against the global POVM.
pub fn margin_povm_to_locc(
    phi1: &BipartiteState,
    phi2: &BipartiteState,
    cond: MarginCondition,
    opts: SearchOptions,
) -> Result<LoccOutcome> {
    let (fidelity, _, basis) = canonical_basis(phi1, phi2)?;
    let (da, db) = phi1.dims();
    let pair = StatePair::from_fidelity(fidelity)?;
    let (povm, regime) = optimal_povm(&pair, cond)?;
    let global = lift_povm(&povm, &basis[0], &basis[1]);

    let problem = povm_to_unambiguous(&povm)?;
    let (x1, x2) = problem.lift(&basis[0], &basis[1]);
    let psi1 = BipartiteState::from_vector(&x1, da, db)?;
    let psi2 = BipartiteState::from_vector(&x2, da, db)?;
    let unambiguous = global_unambiguous_povm(&psi1, &psi2, problem.s, problem.t)?;
    let identification = (0..3)
        .flat_map(|mu| {
            (&unambiguous.elements[mu] - &global.elements[mu])
                .iter()
                .map(|z| z.norm())
                .collect::<Vec<_>>()
        })
        .fold(0.0, f64::max);
    if identification > 1e-9 {
        return Err(Error::NotRepresentable(format!(
            "margin POVM differs from its unambiguous identification by {identification:.3e}"
        )));
    }

    let decomposition = find_alice_decomposition(&psi1, &psi2, problem.s, problem.t, opts)?;
    let check = decomposition.check(&psi1, &psi2, problem.s, problem.t)?;
    let locc = build_locc_povm(&decomposition, problem.s, problem.t)?;
    let max_deviation = verify_compression(&global, &locc, &basis);
    let global_report = full_space_report(&global_full(&global, &basis), phi1, phi2, &basis);
    let locc_report = full_space_report(&locc.effects(), phi1, phi2, &basis);
    Ok(LoccOutcome {
        margin_slack: check_margin(&locc_report, cond),
        locc,
        max_deviation,
        regime,
        fidelity,
        basis,
        global,
        problem,
        decomposition,
        branch_slacks: check.branches,
        global_report,
        locc_report,
    })
}

/// Completes a POVM on `V` to the full space by adding `I - P` to `E3`.
fn global_full(povm: &FullPovm, basis: &[DVector<C64>; 2]) -> FullPovm {
    let n = povm.dim();
    let p = outer(&basis[0], &basis[0]) + outer(&basis[1], &basis[1]);
    let mut out = povm.clone();
    out.elements[2] += DMatrix::<C64>::identity(n, n) - p;
    out
}
