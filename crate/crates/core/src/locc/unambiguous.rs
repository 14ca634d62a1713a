use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::bipartite::{outer, BipartiteState, FullPovm};
use crate::linalg::{Observable2, Povm3, PureState, POVM_TOL};
use crate::{BlochVector, Error, Result, C64};

/// Overlaps below this are treated as orthogonal states.
pub const ORTHOGONAL_TOL: f64 = 1e-12;
/// Tolerance on the rank and top-eigenvalue conditions of a rank-one triple.
pub const REPRESENTABLE_TOL: f64 = 1e-9;

/// Unambiguous discrimination of `psi2_perp` (prior `s`) against
/// `psi1_perp` (prior `t`) whose optimal POVM is a given rank-one triple.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UnambiguousProblem {
    pub psi1_perp: PureState,
    pub psi2_perp: PureState,
    pub s: f64,
    pub t: f64,
    /// `sqrt(t / s)`.
    pub r: f64,
    /// Coefficients `b_mu` of `E_mu = b_mu |psi_mu><psi_mu|`.
    pub b: [f64; 2],
    /// `|<psi1|psi2>| = |<psi1_perp|psi2_perp>|`.
    pub overlap: f64,
}

impl UnambiguousProblem {
    /// The two states to discriminate, embedded through the orthonormal
    /// basis `v1, v2`, in problem order `(psi2_perp, psi1_perp)`.
    pub fn lift(&self, v1: &DVector<C64>, v2: &DVector<C64>) -> (DVector<C64>, DVector<C64>) {
        let embed = |p: &PureState| {
            let [a, b] = p.amplitudes();
            v1 * a + v2 * b
        };
        (embed(&self.psi2_perp), embed(&self.psi1_perp))
    }

    /// `b1 + b2 - 1 - b1 b2 (1 - c^2)`, zero for every representable triple.
    pub fn b_relation_residual(&self) -> f64 {
        let [b1, b2] = self.b;
        b1 + b2 - 1.0 - b1 * b2 * (1.0 - self.overlap * self.overlap)
    }
}

fn unambiguous_coefficients(c: f64, s: f64, t: f64) -> Result<(f64, f64)> {
    if !(s > 0.0 && t > 0.0) || (s + t - 1.0).abs() > 1e-12 {
        return Err(Error::Domain(format!(
            "priors must be positive and sum to 1 (s={s}, t={t})"
        )));
    }
    let (ts, st) = ((t / s).sqrt(), (s / t).sqrt());
    if ts < c - REPRESENTABLE_TOL || st < c - REPRESENTABLE_TOL {
        return Err(Error::Regime(format!(
            "sqrt(s/t) = {st} and sqrt(t/s) = {ts} must both be at least |<Phi1|Phi2>| = {c}"
        )));
    }
    let den = 1.0 - c * c;
    Ok((((1.0 - ts * c) / den).max(0.0), ((1.0 - st * c) / den).max(0.0)))
}

/// Optimal unambiguous POVM for `phi1` (prior `s`) against `phi2` (prior
/// `t`) on their span, for arbitrary full-space vectors.
pub fn unambiguous_povm_vectors(phi1: &DVector<C64>, phi2: &DVector<C64>, s: f64, t: f64) -> Result<FullPovm> {
    let (n1, n2) = (phi1.norm(), phi2.norm());
    if (n1 - 1.0).abs() > 1e-12 || (n2 - 1.0).abs() > 1e-12 || phi1.len() != phi2.len() {
        return Err(Error::Validation(
            "states must be normalized and of equal dimension".into(),
        ));
    }
    let ov = phi1.dotc(phi2);
    let c = ov.norm();
    if 1.0 - c < ORTHOGONAL_TOL {
        return Err(Error::IndistinguishableStates { fidelity: c });
    }
    let (a1, a2) = unambiguous_coefficients(c, s, t)?;
    // phases chosen so <Phi2_perp|Phi1> and <Phi1_perp|Phi2> are nonnegative
    let phi2_perp = (phi1 - phi2 * ov.conj()).normalize();
    let phi1_perp = (phi2 - phi1 * ov).normalize();
    let p1 = outer(phi1, phi1) + outer(&phi1_perp, &phi1_perp);
    let e1 = outer(&phi2_perp, &phi2_perp) * C64::from(a1);
    let e2 = outer(&phi1_perp, &phi1_perp) * C64::from(a2);
    let e3 = p1 - &e1 - &e2;
    Ok(FullPovm { elements: [e1, e2, e3] })
}

/// Rank-one triple `E1 = a1 |Phi2_perp><Phi2_perp|`, `E2 = a2 |Phi1_perp><Phi1_perp|`,
/// `E3 = P - E1 - E2` on the span of the two states.
pub fn global_unambiguous_povm(phi1: &BipartiteState, phi2: &BipartiteState, s: f64, t: f64) -> Result<FullPovm> {
    if phi1.dims() != phi2.dims() {
        return Err(Error::Domain("states live in different spaces".into()));
    }
    unambiguous_povm_vectors(&phi1.vector(), &phi2.vector(), s, t)
}

fn rank_one_parts(e: &Observable2, name: &str) -> Result<(f64, PureState)> {
    let len = e.beta.norm();
    if e.alpha - len > REPRESENTABLE_TOL {
        return Err(Error::NotRepresentable(format!(
            "{name} has rank 2 (eigenvalues {:?})",
            e.eigenvalues()
        )));
    }
    if len < REPRESENTABLE_TOL {
        return Err(Error::NotRepresentable(format!("{name} vanishes")));
    }
    let dir = BlochVector::from_vector(e.beta / len)?;
    Ok((2.0 * e.alpha, PureState::from_bloch(&dir)))
}

/// Reads a rank-one triple `E_mu = b_mu |psi_mu><psi_mu|` as the optimal
/// unambiguous POVM of `psi2_perp` against `psi1_perp`.
pub fn povm_to_unambiguous(povm: &Povm3) -> Result<UnambiguousProblem> {
    povm.validate()?;
    let (b1, psi1) = rank_one_parts(&povm.e1, "E1")?;
    let (b2, psi2) = rank_one_parts(&povm.e2, "E2")?;
    if povm.e3.alpha - povm.e3.beta.norm() > REPRESENTABLE_TOL {
        return Err(Error::NotRepresentable("E3 has rank 2".into()));
    }
    let top = (povm.e1 + povm.e2).eigenvalues().1;
    if (top - 1.0).abs() > REPRESENTABLE_TOL {
        return Err(Error::NotRepresentable(format!(
            "greatest eigenvalue of E1 + E2 is {top}, expected 1"
        )));
    }
    let c = psi1.inner(&psi2).norm();
    if 1.0 - c < ORTHOGONAL_TOL {
        return Err(Error::NotRepresentable("E1 and E2 are parallel".into()));
    }
    let r = if c < ORTHOGONAL_TOL {
        1.0
    } else {
        (1.0 - b1 * (1.0 - c * c)) / c
    };
    if r <= 0.0 || r < c - REPRESENTABLE_TOL || 1.0 / r < c - REPRESENTABLE_TOL {
        return Err(Error::NotRepresentable(format!(
            "ratio r = {r} violates r, 1/r >= |<psi1|psi2>| = {c}"
        )));
    }
    let s = 1.0 / (1.0 + r * r);
    let t = r * r / (1.0 + r * r);
    let psi1_perp = psi1.orthogonal();
    let psi2_perp = psi2.orthogonal();
    let ov = psi2_perp.inner(&psi1_perp);
    let psi1_perp = if ov.norm() > 0.0 {
        psi1_perp.with_phase(-ov.arg())
    } else {
        psi1_perp
    };
    Ok(UnambiguousProblem {
        psi1_perp,
        psi2_perp,
        s,
        t,
        r,
        b: [b1, b2],
        overlap: c,
    })
}

/// Rank-one triple on the qubit subspace from an unambiguous problem; the
/// inverse of [`povm_to_unambiguous`].
pub fn unambiguous_to_povm(problem: &UnambiguousProblem) -> Result<Povm3> {
    let to_vec = |p: &PureState| DVector::from_column_slice(&p.amplitudes());
    let full = unambiguous_povm_vectors(
        &to_vec(&problem.psi2_perp),
        &to_vec(&problem.psi1_perp),
        problem.s,
        problem.t,
    )?;
    let [e1, e2, _] = full
        .elements
        .map(|m| Observable2::from_matrix(&nalgebra::Matrix2::from_fn(|i, j| m[(i, j)])));
    let povm = Povm3::completed(e1, e2)?;
    if !povm.e3.is_psd(POVM_TOL) {
        return Err(Error::Validation("completed E3 is not positive".into()));
    }
    Ok(povm)
}
