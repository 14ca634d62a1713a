//! Two-dimensional operator algebra on the span of the two hypotheses.
//!
//! Operators are kept in the Pauli form `alpha·I + beta·sigma`, which makes
//! positivity (`alpha >= |beta|`), eigenvalues (`alpha ± |beta|`) and
//! expectations against a Bloch vector (`alpha + beta·n`) one-liners.

use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::{Matrix2, Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::{Error, Result, C64};

/// Tolerance for identities that hold exactly in real arithmetic.
pub const EXACT_TOL: f64 = 1e-12;
/// Tolerance for positivity/completeness of computed POVMs.
pub const POVM_TOL: f64 = 1e-10;

/// A normalized vector of C².
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[[f64; 2]; 2]", into = "[[f64; 2]; 2]")]
pub struct PureState {
    amps: [C64; 2],
}

impl PureState {
    /// Builds a state from amplitudes that must already be normalized.
    pub fn new(a: C64, b: C64) -> Result<Self> {
        let norm2 = a.norm_sqr() + b.norm_sqr();
        if !norm2.is_finite() || (norm2.sqrt() - 1.0).abs() > EXACT_TOL {
            return Err(Error::Validation(format!(
                "state norm must be 1 within {EXACT_TOL:e}, got {}",
                norm2.sqrt()
            )));
        }
        Ok(PureState { amps: [a, b] })
    }

    /// Normalizes the given amplitudes.
    pub fn normalized(a: C64, b: C64) -> Result<Self> {
        let norm = (a.norm_sqr() + b.norm_sqr()).sqrt();
        if !norm.is_finite() || norm < 1e-300 {
            return Err(Error::Validation("cannot normalize a zero vector".into()));
        }
        Ok(PureState {
            amps: [a / norm, b / norm],
        })
    }

    pub fn real(a: f64, b: f64) -> Result<Self> {
        Self::new(C64::new(a, 0.0), C64::new(b, 0.0))
    }

    /// The state whose Bloch vector is `n` (phase chosen so the first
    /// amplitude is real and nonnegative).
    pub fn from_bloch(n: &BlochVector) -> Self {
        let v = n.as_vector();
        let cos_half = ((1.0 + v.z) / 2.0).max(0.0).sqrt();
        let sin_half = ((1.0 - v.z) / 2.0).max(0.0).sqrt();
        let transverse = (v.x * v.x + v.y * v.y).sqrt();
        let phase = if transverse > 0.0 {
            C64::new(v.x / transverse, v.y / transverse)
        } else {
            C64::new(1.0, 0.0)
        };
        PureState {
            amps: [C64::new(cos_half, 0.0), phase * sin_half],
        }
    }

    pub fn amplitudes(&self) -> [C64; 2] {
        self.amps
    }

    /// `<self|other>`.
    pub fn inner(&self, other: &PureState) -> C64 {
        self.amps[0].conj() * other.amps[0] + self.amps[1].conj() * other.amps[1]
    }

    /// The state multiplied by a global phase `e^{i·theta}`.
    pub fn with_phase(&self, theta: f64) -> PureState {
        let p = C64::from_polar(1.0, theta);
        PureState {
            amps: [self.amps[0] * p, self.amps[1] * p],
        }
    }

    /// The orthogonal state `(-b*, a*)`.
    pub fn orthogonal(&self) -> PureState {
        PureState {
            amps: [-self.amps[1].conj(), self.amps[0].conj()],
        }
    }

    pub fn bloch(&self) -> BlochVector {
        bloch_from_state(self)
    }
}

impl TryFrom<[[f64; 2]; 2]> for PureState {
    type Error = Error;

    fn try_from(v: [[f64; 2]; 2]) -> Result<Self> {
        PureState::new(C64::new(v[0][0], v[0][1]), C64::new(v[1][0], v[1][1]))
    }
}

impl From<PureState> for [[f64; 2]; 2] {
    fn from(s: PureState) -> Self {
        [[s.amps[0].re, s.amps[0].im], [s.amps[1].re, s.amps[1].im]]
    }
}

/// Unit Bloch vector of a pure qubit state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlochVector(Vector3<f64>);

impl BlochVector {
    pub fn new(x: f64, y: f64, z: f64) -> Result<Self> {
        Self::from_vector(Vector3::new(x, y, z))
    }

    pub fn from_vector(n: Vector3<f64>) -> Result<Self> {
        if (n.norm() - 1.0).abs() > EXACT_TOL {
            return Err(Error::Validation(format!(
                "Bloch vector of a pure state must have unit length, got {}",
                n.norm()
            )));
        }
        Ok(BlochVector(n))
    }

    pub fn as_vector(&self) -> &Vector3<f64> {
        &self.0
    }
}

/// Bloch vector `n_k = <psi|sigma_k|psi>`.
pub fn bloch_from_state(psi: &PureState) -> BlochVector {
    let [a, b] = psi.amps;
    let cross = a.conj() * b;
    BlochVector(Vector3::new(
        2.0 * cross.re,
        2.0 * cross.im,
        a.norm_sqr() - b.norm_sqr(),
    ))
}

/// Hermitian operator `alpha·I + beta·sigma` on C².
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Observable2 {
    pub alpha: f64,
    #[serde(with = "vec3_serde")]
    pub beta: Vector3<f64>,
}

mod vec3_serde {
    use nalgebra::Vector3;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &Vector3<f64>, s: S) -> Result<S::Ok, S::Error> {
        [v.x, v.y, v.z].serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vector3<f64>, D::Error> {
        let [x, y, z] = <[f64; 3]>::deserialize(d)?;
        Ok(Vector3::new(x, y, z))
    }
}

impl Observable2 {
    pub fn new(alpha: f64, beta: Vector3<f64>) -> Self {
        Observable2 { alpha, beta }
    }

    pub fn identity() -> Self {
        Observable2::new(1.0, Vector3::zeros())
    }

    pub fn zero() -> Self {
        Observable2::new(0.0, Vector3::zeros())
    }

    /// Rank-one projector `|psi><psi| = (I + n·sigma)/2`.
    pub fn projector(psi: &PureState) -> Self {
        let n = psi.bloch();
        Observable2::new(0.5, n.as_vector() * 0.5)
    }

    /// `(alpha - |beta|, alpha + |beta|)`.
    pub fn eigenvalues(&self) -> (f64, f64) {
        let r = self.beta.norm();
        (self.alpha - r, self.alpha + r)
    }

    pub fn is_psd(&self, tol: f64) -> bool {
        self.eigenvalues().0 >= -tol
    }

    /// Number of eigenvalues above `tol`.
    pub fn rank(&self, tol: f64) -> usize {
        let (lo, hi) = self.eigenvalues();
        usize::from(lo > tol) + usize::from(hi > tol)
    }

    pub fn expectation(&self, n: &BlochVector) -> f64 {
        expectation(self, n)
    }

    pub fn matrix(&self) -> Matrix2<C64> {
        operator_matrix(self)
    }

    /// Pauli coordinates of the Hermitian part of `m`.
    pub fn from_matrix(m: &Matrix2<C64>) -> Self {
        let off = (m[(1, 0)] + m[(0, 1)].conj()) * 0.5;
        Observable2::new(
            0.5 * (m[(0, 0)].re + m[(1, 1)].re),
            Vector3::new(off.re, off.im, 0.5 * (m[(0, 0)].re - m[(1, 1)].re)),
        )
    }

    /// Applies a real orthogonal map to the Bloch part.
    pub fn transformed(&self, o: &Matrix3<f64>) -> Self {
        Observable2::new(self.alpha, o * self.beta)
    }

    pub fn max_abs_diff(&self, other: &Observable2) -> f64 {
        (self.alpha - other.alpha).abs().max((self.beta - other.beta).amax())
    }
}

impl Add for Observable2 {
    type Output = Observable2;
    fn add(self, rhs: Self) -> Self {
        Observable2::new(self.alpha + rhs.alpha, self.beta + rhs.beta)
    }
}

impl Sub for Observable2 {
    type Output = Observable2;
    fn sub(self, rhs: Self) -> Self {
        Observable2::new(self.alpha - rhs.alpha, self.beta - rhs.beta)
    }
}

impl Neg for Observable2 {
    type Output = Observable2;
    fn neg(self) -> Self {
        Observable2::new(-self.alpha, -self.beta)
    }
}

impl Mul<f64> for Observable2 {
    type Output = Observable2;
    fn mul(self, k: f64) -> Self {
        Observable2::new(self.alpha * k, self.beta * k)
    }
}

/// `tr[E rho]` for `rho = (I + n·sigma)/2`.
pub fn expectation(e: &Observable2, n: &BlochVector) -> f64 {
    e.alpha + e.beta.dot(n.as_vector())
}

/// Dense 2×2 matrix of `alpha·I + sum_k beta_k sigma_k`.
pub fn operator_matrix(e: &Observable2) -> Matrix2<C64> {
    let [bx, by, bz] = [e.beta.x, e.beta.y, e.beta.z];
    Matrix2::new(
        C64::new(e.alpha + bz, 0.0),
        C64::new(bx, -by),
        C64::new(bx, by),
        C64::new(e.alpha - bz, 0.0),
    )
}

/// Reflection through the plane orthogonal to `n1 - n2`; it swaps the two
/// Bloch vectors.
pub fn reflection_about_bisector(n1: &BlochVector, n2: &BlochVector) -> Result<Matrix3<f64>> {
    let d = n1.as_vector() - n2.as_vector();
    let len = d.norm();
    if len < EXACT_TOL {
        return Err(Error::Validation(
            "reflection undefined for coincident Bloch vectors".into(),
        ));
    }
    let v = d / len;
    Ok(Matrix3::identity() - v * v.transpose() * 2.0)
}

/// The two hypotheses, with the phase of `phi2` fixed so that
/// `<phi1|phi2> >= 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StatePair {
    phi1: PureState,
    phi2: PureState,
    n1: BlochVector,
    n2: BlochVector,
    fidelity: f64,
}

impl StatePair {
    pub fn new(phi1: PureState, phi2: PureState) -> Result<Self> {
        let overlap = phi1.inner(&phi2);
        let fidelity = overlap.norm().min(1.0);
        if 1.0 - fidelity < EXACT_TOL {
            return Err(Error::IndistinguishableStates { fidelity });
        }
        let phi2 = if fidelity > 0.0 {
            phi2.with_phase(-overlap.arg())
        } else {
            phi2
        };
        Ok(StatePair {
            phi1,
            phi2,
            n1: phi1.bloch(),
            n2: phi2.bloch(),
            fidelity,
        })
    }

    /// Canonical pair with the given overlap: real amplitudes, Bloch vectors
    /// `(±sqrt(T), 0, F)` placed symmetrically about the z axis.
    pub fn from_fidelity(fidelity: f64) -> Result<Self> {
        check_fidelity(fidelity)?;
        let c = ((1.0 + fidelity) / 2.0).sqrt();
        let s = ((1.0 - fidelity) / 2.0).sqrt();
        let phi1 = PureState::real(c, s)?;
        let phi2 = PureState::real(c, -s)?;
        let t = 1.0 - fidelity * fidelity;
        let n1 = BlochVector(Vector3::new(t.sqrt(), 0.0, fidelity));
        let n2 = BlochVector(Vector3::new(-t.sqrt(), 0.0, fidelity));
        Ok(StatePair {
            phi1,
            phi2,
            n1,
            n2,
            fidelity,
        })
    }

    pub fn phi1(&self) -> &PureState {
        &self.phi1
    }

    pub fn phi2(&self) -> &PureState {
        &self.phi2
    }

    pub fn n1(&self) -> &BlochVector {
        &self.n1
    }

    pub fn n2(&self) -> &BlochVector {
        &self.n2
    }

    /// Bloch vector of hypothesis 1 or 2.
    pub fn bloch(&self, index: StateIndex) -> &BlochVector {
        match index {
            StateIndex::First => &self.n1,
            StateIndex::Second => &self.n2,
        }
    }

    /// `|<phi1|phi2>|`.
    pub fn fidelity(&self) -> f64 {
        self.fidelity
    }

    /// `S = |<phi1|phi2>|^2`.
    pub fn s(&self) -> f64 {
        self.fidelity * self.fidelity
    }

    /// `T = 1 - S`.
    pub fn t(&self) -> f64 {
        1.0 - self.s()
    }

    pub fn reflection(&self) -> Matrix3<f64> {
        reflection_about_bisector(&self.n1, &self.n2).expect("distinct Bloch vectors are guaranteed by fidelity < 1")
    }

    /// The same pair with the hypotheses exchanged.
    pub fn swapped(&self) -> StatePair {
        StatePair {
            phi1: self.phi2,
            phi2: self.phi1,
            n1: self.n2,
            n2: self.n1,
            fidelity: self.fidelity,
        }
    }
}

/// Which hypothesis a probability refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StateIndex {
    First,
    Second,
}

pub(crate) fn check_fidelity(fidelity: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&fidelity) {
        return Err(Error::Domain(format!("fidelity must lie in [0, 1), got {fidelity}")));
    }
    if fidelity >= 1.0 {
        return Err(Error::IndistinguishableStates { fidelity });
    }
    Ok(())
}

/// Three-outcome POVM: guess 1, guess 2, inconclusive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Povm3 {
    pub e1: Observable2,
    pub e2: Observable2,
    pub e3: Observable2,
}

impl Povm3 {
    pub fn new(e1: Observable2, e2: Observable2, e3: Observable2) -> Result<Self> {
        let povm = Povm3 { e1, e2, e3 };
        povm.validate()?;
        Ok(povm)
    }

    /// Completes `e1, e2` with `e3 = I - e1 - e2`.
    pub fn completed(e1: Observable2, e2: Observable2) -> Result<Self> {
        Self::new(e1, e2, Observable2::identity() - e1 - e2)
    }

    pub fn elements(&self) -> [Observable2; 3] {
        [self.e1, self.e2, self.e3]
    }

    /// Checks positivity of each element and completeness.
    pub fn validate(&self) -> Result<()> {
        for (k, e) in self.elements().iter().enumerate() {
            if !e.alpha.is_finite() || e.beta.iter().any(|b| !b.is_finite()) {
                return Err(Error::Validation(format!("E{} has non-finite entries", k + 1)));
            }
            let lo = e.eigenvalues().0;
            if lo < -POVM_TOL {
                return Err(Error::Validation(format!(
                    "E{} is not positive semidefinite (min eigenvalue {lo:.3e})",
                    k + 1
                )));
            }
        }
        let sum = self.e1 + self.e2 + self.e3;
        let dev = (sum.alpha - 1.0).abs().max(sum.beta.amax());
        if dev > POVM_TOL {
            return Err(Error::Validation(format!(
                "completeness E1+E2+E3 = I violated by {dev:.3e}"
            )));
        }
        Ok(())
    }

    /// Applies a real orthogonal map to every element.
    pub fn transformed(&self, o: &Matrix3<f64>) -> Self {
        Povm3 {
            e1: self.e1.transformed(o),
            e2: self.e2.transformed(o),
            e3: self.e3.transformed(o),
        }
    }
}
