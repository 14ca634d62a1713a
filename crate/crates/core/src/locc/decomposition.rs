//! Numerical search for Alice's ancilla-assisted measurement basis.
//!
//! Appending an ancilla `R` in state `|0>` to Alice, a basis `{|I>}` of
//! `RA` is encoded by the isometry `W_{I a} = <I|0, a>`. Row `I` of
//! `W M_1` is `sqrt(s_I) eta_I` and row `I` of `W M_2` is
//! `sqrt(t_I) gamma_I`, so the reconstruction holds by construction and the
//! search only has to meet the per-branch overlap conditions, written in
//! terms of `q_I = sqrt(s_I t_I) <eta_I|gamma_I> = (W M_2 M_1^dagger W^dagger)_{II}`:
//! `Im q_I = 0` and `0 <= Re q_I <= min(lambda s_I, t_I / lambda)` with
//! `lambda = sqrt(s / t)`.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::bipartite::BipartiteState;
use crate::{Error, Exec, Result, C64};

/// Acceptance threshold on the largest branch violation.
pub const ACCEPT_TOL: f64 = 1e-9;
/// Tolerance for every invariant of an accepted decomposition.
pub const DECOMPOSITION_TOL: f64 = 1e-9;
/// Branch weights below this carry no state.
pub const ZERO_BRANCH: f64 = 1e-24;
const TARGET: f64 = 1e-14;
const MAX_ITERATIONS: usize = 300;
const BATCH: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SearchOptions {
    /// Dimension of the ancilla appended to Alice (1 means none).
    pub ancilla_dim: usize,
    /// Cap on residual evaluations across all starts.
    pub budget: usize,
    pub seed: u64,
    pub exec: Exec,
}

impl Default for SearchOptions {
    fn default() -> Self {
        SearchOptions {
            ancilla_dim: 2,
            budget: 200_000,
            seed: 0,
            exec: Exec::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AliceDecomposition {
    pub dims: (usize, usize),
    pub ancilla_dim: usize,
    /// Orthonormal basis `|I>` of `RA`, index `r * d_A + a`.
    pub alice_states: Vec<DVector<C64>>,
    pub weights_s: Vec<f64>,
    pub weights_t: Vec<f64>,
    pub bob_eta: Vec<DVector<C64>>,
    pub bob_gamma: Vec<DVector<C64>>,
    /// Search effort spent, zero for decompositions built by hand.
    pub evaluations: usize,
}

/// Per-branch distance to the overlap bounds; negative means violated.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BranchSlack {
    pub s_i: f64,
    pub t_i: f64,
    /// `<eta_I|gamma_I>` (zero when either weight vanishes).
    pub overlap: f64,
    /// `Re q_I`.
    pub lower: f64,
    /// `min(lambda s_I, t_I / lambda) - Re q_I`.
    pub upper: f64,
    pub imaginary: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecompositionCheck {
    pub reconstruction: f64,
    pub orthonormality: f64,
    pub weight_sums: [f64; 2],
    pub branches: Vec<BranchSlack>,
    pub worst_violation: f64,
}

impl DecompositionCheck {
    pub fn is_valid(&self, tol: f64) -> bool {
        self.reconstruction <= tol
            && self.orthonormality <= tol
            && self.weight_sums.iter().all(|w| (w - 1.0).abs() <= tol)
            && self.worst_violation <= tol
    }
}

impl AliceDecomposition {
    pub fn branches(&self) -> usize {
        self.alice_states.len()
    }

    pub fn q(&self, i: usize) -> C64 {
        self.bob_eta[i].dotc(&self.bob_gamma[i]) * (self.weights_s[i] * self.weights_t[i]).sqrt()
    }

    /// Verifies every invariant against the states it claims to decompose.
    pub fn check(&self, phi1: &BipartiteState, phi2: &BipartiteState, s: f64, t: f64) -> Result<DecompositionCheck> {
        let (da, db) = self.dims;
        if phi1.dims() != self.dims || phi2.dims() != self.dims {
            return Err(Error::Domain(
                "decomposition and states have different dimensions".into(),
            ));
        }
        let n = self.ancilla_dim * da;
        let nb = self.branches();
        if nb != n
            || self.weights_s.len() != nb
            || self.weights_t.len() != nb
            || self.bob_eta.len() != nb
            || self.bob_gamma.len() != nb
        {
            return Err(Error::Validation("decomposition has inconsistent branch counts".into()));
        }
        let mut orthonormality: f64 = 0.0;
        for i in 0..nb {
            for j in 0..nb {
                let g = self.alice_states[i].dotc(&self.alice_states[j]);
                let target = if i == j { 1.0 } else { 0.0 };
                orthonormality = orthonormality.max((g - C64::from(target)).norm());
            }
        }
        let mut reconstruction: f64 = 0.0;
        for (m, w, bob) in [
            (phi1.amplitudes(), &self.weights_s, &self.bob_eta),
            (phi2.amplitudes(), &self.weights_t, &self.bob_gamma),
        ] {
            // sum_I sqrt(w_I) |I> (x) |bob_I> against |0>_R (x) |Phi>
            let mut total = DMatrix::<C64>::zeros(n, db);
            for i in 0..nb {
                total += &self.alice_states[i] * bob[i].transpose() * C64::from(w[i].sqrt());
            }
            for k in 0..n {
                for b in 0..db {
                    let target = if k < da { m[(k, b)] } else { C64::from(0.0) };
                    reconstruction = reconstruction.max((total[(k, b)] - target).norm());
                }
            }
        }
        let lambda = (s / t).sqrt();
        let mut worst: f64 = 0.0;
        let branches: Vec<BranchSlack> = (0..nb)
            .map(|i| {
                let (si, ti) = (self.weights_s[i], self.weights_t[i]);
                let q = self.q(i);
                let slack = BranchSlack {
                    s_i: si,
                    t_i: ti,
                    overlap: if si > ZERO_BRANCH && ti > ZERO_BRANCH {
                        self.bob_eta[i].dotc(&self.bob_gamma[i]).re
                    } else {
                        0.0
                    },
                    lower: q.re,
                    upper: (lambda * si).min(ti / lambda) - q.re,
                    imaginary: q.im,
                };
                worst = worst.max(-slack.lower).max(-slack.upper).max(slack.imaginary.abs());
                slack
            })
            .collect();
        for v in self.bob_eta.iter().chain(&self.bob_gamma) {
            worst = worst.max((v.norm() - 1.0).abs());
        }
        Ok(DecompositionCheck {
            reconstruction,
            orthonormality,
            weight_sums: [self.weights_s.iter().sum(), self.weights_t.iter().sum()],
            branches,
            worst_violation: worst,
        })
    }
}

/// `Z (Z^dagger Z)^(-1/2)`, the isometry closest to `Z`.
fn polar_isometry(z: &DMatrix<C64>) -> Option<DMatrix<C64>> {
    let gram = z.adjoint() * z;
    let eig = gram.symmetric_eigen();
    if eig.eigenvalues.min() <= 1e-300 {
        return None;
    }
    let inv_sqrt = DMatrix::from_diagonal(&eig.eigenvalues.map(|l| C64::from(1.0 / l.sqrt())));
    Some(z * &eig.eigenvectors * inv_sqrt * eig.eigenvectors.adjoint())
}

fn unpack(x: &[f64], n: usize, da: usize) -> DMatrix<C64> {
    DMatrix::from_fn(n, da, |i, j| {
        let k = 2 * (i * da + j);
        C64::new(x[k], x[k + 1])
    })
}

struct Problem<'a> {
    m1: &'a DMatrix<C64>,
    m2: &'a DMatrix<C64>,
    /// `M_2 M_1^dagger`.
    cross: DMatrix<C64>,
    n: usize,
    da: usize,
    lambda: f64,
}

impl Problem<'_> {
    fn residual(&self, x: &[f64]) -> Option<Vec<f64>> {
        let w = polar_isometry(&unpack(x, self.n, self.da))?;
        let a = &w * self.m1;
        let b = &w * self.m2;
        let q = &w * &self.cross * w.adjoint();
        let mut r = Vec::with_capacity(4 * self.n);
        for i in 0..self.n {
            let si = a.row(i).norm_squared();
            let ti = b.row(i).norm_squared();
            let qi = q[(i, i)];
            r.push(qi.im);
            r.push(qi.re.min(0.0));
            r.push((self.lambda * si - qi.re).min(0.0));
            r.push((ti / self.lambda - qi.re).min(0.0));
        }
        Some(r)
    }
}

fn max_abs(r: &[f64]) -> f64 {
    r.iter().fold(0.0, |m, v| m.max(v.abs()))
}

struct StartResult {
    x: Vec<f64>,
    worst: f64,
    evaluations: usize,
}

/// Levenberg-Marquardt on the branch violations with a central-difference
/// Jacobian.
fn levenberg_marquardt(prob: &Problem, mut x: Vec<f64>, budget: usize) -> StartResult {
    let p = x.len();
    let mut evaluations = 1;
    let Some(mut r) = prob.residual(&x) else {
        return StartResult {
            x,
            worst: f64::INFINITY,
            evaluations,
        };
    };
    let mut cost: f64 = r.iter().map(|v| v * v).sum();
    let mut mu = 1e-3;
    for _ in 0..MAX_ITERATIONS {
        if max_abs(&r) <= TARGET || evaluations + 2 * p + 1 > budget || mu > 1e14 {
            break;
        }
        let h = 1e-7;
        let mut jac = DMatrix::<f64>::zeros(r.len(), p);
        let mut broken = false;
        for k in 0..p {
            let mut xp = x.clone();
            xp[k] += h;
            let mut xm = x.clone();
            xm[k] -= h;
            evaluations += 2;
            match (prob.residual(&xp), prob.residual(&xm)) {
                (Some(rp), Some(rm)) => {
                    for (row, (a, b)) in rp.iter().zip(&rm).enumerate() {
                        jac[(row, k)] = (a - b) / (2.0 * h);
                    }
                }
                _ => broken = true,
            }
        }
        if broken {
            break;
        }
        let rv = DVector::from_column_slice(&r);
        let jtj = jac.transpose() * &jac;
        let grad = jac.transpose() * rv;
        let mut improved = false;
        while mu <= 1e14 && evaluations < budget {
            let mut a = jtj.clone();
            for k in 0..p {
                a[(k, k)] += mu * (1.0 + jtj[(k, k)]);
            }
            let Some(step) = a.cholesky().map(|c| c.solve(&(-&grad))) else {
                mu *= 10.0;
                continue;
            };
            let trial: Vec<f64> = x.iter().zip(step.iter()).map(|(a, b)| a + b).collect();
            evaluations += 1;
            match prob.residual(&trial) {
                Some(rt) => {
                    let ct: f64 = rt.iter().map(|v| v * v).sum();
                    if ct < cost {
                        x = trial;
                        r = rt;
                        cost = ct;
                        mu = (mu / 3.0).max(1e-15);
                        improved = true;
                        break;
                    }
                    mu *= 4.0;
                }
                None => mu *= 4.0,
            }
        }
        if !improved {
            break;
        }
    }
    StartResult {
        worst: max_abs(&r),
        x,
        evaluations,
    }
}

fn random_start(len: usize, seed: u64, start: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(start);
    (0..len).map(|_| StandardNormal.sample(&mut rng)).collect()
}

/// Extends the orthonormal columns of `w` to a unitary.
fn complete_unitary(w: &DMatrix<C64>) -> DMatrix<C64> {
    let n = w.nrows();
    let mut cols: Vec<DVector<C64>> = w.column_iter().map(|c| c.into_owned()).collect();
    for e in 0..n {
        if cols.len() == n {
            break;
        }
        let mut v = DVector::<C64>::zeros(n);
        v[e] = C64::from(1.0);
        // two passes of Gram-Schmidt for stability
        for _ in 0..2 {
            for c in &cols {
                let proj = c.dotc(&v);
                v -= c * proj;
            }
        }
        let norm = v.norm();
        if norm > 1e-8 {
            cols.push(v / C64::from(norm));
        }
    }
    DMatrix::from_columns(&cols)
}

fn bob_vector(row: DVector<C64>, weight: f64) -> Option<DVector<C64>> {
    (weight > ZERO_BRANCH).then(|| row / C64::from(weight.sqrt()))
}

/// Any unit vector orthogonal to `v`, or `e_0` when `v` is absent or the
/// space is one-dimensional.
fn orthogonal_to(v: Option<&DVector<C64>>, db: usize) -> DVector<C64> {
    let mut e0 = DVector::<C64>::zeros(db);
    e0[0] = C64::from(1.0);
    let Some(v) = v else { return e0 };
    for k in 0..db {
        let mut e = DVector::<C64>::zeros(db);
        e[k] = C64::from(1.0);
        let w = &e - v * v.dotc(&e);
        if w.norm() > 0.5 {
            return w.normalize();
        }
    }
    e0
}

fn assemble(
    phi1: &BipartiteState,
    phi2: &BipartiteState,
    w: &DMatrix<C64>,
    ancilla_dim: usize,
    evaluations: usize,
) -> AliceDecomposition {
    let (da, db) = phi1.dims();
    let u = complete_unitary(w);
    let n = u.nrows();
    let a = w * phi1.amplitudes();
    let b = w * phi2.amplitudes();
    let mut dec = AliceDecomposition {
        dims: (da, db),
        ancilla_dim,
        alice_states: Vec::with_capacity(n),
        weights_s: Vec::with_capacity(n),
        weights_t: Vec::with_capacity(n),
        bob_eta: Vec::with_capacity(n),
        bob_gamma: Vec::with_capacity(n),
        evaluations,
    };
    for i in 0..n {
        dec.alice_states.push(u.row(i).adjoint());
        let (si, ti) = (a.row(i).norm_squared(), b.row(i).norm_squared());
        let eta = bob_vector(a.row(i).transpose(), si);
        let gamma = bob_vector(b.row(i).transpose(), ti);
        let (eta, gamma) = match (eta, gamma) {
            (Some(e), Some(g)) => (e, g),
            (Some(e), None) => {
                let g = orthogonal_to(Some(&e), db);
                (e, g)
            }
            (None, Some(g)) => (orthogonal_to(Some(&g), db), g),
            (None, None) => (orthogonal_to(None, db), orthogonal_to(None, db)),
        };
        dec.weights_s.push(if si > ZERO_BRANCH { si } else { 0.0 });
        dec.weights_t.push(if ti > ZERO_BRANCH { ti } else { 0.0 });
        dec.bob_eta.push(eta);
        dec.bob_gamma.push(gamma);
    }
    dec
}

/// Searches for Alice's basis by seeded multi-start Levenberg-Marquardt.
///
/// Starts run in fixed batches; the first batch containing an accepted
/// start wins, and within it the lowest start index, so the result does
/// not depend on the worker count.
pub fn find_alice_decomposition(
    phi1: &BipartiteState,
    phi2: &BipartiteState,
    s: f64,
    t: f64,
    opts: SearchOptions,
) -> Result<AliceDecomposition> {
    if phi1.dims() != phi2.dims() {
        return Err(Error::Domain("states live in different spaces".into()));
    }
    if opts.ancilla_dim == 0 || opts.ancilla_dim > 4 {
        return Err(Error::Domain(format!(
            "ancilla dimension must lie in 1..=4, got {}",
            opts.ancilla_dim
        )));
    }
    if !(s > 0.0 && t > 0.0) || (s + t - 1.0).abs() > 1e-12 {
        return Err(Error::Domain(format!(
            "priors must be positive and sum to 1 (s={s}, t={t})"
        )));
    }
    let ov = phi1.inner(phi2);
    if ov.im.abs() > 1e-12 || ov.re < -1e-12 {
        return Err(Error::Domain(format!(
            "phases must make <Phi1|Phi2> real and nonnegative, got {ov}"
        )));
    }
    let c = ov.norm();
    let lambda = (s / t).sqrt();
    if lambda < c - 1e-9 || 1.0 / lambda < c - 1e-9 {
        return Err(Error::Regime(format!(
            "sqrt(s/t) = {lambda} and its reciprocal must both be at least {c}"
        )));
    }
    let (da, _) = phi1.dims();
    let n = opts.ancilla_dim * da;
    let prob = Problem {
        m1: phi1.amplitudes(),
        m2: phi2.amplitudes(),
        cross: phi2.amplitudes() * phi1.amplitudes().adjoint(),
        n,
        da,
        lambda,
    };
    let params = 2 * n * da;
    let per_start = (params + 1) * 2 * MAX_ITERATIONS / 4;
    let mut used = 0usize;
    let mut best_worst = f64::INFINITY;
    let mut batch = 0u64;
    while used < opts.budget {
        let remaining = opts.budget - used;
        let starts = BATCH.min(remaining.div_ceil(per_start)).max(1);
        let cap = per_start.min(remaining.div_ceil(starts)).max(2 * params + 2);
        let results = opts.exec.map(starts, |k| {
            let start = batch * BATCH as u64 + k as u64;
            levenberg_marquardt(&prob, random_start(params, opts.seed, start), cap)
        });
        batch += 1;
        used += results.iter().map(|r| r.evaluations).sum::<usize>();
        for res in &results {
            best_worst = best_worst.min(res.worst);
        }
        if let Some(res) = results.into_iter().find(|r| r.worst <= ACCEPT_TOL) {
            let w = polar_isometry(&unpack(&res.x, n, da)).expect("accepted start has full rank");
            let dec = assemble(phi1, phi2, &w, opts.ancilla_dim, used);
            let check = dec.check(phi1, phi2, s, t)?;
            if check.is_valid(DECOMPOSITION_TOL) {
                return Ok(dec);
            }
            best_worst = best_worst.min(check.worst_violation.max(check.reconstruction));
        }
    }
    Err(Error::SearchFailure {
        evaluations: used,
        best_residual: best_worst,
        worst_branch_violation: best_worst,
    })
}
