use nalgebra::{Matrix2, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::nelder_mead::{minimize, NelderMeadOptions};
use super::{Argmax, OracleResult};
use crate::linalg::{Observable2, StatePair};
use crate::margin::{ConditionKind, MarginCondition};
use crate::{Error, Exec, Result, C64};

/// Violation allowed for a recorded candidate. Far below the reported
/// tolerance: near `m = 0` the attainable value grows like the square root
/// of the allowed violation.
const RECORD_TOL: f64 = 1e-13;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeneralOptions {
    pub starts: usize,
    /// Penalty rounds; the weight grows tenfold per round.
    pub rounds: usize,
    pub exec: Exec,
}

impl Default for GeneralOptions {
    fn default() -> Self {
        GeneralOptions {
            starts: 8,
            rounds: 20,
            exec: Exec::default(),
        }
    }
}

fn unpack(p: &[f64]) -> (f64, Vector3<f64>, f64, Vector3<f64>) {
    (
        p[0],
        Vector3::new(p[1], p[2], p[3]),
        p[4],
        Vector3::new(p[5], p[6], p[7]),
    )
}

/// `p = (tr[E1 rho1] + tr[E2 rho2]) / 2` for `p = (alpha1, beta1, alpha2, beta2)`.
pub fn general_objective(p: &[f64], pair: &StatePair) -> f64 {
    let (a1, b1, a2, b2) = unpack(p);
    let (n1, n2) = (pair.n1().as_vector(), pair.n2().as_vector());
    0.5 * (a1 + b1.dot(n1) + a2 + b2.dot(n2))
}

/// Constraint values, all required `<= 0`: positivity of `E1`, `E2`,
/// `I - E1 - E2`, then the margin conditions.
pub fn general_constraints(p: &[f64], pair: &StatePair, cond: MarginCondition) -> Vec<f64> {
    let (a1, b1, a2, b2) = unpack(p);
    let (n1, n2) = (pair.n1().as_vector(), pair.n2().as_vector());
    let mut g = vec![b1.norm() - a1, b2.norm() - a2, a1 + a2 + (b1 + b2).norm() - 1.0];
    let m = cond.m;
    // P(E_mu, rho_a) up to the common factor 1/2
    let e1_wrong = a1 + b1.dot(n2);
    let e2_wrong = a2 + b2.dot(n1);
    match cond.kind {
        ConditionKind::Strong => {
            g.push(e1_wrong - m * (2.0 * a1 + b1.dot(&(n1 + n2))));
            g.push(e2_wrong - m * (2.0 * a2 + b2.dot(&(n1 + n2))));
        }
        ConditionKind::Weak => g.push(0.5 * (e1_wrong + e2_wrong) - m),
    }
    g
}

fn max_violation(p: &[f64], pair: &StatePair, cond: MarginCondition) -> f64 {
    general_constraints(p, pair, cond)
        .into_iter()
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Penalty terms. The cone constraints `|v| <= a` enter as `a >= 0` and
/// `|v|^2 <= a^2`, which describe the same set without the kink of the
/// norm at `v = 0`.
fn penalty(p: &[f64], pair: &StatePair, cond: MarginCondition) -> f64 {
    let (a1, b1, a2, b2) = unpack(p);
    let cone = |a: f64, v: Vector3<f64>| {
        let neg = (-a).max(0.0);
        let gap = (v.norm_squared() - a * a).max(0.0);
        neg * neg + gap * gap
    };
    let margin: f64 = general_constraints(p, pair, cond)[3..]
        .iter()
        .map(|g| g.max(0.0).powi(2))
        .sum();
    cone(a1, b1) + cone(a2, b2) + cone(1.0 - a1 - a2, -(b1 + b2)) + margin
}

/// Maps a near-feasible point to an exactly feasible one:
/// clips each `beta_i` into its cone, squeezes each element by the
/// congruence `K E K` with `K = I - kappa |wrong><wrong|` (which keeps it
/// positive and only lowers the weight on the wrong state) until the
/// margin condition holds, and finally shrinks toward the origin until
/// `E1 + E2 <= I`.
fn repair(p: &[f64], pair: &StatePair, cond: MarginCondition) -> Vec<f64> {
    let mut elements = [0, 4].map(|off| {
        let a = p[off].max(0.0);
        let b = Vector3::new(p[off + 1], p[off + 2], p[off + 3]);
        let len = b.norm();
        Observable2::new(a, if len > a { b * (a / len) } else { b })
    });
    // wrong state for E1 is phi2 and vice versa
    let wrong = [pair.phi2(), pair.phi1()].map(|psi| Observable2::projector(psi).matrix());
    let squeeze = |e: &Observable2, w: &Matrix2<C64>, kappa: f64| {
        let k = Matrix2::identity() - w * C64::from(kappa);
        Observable2::from_matrix(&(k * e.matrix() * k))
    };
    let violation = |els: &[Observable2; 2]| {
        let mut q = Vec::with_capacity(8);
        for e in els {
            q.extend_from_slice(&[e.alpha, e.beta.x, e.beta.y, e.beta.z]);
        }
        general_constraints(&q, pair, cond)[3..]
            .iter()
            .fold(f64::NEG_INFINITY, |m, g| m.max(*g))
    };
    let fix = |els: [Observable2; 2], which: [bool; 2]| -> [Observable2; 2] {
        let at = |kappa: f64| {
            let mut out = els;
            for i in 0..2 {
                if which[i] {
                    out[i] = squeeze(&els[i], &wrong[i], kappa);
                }
            }
            out
        };
        if violation(&els) <= 0.0 {
            return els;
        }
        let (mut lo, mut hi) = (0.0, 1.0);
        for _ in 0..80 {
            let mid = 0.5 * (lo + hi);
            if violation(&at(mid)) <= 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        at(hi)
    };
    elements = match cond.kind {
        ConditionKind::Strong => {
            // the two conditions are independent; fix them one at a time
            let first = fix([elements[0], Observable2::zero()], [true, false]);
            let second = fix([Observable2::zero(), elements[1]], [false, true]);
            [first[0], second[1]]
        }
        ConditionKind::Weak => fix(elements, [true, true]),
    };
    let [e1, e2] = elements;
    let top = (e1 + e2).eigenvalues().1;
    // rescale onto the boundary of E1 + E2 <= I; the strong conditions are
    // homogeneous, the weak one caps growth by its slack
    let mut k = if top > 1e-300 { 1.0 / top } else { 1.0 };
    if cond.kind == ConditionKind::Weak && k > 1.0 {
        let wrong_mass = 0.5 * (e1.expectation(pair.n2()) + e2.expectation(pair.n1()));
        if wrong_mass > 0.0 {
            k = k.min(cond.m / wrong_mass).max(1.0);
        }
    }
    let mut q = Vec::with_capacity(8);
    for e in [e1 * k, e2 * k] {
        q.extend_from_slice(&[e.alpha, e.beta.x, e.beta.y, e.beta.z]);
    }
    q
}

struct StartOutcome {
    best: Option<(f64, Vec<f64>)>,
    evaluations: usize,
}

fn run_start(
    pair: &StatePair,
    cond: MarginCondition,
    budget: usize,
    rounds: usize,
    seed: u64,
    start: usize,
) -> StartOutcome {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(start as u64);
    let mut x = Vec::with_capacity(8);
    for _ in 0..2 {
        let a: f64 = rng.random_range(0.0..0.5);
        let dir = Vector3::new(
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        );
        let len: f64 = rng.random_range(0.0..1.0) * a;
        let b = if dir.norm() > 1e-12 {
            dir.normalize() * len
        } else {
            Vector3::zeros()
        };
        x.extend_from_slice(&[a, b.x, b.y, b.z]);
    }

    // half the budget goes to the penalty rounds, half to the polish on
    // repaired points
    let share = budget / 2 / rounds;
    let polish = budget - share * rounds;
    let mut evaluations = 0;
    let mut best: Option<(f64, Vec<f64>)> = None;
    for k in 0..rounds {
        let mu = 10f64.powi(k as i32);
        let penalized = |p: &[f64]| -general_objective(p, pair) + mu * penalty(p, pair, cond);
        // restart the simplex until the round's share is spent; a fresh
        // simplex escapes the collapse typical of penalized objectives
        let mut step = (0.1 * 0.5f64.powi(k as i32)).max(1e-7);
        let mut spent = 0;
        let mut fx = f64::INFINITY;
        let per_round = share.max(1);
        while spent < per_round {
            let opts = NelderMeadOptions {
                max_evals: per_round - spent,
                initial_step: step,
                ..NelderMeadOptions::default()
            };
            let res = minimize(penalized, &x, opts);
            spent += res.evaluations;
            let gain = fx - res.f;
            if res.f <= fx {
                x = res.x;
                fx = res.f;
            }
            if gain.abs() <= 1e-16 {
                break;
            }
            step = (step * 0.5).max(1e-9);
        }
        evaluations += spent;
        let fixed = repair(&x, pair, cond);
        if max_violation(&fixed, pair, cond) <= RECORD_TOL {
            let value = general_objective(&fixed, pair);
            if best.as_ref().is_none_or(|(v, _)| value > *v) {
                best = Some((value, fixed));
            }
        }
    }
    if let Some((_, start)) = &best {
        let mut x = start.clone();
        let mut fx = -general_objective(&x, pair);
        let mut step = 1e-3;
        let mut spent = 0;
        while spent < polish && step > 1e-12 {
            let opts = NelderMeadOptions {
                max_evals: polish - spent,
                initial_step: step,
                ..NelderMeadOptions::default()
            };
            let res = minimize(|p: &[f64]| -general_objective(&repair(p, pair, cond), pair), &x, opts);
            spent += res.evaluations;
            if res.f < fx {
                x = res.x;
                fx = res.f;
            } else {
                step *= 0.1;
            }
        }
        evaluations += spent;
        let fixed = repair(&x, pair, cond);
        if max_violation(&fixed, pair, cond) <= RECORD_TOL {
            let value = general_objective(&fixed, pair);
            if best.as_ref().is_none_or(|(v, _)| value > *v) {
                best = Some((value, fixed));
            }
        }
    }
    StartOutcome { best, evaluations }
}

/// Penalty-method simplex search over all eight Pauli coordinates of
/// `(E1, E2)`. `budget` caps the total number of objective evaluations.
pub fn oracle_general(pair: &StatePair, cond: MarginCondition, budget: usize, seed: u64) -> Result<OracleResult> {
    oracle_general_with(pair, cond, budget, seed, GeneralOptions::default())
}

pub fn oracle_general_with(
    pair: &StatePair,
    cond: MarginCondition,
    budget: usize,
    seed: u64,
    opts: GeneralOptions,
) -> Result<OracleResult> {
    if budget < 10_000 {
        return Err(Error::Domain(format!("budget must be at least 10000, got {budget}")));
    }
    if opts.starts == 0 || opts.rounds == 0 {
        return Err(Error::Domain("starts and rounds must be positive".into()));
    }
    let per_start = budget / opts.starts;
    let outcomes = opts
        .exec
        .map(opts.starts, |i| run_start(pair, cond, per_start, opts.rounds, seed, i));

    let mut evaluations = 0;
    let mut best = (0.0, vec![0.0; 8]);
    for o in outcomes {
        evaluations += o.evaluations;
        if let Some((v, x)) = o.best {
            if v > best.0 {
                best = (v, x);
            }
        }
    }
    let mut params = [0.0; 8];
    params.copy_from_slice(&best.1);
    Ok(OracleResult {
        p_best: best.0,
        argmax: Argmax::General { params },
        evaluations,
        feasible: true,
    })
}

#[cfg(test)]
mod tests {
    use super::super::ORACLE_FEASIBILITY_TOL;
    use super::*;
    use crate::margin::success;

    #[test]
    fn general_oracle_examples() {
        let pair = StatePair::from_fidelity(0.9).unwrap();
        let r = oracle_general(&pair, MarginCondition::strong(0.1).unwrap(), 100_000, 7).unwrap();
        assert_close!(r.p_best, 0.225, 1e-4);
        assert!(r.evaluations <= 100_000 + 8 * 20 * 9);
        let r = oracle_general(&pair, MarginCondition::strong(1.0).unwrap(), 100_000, 7).unwrap();
        assert_close!(r.p_best, 0.71794, 1e-4);
        let pair = StatePair::from_fidelity(0.0).unwrap();
        let r = oracle_general(&pair, MarginCondition::strong(0.0).unwrap(), 100_000, 7).unwrap();
        assert_close!(r.p_best, 1.0, 1e-6);
    }

    #[test]
    fn argmax_is_feasible() {
        let pair = StatePair::from_fidelity(0.6).unwrap();
        for cond in [
            MarginCondition::strong(0.05).unwrap(),
            MarginCondition::weak(0.05).unwrap(),
        ] {
            let r = oracle_general(&pair, cond, 50_000, 3).unwrap();
            let Argmax::General { params } = r.argmax else { panic!() };
            assert!(max_violation(&params, &pair, cond) <= ORACLE_FEASIBILITY_TOL);
            assert_close!(r.p_best, general_objective(&params, &pair), 1e-15);
            assert_close!(r.p_best, success(0.6, cond).unwrap(), 1e-4);
        }
    }

    #[test]
    fn deterministic_and_thread_independent() {
        let pair = StatePair::from_fidelity(0.4).unwrap();
        let cond = MarginCondition::weak(0.02).unwrap();
        let seq = GeneralOptions {
            exec: Exec::Sequential,
            ..GeneralOptions::default()
        };
        let par = GeneralOptions {
            exec: Exec::Parallel,
            ..GeneralOptions::default()
        };
        let a = oracle_general_with(&pair, cond, 20_000, 11, seq).unwrap();
        let b = oracle_general_with(&pair, cond, 20_000, 11, par).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn rejects_small_budget() {
        let pair = StatePair::from_fidelity(0.4).unwrap();
        assert!(oracle_general(&pair, MarginCondition::weak(0.1).unwrap(), 100, 0).is_err());
    }

    #[test]
    fn feasible_set_is_convex() {
        let pair = StatePair::from_fidelity(0.8).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for cond in [
            MarginCondition::strong(0.3).unwrap(),
            MarginCondition::weak(0.1).unwrap(),
        ] {
            let mut feasible = Vec::new();
            while feasible.len() < 40 {
                let mut p = Vec::with_capacity(8);
                for _ in 0..2 {
                    let a: f64 = rng.random_range(0.0..0.25);
                    let b = Vector3::from_fn(|_, _| rng.random_range(-1.0..1.0)).normalize() * rng.random_range(0.0..a);
                    p.extend_from_slice(&[a, b.x, b.y, b.z]);
                }
                if max_violation(&p, &pair, cond) <= 0.0 {
                    feasible.push(p);
                }
            }
            for w in feasible.windows(2) {
                for lam in [0.1, 0.5, 0.9] {
                    let mix: Vec<f64> = w[0].iter().zip(&w[1]).map(|(a, b)| lam * a + (1.0 - lam) * b).collect();
                    assert!(max_violation(&mix, &pair, cond) <= 1e-15);
                }
            }
        }
    }
}
