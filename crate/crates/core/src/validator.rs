//! Probability functionals of a three-outcome measurement, recomputed from
//! the POVM and the states alone.

use serde::{Deserialize, Serialize};

use crate::linalg::{expectation, Observable2, Povm3, StateIndex, StatePair, POVM_TOL};
use crate::margin::{ConditionKind, MarginCondition};
use crate::{Error, Result};

/// Slack above which a margin condition counts as satisfied.
pub const FEASIBILITY_TOL: f64 = 1e-9;
/// Conditioning probabilities below this are treated as zero.
pub const ZERO_WEIGHT: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiscriminationReport {
    pub p_success: f64,
    /// `P(rho2 | E1)`: probability the state was 2 when the answer was 1.
    pub p_error_given_1: f64,
    /// `P(rho1 | E2)`.
    pub p_error_given_2: f64,
    pub p_mean_error: f64,
    pub p_inconclusive: f64,
    pub psd_ok: bool,
    pub complete_ok: bool,
    pub ranks: [usize; 3],
    /// Joint probabilities `P(E_mu, rho_a)` indexed `[a][mu]`.
    pub joint: [[f64; 3]; 2],
}

impl DiscriminationReport {
    /// Builds a report from the joint table `P(E_mu, rho_a)`.
    pub fn from_joint(joint: [[f64; 3]; 2], psd_ok: bool, complete_ok: bool, ranks: [usize; 3]) -> Self {
        let joint = joint.map(|row| row.map(|p| p.clamp(0.0, 1.0)));
        let outcome = |mu: usize| joint[0][mu] + joint[1][mu];
        let conditional = |num: f64, den: f64| if den < ZERO_WEIGHT { 0.0 } else { num / den };
        DiscriminationReport {
            p_success: joint[0][0] + joint[1][1],
            p_error_given_1: conditional(joint[1][0], outcome(0)),
            p_error_given_2: conditional(joint[0][1], outcome(1)),
            p_mean_error: joint[1][0] + joint[0][1],
            p_inconclusive: outcome(2),
            psd_ok,
            complete_ok,
            ranks,
            joint,
        }
    }

    /// `P(E_mu)` for `mu = 1, 2, 3`.
    pub fn outcome_probabilities(&self) -> [f64; 3] {
        [0, 1, 2].map(|mu| self.joint[0][mu] + self.joint[1][mu])
    }
}

/// `P(E, rho_a) = tr[E rho_a] / 2`.
pub fn joint_probability(e: &Observable2, state: StateIndex, pair: &StatePair) -> Result<f64> {
    if !e.is_psd(POVM_TOL) {
        return Err(Error::Validation(format!(
            "POVM element is not positive semidefinite (min eigenvalue {:.3e})",
            e.eigenvalues().0
        )));
    }
    Ok(0.5 * expectation(e, pair.bloch(state)))
}

pub fn evaluate(povm: &Povm3, pair: &StatePair) -> Result<DiscriminationReport> {
    povm.validate()?;
    let elements = povm.elements();
    let mut joint = [[0.0; 3]; 2];
    for (a, state) in [StateIndex::First, StateIndex::Second].into_iter().enumerate() {
        for (mu, e) in elements.iter().enumerate() {
            joint[a][mu] = joint_probability(e, state, pair)?;
        }
    }
    let ranks = elements.map(|e| e.rank(POVM_TOL));
    Ok(DiscriminationReport::from_joint(joint, true, true, ranks))
}

/// `m - max(conditional errors)` (strong) or `m - p_mean_error` (weak);
/// the condition holds iff the slack is at least `-FEASIBILITY_TOL`.
pub fn check_margin(report: &DiscriminationReport, cond: MarginCondition) -> f64 {
    match cond.kind {
        ConditionKind::Strong => cond.m - report.p_error_given_1.max(report.p_error_given_2),
        ConditionKind::Weak => cond.m - report.p_mean_error,
    }
}

pub fn is_feasible(slack: f64) -> bool {
    slack >= -FEASIBILITY_TOL
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::PureState;
    use crate::margin::{critical_margin, helstrom_povm, optimal_povm};
    use crate::C64;
    use nalgebra::{Matrix3, Rotation3, Vector3};
    use proptest::prelude::*;

    #[test]
    fn joint_probability_examples() {
        let pair = StatePair::from_fidelity(0.9).unwrap();
        let id = Observable2::identity();
        assert_close!(joint_probability(&id, StateIndex::First, &pair).unwrap(), 0.5, 1e-15);
        assert_close!(joint_probability(&id, StateIndex::Second, &pair).unwrap(), 0.5, 1e-15);
        let p1 = Observable2::projector(pair.phi1());
        assert_close!(joint_probability(&p1, StateIndex::First, &pair).unwrap(), 0.5, 1e-15);
        assert_close!(joint_probability(&p1, StateIndex::Second, &pair).unwrap(), 0.405, 1e-15);
        // same value from the dense trace
        let rho2 = Observable2::projector(pair.phi2()).matrix();
        let tr = (p1.matrix() * rho2).trace() * 0.5;
        assert_close!(tr.re, 0.405, 1e-15);

        let bad = Observable2::new(0.0, Vector3::z());
        assert!(joint_probability(&bad, StateIndex::First, &pair).is_err());
    }

    #[test]
    fn evaluate_examples() {
        let pair = StatePair::from_fidelity(0.7).unwrap();
        let abstain = Povm3::completed(Observable2::zero(), Observable2::zero()).unwrap();
        let rep = evaluate(&abstain, &pair).unwrap();
        assert_eq!(rep.p_success, 0.0);
        assert_close!(rep.p_inconclusive, 1.0, 1e-15);
        assert_eq!(rep.p_error_given_1, 0.0);

        let pair = StatePair::from_fidelity(0.9).unwrap();
        let rep = evaluate(&helstrom_povm(&pair), &pair).unwrap();
        assert_close!(rep.p_success, 0.717_944_947_177_033_7, 1e-15);
        assert_close!(rep.p_error_given_1, 0.282_055_052_822_966_3, 1e-15);

        let (povm, _) = optimal_povm(&pair, MarginCondition::strong(0.1).unwrap()).unwrap();
        let rep = evaluate(&povm, &pair).unwrap();
        assert_close!(rep.p_success, 0.225, 1e-10);
        let [pe1, pe2, _] = rep.outcome_probabilities();
        let p_cross = 0.1 * (pe1 + pe2);
        assert_close!(rep.p_mean_error, p_cross, 1e-10);
        assert_close!(rep.p_inconclusive, 1.0 - rep.p_success - p_cross, 1e-10);
    }

    #[test]
    fn evaluate_rejects_malformed_povm() {
        let pair = StatePair::from_fidelity(0.5).unwrap();
        let povm = Povm3 {
            e1: Observable2::identity(),
            e2: Observable2::identity(),
            e3: Observable2::zero(),
        };
        let err = evaluate(&povm, &pair).unwrap_err();
        assert!(err.to_string().contains("completeness"));
    }

    #[test]
    fn check_margin_examples() {
        let pair = StatePair::from_fidelity(0.9).unwrap();
        let (povm, _) = optimal_povm(&pair, MarginCondition::strong(0.0).unwrap()).unwrap();
        let rep = evaluate(&povm, &pair).unwrap();
        assert_close!(check_margin(&rep, MarginCondition::strong(0.0).unwrap()), 0.0, 1e-10);

        let rep = evaluate(&helstrom_povm(&pair), &pair).unwrap();
        let mc = critical_margin(0.9).unwrap();
        let slack = check_margin(&rep, MarginCondition::strong(0.2).unwrap());
        assert_close!(slack, 0.2 - mc, 1e-14);
        assert!(!is_feasible(slack));
        let slack = check_margin(&rep, MarginCondition::strong(0.3).unwrap());
        assert_close!(slack, 0.3 - mc, 1e-14);
        assert!(is_feasible(slack));
    }

    fn arb_pair() -> impl Strategy<Value = StatePair> {
        prop::array::uniform4(-1.0..1.0f64)
            .prop_flat_map(|a| (Just(a), prop::array::uniform4(-1.0..1.0f64)))
            .prop_filter_map("distinct", |(a, b)| {
                let p = PureState::normalized(C64::new(a[0], a[1]), C64::new(a[2], a[3])).ok()?;
                let q = PureState::normalized(C64::new(b[0], b[1]), C64::new(b[2], b[3])).ok()?;
                StatePair::new(p, q).ok().filter(|pair| pair.fidelity() < 0.999)
            })
    }

    /// Random POVM: two random PSD elements scaled so that E1 + E2 <= I.
    fn arb_povm() -> impl Strategy<Value = Povm3> {
        (
            prop::array::uniform4(-1.0..1.0f64),
            prop::array::uniform4(-1.0..1.0f64),
            0.05..1.0f64,
        )
            .prop_map(|(a, b, scale)| {
                let mk = |v: [f64; 4]| {
                    let beta = Vector3::new(v[1], v[2], v[3]);
                    Observable2::new(beta.norm() + v[0].abs(), beta)
                };
                let (e1, e2) = (mk(a), mk(b));
                let top = (e1 + e2).eigenvalues().1.max(1e-12);
                let k = scale / top;
                Povm3::completed(e1 * k, e2 * k).unwrap()
            })
    }

    proptest! {
        #[test]
        fn mean_error_decomposes_into_conditional_errors(povm in arb_povm(), pair in arb_pair()) {
            let rep = evaluate(&povm, &pair).unwrap();
            let [pe1, pe2, _] = rep.outcome_probabilities();
            let rebuilt = rep.p_error_given_1 * pe1 + rep.p_error_given_2 * pe2;
            prop_assert!((rep.p_mean_error - rebuilt).abs() <= 1e-10);
            prop_assert!((rep.p_success + rep.p_mean_error + rep.p_inconclusive - 1.0).abs() <= 1e-10);
        }

        #[test]
        fn strong_feasibility_implies_weak(povm in arb_povm(), pair in arb_pair(), m in 0.0..=1.0f64) {
            let rep = evaluate(&povm, &pair).unwrap();
            if is_feasible(check_margin(&rep, MarginCondition::strong(m).unwrap())) {
                prop_assert!(is_feasible(check_margin(&rep, MarginCondition::weak(m).unwrap())));
            }
        }

        #[test]
        fn invariant_under_global_rotation(povm in arb_povm(), f in 0.0..0.99f64,
                                           axis in prop::array::uniform3(-1.0..1.0f64), angle in 0.0..6.3f64) {
            let axis = Vector3::from(axis);
            prop_assume!(axis.norm() > 1e-3);
            let rot: Matrix3<f64> = Rotation3::new(axis.normalize() * angle).into_inner();
            let pair = StatePair::from_fidelity(f).unwrap();
            // rotate the states through their Bloch vectors; a global SU(2)
            // unitary acts as a rotation on every Bloch vector
            let rotated = StatePair::new(
                PureState::from_bloch(&crate::BlochVector::from_vector(rot * pair.n1().as_vector()).unwrap()),
                PureState::from_bloch(&crate::BlochVector::from_vector(rot * pair.n2().as_vector()).unwrap()),
            ).unwrap();
            let a = evaluate(&povm, &pair).unwrap();
            let b = evaluate(&povm.transformed(&rot), &rotated).unwrap();
            for (x, y) in a.joint.iter().flatten().zip(b.joint.iter().flatten()) {
                prop_assert!((x - y).abs() <= 1e-12);
            }
        }
    }
}
