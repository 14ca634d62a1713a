//! Closed-form optimum of two-state discrimination under an error margin.
//!
//! Below the critical margin `m_c` the optimal POVM is reflection-symmetric
//! (`alpha1 = alpha2`, `beta2 = O·beta1`) and rank one, so it is described by
//! three numbers `(alpha, x, y)` with
//! `beta1 = x·(n1 + n2)/2 + y·(n1 - n2)/2`. At or above `m_c` the
//! minimum-error (Helstrom) measurement is already admissible and optimal.

use serde::{Deserialize, Serialize};

use crate::linalg::{check_fidelity, Observable2, Povm3, StatePair, EXACT_TOL};
use crate::{Error, Result};

/// Strong: both conditional error probabilities bounded by `m`.
/// Weak: the mean error probability bounded by `m`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ConditionKind {
    Strong,
    Weak,
}

impl std::fmt::Display for ConditionKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ConditionKind::Strong => "strong",
            ConditionKind::Weak => "weak",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarginCondition {
    pub kind: ConditionKind,
    pub m: f64,
}

impl MarginCondition {
    pub fn new(kind: ConditionKind, m: f64) -> Result<Self> {
        check_margin_value(m)?;
        Ok(MarginCondition { kind, m })
    }

    pub fn strong(m: f64) -> Result<Self> {
        Self::new(ConditionKind::Strong, m)
    }

    pub fn weak(m: f64) -> Result<Self> {
        Self::new(ConditionKind::Weak, m)
    }
}

/// Which branch of the piecewise optimum applies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Regime {
    /// `m < m_c`: the margin constraint is active.
    Margin,
    /// `m >= m_c`: the minimum-error measurement is optimal.
    MinimumError,
}

fn check_margin_value(m: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&m) {
        return Err(Error::Domain(format!("error margin must lie in [0, 1], got {m}")));
    }
    Ok(())
}

/// `m_c = (1 - sqrt(1 - F^2)) / 2`.
pub fn critical_margin(fidelity: f64) -> Result<f64> {
    check_fidelity(fidelity)?;
    Ok(critical_margin_unchecked(fidelity))
}

fn critical_margin_unchecked(fidelity: f64) -> f64 {
    0.5 * (1.0 - (1.0 - fidelity * fidelity).sqrt())
}

/// Minimum-error success probability `(1 + sqrt(1 - F^2)) / 2`.
pub fn helstrom_success(fidelity: f64) -> Result<f64> {
    check_fidelity(fidelity)?;
    Ok(0.5 * (1.0 + (1.0 - fidelity * fidelity).sqrt()))
}

/// `A_m = (1 - m)/(1 - 2m)^2 · (1 + 2 sqrt(m(1 - m)))`, defined on `[0, 1/2)`.
pub fn amplification_factor(m: f64) -> Result<f64> {
    if !(0.0..0.5).contains(&m) {
        return Err(Error::Domain(format!(
            "amplification factor is defined for 0 <= m < 1/2, got {m}"
        )));
    }
    let d = 1.0 - 2.0 * m;
    Ok((1.0 - m) / (d * d) * (1.0 + 2.0 * (m * (1.0 - m)).sqrt()))
}

pub fn regime(fidelity: f64, m: f64) -> Result<Regime> {
    check_margin_value(m)?;
    if m >= critical_margin(fidelity)? {
        Ok(Regime::MinimumError)
    } else {
        Ok(Regime::Margin)
    }
}

/// Optimal success probability under the strong margin condition.
pub fn success_strong(fidelity: f64, m: f64) -> Result<f64> {
    match regime(fidelity, m)? {
        Regime::MinimumError => helstrom_success(fidelity),
        Regime::Margin => Ok(amplification_factor(m)? * (1.0 - fidelity)),
    }
}

/// Optimal success probability under the weak margin condition.
pub fn success_weak(fidelity: f64, m: f64) -> Result<f64> {
    match regime(fidelity, m)? {
        Regime::MinimumError => helstrom_success(fidelity),
        Regime::Margin => {
            let r = m.sqrt() + (1.0 - fidelity).sqrt();
            Ok(r * r)
        }
    }
}

pub fn success(fidelity: f64, cond: MarginCondition) -> Result<f64> {
    match cond.kind {
        ConditionKind::Strong => success_strong(fidelity, cond.m),
        ConditionKind::Weak => success_weak(fidelity, cond.m),
    }
}

/// Coordinates of the symmetry-reduced problem together with the constants
/// `S = F^2` and `T = 1 - S`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReducedParams {
    pub alpha: f64,
    pub x: f64,
    pub y: f64,
    #[serde(rename = "S")]
    pub s: f64,
    #[serde(rename = "T")]
    pub t: f64,
}

impl ReducedParams {
    /// Completes `y` to a point on the rank-one surface:
    /// `alpha = T y^2 + 1/4`, `sqrt(S)|x| = (1 - 4 T y^2)/4`, `sign(x) = sign`.
    pub fn on_branch(s: f64, t: f64, y: f64, negative_x: bool) -> Self {
        let root_s = s.sqrt();
        let scaled = (1.0 - 4.0 * t * y * y) / 4.0;
        let x = if root_s > 0.0 { scaled / root_s } else { 0.0 };
        ReducedParams {
            alpha: t * y * y + 0.25,
            x: if negative_x { -x } else { x },
            y,
            s,
            t,
        }
    }

    /// `p = alpha + S x + T y`.
    pub fn objective(&self) -> f64 {
        self.alpha + self.s * self.x + self.t * self.y
    }

    pub fn validate(&self) -> Result<()> {
        let ReducedParams { alpha, x, y, s, t } = *self;
        if ![alpha, x, y, s, t].iter().all(|v| v.is_finite()) {
            return Err(Error::Validation("reduced parameters must be finite".into()));
        }
        if !(0.0..1.0).contains(&s) || (s + t - 1.0).abs() > EXACT_TOL {
            return Err(Error::Validation(format!(
                "constants must satisfy 0 <= S < 1 and S + T = 1 (S={s}, T={t})"
            )));
        }
        let dev = (alpha - (t * y * y + 0.25)).abs();
        if dev > EXACT_TOL {
            return Err(Error::Validation(format!("alpha = T y^2 + 1/4 violated by {dev:.3e}")));
        }
        let dev = (s.sqrt() * x.abs() - (1.0 - 4.0 * t * y * y) / 4.0).abs();
        if dev > EXACT_TOL {
            return Err(Error::Validation(format!(
                "sqrt(S)|x| = (1 - 4 T y^2)/4 violated by {dev:.3e}"
            )));
        }
        if y.abs() > 1.0 / (2.0 * t.sqrt()) + EXACT_TOL {
            return Err(Error::Validation(format!("|y| = {} exceeds 1/(2 sqrt(T))", y.abs())));
        }
        Ok(())
    }
}

fn check_constants(s: f64, t: f64, m: f64) -> Result<f64> {
    check_margin_value(m)?;
    if !(0.0..1.0).contains(&s) || (s + t - 1.0).abs() > EXACT_TOL {
        return Err(Error::Domain(format!(
            "constants must satisfy 0 <= S < 1 and S + T = 1 (S={s}, T={t})"
        )));
    }
    let critical = critical_margin_unchecked(s.sqrt());
    if m > critical + EXACT_TOL {
        return Err(Error::OutOfRegime { m, critical });
    }
    Ok(critical)
}

fn params_from_y(s: f64, t: f64, y: f64) -> ReducedParams {
    // y can overshoot the edge of the rank-one surface by rounding at m = m_c
    let y = y.min(1.0 / (2.0 * t.sqrt()));
    ReducedParams::on_branch(s, t, y, true)
}

/// Optimal reduced parameters for the strong condition, `0 <= m <= m_c`.
pub fn reduced_params_strong(s: f64, t: f64, m: f64) -> Result<ReducedParams> {
    check_constants(s, t, m)?;
    let y = (1.0 + 2.0 * (m * (1.0 - m)).sqrt()) / (2.0 * (1.0 + s.sqrt()) * (1.0 - 2.0 * m));
    Ok(params_from_y(s, t, y))
}

/// Optimal reduced parameters for the weak condition, `0 <= m <= m_c`.
pub fn reduced_params_weak(s: f64, t: f64, m: f64) -> Result<ReducedParams> {
    check_constants(s, t, m)?;
    let root_s = s.sqrt();
    let y = (1.0 + 2.0 * (m / (1.0 - root_s)).sqrt()) / (2.0 * (1.0 + root_s));
    Ok(params_from_y(s, t, y))
}

pub fn reduced_params(s: f64, t: f64, cond: MarginCondition) -> Result<ReducedParams> {
    match cond.kind {
        ConditionKind::Strong => reduced_params_strong(s, t, cond.m),
        ConditionKind::Weak => reduced_params_weak(s, t, cond.m),
    }
}

/// Reconstructs the symmetric POVM `E1 = (alpha, beta)`, `E2 = (alpha, O beta)`,
/// `E3 = I - E1 - E2` on the pair's Bloch frame.
pub fn build_povm(pair: &StatePair, rp: &ReducedParams) -> Result<Povm3> {
    rp.validate()?;
    if (rp.s - pair.s()).abs() > 1e-9 {
        return Err(Error::Validation(format!(
            "reduced parameters were computed for S = {}, pair has S = {}",
            rp.s,
            pair.s()
        )));
    }
    let (n1, n2) = (pair.n1().as_vector(), pair.n2().as_vector());
    let beta = (n1 + n2) * (rp.x / 2.0) + (n1 - n2) * (rp.y / 2.0);
    let e1 = Observable2::new(rp.alpha, beta);
    let e2 = e1.transformed(&pair.reflection());
    Povm3::completed(e1, e2)
}

/// Projective minimum-error measurement onto the eigenvectors of `rho1 - rho2`.
pub fn helstrom_povm(pair: &StatePair) -> Povm3 {
    let d = pair.n1().as_vector() - pair.n2().as_vector();
    let u = d / d.norm();
    let e1 = Observable2::new(0.5, u * 0.5);
    let e2 = Observable2::new(0.5, -u * 0.5);
    Povm3 {
        e1,
        e2,
        e3: Observable2::zero(),
    }
}

/// The optimal POVM for `cond`, with the regime it came from. At `m = m_c`
/// the minimum-error measurement is returned.
pub fn optimal_povm(pair: &StatePair, cond: MarginCondition) -> Result<(Povm3, Regime)> {
    match regime(pair.fidelity(), cond.m)? {
        Regime::MinimumError => Ok((helstrom_povm(pair), Regime::MinimumError)),
        Regime::Margin => {
            let rp = reduced_params(pair.s(), pair.t(), cond)?;
            Ok((build_povm(pair, &rp)?, Regime::Margin))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::validator::evaluate;
    use proptest::prelude::*;

    #[test]
    fn critical_margin_examples() {
        assert_close!(critical_margin(0.0).unwrap(), 0.0, 1e-16);
        // 0.5 (1 - sqrt(0.19)), sqrt(0.19) = 0.43588989435406735...
        assert_close!(critical_margin(0.9).unwrap(), 0.282_055_052_822_966_3, 1e-15);
        assert_close!(critical_margin(0.6).unwrap(), 0.1, 1e-15);
        assert!(matches!(
            critical_margin(1.0),
            Err(Error::IndistinguishableStates { .. })
        ));
        assert!(matches!(critical_margin(-0.5), Err(Error::Domain(_))));
    }

    #[test]
    fn amplification_factor_examples() {
        assert_close!(amplification_factor(0.0).unwrap(), 1.0, 1e-15);
        assert_close!(amplification_factor(0.1).unwrap(), 2.25, 1e-14);
        assert_close!(amplification_factor(0.25).unwrap(), 3.0 + 1.5 * 3f64.sqrt(), 1e-13);
        assert!(amplification_factor(0.5).is_err());
        assert!(amplification_factor(-0.1).is_err());
    }

    #[test]
    fn amplification_factor_is_increasing() {
        let mut prev = amplification_factor(0.0).unwrap();
        for k in 1..500 {
            let a = amplification_factor(k as f64 / 1000.0).unwrap();
            assert!(a > prev);
            prev = a;
        }
    }

    #[test]
    fn success_examples() {
        assert_close!(success_strong(0.9, 0.0).unwrap(), 0.1, 1e-15);
        assert_close!(success_strong(0.9, 1.0).unwrap(), 0.717_944_947_177_033_7, 1e-15);
        assert_close!(success_strong(0.9, 0.1).unwrap(), 0.225, 1e-14);
        assert_close!(success_weak(0.9, 0.0).unwrap(), 0.1, 1e-15);
        assert_close!(success_weak(0.9, 0.1).unwrap(), 0.4, 1e-14);
        assert_close!(success_weak(0.9, 0.5).unwrap(), 0.717_944_947_177_033_7, 1e-15);
        assert!(success_strong(0.9, 1.5).is_err());
        assert!(success_weak(1.0, 0.1).is_err());
    }

    #[test]
    fn reduced_params_examples() {
        let rp = reduced_params_strong(0.81, 0.19, 0.0).unwrap();
        assert_close!(rp.y, 1.0 / 3.8, 1e-15);
        assert_close!(rp.x, -1.0 / 3.8, 1e-15);
        assert_close!(rp.alpha, 1.0 / 3.8, 1e-15);
        assert_close!(rp.objective(), 0.1, 1e-15);

        let rp = reduced_params_strong(0.36, 0.64, 0.1).unwrap();
        assert_close!(rp.y, 0.625, 1e-14);
        rp.validate().unwrap();

        let rp = reduced_params_weak(0.81, 0.19, 0.0).unwrap();
        assert_close!(rp.y, 1.0 / 3.8, 1e-15);
        let rp = reduced_params_weak(0.81, 0.19, 0.1).unwrap();
        assert_close!(rp.y, 3.0 / 3.8, 1e-14);
        assert_close!(rp.objective(), 0.4, 1e-14);

        assert!(matches!(
            reduced_params_strong(0.81, 0.19, 0.3),
            Err(Error::OutOfRegime { .. })
        ));
        assert!(matches!(
            reduced_params_weak(0.81, 0.19, 0.3),
            Err(Error::OutOfRegime { .. })
        ));
    }

    #[test]
    fn build_povm_examples() {
        let pair = StatePair::from_fidelity(0.9).unwrap();
        let povm = build_povm(&pair, &reduced_params_strong(0.81, 0.19, 0.0).unwrap()).unwrap();
        let rep = evaluate(&povm, &pair).unwrap();
        assert_close!(rep.p_error_given_1, 0.0, 1e-10);
        assert_close!(rep.p_error_given_2, 0.0, 1e-10);
        assert_close!(rep.p_success, 0.1, 1e-12);

        let povm = build_povm(&pair, &reduced_params_strong(0.81, 0.19, 0.1).unwrap()).unwrap();
        let rep = evaluate(&povm, &pair).unwrap();
        assert_close!(rep.p_success, 0.225, 1e-10);
        assert_close!(rep.p_error_given_1, 0.1, 1e-10);
        assert_close!(rep.p_error_given_2, 0.1, 1e-10);
        for e in povm.elements() {
            assert!(e.rank(1e-10) <= 1);
        }
    }

    #[test]
    fn build_povm_rejects_inconsistent_params() {
        let pair = StatePair::from_fidelity(0.9).unwrap();
        let mut rp = reduced_params_strong(0.81, 0.19, 0.05).unwrap();
        rp.alpha += 1e-3;
        assert!(matches!(build_povm(&pair, &rp), Err(Error::Validation(_))));
        let rp = reduced_params_strong(0.25, 0.75, 0.0).unwrap();
        assert!(build_povm(&pair, &rp).is_err());
    }

    #[test]
    fn helstrom_examples() {
        let pair = StatePair::from_fidelity(0.0).unwrap();
        let povm = helstrom_povm(&pair);
        povm.validate().unwrap();
        let p1 = Observable2::projector(pair.phi1());
        assert!(povm.e1.max_abs_diff(&p1) < 1e-15);
        assert_close!(evaluate(&povm, &pair).unwrap().p_success, 1.0, 1e-15);

        let pair = StatePair::from_fidelity(0.9).unwrap();
        let rep = evaluate(&helstrom_povm(&pair), &pair).unwrap();
        assert_close!(rep.p_success, helstrom_success(0.9).unwrap(), 1e-15);
        assert_close!(rep.p_error_given_1, critical_margin(0.9).unwrap(), 1e-15);
        assert_close!(rep.p_error_given_2, critical_margin(0.9).unwrap(), 1e-15);
    }

    #[test]
    fn margin_equal_to_critical_uses_minimum_error_branch() {
        let f = 0.6;
        let mc = critical_margin(f).unwrap();
        let pair = StatePair::from_fidelity(f).unwrap();
        let (povm, regime) = optimal_povm(&pair, MarginCondition::strong(mc).unwrap()).unwrap();
        assert_eq!(regime, Regime::MinimumError);
        assert_eq!(povm.e3, Observable2::zero());
    }

    #[test]
    fn exchanging_states_swaps_outcomes() {
        for cond in [
            MarginCondition::strong(0.07).unwrap(),
            MarginCondition::weak(0.07).unwrap(),
            MarginCondition::strong(0.6).unwrap(),
        ] {
            let pair = StatePair::from_fidelity(0.8).unwrap();
            let swapped = pair.swapped();
            let (a, _) = optimal_povm(&pair, cond).unwrap();
            let (b, _) = optimal_povm(&swapped, cond).unwrap();
            assert!(a.e1.max_abs_diff(&b.e2) < 1e-13);
            assert!(a.e2.max_abs_diff(&b.e1) < 1e-13);
            let pa = evaluate(&a, &pair).unwrap().p_success;
            let pb = evaluate(&b, &swapped).unwrap().p_success;
            assert_close!(pa, pb, 1e-13);
        }
    }

    proptest! {
        #[test]
        fn branches_meet_at_the_critical_margin(f in 0.0..0.999f64) {
            let mc = critical_margin(f).unwrap();
            let pm = helstrom_success(f).unwrap();
            let strong = amplification_factor(mc).unwrap() * (1.0 - f);
            let weak = (mc.sqrt() + (1.0 - f).sqrt()).powi(2);
            prop_assert!((strong - pm).abs() <= 1e-10);
            prop_assert!((weak - pm).abs() <= 1e-10);
        }

        #[test]
        fn weak_dominates_strong_dominates_unambiguous(f in 0.0..0.999f64, m in 0.0..=1.0f64) {
            let s = success_strong(f, m).unwrap();
            let w = success_weak(f, m).unwrap();
            prop_assert!(w >= s - 1e-14);
            prop_assert!(s >= (1.0 - f) - 1e-14);
        }

        #[test]
        fn success_monotone(f in 0.0..0.99f64, m in 0.0..0.99f64, df in 0.0..0.009f64, dm in 0.0..0.01f64) {
            for g in [success_strong, success_weak] {
                prop_assert!(g(f, m + dm).unwrap() >= g(f, m).unwrap() - 1e-13);
                prop_assert!(g(f + df, m).unwrap() <= g(f, m).unwrap() + 1e-13);
            }
        }

        #[test]
        fn reconstruction_matches_closed_form(f in 0.0..0.99f64, u in 0.0..1.0f64, weak in any::<bool>()) {
            let m = u * critical_margin(f).unwrap();
            let kind = if weak { ConditionKind::Weak } else { ConditionKind::Strong };
            let cond = MarginCondition::new(kind, m).unwrap();
            let pair = StatePair::from_fidelity(f).unwrap();
            let (povm, _) = optimal_povm(&pair, cond).unwrap();
            let rep = evaluate(&povm, &pair).unwrap();
            prop_assert!((rep.p_success - success(f, cond).unwrap()).abs() <= 1e-10);
            for e in povm.elements() {
                let (lo, hi) = e.eigenvalues();
                prop_assert!(lo >= -1e-10);
                prop_assert!(lo <= 1e-10 || hi <= 1e-10, "rank > 1: {:?}", e);
            }
            let rp = reduced_params(pair.s(), pair.t(), cond);
            if let Ok(rp) = rp {
                prop_assert!(rp.x <= 0.0);
                prop_assert!((rp.objective() - success(f, cond).unwrap()).abs() <= 1e-12);
            }
        }
    }
}
