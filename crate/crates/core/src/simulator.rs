//! Seeded Monte Carlo of the discrimination experiment.
//!
//! Shots are split into fixed partitions of [`PARTITION_SHOTS`], each with
//! its own ChaCha8 stream selected by the partition index, so the merged
//! counts depend only on `(seed, shots)` and never on the worker count.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::linalg::{expectation, Povm3, StateIndex, StatePair};
use crate::validator::ZERO_WEIGHT;
use crate::{Error, Exec, Result};

pub const PARTITION_SHOTS: u64 = 1 << 16;
/// Born probabilities this far outside `[0, 1]` are rounding noise.
pub const BORN_TOL: f64 = 1e-10;

/// Empirical counterpart of [`crate::DiscriminationReport`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalReport {
    pub p_success: f64,
    pub p_error_given_1: f64,
    pub p_error_given_2: f64,
    pub p_mean_error: f64,
    pub p_inconclusive: f64,
    /// Joint frequencies indexed `[a][mu]`.
    pub joint: [[f64; 3]; 2],
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimulationResult {
    pub shots: u64,
    /// Counts indexed `[true state][outcome]`.
    pub counts: [[u64; 3]; 2],
    pub empirical: EmpiricalReport,
    /// Standard errors matching the fields of `empirical`.
    pub stderr: EmpiricalReport,
}

/// Outcome distribution of `povm` for each input state.
pub fn born_probabilities(povm: &Povm3, pair: &StatePair) -> Result<[[f64; 3]; 2]> {
    let elements = povm.elements();
    let mut table = [[0.0; 3]; 2];
    for (a, state) in [StateIndex::First, StateIndex::Second].into_iter().enumerate() {
        let n = pair.bloch(state);
        for (mu, e) in elements.iter().enumerate() {
            let p = expectation(e, n);
            if !(-BORN_TOL..=1.0 + BORN_TOL).contains(&p) {
                return Err(Error::Validation(format!(
                    "Born probability {p:.3e} for outcome {} on state {} lies outside [0, 1]",
                    mu + 1,
                    a + 1
                )));
            }
            table[a][mu] = p.clamp(0.0, 1.0);
        }
        let total: f64 = table[a].iter().sum();
        if (total - 1.0).abs() > 3.0 * BORN_TOL {
            return Err(Error::Validation(format!(
                "Born probabilities for state {} sum to {total}",
                a + 1
            )));
        }
        table[a].iter_mut().for_each(|p| *p /= total);
    }
    Ok(table)
}

fn sample_partition(born: &[[f64; 3]; 2], shots: u64, seed: u64, partition: u64) -> [[u64; 3]; 2] {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(partition);
    let mut counts = [[0u64; 3]; 2];
    for _ in 0..shots {
        let a = usize::from(rng.random::<bool>());
        let u: f64 = rng.random();
        let row = &born[a];
        let mu = if u < row[0] {
            0
        } else if u < row[0] + row[1] {
            1
        } else {
            2
        };
        counts[a][mu] += 1;
    }
    counts
}

pub fn simulate(povm: &Povm3, pair: &StatePair, shots: u64, seed: u64) -> Result<SimulationResult> {
    simulate_with(povm, pair, shots, seed, Exec::default())
}

pub fn simulate_with(povm: &Povm3, pair: &StatePair, shots: u64, seed: u64, exec: Exec) -> Result<SimulationResult> {
    if shots == 0 {
        return Err(Error::Domain("shots must be at least 1".into()));
    }
    povm.validate()?;
    let born = born_probabilities(povm, pair)?;
    let partitions = shots.div_ceil(PARTITION_SHOTS);
    let parts = exec.map(partitions as usize, |i| {
        let i = i as u64;
        let n = PARTITION_SHOTS.min(shots - i * PARTITION_SHOTS);
        sample_partition(&born, n, seed, i)
    });
    let mut counts = [[0u64; 3]; 2];
    for part in parts {
        for a in 0..2 {
            for mu in 0..3 {
                counts[a][mu] += part[a][mu];
            }
        }
    }
    Ok(summarize(counts))
}

/// Frequencies and standard errors from a count table. Conditional errors
/// use the delta method for the ratio `n_wrong / n_outcome`, which reduces
/// to `sqrt(R (1 - R) / n_outcome)`.
pub fn summarize(counts: [[u64; 3]; 2]) -> SimulationResult {
    let shots: u64 = counts.iter().flatten().sum();
    let n = shots as f64;
    let freq = |k: u64| k as f64 / n;
    let binomial = |p: f64| (p * (1.0 - p) / n).sqrt();
    let ratio = |wrong: u64, total: u64| {
        if (total as f64) < ZERO_WEIGHT * n || total == 0 {
            (0.0, 0.0)
        } else {
            let r = wrong as f64 / total as f64;
            (r, (r * (1.0 - r) / total as f64).sqrt())
        }
    };
    let joint = counts.map(|row| row.map(freq));
    let success = counts[0][0] + counts[1][1];
    let error = counts[1][0] + counts[0][1];
    let inconclusive = counts[0][2] + counts[1][2];
    let (r1, s1) = ratio(counts[1][0], counts[0][0] + counts[1][0]);
    let (r2, s2) = ratio(counts[0][1], counts[0][1] + counts[1][1]);
    let empirical = EmpiricalReport {
        p_success: freq(success),
        p_error_given_1: r1,
        p_error_given_2: r2,
        p_mean_error: freq(error),
        p_inconclusive: freq(inconclusive),
        joint,
    };
    let stderr = EmpiricalReport {
        p_success: binomial(empirical.p_success),
        p_error_given_1: s1,
        p_error_given_2: s2,
        p_mean_error: binomial(empirical.p_mean_error),
        p_inconclusive: binomial(empirical.p_inconclusive),
        joint: joint.map(|row| row.map(binomial)),
    };
    SimulationResult {
        shots,
        counts,
        empirical,
        stderr,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Observable2;
    use crate::margin::{helstrom_povm, optimal_povm, MarginCondition};
    use crate::validator::evaluate;

    #[test]
    fn abstain_povm_only_hits_outcome_three() {
        let pair = StatePair::from_fidelity(0.3).unwrap();
        let abstain = Povm3::completed(Observable2::zero(), Observable2::zero()).unwrap();
        let r = simulate(&abstain, &pair, 10_000, 1).unwrap();
        assert_eq!(r.counts[0][0] + r.counts[0][1] + r.counts[1][0] + r.counts[1][1], 0);
        assert_eq!(r.counts[0][2] + r.counts[1][2], 10_000);
        assert_eq!(r.empirical.p_inconclusive, 1.0);
    }

    #[test]
    fn helstrom_success_concentrates() {
        let pair = StatePair::from_fidelity(0.9).unwrap();
        let r = simulate(&helstrom_povm(&pair), &pair, 1_000_000, 2024).unwrap();
        let p: f64 = 0.717_944_947_177_033_7;
        let bound = 4.0 * (p * (1.0 - p) / 1e6).sqrt();
        assert!((r.empirical.p_success - p).abs() <= bound);
    }

    #[test]
    fn saturated_conditional_error_concentrates() {
        let pair = StatePair::from_fidelity(0.9).unwrap();
        let (povm, _) = optimal_povm(&pair, MarginCondition::strong(0.1).unwrap()).unwrap();
        let r = simulate(&povm, &pair, 1_000_000, 99).unwrap();
        assert!((r.empirical.p_error_given_1 - 0.1).abs() <= 4.0 * r.stderr.p_error_given_1);
    }

    #[test]
    fn reproducible_and_partition_independent() {
        let pair = StatePair::from_fidelity(0.6).unwrap();
        let (povm, _) = optimal_povm(&pair, MarginCondition::weak(0.05).unwrap()).unwrap();
        let a = simulate_with(&povm, &pair, 300_001, 5, Exec::Sequential).unwrap();
        let b = simulate_with(&povm, &pair, 300_001, 5, Exec::Parallel).unwrap();
        assert_eq!(a, b);
        let c = simulate_with(&povm, &pair, 300_001, 6, Exec::Sequential).unwrap();
        assert_ne!(a.counts, c.counts);
    }

    #[test]
    fn count_arithmetic() {
        let pair = StatePair::from_fidelity(0.5).unwrap();
        let (povm, _) = optimal_povm(&pair, MarginCondition::strong(0.05).unwrap()).unwrap();
        let r = simulate(&povm, &pair, 12_345, 8).unwrap();
        assert_eq!(r.counts.iter().flatten().sum::<u64>(), 12_345);
        let e = r.empirical;
        let succ = r.counts[0][0] + r.counts[1][1];
        let err = r.counts[1][0] + r.counts[0][1];
        let inc = r.counts[0][2] + r.counts[1][2];
        assert_eq!(succ + err + inc, 12_345);
        assert!((e.p_success + e.p_mean_error + e.p_inconclusive - 1.0).abs() <= 1e-15);
        for f in e.joint.iter().flatten() {
            assert!((0.0..=1.0).contains(f));
        }
    }

    #[test]
    fn joint_frequencies_track_exact_values() {
        let pair = StatePair::from_fidelity(0.7).unwrap();
        let (povm, _) = optimal_povm(&pair, MarginCondition::strong(0.08).unwrap()).unwrap();
        let exact = evaluate(&povm, &pair).unwrap();
        let r = simulate(&povm, &pair, 1_000_000, 3).unwrap();
        for a in 0..2 {
            for mu in 0..3 {
                let dev = (r.empirical.joint[a][mu] - exact.joint[a][mu]).abs();
                assert!(dev <= 5.0 * r.stderr.joint[a][mu].max(1e-9), "a={a} mu={mu}");
            }
        }
    }

    #[test]
    fn rejects_zero_shots() {
        let pair = StatePair::from_fidelity(0.7).unwrap();
        assert!(simulate(&helstrom_povm(&pair), &pair, 0, 1).is_err());
    }
}
