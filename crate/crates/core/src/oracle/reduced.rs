use serde::{Deserialize, Serialize};

use super::{Argmax, OracleResult};
use crate::margin::{ConditionKind, ReducedParams};
use crate::{Error, Exec, Result};

/// Points whose constraint value lies below this count as feasible when the
/// feasible set is too thin for the grid to hit (e.g. `m = 0`).
const THIN_SET_TOL: f64 = 1e-14;
const GRID_CHUNK: usize = 4096;

/// `f(y) = T(1 - sqrt S) y^2 - T/(1 - 2m) y + (1 + sqrt S)/4`; the strong
/// constraint on the `x >= 0` branch reads `(1 - 2m) f(y) <= 0`.
pub fn f_poly(y: f64, s: f64, t: f64, m: f64) -> f64 {
    debug_assert!((0.0..0.5).contains(&m));
    let rs = s.sqrt();
    t * (1.0 - rs) * y * y - t / (1.0 - 2.0 * m) * y + (1.0 + rs) / 4.0
}

/// `g(y) = T(1 + sqrt S) y^2 - T/(1 - 2m) y + (1 - sqrt S)/4`; the strong
/// constraint on the `x < 0` branch reads `(1 - 2m) g(y) <= 0`.
pub fn g_poly(y: f64, s: f64, t: f64, m: f64) -> f64 {
    debug_assert!((0.0..0.5).contains(&m));
    let rs = s.sqrt();
    t * (1.0 + rs) * y * y - t / (1.0 - 2.0 * m) * y + (1.0 - rs) / 4.0
}

/// Sign of `x` on the rank-one surface.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum XBranch {
    Negative,
    Positive,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BranchScan {
    pub best: Option<ReducedParams>,
    pub evaluations: usize,
}

struct Problem {
    s: f64,
    t: f64,
    m: f64,
    kind: ConditionKind,
    negative_x: bool,
}

impl Problem {
    fn point(&self, y: f64) -> ReducedParams {
        ReducedParams::on_branch(self.s, self.t, y, self.negative_x)
    }

    /// Margin constraint, feasible iff `<= 0`.
    fn constraint(&self, y: f64) -> f64 {
        let rp = self.point(y);
        // S·x computed without dividing by sqrt(S)
        let sx = self.s.sqrt() * (1.0 - 4.0 * self.t * y * y) / 4.0;
        let sx = if self.negative_x { -sx } else { sx };
        match self.kind {
            ConditionKind::Strong => (1.0 - 2.0 * self.m) * (rp.alpha + sx) - self.t * y,
            ConditionKind::Weak => rp.alpha + sx - self.t * y - self.m,
        }
    }

    fn objective(&self, y: f64) -> f64 {
        let sx = self.s.sqrt() * (1.0 - 4.0 * self.t * y * y) / 4.0;
        let sx = if self.negative_x { -sx } else { sx };
        self.t * y * y + 0.25 + sx + self.t * y
    }
}

/// Scans one sign branch of the reduced problem on `grid_n` points of
/// `[-1/(2 sqrt T), 1/(2 sqrt T)]` and refines the best feasible point.
pub fn scan_branch(
    s: f64,
    t: f64,
    m: f64,
    kind: ConditionKind,
    branch: XBranch,
    grid_n: usize,
    exec: Exec,
) -> BranchScan {
    let prob = Problem {
        s,
        t,
        m,
        kind,
        negative_x: branch == XBranch::Negative,
    };
    let half = 1.0 / (2.0 * t.sqrt());
    let y_at = |k: usize| -half + 2.0 * half * k as f64 / (grid_n - 1) as f64;

    let chunks = grid_n.div_ceil(GRID_CHUNK);
    let values: Vec<(f64, f64)> = exec
        .map(chunks, |c| {
            let lo = c * GRID_CHUNK;
            let hi = (lo + GRID_CHUNK).min(grid_n);
            (lo..hi)
                .map(|k| {
                    let y = y_at(k);
                    (prob.objective(y), prob.constraint(y))
                })
                .collect::<Vec<_>>()
        })
        .into_iter()
        .flatten()
        .collect();
    let mut evaluations = grid_n;

    let feasible = |k: usize| values[k].1 <= 0.0;
    let best_k = (0..grid_n)
        .filter(|&k| feasible(k))
        .max_by(|&a, &b| values[a].0.total_cmp(&values[b].0));

    let mut candidates = Vec::new();
    let anchor = match best_k {
        Some(k) => {
            candidates.push(y_at(k));
            k
        }
        None => {
            // thin feasible set: locate the minimum of the constraint
            let k = (0..grid_n)
                .min_by(|&a, &b| values[a].1.total_cmp(&values[b].1))
                .expect("grid is nonempty");
            let lo = y_at(k.saturating_sub(1));
            let hi = y_at((k + 1).min(grid_n - 1));
            let (y, used) = minimize_constraint(&prob, lo, hi);
            evaluations += used;
            let c = prob.constraint(y);
            if c > THIN_SET_TOL {
                return BranchScan {
                    best: None,
                    evaluations,
                };
            }
            if c >= -THIN_SET_TOL {
                // a double root: the constraint rounds to zero on a window
                // far wider than the root is known, so the minimizer itself
                // is the answer
                return BranchScan {
                    best: Some(prob.point(y)),
                    evaluations,
                };
            }
            candidates.push(y);
            k
        }
    };
    let y_anchor = candidates[0];
    if prob.constraint(y_anchor) <= 0.0 {
        for nb in [anchor.checked_sub(1), Some(anchor + 1)].into_iter().flatten() {
            if nb < grid_n && !feasible(nb) {
                let (y, used) = boundary(&prob, y_anchor, y_at(nb));
                evaluations += used;
                candidates.push(y);
            }
        }
    }
    let y = candidates
        .into_iter()
        .max_by(|a, b| prob.objective(*a).total_cmp(&prob.objective(*b)))
        .expect("at least one candidate");
    BranchScan {
        best: Some(prob.point(y)),
        evaluations,
    }
}

/// Bisection for the constraint boundary between a feasible and an
/// infeasible point; returns the feasible end.
fn boundary(prob: &Problem, mut inside: f64, mut outside: f64) -> (f64, usize) {
    let mut used = 0;
    for _ in 0..200 {
        let mid = 0.5 * (inside + outside);
        if mid == inside || mid == outside {
            break;
        }
        used += 1;
        if prob.constraint(mid) <= 0.0 {
            inside = mid;
        } else {
            outside = mid;
        }
    }
    (inside, used)
}

/// Minimizes the constraint on `[lo, hi]` by bisection on the sign of its
/// central-difference slope. The value itself is too flat near a double
/// root to locate the minimizer precisely; the slope is not. The constraint
/// is quadratic in `y`, so a wide difference step loses nothing.
fn minimize_constraint(prob: &Problem, mut lo: f64, mut hi: f64) -> (f64, usize) {
    let h = (hi - lo).abs();
    let mut used = 0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid == lo || mid == hi {
            break;
        }
        used += 2;
        let slope = prob.constraint(mid + h) - prob.constraint(mid - h);
        if slope < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    (0.5 * (lo + hi), used)
}

/// Maximizes `alpha + S x + T y` over the reduced problem by grid scan over
/// `y` on both signs of `x`, followed by bisection on the active constraint.
pub fn oracle_reduced(s: f64, t: f64, m: f64, kind: ConditionKind, grid_n: usize) -> Result<OracleResult> {
    oracle_reduced_with(s, t, m, kind, grid_n, Exec::default())
}

pub fn oracle_reduced_with(
    s: f64,
    t: f64,
    m: f64,
    kind: ConditionKind,
    grid_n: usize,
    exec: Exec,
) -> Result<OracleResult> {
    if grid_n < 1000 {
        return Err(Error::Domain(format!("grid_n must be at least 1000, got {grid_n}")));
    }
    if !(0.0..1.0).contains(&s) || (s + t - 1.0).abs() > 1e-12 {
        return Err(Error::Domain(format!(
            "constants must satisfy 0 <= S < 1 and S + T = 1 (S={s}, T={t})"
        )));
    }
    if !(0.0..=1.0).contains(&m) {
        return Err(Error::Domain(format!(
            "margin {m} outside the reduced problem's domain"
        )));
    }
    let scans = [XBranch::Negative, XBranch::Positive].map(|b| scan_branch(s, t, m, kind, b, grid_n, exec));
    let evaluations = scans.iter().map(|b| b.evaluations).sum();
    let best = scans
        .iter()
        .filter_map(|b| b.best)
        .max_by(|a, b| a.objective().total_cmp(&b.objective()));
    Ok(match best {
        Some(rp) => OracleResult {
            p_best: rp.objective(),
            argmax: Argmax::Reduced(rp),
            evaluations,
            feasible: true,
        },
        None => OracleResult {
            p_best: 0.0,
            argmax: Argmax::General { params: [0.0; 8] },
            evaluations,
            feasible: false,
        },
    })
}
