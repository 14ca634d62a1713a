//! Optimal success probability as a function of the margin.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::margin::{helstrom_success, success_strong, success_weak};
use crate::{Error, Exec, Result};

pub const CSV_HEADER: &str = "m,p_strong,p_weak,p_unambiguous,p_minimum_error";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    pub m: f64,
    pub p_strong: f64,
    pub p_weak: f64,
    pub p_unambiguous: f64,
    pub p_minimum_error: f64,
}

/// Rows at `m = k / (m_steps - 1)` for `k = 0..m_steps`.
pub fn curve(fidelity: f64, m_steps: usize) -> Result<Vec<CurveRow>> {
    curve_with(fidelity, m_steps, Exec::default())
}

pub fn curve_with(fidelity: f64, m_steps: usize, exec: Exec) -> Result<Vec<CurveRow>> {
    if m_steps < 2 {
        return Err(Error::Domain(format!("m_steps must be at least 2, got {m_steps}")));
    }
    let p_minimum_error = helstrom_success(fidelity)?;
    let p_unambiguous = 1.0 - fidelity;
    exec.map(m_steps, |k| {
        let m = k as f64 / (m_steps - 1) as f64;
        Ok(CurveRow {
            m,
            p_strong: success_strong(fidelity, m)?,
            p_weak: success_weak(fidelity, m)?,
            p_unambiguous,
            p_minimum_error,
        })
    })
    .into_iter()
    .collect()
}

pub fn write_csv<W: Write>(rows: &[CurveRow], mut out: W) -> std::io::Result<()> {
    writeln!(out, "{CSV_HEADER}")?;
    for r in rows {
        writeln!(
            out,
            "{:.12},{:.12},{:.12},{:.12},{:.12}",
            r.m, r.p_strong, r.p_weak, r.p_unambiguous, r.p_minimum_error
        )?;
    }
    Ok(())
}
