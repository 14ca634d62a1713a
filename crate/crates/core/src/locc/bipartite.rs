use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::linalg::{Povm3, EXACT_TOL};
use crate::{Error, Result, C64};

pub const MAX_LOCAL_DIM: usize = 4;

/// Pure state of a two-party system, stored as its `d_A x d_B` amplitude
/// matrix `M` with `|Phi> = sum_ij M_ij |i>_A |j>_B`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<[f64; 2]>>", into = "Vec<Vec<[f64; 2]>>")]
pub struct BipartiteState {
    amplitudes: DMatrix<C64>,
}

impl BipartiteState {
    pub fn new(amplitudes: DMatrix<C64>) -> Result<Self> {
        let (da, db) = amplitudes.shape();
        if da == 0 || db == 0 || da > MAX_LOCAL_DIM || db > MAX_LOCAL_DIM {
            return Err(Error::Domain(format!(
                "local dimensions must lie in 1..={MAX_LOCAL_DIM}, got {da}x{db}"
            )));
        }
        let norm = amplitudes.norm();
        if (norm - 1.0).abs() > EXACT_TOL {
            return Err(Error::Validation(format!(
                "bipartite state has norm {norm}, expected 1"
            )));
        }
        Ok(BipartiteState { amplitudes })
    }

    pub fn normalized(amplitudes: DMatrix<C64>) -> Result<Self> {
        let norm = amplitudes.norm();
        if norm < EXACT_TOL {
            return Err(Error::Validation("cannot normalize the zero state".into()));
        }
        Self::new(amplitudes / C64::from(norm))
    }

    /// `|a>_A (x) |b>_B`.
    pub fn product(a: &DVector<C64>, b: &DVector<C64>) -> Result<Self> {
        Self::normalized(a * b.transpose())
    }

    /// Inverse of [`Self::vector`].
    pub fn from_vector(v: &DVector<C64>, da: usize, db: usize) -> Result<Self> {
        if v.len() != da * db {
            return Err(Error::Domain(format!("vector of length {} is not {da}x{db}", v.len())));
        }
        Self::new(DMatrix::from_fn(da, db, |i, j| v[i * db + j]))
    }

    /// Two-qubit presets: `00`, `01`, `10`, `11`, `++`, `bell`, `bell-psi`
    /// and `partial` (`cos(pi/8)|00> + sin(pi/8)|11>`).
    pub fn preset(name: &str) -> Result<Self> {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let (c, s) = ((std::f64::consts::PI / 8.0).cos(), (std::f64::consts::PI / 8.0).sin());
        let entries: [f64; 4] = match name {
            "00" => [1.0, 0.0, 0.0, 0.0],
            "01" => [0.0, 1.0, 0.0, 0.0],
            "10" => [0.0, 0.0, 1.0, 0.0],
            "11" => [0.0, 0.0, 0.0, 1.0],
            "++" => [0.5, 0.5, 0.5, 0.5],
            "bell" => [h, 0.0, 0.0, h],
            "bell-psi" => [0.0, h, h, 0.0],
            "partial" => [c, 0.0, 0.0, s],
            _ => return Err(Error::Domain(format!("unknown preset state '{name}'"))),
        };
        Self::new(DMatrix::from_row_slice(2, 2, &entries.map(C64::from)))
    }

    /// Normalizes a `d_A x d_B` matrix given row by row.
    pub fn from_rows(rows: usize, cols: usize, entries: &[C64]) -> Result<Self> {
        if rows * cols != entries.len() {
            return Err(Error::Domain(format!(
                "{} amplitudes do not fill a {rows}x{cols} matrix",
                entries.len()
            )));
        }
        Self::normalized(DMatrix::from_row_slice(rows, cols, entries))
    }

    pub fn amplitudes(&self) -> &DMatrix<C64> {
        &self.amplitudes
    }

    pub fn dims(&self) -> (usize, usize) {
        self.amplitudes.shape()
    }

    /// Full-space vector with index `i * d_B + j`.
    pub fn vector(&self) -> DVector<C64> {
        let (da, db) = self.dims();
        DVector::from_fn(da * db, |k, _| self.amplitudes[(k / db, k % db)])
    }

    pub fn inner(&self, other: &BipartiteState) -> C64 {
        self.amplitudes.dotc(&other.amplitudes)
    }

    pub fn with_phase(&self, phase: C64) -> BipartiteState {
        BipartiteState {
            amplitudes: &self.amplitudes * phase,
        }
    }
}

impl TryFrom<Vec<Vec<[f64; 2]>>> for BipartiteState {
    type Error = Error;

    fn try_from(rows: Vec<Vec<[f64; 2]>>) -> Result<Self> {
        let da = rows.len();
        let db = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != db) {
            return Err(Error::Domain("amplitude matrix rows differ in length".into()));
        }
        Self::new(DMatrix::from_fn(da, db, |i, j| C64::new(rows[i][j][0], rows[i][j][1])))
    }
}

impl From<BipartiteState> for Vec<Vec<[f64; 2]>> {
    fn from(s: BipartiteState) -> Self {
        let (da, db) = s.dims();
        (0..da)
            .map(|i| {
                (0..db)
                    .map(|j| [s.amplitudes[(i, j)].re, s.amplitudes[(i, j)].im])
                    .collect()
            })
            .collect()
    }
}

/// Three-outcome POVM on the full two-party space.
#[derive(Debug, Clone, PartialEq)]
pub struct FullPovm {
    pub elements: [DMatrix<C64>; 3],
}

impl FullPovm {
    pub fn zero(dim: usize) -> Self {
        FullPovm {
            elements: std::array::from_fn(|_| DMatrix::zeros(dim, dim)),
        }
    }

    pub fn dim(&self) -> usize {
        self.elements[0].nrows()
    }

    /// `<u|E_mu|v>`.
    pub fn matrix_element(&self, mu: usize, u: &DVector<C64>, v: &DVector<C64>) -> C64 {
        u.dotc(&(&self.elements[mu] * v))
    }

    /// Smallest eigenvalue over the three elements.
    pub fn min_eigenvalue(&self) -> f64 {
        self.elements
            .iter()
            .map(|e| hermitian_eigenvalues(e).min())
            .fold(f64::INFINITY, f64::min)
    }

    /// `max |(E1 + E2 + E3 - I)_ij|`.
    pub fn completeness_deviation(&self) -> f64 {
        let sum = &self.elements[0] + &self.elements[1] + &self.elements[2];
        let id = DMatrix::<C64>::identity(self.dim(), self.dim());
        (sum - id).iter().map(|z| z.norm()).fold(0.0, f64::max)
    }
}

pub(crate) fn hermitian_eigenvalues(m: &DMatrix<C64>) -> DVector<f64> {
    let h = (m + m.adjoint()) * C64::from(0.5);
    h.symmetric_eigenvalues()
}

/// `|u><v|`.
pub(crate) fn outer(u: &DVector<C64>, v: &DVector<C64>) -> DMatrix<C64> {
    u * v.adjoint()
}

/// Embeds a qubit POVM into the span of the orthonormal columns `v1, v2`
/// as `B E B^dagger` with `B = [v1 v2]`.
pub fn lift_povm(povm: &Povm3, v1: &DVector<C64>, v2: &DVector<C64>) -> FullPovm {
    let b = DMatrix::from_columns(&[v1.clone(), v2.clone()]);
    FullPovm {
        elements: povm.elements().map(|e| &b * e.matrix() * b.adjoint()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_are_normalized() {
        for name in ["00", "01", "10", "11", "++", "bell", "bell-psi", "partial"] {
            let s = BipartiteState::preset(name).unwrap();
            assert_close!(s.inner(&s).re, 1.0, 1e-15);
        }
        assert!(BipartiteState::preset("ghz").is_err());
        let bell = BipartiteState::preset("bell").unwrap();
        let psi = BipartiteState::preset("bell-psi").unwrap();
        assert_close!(bell.inner(&psi).norm(), 0.0, 1e-15);
    }

    #[test]
    fn vector_layout() {
        let s = BipartiteState::preset("01").unwrap();
        let v = s.vector();
        assert_eq!(v[1], C64::from(1.0));
        let back = BipartiteState::from_vector(&v, 2, 2).unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(BipartiteState::new(DMatrix::from_element(2, 2, C64::from(1.0))).is_err());
        assert!(BipartiteState::normalized(DMatrix::zeros(2, 2)).is_err());
        assert!(BipartiteState::normalized(DMatrix::from_element(5, 1, C64::from(1.0))).is_err());
    }

    #[test]
    fn serde_round_trip() {
        let s = BipartiteState::preset("partial").unwrap();
        let json = serde_json::to_string(&s).unwrap();
        let back: BipartiteState = serde_json::from_str(&json).unwrap();
        assert!((back.amplitudes() - s.amplitudes()).norm() < 1e-15);
    }
}
