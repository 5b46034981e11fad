//! Symmetric positive definite matrices.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::ser::SerializeStruct;
use serde::{Serialize, Serializer};

use crate::error::{Error, Result};

/// Relative tolerance for the symmetry check.
pub const SYMMETRY_TOL: f64 = 1e-12;
/// Eigenvalues in `(-PROJECTION_FLOOR, 0]` are shifted up; anything lower is refused.
pub const PROJECTION_FLOOR: f64 = 1e-10;
/// Smallest eigenvalue after a projection shift.
pub const PROJECTION_TARGET: f64 = 1e-12;

/// A symmetric positive definite matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SpdMatrix(DMatrix<f64>);

impl SpdMatrix {
    /// Validates symmetry and strict positive definiteness.
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        check_symmetric(&m)?;
        let eig = SymmetricEigen::new(m.clone());
        let lmin = eig.eigenvalues.min();
        if !(lmin > 0.0) {
            return Err(Error::numerics(
                format!("matrix is not positive definite (lambda_min = {lmin:e})"),
                lmin,
            ));
        }
        Ok(SpdMatrix(m))
    }

    pub fn identity(d: usize) -> Self {
        SpdMatrix(DMatrix::identity(d, d))
    }

    pub fn from_diagonal(diag: &[f64]) -> Result<Self> {
        if diag.is_empty() {
            return Err(Error::Shape("empty diagonal".into()));
        }
        if let Some(bad) = diag.iter().find(|x| !(**x > 0.0) || !x.is_finite()) {
            return Err(Error::numerics(
                format!("diagonal entry {bad} is not a positive finite number"),
                *bad,
            ));
        }
        Ok(SpdMatrix(DMatrix::from_diagonal(
            &nalgebra::DVector::from_column_slice(diag),
        )))
    }

    /// Row-major construction.
    pub fn from_row_slice(d: usize, entries: &[f64]) -> Result<Self> {
        if entries.len() != d * d {
            return Err(Error::Shape(format!(
                "expected {} entries for a {d}x{d} matrix, got {}",
                d * d,
                entries.len()
            )));
        }
        SpdMatrix::new(DMatrix::from_row_slice(d, d, entries))
    }

    /// Symmetrizes `h`, then shifts its spectrum if the smallest eigenvalue is a
    /// rounding-level negative. Genuinely indefinite input is an error.
    pub fn project(h: &DMatrix<f64>) -> Result<Self> {
        if !h.is_square() {
            return Err(Error::Shape(format!(
                "matrix is {}x{}, expected square",
                h.nrows(),
                h.ncols()
            )));
        }
        if h.iter().any(|x| !x.is_finite()) {
            return Err(Error::numerics("matrix has non-finite entries", f64::NAN));
        }
        let sym = (h + h.transpose()) * 0.5;
        let lmin = SymmetricEigen::new(sym.clone()).eigenvalues.min();
        if lmin > 0.0 {
            return Ok(SpdMatrix(sym));
        }
        if lmin > -PROJECTION_FLOOR {
            let d = sym.nrows();
            let shifted = sym + DMatrix::identity(d, d) * (PROJECTION_TARGET - lmin);
            return Ok(SpdMatrix(shifted));
        }
        Err(Error::numerics(
            format!("matrix is indefinite beyond projection tolerance (lambda_min = {lmin:e})"),
            lmin,
        ))
    }

    pub(crate) fn from_unchecked(m: DMatrix<f64>) -> Self {
        SpdMatrix(m)
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.0
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.0[(i, j)]
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut ev: Vec<f64> = SymmetricEigen::new(self.0.clone())
            .eigenvalues
            .iter()
            .copied()
            .collect();
        ev.sort_by(f64::total_cmp);
        ev
    }

    pub fn determinant(&self) -> f64 {
        self.0.determinant()
    }

    pub fn condition_number(&self) -> f64 {
        let ev = self.eigenvalues();
        ev[ev.len() - 1] / ev[0]
    }

    pub fn to_row_major(&self) -> Vec<f64> {
        let d = self.dim();
        (0..d)
            .flat_map(|i| (0..d).map(move |j| (i, j)))
            .map(|(i, j)| self.0[(i, j)])
            .collect()
    }

    /// Multiplies every entry by a positive scalar.
    pub fn scaled(&self, c: f64) -> Result<Self> {
        if !(c > 0.0) || !c.is_finite() {
            return Err(Error::Contract(format!("scale factor {c} must be positive")));
        }
        Ok(SpdMatrix(&self.0 * c))
    }
}

impl Serialize for SpdMatrix {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let mut s = serializer.serialize_struct("SpdMatrix", 2)?;
        s.serialize_field("d", &self.dim())?;
        s.serialize_field("entries", &self.to_row_major())?;
        s.end()
    }
}

/// Errors with `Error::Shape` unless `m` is square and symmetric to [`SYMMETRY_TOL`] relative.
pub fn check_symmetric(m: &DMatrix<f64>) -> Result<()> {
    if !m.is_square() || m.nrows() == 0 {
        return Err(Error::Shape(format!(
            "matrix is {}x{}, expected non-empty square",
            m.nrows(),
            m.ncols()
        )));
    }
    let scale = m.amax().max(1.0);
    let d = m.nrows();
    for i in 0..d {
        for j in (i + 1)..d {
            if (m[(i, j)] - m[(j, i)]).abs() > SYMMETRY_TOL * scale {
                return Err(Error::Shape(format!(
                    "matrix is not symmetric at ({i},{j}): {} vs {}",
                    m[(i, j)],
                    m[(j, i)]
                )));
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_indefinite() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        assert!(matches!(SpdMatrix::new(m.clone()), Err(Error::Numerics { .. })));
        assert!(matches!(SpdMatrix::project(&m), Err(Error::Numerics { .. })));
    }

    #[test]
    fn rejects_asymmetric() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.0, 1.0]);
        assert!(matches!(SpdMatrix::new(m), Err(Error::Shape(_))));
    }

    #[test]
    fn projection_shifts_rounding_negatives() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1e-12]);
        let p = SpdMatrix::project(&m).unwrap();
        let ev = p.eigenvalues();
        assert!((ev[0] - PROJECTION_TARGET).abs() < 1e-15);
        assert!(ev[0] > 0.0);
    }

    #[test]
    fn projection_symmetrizes() {
        let m = DMatrix::from_row_slice(2, 2, &[2.0, 1.0 + 1e-9, 1.0 - 1e-9, 2.0]);
        let p = SpdMatrix::project(&m).unwrap();
        assert_eq!(p.get(0, 1), p.get(1, 0));
        assert!((p.get(0, 1) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn serializes_row_major() {
        let m = SpdMatrix::from_row_slice(2, &[2.0, 0.5, 0.5, 1.0]).unwrap();
        let json = serde_json::to_string(&m).unwrap();
        assert_eq!(json, r#"{"d":2,"entries":[2.0,0.5,0.5,1.0]}"#);
    }
}
