//! Exclusion geometries A(theta) and the SPD algebra around them: square roots,
//! whitening, smallest eigenpairs, and tensor transformation under reparametrization.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fisher::fisher_information;
use crate::matrix::{check_symmetric, SpdMatrix};
use crate::model_zoo::{logistic_weighted_gram, ModelSpec};

/// The rule theta -> A(theta) shaping the exclusion ellipsoid h' A h <= delta^2.
#[derive(Debug, Clone, PartialEq)]
pub enum ExclusionGeometry {
    /// A = identity.
    Euclidean,
    /// A = I(theta).
    FisherIsotropic,
    /// A = diag(weights).
    Block(Vec<f64>),
    /// A = I^{1/2} B I^{1/2} for a constant B expressed in Fisher units.
    FisherUnits(SpdMatrix),
    /// A = X'X; depends on the design only.
    DesignBased(DMatrix<f64>),
    /// A = X' W(beta_hat) X; depends on an estimate from the observed responses.
    DataDependent {
        design: DMatrix<f64>,
        beta_hat: Vec<f64>,
    },
}

impl ExclusionGeometry {
    pub fn kind(&self) -> &'static str {
        match self {
            ExclusionGeometry::Euclidean => "euclidean",
            ExclusionGeometry::FisherIsotropic => "fisher_isotropic",
            ExclusionGeometry::Block(_) => "block",
            ExclusionGeometry::FisherUnits(_) => "fisher_units",
            ExclusionGeometry::DesignBased(_) => "design_based",
            ExclusionGeometry::DataDependent { .. } => "data_dependent",
        }
    }

    /// True only for geometries that read the realised responses.
    pub fn violates_likelihood_principle(&self) -> bool {
        matches!(self, ExclusionGeometry::DataDependent { .. })
    }

    /// A short human-readable descriptor, stable across runs.
    pub fn descriptor(&self) -> String {
        match self {
            ExclusionGeometry::Block(w) => format!("block{w:?}"),
            ExclusionGeometry::FisherUnits(b) => format!("fisher_units{:?}", b.to_row_major()),
            ExclusionGeometry::DesignBased(x) => format!("design_based[{}x{}]", x.nrows(), x.ncols()),
            ExclusionGeometry::DataDependent { design, beta_hat } => format!(
                "data_dependent[{}x{}; beta_hat={beta_hat:?}]",
                design.nrows(),
                design.ncols()
            ),
            other => other.kind().to_string(),
        }
    }

    /// A(theta) for `model`.
    pub fn evaluate(&self, model: &ModelSpec, theta: &[f64]) -> Result<SpdMatrix> {
        let d = model.dim();
        if theta.len() != d {
            return Err(Error::Shape(format!(
                "point has {} coordinates, {} has dimension {d}",
                theta.len(),
                model.name()
            )));
        }
        let a = match self {
            ExclusionGeometry::Euclidean => SpdMatrix::identity(d),
            ExclusionGeometry::FisherIsotropic => fisher_information(model, theta)?,
            ExclusionGeometry::Block(w) => {
                if w.len() != d {
                    return Err(Error::Shape(format!(
                        "block geometry has {} weights, model dimension is {d}",
                        w.len()
                    )));
                }
                SpdMatrix::from_diagonal(w)?
            }
            ExclusionGeometry::FisherUnits(b) => {
                if b.dim() != d {
                    return Err(Error::Shape(format!(
                        "Fisher-units matrix is {}x{}, model dimension is {d}",
                        b.dim(),
                        b.dim()
                    )));
                }
                let root = sqrt_spd(&fisher_information(model, theta)?)?;
                let m = root.as_matrix() * b.as_matrix() * root.as_matrix();
                SpdMatrix::project(&m)?
            }
            ExclusionGeometry::DesignBased(x) => {
                check_design(x, d)?;
                let g = x.transpose() * x;
                SpdMatrix::new((&g + g.transpose()) * 0.5)?
            }
            ExclusionGeometry::DataDependent { design, beta_hat } => {
                check_design(design, d)?;
                if beta_hat.len() != d {
                    return Err(Error::Shape(format!(
                        "beta_hat has {} entries, model dimension is {d}",
                        beta_hat.len()
                    )));
                }
                SpdMatrix::new(logistic_weighted_gram(design, beta_hat))?
            }
        };
        Ok(a)
    }
}

fn check_design(x: &DMatrix<f64>, d: usize) -> Result<()> {
    if x.ncols() != d {
        return Err(Error::Shape(format!(
            "design has {} columns, model dimension is {d}",
            x.ncols()
        )));
    }
    Ok(())
}

/// Jacobian of a smooth one-to-one reparametrization phi(theta).
#[derive(Debug, Clone, PartialEq)]
pub struct Jacobian(DMatrix<f64>);

impl Jacobian {
    pub const MIN_ABS_DET: f64 = 1e-12;

    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::Shape(format!(
                "Jacobian is {}x{}, expected square",
                m.nrows(),
                m.ncols()
            )));
        }
        let det = m.determinant();
        if !(det.abs() > Self::MIN_ABS_DET) {
            return Err(Error::numerics(
                format!("Jacobian is singular (|det| = {:e})", det.abs()),
                det,
            ));
        }
        Ok(Jacobian(m))
    }

    pub fn from_row_slice(d: usize, entries: &[f64]) -> Result<Self> {
        if entries.len() != d * d {
            return Err(Error::Shape(format!("expected {} entries", d * d)));
        }
        Jacobian::new(DMatrix::from_row_slice(d, d, entries))
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn determinant(&self) -> f64 {
        self.0.determinant()
    }
}

fn spectral_map(m: &SpdMatrix, f: impl Fn(f64) -> f64) -> Result<DMatrix<f64>> {
    let eig = SymmetricEigen::new(m.as_matrix().clone());
    if let Some(bad) = eig.eigenvalues.iter().find(|l| !(**l > 0.0)) {
        return Err(Error::numerics(
            format!("matrix is not positive definite (eigenvalue {bad:e})"),
            *bad,
        ));
    }
    let mapped = DVector::from_iterator(eig.eigenvalues.len(), eig.eigenvalues.iter().map(|l| f(*l)));
    let q = &eig.eigenvectors;
    let r = q * DMatrix::from_diagonal(&mapped) * q.transpose();
    Ok((&r + r.transpose()) * 0.5)
}

/// The unique SPD square root, via the spectral decomposition.
pub fn sqrt_spd(m: &SpdMatrix) -> Result<SpdMatrix> {
    Ok(SpdMatrix::from_unchecked(spectral_map(m, f64::sqrt)?))
}

/// M^{-1/2} from one spectral decomposition of M.
pub fn inv_sqrt_spd(m: &SpdMatrix) -> Result<SpdMatrix> {
    Ok(SpdMatrix::from_unchecked(spectral_map(m, |l| 1.0 / l.sqrt())?))
}

/// A^{-1/2} I A^{-1/2}.
pub fn whiten(info: &SpdMatrix, a: &SpdMatrix) -> Result<SpdMatrix> {
    if info.dim() != a.dim() {
        return Err(Error::Shape(format!(
            "cannot whiten a {}x{} matrix by a {}x{} geometry",
            info.dim(),
            info.dim(),
            a.dim(),
            a.dim()
        )));
    }
    let root = inv_sqrt_spd(a)?;
    let m = root.as_matrix() * info.as_matrix() * root.as_matrix();
    Ok(SpdMatrix::from_unchecked((&m + m.transpose()) * 0.5))
}

/// Smallest eigenvalue with its unit eigenvector (sign fixed so the largest-magnitude
/// component is positive).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MinEigen {
    pub value: f64,
    pub vector: Vec<f64>,
}

pub fn min_eigenvalue(m: &DMatrix<f64>) -> Result<MinEigen> {
    check_symmetric(m)?;
    let eig = SymmetricEigen::new(m.clone());
    let (idx, value) = eig
        .eigenvalues
        .iter()
        .copied()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .expect("non-empty matrix");
    let mut vector: Vec<f64> = eig.eigenvectors.column(idx).iter().copied().collect();
    let norm = vector.iter().map(|x| x * x).sum::<f64>().sqrt();
    let pivot = vector
        .iter()
        .copied()
        .max_by(|a, b| a.abs().total_cmp(&b.abs()))
        .unwrap_or(1.0);
    let sign = if pivot < 0.0 { -1.0 } else { 1.0 };
    for x in &mut vector {
        *x *= sign / norm;
    }
    Ok(MinEigen { value, vector })
}

/// J^{-T} A J^{-1}: how a (0,2) tensor moves to the new coordinates.
pub fn transform_geometry(a: &SpdMatrix, j: &Jacobian) -> Result<SpdMatrix> {
    if a.dim() != j.as_matrix().nrows() {
        return Err(Error::Shape(format!(
            "geometry is {}x{}, Jacobian is {}x{}",
            a.dim(),
            a.dim(),
            j.as_matrix().nrows(),
            j.as_matrix().ncols()
        )));
    }
    let inv = j
        .as_matrix()
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::numerics("Jacobian is not invertible", j.determinant()))?;
    let m = inv.transpose() * a.as_matrix() * &inv;
    SpdMatrix::project(&m)
}

/// Eigenvalues of the whitened matrix, ascending.
pub fn whitened_spectrum(info: &SpdMatrix, a: &SpdMatrix) -> Result<Vec<f64>> {
    Ok(whiten(info, a)?.eigenvalues())
}
