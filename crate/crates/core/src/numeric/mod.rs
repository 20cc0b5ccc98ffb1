//! Dense real linear algebra with explicit tolerances.
//!
//! Matrices are stored as [`nalgebra::DMatrix`]; the newtypes here only carry
//! validated structure (symmetry, skewness). The inner product on matrices is
//! `<A, B> = trace(A^T B)` everywhere.

mod eig;
mod expm;
mod literal;
mod subspace;

pub use eig::{eigh, sym_eig, EigenCluster, SpectralDecomposition};
pub use expm::{log_near_identity, matrix_exp};
pub use literal::parse_matrix_literal;
pub(crate) use subspace::new_direction;
pub use subspace::{null_space, orthonormal_span, project_onto, thin_range, RangeSplit, Subspace};

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

pub type DenseMatrix = DMatrix<f64>;

/// Default symmetry tolerance used by the checked constructors.
pub const SYM_TOL: f64 = 1e-10;

/// A square matrix that was symmetric within tolerance; stored exactly
/// symmetrized.
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetricMatrix(DMatrix<f64>);

/// A square matrix that was skew-symmetric within tolerance; stored exactly
/// antisymmetrized.
#[derive(Debug, Clone, PartialEq)]
pub struct SkewMatrix(DMatrix<f64>);

fn check_square_finite(m: &DMatrix<f64>) -> Result<()> {
    if m.nrows() == 0 || m.nrows() != m.ncols() {
        return Err(Error::invalid(format!(
            "expected a non-empty square matrix, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    if m.iter().any(|x| !x.is_finite()) {
        return Err(Error::invalid("matrix has non-finite entries"));
    }
    Ok(())
}

impl SymmetricMatrix {
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        Self::with_tolerance(m, SYM_TOL)
    }

    pub fn with_tolerance(m: DMatrix<f64>, tol: f64) -> Result<Self> {
        check_square_finite(&m)?;
        let scale = m.norm();
        let defect = (&m - m.transpose()).abs().max();
        if defect > tol * scale {
            return Err(Error::invalid(format!(
                "matrix is not symmetric: max |a_ij - a_ji| = {defect:e}"
            )));
        }
        Ok(Self::symmetrize(&m))
    }

    pub fn from_diagonal(diag: &[f64]) -> Result<Self> {
        if diag.is_empty() {
            return Err(Error::invalid("empty diagonal"));
        }
        Self::new(DMatrix::from_diagonal(&DVector::from_column_slice(diag)))
    }

    /// Symmetric part of any square matrix.
    pub fn symmetrize(m: &DMatrix<f64>) -> Self {
        Self((m + m.transpose()) * 0.5)
    }

    pub fn size(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.0
    }
}

impl SkewMatrix {
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        Self::with_tolerance(m, SYM_TOL)
    }

    pub fn with_tolerance(m: DMatrix<f64>, tol: f64) -> Result<Self> {
        check_square_finite(&m)?;
        let scale = m.norm();
        let defect = (&m + m.transpose()).abs().max();
        if defect > tol * scale {
            return Err(Error::invalid(format!(
                "matrix is not skew-symmetric: max |a_ij + a_ji| = {defect:e}"
            )));
        }
        Ok(Self::antisymmetrize(&m))
    }

    /// Skew part of any square matrix.
    pub fn antisymmetrize(m: &DMatrix<f64>) -> Self {
        Self((m - m.transpose()) * 0.5)
    }

    /// `E_ij - E_ji` in dimension `n`.
    pub fn elementary(n: usize, i: usize, j: usize) -> Self {
        let mut m = DMatrix::zeros(n, n);
        m[(i, j)] = 1.0;
        m[(j, i)] = -1.0;
        Self(m)
    }

    pub fn size(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.0
    }
}

/// `XY - YX`.
pub fn bracket(x: &DMatrix<f64>, y: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if x.nrows() != x.ncols() || y.nrows() != y.ncols() || x.nrows() != y.nrows() {
        return Err(Error::invalid(format!(
            "bracket of {}x{} and {}x{}",
            x.nrows(),
            x.ncols(),
            y.nrows(),
            y.ncols()
        )));
    }
    Ok(commutator(x, y))
}

pub(crate) fn commutator(x: &DMatrix<f64>, y: &DMatrix<f64>) -> DMatrix<f64> {
    x * y - y * x
}

/// `trace(A^T B)`.
pub fn inner(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    a.dot(b)
}

/// Column-major flattening, the isometry `(matrices, trace(A^T B)) -> R^{mn}`.
pub fn flatten(m: &DMatrix<f64>) -> DVector<f64> {
    DVector::from_column_slice(m.as_slice())
}

pub fn unflatten(v: &DVector<f64>, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_column_slice(rows, cols, v.as_slice())
}
