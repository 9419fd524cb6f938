//! Dense linear algebra used by the trainer.
//!
//! Everything here is a pure function of its inputs. The Sylvester solver
//! only has to handle symmetric coefficient matrices, so it works in the
//! eigenbases of both coefficients instead of reducing to Schur form.

mod decomp;
mod matrix;
mod sylvester;

pub use decomp::{solve_spd, symmetric_eigen, SymmetricEigen};
pub use matrix::Matrix;
pub use sylvester::{
    sylvester_oracle, sylvester_residual, sylvester_solve, sylvester_unique_check,
    ORACLE_MAX_UNKNOWNS,
};

pub(crate) use matrix::dot;

use thiserror::Error;

/// Relative symmetry tolerance for inputs documented as symmetric.
pub const SYMMETRY_TOL: f64 = 1e-10;

/// Relative threshold under which an eigenvalue sum counts as zero.
pub const COLLISION_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("matrix is not square ({0}x{1})")]
    NotSquare(usize, usize),
    #[error("matrix is not symmetric (relative asymmetry {0:.3e})")]
    NotSymmetric(f64),
    #[error("matrix contains NaN or infinite entries")]
    NonFinite,
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("Sylvester equation has no unique solution (eigenvalue pair sums to zero)")]
    NonUnique,
    #[error("linear system is singular")]
    Singular,
    #[error("problem too large for the dense oracle ({0} unknowns, limit {ORACLE_MAX_UNKNOWNS})")]
    TooLarge(usize),
    #[error("matrix is not positive definite")]
    NotPositiveDefinite,
}

/// Checks squareness, finiteness and symmetry, returning the exactly
/// symmetrized matrix.
pub(crate) fn checked_symmetric(m: &Matrix) -> Result<Matrix, LinalgError> {
    if !m.is_square() {
        return Err(LinalgError::NotSquare(m.rows(), m.cols()));
    }
    if !m.is_finite() {
        return Err(LinalgError::NonFinite);
    }
    let norm = m.frobenius_norm();
    let asym = m.asymmetry();
    if asym > SYMMETRY_TOL * norm {
        return Err(LinalgError::NotSymmetric(asym / norm));
    }
    Ok(m.symmetrized())
}
