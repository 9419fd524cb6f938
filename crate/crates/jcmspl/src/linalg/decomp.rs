use nalgebra::DMatrix;

use super::{checked_symmetric, LinalgError, Matrix};

/// Eigendecomposition `M = V diag(σ) Vᵀ` of a symmetric matrix.
#[derive(Debug, Clone)]
pub struct SymmetricEigen {
    /// Ascending.
    pub eigenvalues: Vec<f64>,
    /// Orthonormal eigenvectors stored as columns, matching `eigenvalues`.
    pub eigenvectors: Matrix,
}

impl SymmetricEigen {
    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues.first().copied().unwrap_or(0.0)
    }

    pub fn max_eigenvalue(&self) -> f64 {
        self.eigenvalues.last().copied().unwrap_or(0.0)
    }

    /// `V diag(σ) Vᵀ`.
    pub fn reconstruct(&self) -> Matrix {
        let v = &self.eigenvectors;
        let scaled = Matrix::from_fn(v.rows(), v.cols(), |i, j| v[(i, j)] * self.eigenvalues[j]);
        scaled.matmul_t(v)
    }
}

fn to_nalgebra(m: &Matrix) -> DMatrix<f64> {
    DMatrix::from_row_slice(m.rows(), m.cols(), m.as_slice())
}

fn from_nalgebra(m: &DMatrix<f64>) -> Matrix {
    Matrix::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
}

/// Symmetric eigendecomposition with eigenvalues sorted ascending.
///
/// Inputs whose asymmetry is within `1e-10` of their Frobenius norm are
/// symmetrized first; anything further off is rejected.
pub fn symmetric_eigen(m: &Matrix) -> Result<SymmetricEigen, LinalgError> {
    let sym = checked_symmetric(m)?;
    let n = sym.rows();
    if n == 0 {
        return Ok(SymmetricEigen {
            eigenvalues: Vec::new(),
            eigenvectors: Matrix::zeros(0, 0),
        });
    }
    let eig = nalgebra::SymmetricEigen::new(to_nalgebra(&sym));
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let eigenvalues = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = from_nalgebra(&eig.eigenvectors);
    Ok(SymmetricEigen {
        eigenvalues,
        eigenvectors: vectors.select_columns(&order),
    })
}

/// Solves `M X = rhs` for symmetric positive-definite `M` by Cholesky.
pub fn solve_spd(m: &Matrix, rhs: &Matrix) -> Result<Matrix, LinalgError> {
    let sym = checked_symmetric(m)?;
    if rhs.rows() != sym.rows() {
        return Err(LinalgError::DimensionMismatch(format!(
            "system is {}x{}, right-hand side has {} rows",
            sym.rows(),
            sym.cols(),
            rhs.rows()
        )));
    }
    if !rhs.is_finite() {
        return Err(LinalgError::NonFinite);
    }
    if sym.rows() == 0 {
        return Ok(Matrix::zeros(0, rhs.cols()));
    }
    let chol = nalgebra::Cholesky::new(to_nalgebra(&sym)).ok_or(LinalgError::NotPositiveDefinite)?;
    let x = chol.solve(&to_nalgebra(rhs));
    let x = from_nalgebra(&x);
    if !x.is_finite() {
        return Err(LinalgError::NotPositiveDefinite);
    }
    Ok(x)
}
