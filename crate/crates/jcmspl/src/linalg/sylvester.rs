//! Sylvester equations `R Z + Z S = T` with symmetric `R` and `S`.
//!
//! With `R = U diag(ρ) Uᵀ` and `S = V diag(σ) Vᵀ` the equation decouples in
//! the eigenbases: `Z̃ = Uᵀ Z V` satisfies `(ρ_i + σ_j) z̃_ij = t̃_ij` with
//! `T̃ = Uᵀ T V`. A unique solution exists exactly when no sum `ρ_i + σ_j`
//! vanishes.

use super::{symmetric_eigen, LinalgError, Matrix, COLLISION_TOL};

/// Largest `r·s` accepted by [`sylvester_oracle`].
pub const ORACLE_MAX_UNKNOWNS: usize = 400;

fn check_shapes(r: &Matrix, s: &Matrix, t: &Matrix) -> Result<(), LinalgError> {
    if !r.is_square() {
        return Err(LinalgError::NotSquare(r.rows(), r.cols()));
    }
    if !s.is_square() {
        return Err(LinalgError::NotSquare(s.rows(), s.cols()));
    }
    if t.rows() != r.rows() || t.cols() != s.rows() {
        return Err(LinalgError::DimensionMismatch(format!(
            "R is {0}x{0}, S is {1}x{1}, T is {2}x{3}",
            r.rows(),
            s.rows(),
            t.rows(),
            t.cols()
        )));
    }
    Ok(())
}

/// Solves `R Z + Z S = T` for symmetric `R` (r×r) and `S` (s×s).
///
/// Fails with [`LinalgError::NonUnique`] when some eigenvalue sum is within
/// `1e-12 · (max|ρ| + max|σ|)` of zero; no regularization is applied here.
pub fn sylvester_solve(r: &Matrix, s: &Matrix, t: &Matrix) -> Result<Matrix, LinalgError> {
    check_shapes(r, s, t)?;
    if !t.is_finite() {
        return Err(LinalgError::NonFinite);
    }
    let er = symmetric_eigen(r)?;
    let es = symmetric_eigen(s)?;
    let scale = spectral_radius(&er.eigenvalues) + spectral_radius(&es.eigenvalues);
    let threshold = COLLISION_TOL * scale;

    let u = &er.eigenvectors;
    let v = &es.eigenvectors;
    let mut tt = u.t_matmul(t).matmul(v);
    for (i, rho) in er.eigenvalues.iter().enumerate() {
        for (j, sigma) in es.eigenvalues.iter().enumerate() {
            let denom = rho + sigma;
            if denom.abs() <= threshold {
                return Err(LinalgError::NonUnique);
            }
            tt[(i, j)] /= denom;
        }
    }
    Ok(u.matmul(&tt).matmul_t(v))
}

fn spectral_radius(eigenvalues: &[f64]) -> f64 {
    eigenvalues.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
}

/// True iff no eigenvalue of `R` equals the negation of an eigenvalue of `S`,
/// within `1e-12 · (‖R‖_F + ‖S‖_F)`.
pub fn sylvester_unique_check(r: &Matrix, s: &Matrix) -> Result<bool, LinalgError> {
    let er = symmetric_eigen(r)?;
    let es = symmetric_eigen(s)?;
    let tol = COLLISION_TOL * (r.frobenius_norm() + s.frobenius_norm());
    let collides = er
        .eigenvalues
        .iter()
        .any(|rho| es.eigenvalues.iter().any(|sigma| (rho + sigma).abs() <= tol));
    Ok(!collides)
}

/// Relative residual `‖RZ + ZS − T‖_F / (‖T‖_F + ‖R‖_F‖Z‖_F + ‖Z‖_F‖S‖_F)`.
pub fn sylvester_residual(r: &Matrix, s: &Matrix, t: &Matrix, z: &Matrix) -> f64 {
    let lhs = &r.matmul(z) + &z.matmul(s);
    let num = (&lhs - t).frobenius_norm();
    let zn = z.frobenius_norm();
    let den = t.frobenius_norm() + r.frobenius_norm() * zn + zn * s.frobenius_norm();
    if den == 0.0 {
        num
    } else {
        num / den
    }
}

/// Reference solver: assembles `(I_s ⊗ R + Sᵀ ⊗ I_r) vec(Z) = vec(T)` and
/// solves it by Gaussian elimination with partial pivoting.
///
/// Makes no symmetry assumption. Limited to `r·s ≤ 400` unknowns.
pub fn sylvester_oracle(r: &Matrix, s: &Matrix, t: &Matrix) -> Result<Matrix, LinalgError> {
    check_shapes(r, s, t)?;
    let (nr, ns) = (r.rows(), s.rows());
    let n = nr * ns;
    if n > ORACLE_MAX_UNKNOWNS {
        return Err(LinalgError::TooLarge(n));
    }
    // Column-major vec: unknown (i, j) lives at i + j·r.
    let idx = |i: usize, j: usize| i + j * nr;
    let mut k = vec![vec![0.0; n]; n];
    let mut rhs = vec![0.0; n];
    for j in 0..ns {
        for i in 0..nr {
            let row = idx(i, j);
            rhs[row] = t[(i, j)];
            for p in 0..nr {
                k[row][idx(p, j)] += r[(i, p)];
            }
            for q in 0..ns {
                k[row][idx(i, q)] += s[(q, j)];
            }
        }
    }
    let sol = gaussian_solve(k, rhs)?;
    Ok(Matrix::from_fn(nr, ns, |i, j| sol[idx(i, j)]))
}

fn gaussian_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Result<Vec<f64>, LinalgError> {
    let n = b.len();
    let scale = a
        .iter()
        .flat_map(|row| row.iter())
        .fold(0.0_f64, |m, v| m.max(v.abs()));
    let tiny = 1e-14 * scale.max(f64::MIN_POSITIVE);
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&x, &y| a[x][col].abs().total_cmp(&a[y][col].abs()))
            .expect("nonempty pivot range");
        if a[pivot][col].abs() <= tiny {
            return Err(LinalgError::Singular);
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..n {
            let factor = a[row][col] / a[col][col];
            if factor == 0.0 {
                continue;
            }
            let (upper, lower) = a.split_at_mut(row);
            for (dst, src) in lower[0][col..].iter_mut().zip(&upper[col][col..]) {
                *dst -= factor * src;
            }
            b[row] -= factor * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let tail: f64 = (row + 1..n).map(|c| a[row][c] * x[c]).sum();
        x[row] = (b[row] - tail) / a[row][row];
    }
    Ok(x)
}
