//! Exact block minimizers for `A`, `B` and `C`, plus the forward-projection
//! baseline and the per-iteration strong-convexity constants.

use super::{Hyperparams, TrainError};
use crate::linalg::{solve_spd, sylvester_solve, symmetric_eigen, LinalgError, Matrix};

/// Result of a Sylvester-backed update.
#[derive(Debug, Clone)]
pub struct BlockUpdate {
    pub value: Matrix,
    /// Ridge added to the right-hand Gram when the plain equation had no
    /// unique solution.
    pub ridge: Option<f64>,
}

/// Gram products that fully determine the `A` step. None of the shapes
/// depend on the number of samples.
#[derive(Debug, Clone)]
pub struct AUpdateGrams {
    /// `C Cᵀ`, k×k.
    pub cct: Matrix,
    /// `X Xᵀ`, m×m.
    pub xxt: Matrix,
    /// `C Xᵀ`, k×m.
    pub cxt: Matrix,
}

impl AUpdateGrams {
    pub fn new(c: &Matrix, x: &Matrix) -> Self {
        Self {
            cct: c.gram(),
            xxt: x.gram(),
            cxt: c.matmul_t(x),
        }
    }
}

fn ridge_scale(m: &Matrix, n: &Matrix) -> f64 {
    let per_dim = |g: &Matrix| {
        if g.rows() == 0 {
            0.0
        } else {
            g.trace() / g.rows() as f64
        }
    };
    let s = per_dim(n);
    if s > 0.0 {
        return s;
    }
    let s = per_dim(m);
    if s > 0.0 {
        s
    } else {
        1.0
    }
}

/// Solves `M Z + Z N = T`; if that is degenerate and `ridge_eps > 0`, retries
/// with `N + δI`, `δ = ridge_eps · tr(N)/dim(N)`.
fn sylvester_with_ridge(m: &Matrix, n: &Matrix, t: &Matrix, ridge_eps: f64) -> Result<BlockUpdate, TrainError> {
    match sylvester_solve(m, n, t) {
        Ok(value) => Ok(BlockUpdate { value, ridge: None }),
        Err(LinalgError::NonUnique) if ridge_eps > 0.0 => {
            let delta = ridge_eps * ridge_scale(m, n);
            let value = sylvester_solve(m, &n.add_diagonal(delta), t)?;
            Ok(BlockUpdate {
                value,
                ridge: Some(delta),
            })
        }
        Err(e) => Err(e.into()),
    }
}

/// `A` step from precomputed Grams: solves
/// `λ3·CCᵀ·A + A·XXᵀ = (1+λ3)·CXᵀ`.
pub fn update_a_from_grams(grams: &AUpdateGrams, lambda3: f64, ridge_eps: f64) -> Result<BlockUpdate, TrainError> {
    let m = grams.cct.scale(lambda3);
    let t = grams.cxt.scale(1.0 + lambda3);
    sylvester_with_ridge(&m, &grams.xxt, &t, ridge_eps)
}

/// Minimizes `½‖AX − C‖² + (λ3/2)‖X − AᵀC‖²` over `A` (k×m).
pub fn update_a(c: &Matrix, x: &Matrix, lambda3: f64, ridge_eps: f64) -> Result<BlockUpdate, TrainError> {
    if c.cols() != x.cols() {
        return Err(TrainError::ShapeMismatch(format!(
            "C has {} columns, X has {}",
            c.cols(),
            x.cols()
        )));
    }
    update_a_from_grams(&AUpdateGrams::new(c, x), lambda3, ridge_eps)
}

/// Minimizes `(λ1/2)‖BY − C‖² + (λ4/2)‖Y − BᵀC‖²` over `B` (k×d) by solving
/// `λ4·CCᵀ·B + B·λ1·YYᵀ = (λ1+λ4)·CYᵀ`.
pub fn update_b(
    c: &Matrix,
    y: &Matrix,
    lambda1: f64,
    lambda4: f64,
    ridge_eps: f64,
) -> Result<BlockUpdate, TrainError> {
    if c.cols() != y.cols() {
        return Err(TrainError::ShapeMismatch(format!(
            "C has {} columns, Y has {}",
            c.cols(),
            y.cols()
        )));
    }
    let m = c.gram().scale(lambda4);
    let n = y.gram().scale(lambda1);
    let t = c.matmul_t(y).scale(lambda1 + lambda4);
    sylvester_with_ridge(&m, &n, &t, ridge_eps)
}

/// Closed-form `C` step:
/// `((1+λ1+λ2)I + λ3AAᵀ + λ4BBᵀ)⁻¹ (λ2H + (1+λ3)AX + (λ1+λ4)BY)`.
pub fn update_c(
    a: &Matrix,
    b: &Matrix,
    x: &Matrix,
    y: &Matrix,
    h: &Matrix,
    hyper: &Hyperparams,
) -> Result<Matrix, TrainError> {
    let k = a.rows();
    let n = x.cols();
    let ok = b.rows() == k
        && a.cols() == x.rows()
        && b.cols() == y.rows()
        && y.cols() == n
        && h.shape() == (k, n);
    if !ok {
        return Err(TrainError::ShapeMismatch(format!(
            "A {:?}, B {:?}, X {:?}, Y {:?}, H {:?}",
            a.shape(),
            b.shape(),
            x.shape(),
            y.shape(),
            h.shape()
        )));
    }
    let system = c_system(a, b, hyper);
    let rhs = &(&h.scale(hyper.lambda2) + &a.matmul(x).scale(1.0 + hyper.lambda3))
        + &b.matmul(y).scale(hyper.lambda1 + hyper.lambda4);
    Ok(solve_spd(&system, &rhs)?)
}

/// `(1+λ1+λ2)I + λ3AAᵀ + λ4BBᵀ`, the Hessian of the `C` subproblem.
fn c_system(a: &Matrix, b: &Matrix, hyper: &Hyperparams) -> Matrix {
    (&a.gram().scale(hyper.lambda3) + &b.gram().scale(hyper.lambda4))
        .add_diagonal(1.0 + hyper.lambda1 + hyper.lambda2)
}

/// Forward projection baseline `A = Y Xᵀ (X Xᵀ + δI)⁻¹` (d×m), with
/// `δ = ridge_eps · tr(XXᵀ)/m`.
pub fn fpl_fit(x: &Matrix, y: &Matrix, ridge_eps: f64) -> Result<Matrix, TrainError> {
    if x.cols() != y.cols() {
        return Err(TrainError::ShapeMismatch(format!(
            "X has {} columns, Y has {}",
            x.cols(),
            y.cols()
        )));
    }
    let gram = x.gram();
    let delta = if ridge_eps > 0.0 {
        ridge_eps * ridge_scale(&gram, &gram)
    } else {
        0.0
    };
    let system = gram.add_diagonal(delta);
    let eig = symmetric_eigen(&system)?;
    if eig.min_eigenvalue() <= 1e-12 * eig.max_eigenvalue().abs() {
        return Err(TrainError::Linalg(LinalgError::Singular));
    }
    let at = solve_spd(&system, &x.matmul_t(y)).map_err(|e| match e {
        LinalgError::NotPositiveDefinite => TrainError::Linalg(LinalgError::Singular),
        other => other.into(),
    })?;
    Ok(at.transpose())
}

/// Smallest eigenvalues of the three block Hessians for one iteration.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct DescentConstants {
    pub m_a: f64,
    pub m_b: f64,
    pub m_c: f64,
}

/// Strong-convexity constants of the `A`, `B` and `C` subproblems.
///
/// The `A` Hessian acts as `Δ ↦ Δ·XXᵀ + λ3·CCᵀ·Δ`, whose spectrum is every
/// sum of an eigenvalue of `XXᵀ` and one of `λ3CCᵀ`; so
/// `m_A = λmin(XXᵀ) + λ3·λmin(CCᵀ)`, and likewise
/// `m_B = λ1·λmin(YYᵀ) + λ4·λmin(CCᵀ)`. `m_C` is the smallest eigenvalue of
/// `(1+λ1+λ2)I + λ3AAᵀ + λ4BBᵀ` at the new `A`, `B`.
pub fn descent_constants(
    a_next: &Matrix,
    b_next: &Matrix,
    c_t: &Matrix,
    x: &Matrix,
    y: &Matrix,
    hyper: &Hyperparams,
) -> Result<DescentConstants, TrainError> {
    let ok = c_t.cols() == x.cols()
        && c_t.cols() == y.cols()
        && a_next.shape() == (c_t.rows(), x.rows())
        && b_next.shape() == (c_t.rows(), y.rows());
    if !ok {
        return Err(TrainError::ShapeMismatch(format!(
            "A {:?}, B {:?}, C {:?}, X {:?}, Y {:?}",
            a_next.shape(),
            b_next.shape(),
            c_t.shape(),
            x.shape(),
            y.shape()
        )));
    }
    let xmin = min_eig(&x.gram())?;
    let ymin = min_eig(&y.gram())?;
    descent_constants_with(a_next, b_next, c_t, xmin, ymin, hyper)
}

pub(crate) fn min_eig(m: &Matrix) -> Result<f64, TrainError> {
    Ok(symmetric_eigen(m)?.min_eigenvalue().max(0.0))
}

/// Same as [`descent_constants`] with `λmin(XXᵀ)` and `λmin(YYᵀ)` supplied.
pub(crate) fn descent_constants_with(
    a_next: &Matrix,
    b_next: &Matrix,
    c_t: &Matrix,
    xxt_min: f64,
    yyt_min: f64,
    hyper: &Hyperparams,
) -> Result<DescentConstants, TrainError> {
    let cct_min = min_eig(&c_t.gram())?;
    Ok(DescentConstants {
        m_a: xxt_min + hyper.lambda3 * cct_min,
        m_b: hyper.lambda1 * yyt_min + hyper.lambda4 * cct_min,
        m_c: min_eig(&c_system(a_next, b_next, hyper))?,
    })
}
