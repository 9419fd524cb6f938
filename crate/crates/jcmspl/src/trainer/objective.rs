//! The five-term objective and its block gradients.

use super::{Hyperparams, TrainError};
use crate::linalg::Matrix;

/// Weighted terms of the objective; [`LossTerms::total`] is the loss.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossTerms {
    /// `½‖AX − C‖²`
    pub visual_fit: f64,
    /// `(λ1/2)‖BY − C‖²`
    pub semantic_fit: f64,
    /// `(λ2/2)‖C − H‖²`
    pub class_fit: f64,
    /// `(λ3/2)‖X − AᵀC‖²`
    pub visual_recon: f64,
    /// `(λ4/2)‖Y − BᵀC‖²`
    pub semantic_recon: f64,
}

impl LossTerms {
    pub fn total(&self) -> f64 {
        self.visual_fit + self.semantic_fit + self.class_fit + self.visual_recon + self.semantic_recon
    }
}

/// Problem data shared by the objective and the updates.
#[derive(Debug, Clone, Copy)]
pub struct Problem<'a> {
    pub x: &'a Matrix,
    pub y: &'a Matrix,
    pub h: &'a Matrix,
}

impl Problem<'_> {
    pub(crate) fn check(&self, a: &Matrix, b: &Matrix, c: &Matrix) -> Result<(), TrainError> {
        let n = self.x.cols();
        let k = c.rows();
        let ok = self.y.cols() == n
            && c.cols() == n
            && self.h.shape() == (k, n)
            && a.shape() == (k, self.x.rows())
            && b.shape() == (k, self.y.rows());
        if ok {
            Ok(())
        } else {
            Err(TrainError::ShapeMismatch(format!(
                "A {:?}, B {:?}, C {:?}, X {:?}, Y {:?}, H {:?}",
                a.shape(),
                b.shape(),
                c.shape(),
                self.x.shape(),
                self.y.shape(),
                self.h.shape()
            )))
        }
    }
}

fn half_sq(m: &Matrix) -> f64 {
    0.5 * m.frobenius_norm_sq()
}

pub fn loss_terms(
    a: &Matrix,
    b: &Matrix,
    c: &Matrix,
    problem: Problem<'_>,
    hyper: &Hyperparams,
) -> Result<LossTerms, TrainError> {
    problem.check(a, b, c)?;
    let Problem { x, y, h } = problem;
    Ok(LossTerms {
        visual_fit: half_sq(&(&a.matmul(x) - c)),
        semantic_fit: hyper.lambda1 * half_sq(&(&b.matmul(y) - c)),
        class_fit: hyper.lambda2 * half_sq(&(c - h)),
        visual_recon: hyper.lambda3 * half_sq(&(x - &a.t_matmul(c))),
        semantic_recon: hyper.lambda4 * half_sq(&(y - &b.t_matmul(c))),
    })
}

/// `½‖AX−C‖² + (λ1/2)‖BY−C‖² + (λ2/2)‖C−H‖² + (λ3/2)‖X−AᵀC‖² + (λ4/2)‖Y−BᵀC‖²`.
pub fn loss(
    a: &Matrix,
    b: &Matrix,
    c: &Matrix,
    problem: Problem<'_>,
    hyper: &Hyperparams,
) -> Result<f64, TrainError> {
    Ok(loss_terms(a, b, c, problem, hyper)?.total())
}

/// Analytic gradients of the loss with respect to `A`, `B` and `C`.
#[derive(Debug, Clone)]
pub struct Gradients {
    pub a: Matrix,
    pub b: Matrix,
    pub c: Matrix,
}

pub fn gradients(
    a: &Matrix,
    b: &Matrix,
    c: &Matrix,
    problem: Problem<'_>,
    hyper: &Hyperparams,
) -> Result<Gradients, TrainError> {
    problem.check(a, b, c)?;
    let Problem { x, y, h } = problem;
    let fit_x = &a.matmul(x) - c;
    let fit_y = &b.matmul(y) - c;
    let recon_x = x - &a.t_matmul(c);
    let recon_y = y - &b.t_matmul(c);

    let ga = &fit_x.matmul_t(x) - &c.matmul_t(&recon_x).scale(hyper.lambda3);
    let gb = &fit_y.matmul_t(y).scale(hyper.lambda1) - &c.matmul_t(&recon_y).scale(hyper.lambda4);
    let gc = &(&(&(&(c - h).scale(hyper.lambda2) - &fit_x) - &fit_y.scale(hyper.lambda1))
        - &a.matmul(&recon_x).scale(hyper.lambda3))
        - &b.matmul(&recon_y).scale(hyper.lambda4);
    Ok(Gradients { a: ga, b: gb, c: gc })
}
