#![allow(dead_code)]

use jcmspl::linalg::Matrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Matrix {
    let data = (0..rows * cols).map(|_| rng.sample(StandardNormal)).collect();
    Matrix::new(rows, cols, data).unwrap()
}

/// `G Gᵀ` for a Gaussian `G` of shape `n × (n + extra)`.
pub fn random_psd(n: usize, extra: usize, rng: &mut ChaCha8Rng) -> Matrix {
    gaussian(n, n + extra, rng).gram()
}

/// Weights for the five objective terms, kept separate from the crate's
/// own types so the loss below is an independent reference.
#[derive(Debug, Clone, Copy)]
pub struct Weights {
    pub l1: f64,
    pub l2: f64,
    pub l3: f64,
    pub l4: f64,
}

pub struct Instance {
    pub x: Matrix,
    pub y: Matrix,
    pub h: Matrix,
    pub a: Matrix,
    pub b: Matrix,
    pub c: Matrix,
    pub w: Weights,
}

impl Instance {
    pub fn random(seed: u64) -> Self {
        let mut r = rng(seed);
        let k = r.random_range(2..=5);
        let m = r.random_range(3..=8);
        let d = r.random_range(2..=6);
        let n = r.random_range(6..=15);
        let mut weight = || r.random_range(0.1..3.0);
        let w = Weights {
            l1: weight(),
            l2: weight(),
            l3: weight(),
            l4: weight(),
        };
        Self {
            x: gaussian(m, n, &mut r),
            y: gaussian(d, n, &mut r),
            h: gaussian(k, n, &mut r),
            a: gaussian(k, m, &mut r),
            b: gaussian(k, d, &mut r),
            c: gaussian(k, n, &mut r),
            w,
        }
    }

    pub fn hyper(&self) -> jcmspl::Hyperparams {
        let mut h = jcmspl::Hyperparams::new(self.c.rows());
        h.lambda1 = self.w.l1;
        h.lambda2 = self.w.l2;
        h.lambda3 = self.w.l3;
        h.lambda4 = self.w.l4;
        h
    }
}

fn sq(m: &Matrix) -> f64 {
    m.as_slice().iter().map(|v| v * v).sum()
}

/// Reference objective computed entry by entry.
pub fn reference_loss(a: &Matrix, b: &Matrix, c: &Matrix, x: &Matrix, y: &Matrix, h: &Matrix, w: Weights) -> f64 {
    let (k, n) = c.shape();
    let mut ax_c = Matrix::zeros(k, n);
    let mut by_c = Matrix::zeros(k, n);
    for i in 0..k {
        for j in 0..n {
            let ax: f64 = (0..x.rows()).map(|p| a[(i, p)] * x[(p, j)]).sum();
            let by: f64 = (0..y.rows()).map(|p| b[(i, p)] * y[(p, j)]).sum();
            ax_c[(i, j)] = ax - c[(i, j)];
            by_c[(i, j)] = by - c[(i, j)];
        }
    }
    let recon = |p: &Matrix, data: &Matrix| {
        let mut s = 0.0;
        for r in 0..data.rows() {
            for j in 0..n {
                let v: f64 = (0..k).map(|i| p[(i, r)] * c[(i, j)]).sum();
                s += (data[(r, j)] - v).powi(2);
            }
        }
        s
    };
    let c_h: f64 = c.as_slice().iter().zip(h.as_slice()).map(|(p, q)| (p - q).powi(2)).sum();
    0.5 * sq(&ax_c) + 0.5 * w.l1 * sq(&by_c) + 0.5 * w.l2 * c_h + 0.5 * w.l3 * recon(a, x) + 0.5 * w.l4 * recon(b, y)
}

/// Central-difference gradient of `f` at `p`.
pub fn fd_gradient(p: &Matrix, step: f64, f: impl Fn(&Matrix) -> f64) -> Matrix {
    let mut g = Matrix::zeros(p.rows(), p.cols());
    let mut q = p.clone();
    for i in 0..p.rows() {
        for j in 0..p.cols() {
            let orig = q[(i, j)];
            q[(i, j)] = orig + step;
            let up = f(&q);
            q[(i, j)] = orig - step;
            let down = f(&q);
            q[(i, j)] = orig;
            g[(i, j)] = (up - down) / (2.0 * step);
        }
    }
    g
}

pub fn frob(m: &Matrix) -> f64 {
    sq(m).sqrt()
}
