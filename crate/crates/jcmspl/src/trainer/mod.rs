//! Block-coordinate training of the visual projection `A`, the semantic
//! projection `B` and the concept matrix `C`.
//!
//! Each iteration minimizes the objective exactly over `A`, then `B`, then
//! `C`. The `A` and `B` steps are Sylvester equations whose coefficients are
//! Gram matrices, so their cost does not grow with the number of samples
//! once the Grams are formed; the `C` step is a symmetric positive-definite
//! solve.

mod class_matrix;
mod objective;
mod updates;

pub use class_matrix::{build_class_matrix, ClassSpecificMatrix};
pub use objective::{gradients, loss, loss_terms, Gradients, LossTerms, Problem};
pub use updates::{
    descent_constants, fpl_fit, update_a, update_a_from_grams, update_b, update_c, AUpdateGrams,
    BlockUpdate, DescentConstants,
};

use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::ZslDataset;
use crate::linalg::{LinalgError, Matrix};

/// Standard deviation of the Gaussian initialization.
pub const INIT_STD: f64 = 0.01;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("invalid hyperparameters: {0}")]
    InvalidHyper(String),
    #[error("concept dimension k = {k} is smaller than the {classes} seen classes")]
    TooFewRows { k: usize, classes: usize },
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// Which terms of the objective are active.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    /// All five terms.
    Full,
    /// No class-specific term (`λ2 = 0`).
    Jcmspl1,
    /// No reconstruction terms (`λ3 = λ4 = 0`).
    Jcmspl0,
    /// Intermediate space only (`λ2 = λ3 = λ4 = 0`).
    Ipl,
    /// Direct least-squares map from visual to semantic space.
    Fpl,
}

impl Variant {
    pub const ALL: [Variant; 5] = [
        Variant::Fpl,
        Variant::Ipl,
        Variant::Jcmspl0,
        Variant::Jcmspl1,
        Variant::Full,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Full => "full",
            Variant::Jcmspl1 => "jcmspl1",
            Variant::Jcmspl0 => "jcmspl0",
            Variant::Ipl => "ipl",
            Variant::Fpl => "fpl",
        }
    }

    pub fn uses_class_matrix(self) -> bool {
        matches!(self, Variant::Full | Variant::Jcmspl0)
    }

    pub(crate) fn code(self) -> u8 {
        match self {
            Variant::Full => 0,
            Variant::Jcmspl1 => 1,
            Variant::Jcmspl0 => 2,
            Variant::Ipl => 3,
            Variant::Fpl => 4,
        }
    }

    pub(crate) fn from_code(code: u8) -> Option<Self> {
        Self::ALL.into_iter().find(|v| v.code() == code)
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|v| v.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown variant {s:?} (expected full, jcmspl1, jcmspl0, ipl or fpl)"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Hyperparams {
    /// Weight of the semantic-to-concept fit.
    pub lambda1: f64,
    /// Weight of the class-specific target `H`.
    pub lambda2: f64,
    /// Weight of the visual reconstruction.
    pub lambda3: f64,
    /// Weight of the semantic reconstruction.
    pub lambda4: f64,
    /// Concept dimension.
    pub k: usize,
    pub t_max: usize,
    /// Stop once `|f_t − f_{t−1}| / (1 + f_{t−1}) < tol`.
    pub tol: f64,
    pub seed: u64,
    pub variant: Variant,
    /// Relative ridge applied to degenerate Grams (and the FPL Gram).
    pub ridge_eps: f64,
}

impl Hyperparams {
    /// Defaults for everything but the concept dimension, which has no
    /// sensible default.
    pub fn new(k: usize) -> Self {
        Self {
            lambda1: 1.0,
            lambda2: 1.0,
            lambda3: 1.0,
            lambda4: 1.0,
            k,
            t_max: 100,
            tol: 1e-5,
            seed: 0,
            variant: Variant::Full,
            ridge_eps: 1e-8,
        }
    }

    /// The hyperparameters actually optimized: the variant's disabled terms
    /// have their weights forced to zero.
    pub fn effective(&self) -> Self {
        let mut h = *self;
        match self.variant {
            Variant::Full => {}
            Variant::Jcmspl1 => h.lambda2 = 0.0,
            Variant::Jcmspl0 => {
                h.lambda3 = 0.0;
                h.lambda4 = 0.0;
            }
            Variant::Ipl | Variant::Fpl => {
                h.lambda2 = 0.0;
                h.lambda3 = 0.0;
                h.lambda4 = 0.0;
            }
        }
        if self.variant == Variant::Fpl {
            h.lambda1 = 0.0;
        }
        h
    }

    pub fn validate(&self, seen_classes: usize) -> Result<(), TrainError> {
        let lambdas = [self.lambda1, self.lambda2, self.lambda3, self.lambda4];
        if lambdas.iter().any(|l| !(l.is_finite() && *l >= 0.0)) {
            return Err(TrainError::InvalidHyper(
                "lambda weights must be finite and non-negative".into(),
            ));
        }
        if self.t_max == 0 {
            return Err(TrainError::InvalidHyper("t_max must be at least 1".into()));
        }
        if !(self.tol.is_finite() && self.tol > 0.0) {
            return Err(TrainError::InvalidHyper("tol must be positive".into()));
        }
        if !(self.ridge_eps.is_finite() && self.ridge_eps >= 0.0) {
            return Err(TrainError::InvalidHyper("ridge_eps must be non-negative".into()));
        }
        if self.variant != Variant::Fpl && self.k == 0 {
            return Err(TrainError::InvalidHyper("k must be at least 1".into()));
        }
        if self.variant.uses_class_matrix() && self.k < seen_classes {
            return Err(TrainError::TooFewRows {
                k: self.k,
                classes: seen_classes,
            });
        }
        Ok(())
    }
}

/// A trained model. FPL models carry only `a` (d×m).
#[derive(Debug, Clone, PartialEq)]
pub struct JcmsplModel {
    /// k×m visual projection, or d×m for FPL.
    pub a: Matrix,
    /// k×d semantic projection.
    pub b: Option<Matrix>,
    /// k×n_s concept matrix.
    pub c: Option<Matrix>,
    pub variant: Variant,
    pub hyper: Hyperparams,
}

impl JcmsplModel {
    pub fn visual_dim(&self) -> usize {
        self.a.cols()
    }

    pub fn semantic_dim(&self) -> usize {
        match &self.b {
            Some(b) => b.cols(),
            None => self.a.rows(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub loss: f64,
    /// `‖A_t − A_{t−1}‖_F`, `‖B_t − B_{t−1}‖_F`, `‖C_t − C_{t−1}‖_F`.
    pub delta: [f64; 3],
    pub m_a: f64,
    pub m_b: f64,
    pub m_c: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainingTrace {
    /// Loss at the random initialization.
    pub initial_loss: f64,
    pub records: Vec<IterationRecord>,
    /// First iteration at which the relative loss change fell below `tol`.
    pub converged_at: Option<usize>,
    pub warnings: Vec<String>,
}

impl TrainingTrace {
    pub fn losses(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.loss).collect()
    }

    pub fn iterations(&self) -> usize {
        self.records.len()
    }

    pub fn final_loss(&self) -> f64 {
        self.records.last().map_or(self.initial_loss, |r| r.loss)
    }

    /// Iterations whose loss rose by more than `slack` over the previous
    /// value (the initialization counts as iteration 0).
    pub fn monotonicity_violations(&self, slack: f64) -> Vec<usize> {
        let mut prev = self.initial_loss;
        let mut bad = Vec::new();
        for r in &self.records {
            if r.loss > prev + slack {
                bad.push(r.iteration);
            }
            prev = r.loss;
        }
        bad
    }

    /// Iterations violating
    /// `f_t − f_{t−1} ≤ −(m_A/2)‖ΔA‖² − (m_B/2)‖ΔB‖² − (m_C/2)‖ΔC‖² + slack`.
    pub fn descent_violations(&self, slack: f64) -> Vec<usize> {
        let mut prev = self.initial_loss;
        let mut bad = Vec::new();
        for r in &self.records {
            let [da, db, dc] = r.delta;
            let bound = -0.5 * (r.m_a * da * da + r.m_b * db * db + r.m_c * dc * dc);
            if r.loss - prev > bound + slack {
                bad.push(r.iteration);
            }
            prev = r.loss;
        }
        bad
    }

    /// CSV with header `iteration,loss,dA,dB,dC,mA,mB,mC`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("iteration,loss,dA,dB,dC,mA,mB,mC\n");
        for r in &self.records {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{}\n",
                r.iteration, r.loss, r.delta[0], r.delta[1], r.delta[2], r.m_a, r.m_b, r.m_c
            ));
        }
        out
    }
}

fn gaussian_init(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Matrix {
    let normal = Normal::new(0.0, INIT_STD).expect("valid std");
    Matrix::from_fn(rows, cols, |_, _| normal.sample(rng))
}

/// Trains the requested variant on the dataset's seen split.
///
/// Running out of iterations is not an error; check
/// [`TrainingTrace::converged_at`].
pub fn fit(dataset: &ZslDataset, hyper: &Hyperparams) -> Result<(JcmsplModel, TrainingTrace), TrainError> {
    hyper.validate(dataset.seen_classes().len())?;
    let eff = hyper.effective();
    let x = dataset.visual_seen();
    let y = dataset.semantic_seen();

    if hyper.variant == Variant::Fpl {
        let a = fpl_fit(x, &y, hyper.ridge_eps)?;
        let trace = TrainingTrace {
            initial_loss: 0.5 * (&a.matmul(x) - &y).frobenius_norm_sq(),
            records: Vec::new(),
            converged_at: Some(0),
            warnings: Vec::new(),
        };
        let model = JcmsplModel {
            a,
            b: None,
            c: None,
            variant: Variant::Fpl,
            hyper: *hyper,
        };
        return Ok((model, trace));
    }

    let k = hyper.k;
    let n = dataset.n_seen();
    let h = if eff.lambda2 > 0.0 {
        build_class_matrix(dataset.labels_seen(), k, dataset.seen_classes())?.h
    } else {
        Matrix::zeros(k, n)
    };
    let problem = Problem { x, y: &y, h: &h };

    let mut rng = ChaCha8Rng::seed_from_u64(hyper.seed);
    let mut a = gaussian_init(k, x.rows(), &mut rng);
    let mut b = gaussian_init(k, y.rows(), &mut rng);
    let mut c = gaussian_init(k, n, &mut rng);

    let xxt_min = updates::min_eig(&x.gram())?;
    let yyt_min = updates::min_eig(&y.gram())?;

    let mut trace = TrainingTrace {
        initial_loss: loss(&a, &b, &c, problem, &eff)?,
        ..TrainingTrace::default()
    };
    let mut prev = trace.initial_loss;
    for t in 1..=hyper.t_max {
        let a_step = update_a(&c, x, eff.lambda3, hyper.ridge_eps)?;
        let b_step = update_b(&c, &y, eff.lambda1, eff.lambda4, hyper.ridge_eps)?;
        if let Some(r) = a_step.ridge {
            trace.warnings.push(format!("iteration {t}: A step regularized with ridge {r:.3e}"));
        }
        if let Some(r) = b_step.ridge {
            trace.warnings.push(format!("iteration {t}: B step regularized with ridge {r:.3e}"));
        }
        let c_next = update_c(&a_step.value, &b_step.value, x, &y, &h, &eff)?;
        let constants =
            updates::descent_constants_with(&a_step.value, &b_step.value, &c, xxt_min, yyt_min, &eff)?;

        let delta = [
            (&a_step.value - &a).frobenius_norm(),
            (&b_step.value - &b).frobenius_norm(),
            (&c_next - &c).frobenius_norm(),
        ];
        a = a_step.value;
        b = b_step.value;
        c = c_next;
        let f = loss(&a, &b, &c, problem, &eff)?;
        trace.records.push(IterationRecord {
            iteration: t,
            loss: f,
            delta,
            m_a: constants.m_a,
            m_b: constants.m_b,
            m_c: constants.m_c,
        });
        if (f - prev).abs() / (1.0 + prev) < hyper.tol {
            trace.converged_at = Some(t);
            break;
        }
        prev = f;
    }
    compact_warnings(&mut trace.warnings);

    let model = JcmsplModel {
        a,
        b: Some(b),
        c: Some(c),
        variant: hyper.variant,
        hyper: *hyper,
    };
    Ok((model, trace))
}

/// Collapses per-iteration ridge warnings into one line per block.
fn compact_warnings(warnings: &mut Vec<String>) {
    if warnings.len() <= 2 {
        return;
    }
    let count = |block: &str| warnings.iter().filter(|w| w.contains(block)).count();
    let (na, nb) = (count("A step"), count("B step"));
    let mut out = Vec::new();
    if na > 0 {
        out.push(format!("A step regularized with a ridge on {na} iterations"));
    }
    if nb > 0 {
        out.push(format!("B step regularized with a ridge on {nb} iterations"));
    }
    *warnings = out;
}
