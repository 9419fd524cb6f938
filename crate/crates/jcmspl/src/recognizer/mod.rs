//! Zero-shot inference and nearest-neighbour recognition.
//!
//! Visual-to-semantic (`v2s`) maps a visual feature `x` to `BᵀA x` and
//! matches it against class prototypes. Semantic-to-visual (`s2v`) maps each
//! prototype `y` to `AᵀB y` and matches visual features against those class
//! anchors. FPL models only support `v2s`, through their direct map `A x`.

mod metrics;

pub use metrics::{
    eval_generalized, eval_hit_at_k, eval_standard, gzsl_holdout, harmonic_mean, per_class_mean,
    EvalReport, HitAtK,
};

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{dot, Matrix};
use crate::trainer::{JcmsplModel, Variant};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("unsupported variant: {0} models do not support semantic-to-visual inference")]
    UnsupportedVariant(Variant),
    #[error("no candidate classes")]
    EmptyCandidates,
    #[error("every candidate has zero norm; cosine distance is undefined")]
    AllZeroNorm,
    #[error("K = {k} is outside 1..={candidates}")]
    InvalidK { k: usize, candidates: usize },
    #[error("holdout fraction {0} is outside (0, 1)")]
    InvalidFraction(f64),
    #[error("accuracy {0} is outside [0, 1]")]
    OutOfRange(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    #[default]
    V2s,
    S2v,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Distance {
    #[default]
    Cosine,
    Euclidean,
}

macro_rules! string_enum {
    ($ty:ty, $($variant:path => $name:literal),+) => {
        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(match self { $($variant => $name),+ })
            }
        }

        impl FromStr for $ty {
            type Err = String;

            fn from_str(s: &str) -> Result<Self, String> {
                match s.to_ascii_lowercase().as_str() {
                    $($name => Ok($variant),)+
                    _ => Err(format!("unknown value {s:?}")),
                }
            }
        }
    };
}

string_enum!(Direction, Direction::V2s => "v2s", Direction::S2v => "s2v");
string_enum!(Distance, Distance::Cosine => "cosine", Distance::Euclidean => "euclidean");

fn check_len(what: &str, got: usize, want: usize) -> Result<(), EvalError> {
    if got == want {
        Ok(())
    } else {
        Err(EvalError::DimensionMismatch(format!(
            "{what} has length {got}, model expects {want}"
        )))
    }
}

/// `ŷ = BᵀA x`; FPL models return `A x`.
pub fn infer_semantic(model: &JcmsplModel, x: &[f64]) -> Result<Vec<f64>, EvalError> {
    check_len("visual vector", x.len(), model.visual_dim())?;
    let z = model.a.matvec(x);
    Ok(match &model.b {
        Some(b) => b.t_matvec(&z),
        None => z,
    })
}

/// `x̂ = AᵀB y`.
pub fn infer_visual(model: &JcmsplModel, y: &[f64]) -> Result<Vec<f64>, EvalError> {
    let b = model
        .b
        .as_ref()
        .ok_or(EvalError::UnsupportedVariant(model.variant))?;
    check_len("semantic vector", y.len(), b.cols())?;
    Ok(model.a.t_matvec(&b.matvec(y)))
}

/// Column-wise [`infer_semantic`]: `BᵀA X`.
pub fn project_visual(model: &JcmsplModel, x: &Matrix) -> Result<Matrix, EvalError> {
    check_len("visual matrix", x.rows(), model.visual_dim())?;
    let z = model.a.matmul(x);
    Ok(match &model.b {
        Some(b) => b.t_matmul(&z),
        None => z,
    })
}

/// Column-wise [`infer_visual`]: `AᵀB Y`.
pub fn project_semantic(model: &JcmsplModel, y: &Matrix) -> Result<Matrix, EvalError> {
    let b = model
        .b
        .as_ref()
        .ok_or(EvalError::UnsupportedVariant(model.variant))?;
    check_len("semantic matrix", y.rows(), b.cols())?;
    Ok(model.a.t_matmul(&b.matmul(y)))
}

/// Candidate columns prepared for repeated nearest-neighbour queries.
#[derive(Debug, Clone)]
pub struct CandidateSet {
    columns: Vec<Vec<f64>>,
    norms: Vec<f64>,
    distance: Distance,
}

impl CandidateSet {
    pub fn new(candidates: &Matrix, distance: Distance) -> Result<Self, EvalError> {
        if candidates.cols() == 0 {
            return Err(EvalError::EmptyCandidates);
        }
        let columns: Vec<Vec<f64>> = (0..candidates.cols()).map(|j| candidates.column(j)).collect();
        let norms: Vec<f64> = columns.iter().map(|c| dot(c, c).sqrt()).collect();
        if distance == Distance::Cosine && norms.iter().all(|&n| n == 0.0) {
            return Err(EvalError::AllZeroNorm);
        }
        Ok(Self {
            columns,
            norms,
            distance,
        })
    }

    pub fn len(&self) -> usize {
        self.columns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.columns.is_empty()
    }

    /// Candidates whose norm is zero; cosine queries skip them.
    pub fn zero_norm(&self) -> Vec<usize> {
        (0..self.len()).filter(|&j| self.norms[j] == 0.0).collect()
    }

    /// Distance to each candidate; `None` for candidates cosine skips.
    ///
    /// Cosine distance is `1 − cos`; a zero query is at distance 1 from
    /// every nonzero candidate.
    pub fn distances(&self, query: &[f64]) -> Result<Vec<Option<f64>>, EvalError> {
        if let Some(c) = self.columns.first() {
            if c.len() != query.len() {
                return Err(EvalError::DimensionMismatch(format!(
                    "query has length {}, candidates have length {}",
                    query.len(),
                    c.len()
                )));
            }
        }
        Ok(match self.distance {
            Distance::Euclidean => self
                .columns
                .iter()
                .map(|c| {
                    Some(
                        c.iter()
                            .zip(query)
                            .map(|(a, b)| (a - b) * (a - b))
                            .sum::<f64>()
                            .sqrt(),
                    )
                })
                .collect(),
            Distance::Cosine => {
                let qn = dot(query, query).sqrt();
                self.columns
                    .iter()
                    .zip(&self.norms)
                    .map(|(c, &n)| {
                        if n == 0.0 {
                            None
                        } else if qn == 0.0 {
                            Some(1.0)
                        } else {
                            Some(1.0 - dot(c, query) / (n * qn))
                        }
                    })
                    .collect()
            }
        })
    }

    /// Candidate indices from nearest to farthest, ties broken by index.
    pub fn ranking(&self, query: &[f64]) -> Result<Vec<usize>, EvalError> {
        let d = self.distances(query)?;
        let mut order: Vec<usize> = (0..d.len()).filter(|&j| d[j].is_some()).collect();
        order.sort_by(|&i, &j| d[i].unwrap().total_cmp(&d[j].unwrap()).then(i.cmp(&j)));
        Ok(order)
    }

    pub fn nearest(&self, query: &[f64]) -> Result<usize, EvalError> {
        let d = self.distances(query)?;
        let mut best: Option<(usize, f64)> = None;
        for (j, dj) in d.iter().enumerate() {
            if let Some(v) = *dj {
                if best.is_none_or(|(_, b)| v < b) {
                    best = Some((j, v));
                }
            }
        }
        best.map(|(j, _)| j).ok_or(EvalError::AllZeroNorm)
    }
}

/// Nearest candidate column to `query`; ties go to the lowest index.
pub fn classify(query: &[f64], candidates: &Matrix, distance: Distance) -> Result<usize, EvalError> {
    CandidateSet::new(candidates, distance)?.nearest(query)
}

/// Query and candidate matrices for the given direction: `v2s` projects the
/// visual features, `s2v` projects the prototypes.
pub(crate) fn embed(
    model: &JcmsplModel,
    visual: &Matrix,
    prototypes: &Matrix,
    direction: Direction,
) -> Result<(Matrix, Matrix), EvalError> {
    match direction {
        Direction::V2s => {
            check_len("prototype", prototypes.rows(), model.semantic_dim())?;
            Ok((project_visual(model, visual)?, prototypes.clone()))
        }
        Direction::S2v => {
            check_len("visual feature", visual.rows(), model.visual_dim())?;
            Ok((visual.clone(), project_semantic(model, prototypes)?))
        }
    }
}

/// Nearest candidate for every query column, computed in parallel.
pub(crate) fn predict_all(queries: &Matrix, candidates: &CandidateSet) -> Result<Vec<usize>, EvalError> {
    (0..queries.cols())
        .into_par_iter()
        .map(|j| candidates.nearest(&queries.column(j)))
        .collect()
}
