//! Zero-shot datasets: seen/unseen visual features, per-sample labels and
//! per-class semantic prototypes.
//!
//! Class ids index prototype columns directly, so a dataset with class ids
//! `0..c` carries a `d×c` prototype matrix.

mod io;
mod synth;

pub use io::{load_manifest, read_labels, read_matrix_csv, save_manifest, write_labels, write_matrix_csv, Manifest};
pub use synth::{block_partition, synth_generate, PlantedModel, SynthSpec};

use std::collections::BTreeSet;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{LinalgError, Matrix};

pub type ClassId = usize;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("missing file: {}", .0.display())]
    MissingFile(PathBuf),
    #[error("{path}: {message}", path = .path.display())]
    Parse { path: PathBuf, message: String },
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("seen and unseen class lists overlap on id {0}")]
    OverlappingSplits(ClassId),
    #[error("class id {0} has no prototype column or is not in its split's class list")]
    UnknownClassId(ClassId),
    #[error("invalid dataset: {0}")]
    Invalid(String),
    #[error("invalid synthetic spec: {0}")]
    InvalidSpec(String),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error("i/o error on {path}: {source}", path = .path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

/// A validated zero-shot split.
#[derive(Debug, Clone, PartialEq)]
pub struct ZslDataset {
    visual_seen: Matrix,
    labels_seen: Vec<ClassId>,
    visual_unseen: Matrix,
    labels_unseen: Vec<ClassId>,
    prototypes: Matrix,
    seen_classes: Vec<ClassId>,
    unseen_classes: Vec<ClassId>,
}

impl ZslDataset {
    /// Validates every dataset invariant.
    ///
    /// Visual matrices are `m×n` with one sample per column, prototypes are
    /// `d×c_total`, and class lists must be disjoint, duplicate-free and
    /// nonempty.
    pub fn new(
        visual_seen: Matrix,
        labels_seen: Vec<ClassId>,
        visual_unseen: Matrix,
        labels_unseen: Vec<ClassId>,
        prototypes: Matrix,
        seen_classes: Vec<ClassId>,
        unseen_classes: Vec<ClassId>,
    ) -> Result<Self, DatasetError> {
        let m = visual_seen.rows();
        if m == 0 || prototypes.rows() == 0 {
            return Err(DatasetError::Invalid(
                "visual and semantic dimensions must be at least 1".into(),
            ));
        }
        if visual_unseen.rows() != m {
            return Err(DatasetError::ShapeMismatch(format!(
                "seen features have {m} rows, unseen features have {}",
                visual_unseen.rows()
            )));
        }
        if labels_seen.len() != visual_seen.cols() {
            return Err(DatasetError::ShapeMismatch(format!(
                "{} seen labels for {} seen feature columns",
                labels_seen.len(),
                visual_seen.cols()
            )));
        }
        if labels_unseen.len() != visual_unseen.cols() {
            return Err(DatasetError::ShapeMismatch(format!(
                "{} unseen labels for {} unseen feature columns",
                labels_unseen.len(),
                visual_unseen.cols()
            )));
        }
        if labels_seen.is_empty() || labels_unseen.is_empty() {
            return Err(DatasetError::Invalid(
                "both splits need at least one sample".into(),
            ));
        }
        if seen_classes.is_empty() || unseen_classes.is_empty() {
            return Err(DatasetError::Invalid(
                "both splits need at least one class".into(),
            ));
        }
        let seen: BTreeSet<_> = seen_classes.iter().copied().collect();
        let unseen: BTreeSet<_> = unseen_classes.iter().copied().collect();
        if seen.len() != seen_classes.len() || unseen.len() != unseen_classes.len() {
            return Err(DatasetError::Invalid("class lists contain duplicates".into()));
        }
        if let Some(&id) = seen.intersection(&unseen).next() {
            return Err(DatasetError::OverlappingSplits(id));
        }
        let c_total = prototypes.cols();
        if let Some(&id) = seen.iter().chain(&unseen).find(|&&id| id >= c_total) {
            return Err(DatasetError::UnknownClassId(id));
        }
        if let Some(&id) = labels_seen.iter().find(|id| !seen.contains(id)) {
            return Err(DatasetError::UnknownClassId(id));
        }
        if let Some(&id) = labels_unseen.iter().find(|id| !unseen.contains(id)) {
            return Err(DatasetError::UnknownClassId(id));
        }
        Ok(Self {
            visual_seen,
            labels_seen,
            visual_unseen,
            labels_unseen,
            prototypes,
            seen_classes,
            unseen_classes,
        })
    }

    /// Visual feature dimension `m`.
    pub fn visual_dim(&self) -> usize {
        self.visual_seen.rows()
    }

    /// Semantic dimension `d`.
    pub fn semantic_dim(&self) -> usize {
        self.prototypes.rows()
    }

    pub fn n_seen(&self) -> usize {
        self.labels_seen.len()
    }

    pub fn n_unseen(&self) -> usize {
        self.labels_unseen.len()
    }

    pub fn visual_seen(&self) -> &Matrix {
        &self.visual_seen
    }

    pub fn visual_unseen(&self) -> &Matrix {
        &self.visual_unseen
    }

    pub fn labels_seen(&self) -> &[ClassId] {
        &self.labels_seen
    }

    pub fn labels_unseen(&self) -> &[ClassId] {
        &self.labels_unseen
    }

    pub fn prototypes(&self) -> &Matrix {
        &self.prototypes
    }

    pub fn seen_classes(&self) -> &[ClassId] {
        &self.seen_classes
    }

    pub fn unseen_classes(&self) -> &[ClassId] {
        &self.unseen_classes
    }

    /// Per-sample semantic matrix `Y_s` (d×n_s).
    pub fn semantic_seen(&self) -> Matrix {
        expand_prototypes(&self.prototypes, &self.labels_seen)
            .expect("labels validated on construction")
    }

    /// Prototype columns for the given classes, in order.
    pub fn class_prototypes(&self, classes: &[ClassId]) -> Matrix {
        self.prototypes.select_columns(classes)
    }

    /// Copy with visual features normalized; returns indices of zero columns
    /// (seen, unseen) that were passed through.
    pub fn normalized(&self, mode: Normalization) -> (Self, Vec<usize>, Vec<usize>) {
        let (vs, zs) = normalize(&self.visual_seen, mode);
        let (vu, zu) = normalize(&self.visual_unseen, mode);
        let mut out = self.clone();
        out.visual_seen = vs;
        out.visual_unseen = vu;
        (out, zs, zu)
    }

    /// Copy whose seen split drops the listed sample indices. Used to train
    /// on the seen data that remains after a generalized-ZSL holdout.
    pub fn without_seen_samples(&self, drop: &[usize]) -> Result<Self, DatasetError> {
        let drop: BTreeSet<_> = drop.iter().copied().collect();
        let keep: Vec<usize> = (0..self.n_seen()).filter(|i| !drop.contains(i)).collect();
        Self::new(
            self.visual_seen.select_columns(&keep),
            keep.iter().map(|&i| self.labels_seen[i]).collect(),
            self.visual_unseen.clone(),
            self.labels_unseen.clone(),
            self.prototypes.clone(),
            self.seen_classes.clone(),
            self.unseen_classes.clone(),
        )
    }
}

/// Replicates prototype columns per sample: column `i` of the result is the
/// prototype of class `labels[i]`.
pub fn expand_prototypes(prototypes: &Matrix, labels: &[ClassId]) -> Result<Matrix, DatasetError> {
    if let Some(&bad) = labels.iter().find(|&&l| l >= prototypes.cols()) {
        return Err(DatasetError::UnknownClassId(bad));
    }
    Ok(prototypes.select_columns(labels))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    None,
    #[default]
    L2Columns,
}

impl Normalization {
    pub fn as_str(self) -> &'static str {
        match self {
            Normalization::None => "none",
            Normalization::L2Columns => "l2_columns",
        }
    }
}

impl std::fmt::Display for Normalization {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Normalization {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "none" => Ok(Normalization::None),
            "l2" | "l2_columns" => Ok(Normalization::L2Columns),
            _ => Err(format!("unknown normalization {s:?} (expected none or l2)")),
        }
    }
}

/// Column normalization. Zero columns are left as they are and their
/// indices are returned so callers can warn.
pub fn normalize(m: &Matrix, mode: Normalization) -> (Matrix, Vec<usize>) {
    match mode {
        Normalization::None => (m.clone(), Vec::new()),
        Normalization::L2Columns => {
            let norms: Vec<f64> = (0..m.cols())
                .map(|j| m.column(j).iter().map(|v| v * v).sum::<f64>().sqrt())
                .collect();
            let zero: Vec<usize> = norms
                .iter()
                .enumerate()
                .filter(|(_, n)| **n == 0.0)
                .map(|(j, _)| j)
                .collect();
            let out = Matrix::from_fn(m.rows(), m.cols(), |i, j| {
                if norms[j] == 0.0 {
                    0.0
                } else {
                    m[(i, j)] / norms[j]
                }
            });
            (out, zero)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn protos() -> Matrix {
        Matrix::from_rows(&[vec![1.0, 2.0, 3.0], vec![4.0, 5.0, 6.0]]).unwrap()
    }

    fn tiny(seen: Vec<ClassId>, unseen: Vec<ClassId>, labels_seen: Vec<ClassId>) -> Result<ZslDataset, DatasetError> {
        let n = labels_seen.len();
        ZslDataset::new(
            Matrix::zeros(3, n),
            labels_seen,
            Matrix::zeros(3, 1),
            vec![unseen[0]],
            protos(),
            seen,
            unseen,
        )
    }

    #[test]
    fn expand_replicates_columns() {
        let p = Matrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        let y = expand_prototypes(&p, &[0, 0, 1]).unwrap();
        assert_eq!(y.column(0), p.column(0));
        assert_eq!(y.column(1), p.column(0));
        assert_eq!(y.column(2), p.column(1));
        assert_eq!(expand_prototypes(&p, &[]).unwrap().shape(), (2, 0));
        assert!(matches!(
            expand_prototypes(&p, &[2]),
            Err(DatasetError::UnknownClassId(2))
        ));
    }

    #[test]
    fn l2_normalization() {
        let m = Matrix::from_rows(&[vec![3.0, 1.0, 0.0], vec![4.0, 0.0, 0.0]]).unwrap();
        let (n, zero) = normalize(&m, Normalization::L2Columns);
        assert_eq!(n.column(0), vec![0.6, 0.8]);
        assert_eq!(n.column(1), vec![1.0, 0.0]);
        assert_eq!(n.column(2), vec![0.0, 0.0]);
        assert_eq!(zero, vec![2]);
        assert_eq!(normalize(&m, Normalization::None).0, m);
    }

    #[test]
    fn validation() {
        assert!(tiny(vec![0, 1], vec![2], vec![0, 1, 1]).is_ok());
        assert!(matches!(
            tiny(vec![0, 2], vec![2], vec![0]),
            Err(DatasetError::OverlappingSplits(2))
        ));
        assert!(matches!(
            tiny(vec![0], vec![2], vec![1]),
            Err(DatasetError::UnknownClassId(1))
        ));
        assert!(matches!(
            tiny(vec![0, 5], vec![2], vec![0]),
            Err(DatasetError::UnknownClassId(5))
        ));
        let bad = ZslDataset::new(
            Matrix::zeros(3, 4),
            vec![0; 5],
            Matrix::zeros(3, 1),
            vec![2],
            protos(),
            vec![0],
            vec![2],
        );
        assert!(matches!(bad, Err(DatasetError::ShapeMismatch(_))));
    }

    #[test]
    fn dropping_seen_samples() {
        let ds = tiny(vec![0, 1], vec![2], vec![0, 1, 1, 0]).unwrap();
        let sub = ds.without_seen_samples(&[1, 3]).unwrap();
        assert_eq!(sub.labels_seen(), &[0, 1]);
        assert_eq!(sub.n_seen(), 2);
    }
}
