use std::ops::Range;

use super::TrainError;
use crate::dataset::{block_partition, ClassId};
use crate::linalg::Matrix;

/// The `{0,1}` target `H` (k×n_s): every sample's column is the indicator of
/// its class's row block.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassSpecificMatrix {
    pub h: Matrix,
    /// Row block of each seen class, in seen-class order.
    pub block_rows: Vec<Range<usize>>,
}

/// Builds `H` with contiguous row blocks in `seen_classes` order.
///
/// Block sizes are `⌊k/c_s⌋`; the `k mod c_s` leftover rows go one each to
/// the earliest classes.
pub fn build_class_matrix(
    labels_seen: &[ClassId],
    k: usize,
    seen_classes: &[ClassId],
) -> Result<ClassSpecificMatrix, TrainError> {
    if seen_classes.is_empty() || k < seen_classes.len() {
        return Err(TrainError::TooFewRows {
            k,
            classes: seen_classes.len(),
        });
    }
    let block_rows = block_partition(k, seen_classes.len());
    let block_of = |label: ClassId| -> Result<&Range<usize>, TrainError> {
        seen_classes
            .iter()
            .position(|&c| c == label)
            .map(|p| &block_rows[p])
            .ok_or_else(|| TrainError::ShapeMismatch(format!("label {label} is not a seen class")))
    };
    let mut h = Matrix::zeros(k, labels_seen.len());
    for (j, &label) in labels_seen.iter().enumerate() {
        for i in block_of(label)?.clone() {
            h[(i, j)] = 1.0;
        }
    }
    Ok(ClassSpecificMatrix { h, block_rows })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rows(m: &Matrix) -> Vec<Vec<f64>> {
        (0..m.rows()).map(|i| m.row(i).to_vec()).collect()
    }

    #[test]
    fn even_blocks() {
        let h = build_class_matrix(&[0, 0, 1], 4, &[0, 1]).unwrap();
        assert_eq!(
            rows(&h.h),
            vec![
                vec![1.0, 1.0, 0.0],
                vec![1.0, 1.0, 0.0],
                vec![0.0, 0.0, 1.0],
                vec![0.0, 0.0, 1.0]
            ]
        );
    }

    #[test]
    fn remainder_to_first_class() {
        let h = build_class_matrix(&[0, 1], 3, &[0, 1]).unwrap();
        assert_eq!(rows(&h.h), vec![vec![1.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0]]);
        assert_eq!(h.block_rows, vec![0..2, 2..3]);
    }

    #[test]
    fn follows_seen_class_order() {
        let h = build_class_matrix(&[5, 2], 2, &[2, 5]).unwrap();
        assert_eq!(rows(&h.h), vec![vec![0.0, 1.0], vec![1.0, 0.0]]);
    }

    #[test]
    fn too_few_rows() {
        assert!(matches!(
            build_class_matrix(&[0], 2, &[0, 1, 2]),
            Err(TrainError::TooFewRows { k: 2, classes: 3 })
        ));
    }

    #[test]
    fn structural_invariants() {
        let labels = [3, 1, 3, 4, 1, 4, 4];
        let seen = [1, 3, 4];
        let h = build_class_matrix(&labels, 8, &seen).unwrap();
        for (j, &l) in labels.iter().enumerate() {
            let block = &h.block_rows[seen.iter().position(|&c| c == l).unwrap()];
            let col = h.h.column(j);
            assert_eq!(col.iter().sum::<f64>(), block.len() as f64);
            for (i, v) in col.iter().enumerate() {
                assert_eq!(*v == 1.0, block.contains(&i));
            }
        }
        let covered: usize = h.block_rows.iter().map(|r| r.len()).sum();
        assert_eq!(covered, 8);
    }
}
