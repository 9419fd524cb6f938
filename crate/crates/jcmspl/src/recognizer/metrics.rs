use std::collections::BTreeMap;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{embed, predict_all, CandidateSet, Direction, Distance, EvalError};
use crate::dataset::{ClassId, ZslDataset};
use crate::linalg::Matrix;
use crate::trainer::JcmsplModel;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HitAtK {
    pub k: usize,
    pub fraction: f64,
}

/// Accuracy figures for one evaluation run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub overall_accuracy: f64,
    pub per_class_mean_accuracy: f64,
    pub hit_at_k: Option<HitAtK>,
    pub acc_s: Option<f64>,
    pub acc_u: Option<f64>,
    pub hm: Option<f64>,
    pub direction: Direction,
    pub distance: Distance,
}

/// Mean over classes (in `truth`) of the per-class fraction of correct
/// predictions. Returns 0 for empty input.
pub fn per_class_mean(truth: &[ClassId], predicted: &[ClassId]) -> f64 {
    assert_eq!(truth.len(), predicted.len());
    let mut per_class: BTreeMap<ClassId, (usize, usize)> = BTreeMap::new();
    for (t, p) in truth.iter().zip(predicted) {
        let e = per_class.entry(*t).or_default();
        e.1 += 1;
        if t == p {
            e.0 += 1;
        }
    }
    if per_class.is_empty() {
        return 0.0;
    }
    let sum: f64 = per_class.values().map(|&(hit, n)| hit as f64 / n as f64).sum();
    sum / per_class.len() as f64
}

fn overall(truth: &[ClassId], predicted: &[ClassId]) -> f64 {
    if truth.is_empty() {
        return 0.0;
    }
    let hits = truth.iter().zip(predicted).filter(|(t, p)| t == p).count();
    hits as f64 / truth.len() as f64
}

/// `2ab/(a+b)`, defined as 0 when both are 0.
pub fn harmonic_mean(acc_s: f64, acc_u: f64) -> Result<f64, EvalError> {
    for v in [acc_s, acc_u] {
        if !(0.0..=1.0).contains(&v) {
            return Err(EvalError::OutOfRange(v));
        }
    }
    if acc_s + acc_u == 0.0 {
        Ok(0.0)
    } else {
        Ok(2.0 * acc_s * acc_u / (acc_s + acc_u))
    }
}

fn classify_split(
    model: &JcmsplModel,
    visual: &Matrix,
    prototypes: &Matrix,
    classes: &[ClassId],
    direction: Direction,
    distance: Distance,
) -> Result<Vec<ClassId>, EvalError> {
    let (queries, candidates) = embed(model, visual, prototypes, direction)?;
    let set = CandidateSet::new(&candidates, distance)?;
    Ok(predict_all(&queries, &set)?
        .into_iter()
        .map(|j| classes[j])
        .collect())
}

/// Standard zero-shot evaluation: unseen samples against unseen classes only.
pub fn eval_standard(
    model: &JcmsplModel,
    dataset: &ZslDataset,
    direction: Direction,
    distance: Distance,
) -> Result<EvalReport, EvalError> {
    let classes = dataset.unseen_classes();
    let predicted = classify_split(
        model,
        dataset.visual_unseen(),
        &dataset.class_prototypes(classes),
        classes,
        direction,
        distance,
    )?;
    let truth = dataset.labels_unseen();
    Ok(EvalReport {
        overall_accuracy: overall(truth, &predicted),
        per_class_mean_accuracy: per_class_mean(truth, &predicted),
        hit_at_k: None,
        acc_s: None,
        acc_u: None,
        hm: None,
        direction,
        distance,
    })
}

/// Fraction of unseen samples whose class is among the `k` nearest unseen
/// candidates.
pub fn eval_hit_at_k(
    model: &JcmsplModel,
    dataset: &ZslDataset,
    k: usize,
    direction: Direction,
    distance: Distance,
) -> Result<f64, EvalError> {
    let classes = dataset.unseen_classes();
    if k == 0 || k > classes.len() {
        return Err(EvalError::InvalidK {
            k,
            candidates: classes.len(),
        });
    }
    let (queries, candidates) = embed(
        model,
        dataset.visual_unseen(),
        &dataset.class_prototypes(classes),
        direction,
    )?;
    let set = CandidateSet::new(&candidates, distance)?;
    let truth = dataset.labels_unseen();
    let hits = (0..queries.cols())
        .into_par_iter()
        .map(|j| {
            let ranking = set.ranking(&queries.column(j))?;
            Ok(ranking.iter().take(k).any(|&c| classes[c] == truth[j]))
        })
        .collect::<Result<Vec<bool>, EvalError>>()?;
    Ok(hits.iter().filter(|&&h| h).count() as f64 / hits.len().max(1) as f64)
}

/// Seen-sample indices held out for generalized evaluation: for each seen
/// class, `round(fraction · n_c)` samples (at least 1, at most `n_c − 1`;
/// none for single-sample classes) drawn with a seeded RNG. Sorted.
pub fn gzsl_holdout(dataset: &ZslDataset, fraction: f64, seed: u64) -> Result<Vec<usize>, EvalError> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(EvalError::InvalidFraction(fraction));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    for &class in dataset.seen_classes() {
        let members: Vec<usize> = dataset
            .labels_seen()
            .iter()
            .enumerate()
            .filter(|(_, &l)| l == class)
            .map(|(i, _)| i)
            .collect();
        let n = members.len();
        if n < 2 {
            continue;
        }
        let take = ((fraction * n as f64).round() as usize).clamp(1, n - 1);
        out.extend(sample(&mut rng, n, take).into_iter().map(|i| members[i]));
    }
    out.sort_unstable();
    Ok(out)
}

/// Generalized zero-shot evaluation over held-out seen samples plus all
/// unseen samples, with every class as a candidate.
///
/// The model should have been trained without the holdout returned by
/// [`gzsl_holdout`] for the same `fraction` and `seed`.
pub fn eval_generalized(
    model: &JcmsplModel,
    dataset: &ZslDataset,
    holdout_fraction: f64,
    seed: u64,
    direction: Direction,
    distance: Distance,
) -> Result<EvalReport, EvalError> {
    let holdout = gzsl_holdout(dataset, holdout_fraction, seed)?;
    let classes: Vec<ClassId> = dataset
        .seen_classes()
        .iter()
        .chain(dataset.unseen_classes())
        .copied()
        .collect();
    let prototypes = dataset.class_prototypes(&classes);

    let seen_pred = classify_split(
        model,
        &dataset.visual_seen().select_columns(&holdout),
        &prototypes,
        &classes,
        direction,
        distance,
    )?;
    let unseen_pred = classify_split(
        model,
        dataset.visual_unseen(),
        &prototypes,
        &classes,
        direction,
        distance,
    )?;
    let seen_truth: Vec<ClassId> = holdout.iter().map(|&i| dataset.labels_seen()[i]).collect();
    let unseen_truth = dataset.labels_unseen();

    let acc_s = per_class_mean(&seen_truth, &seen_pred);
    let acc_u = per_class_mean(unseen_truth, &unseen_pred);
    let truth: Vec<ClassId> = seen_truth.iter().chain(unseen_truth).copied().collect();
    let predicted: Vec<ClassId> = seen_pred.into_iter().chain(unseen_pred).collect();
    Ok(EvalReport {
        overall_accuracy: overall(&truth, &predicted),
        per_class_mean_accuracy: per_class_mean(&truth, &predicted),
        hit_at_k: None,
        acc_s: Some(acc_s),
        acc_u: Some(acc_u),
        hm: Some(harmonic_mean(acc_s, acc_u)?),
        direction,
        distance,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn per_class_weighting() {
        // class 0 has one (wrong) sample, class 1 three correct ones
        let truth = [0, 1, 1, 1];
        let pred = [1, 1, 1, 1];
        assert_eq!(overall(&truth, &pred), 0.75);
        assert_eq!(per_class_mean(&truth, &pred), 0.5);
        assert_eq!(per_class_mean(&truth, &truth), 1.0);
    }

    #[test]
    fn harmonic_mean_values() {
        assert!((harmonic_mean(0.676, 0.433).unwrap() - 0.528).abs() <= 0.0005);
        assert!((harmonic_mean(0.4, 0.4).unwrap() - 0.4).abs() < 1e-15);
        assert_eq!(harmonic_mean(0.7, 0.0).unwrap(), 0.0);
        assert_eq!(harmonic_mean(0.0, 0.0).unwrap(), 0.0);
        assert_eq!(harmonic_mean(1.2, 0.5).unwrap_err(), EvalError::OutOfRange(1.2));
    }

    #[test]
    fn report_json_fields() {
        let r = EvalReport {
            overall_accuracy: 1.0,
            per_class_mean_accuracy: 1.0,
            hit_at_k: Some(HitAtK { k: 2, fraction: 1.0 }),
            acc_s: None,
            acc_u: None,
            hm: None,
            direction: Direction::S2v,
            distance: Distance::Cosine,
        };
        let v: serde_json::Value = serde_json::to_value(&r).unwrap();
        let keys: Vec<&str> = v.as_object().unwrap().keys().map(String::as_str).collect();
        let mut want = vec![
            "overall_accuracy",
            "per_class_mean_accuracy",
            "hit_at_k",
            "acc_s",
            "acc_u",
            "hm",
            "direction",
            "distance",
        ];
        let mut got = keys.clone();
        got.sort_unstable();
        want.sort_unstable();
        assert_eq!(got, want);
        assert_eq!(v["direction"], "s2v");
        assert_eq!(v["distance"], "cosine");
    }

    proptest! {
        #[test]
        fn harmonic_mean_bounds(a in 0.0..=1.0f64, b in 0.0..=1.0f64) {
            let hm = harmonic_mean(a, b).unwrap();
            prop_assert!(hm <= 2.0 * a.min(b) + 1e-15);
            prop_assert!(hm <= (a + b) / 2.0 + 1e-15);
            prop_assert!((0.0..=1.0).contains(&hm));
        }

        #[test]
        fn duplicating_a_class_keeps_per_class_mean(
            pairs in proptest::collection::vec((0usize..4, 0usize..4), 1..40),
            dup in 0usize..4,
        ) {
            let truth: Vec<_> = pairs.iter().map(|p| p.0).collect();
            let pred: Vec<_> = pairs.iter().map(|p| p.1).collect();
            let mut t2 = truth.clone();
            let mut p2 = pred.clone();
            for (t, p) in truth.iter().zip(&pred) {
                if *t == dup {
                    t2.push(*t);
                    p2.push(*p);
                }
            }
            prop_assert!((per_class_mean(&truth, &pred) - per_class_mean(&t2, &p2)).abs() < 1e-12);
        }
    }
}
