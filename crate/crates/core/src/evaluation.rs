//! Confusion accounting, the competition score, k-fold cross-validation and
//! repeated seeded runs.
//!
//! Polarity follows the competition table: *normal* is the positive class, so
//! `tp` counts normals predicted normal and `fp` counts faults predicted
//! normal (missed icing).
//!
//! ```text
//! score = (1 - 0.5 * fn / N_normal - 0.5 * fp / N_fault) * 100
//! ```

use alloc::vec::Vec;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::learners::{train, LearnerConfig, LearnerError, Matrix};
use crate::record::Class;
use crate::rng::{derive_seeds, seeded};

/// Fold draws attempted before giving up on class-complete folds.
pub const FOLD_REDRAWS: usize = 10;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EvalError {
    #[error("{actual} actual labels but {predicted} predictions")]
    LengthMismatch { actual: usize, predicted: usize },
    #[error("no samples to score")]
    Empty,
    #[error("test data lacks {0:?} samples; the score is undefined")]
    EmptyClassInTest(Class),
    #[error("k = {k} is invalid for {n} samples (need 2 <= k <= n)")]
    InvalidK { k: usize, n: usize },
    #[error("could not draw folds with both classes everywhere after {0} attempts")]
    DegenerateFolds(usize),
    #[error(transparent)]
    Learner(#[from] LearnerError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConfusionCounts {
    /// actual normal, predicted normal
    pub tp: usize,
    /// actual normal, predicted fault
    #[serde(rename = "fn")]
    pub fn_: usize,
    /// actual fault, predicted normal
    pub fp: usize,
    /// actual fault, predicted fault
    pub tn: usize,
}

impl ConfusionCounts {
    pub fn n_normal(&self) -> usize {
        self.tp + self.fn_
    }

    pub fn n_fault(&self) -> usize {
        self.fp + self.tn
    }

    pub fn record(&mut self, actual: Class, predicted: Class) {
        match (actual, predicted) {
            (Class::Normal, Class::Normal) => self.tp += 1,
            (Class::Normal, Class::Abnormal) => self.fn_ += 1,
            (Class::Abnormal, Class::Normal) => self.fp += 1,
            (Class::Abnormal, Class::Abnormal) => self.tn += 1,
        }
    }

    pub fn merge(&mut self, other: &ConfusionCounts) {
        self.tp += other.tp;
        self.fn_ += other.fn_;
        self.fp += other.fp;
        self.tn += other.tn;
    }
}

pub fn confusion(actual: &[Class], predicted: &[Class]) -> Result<ConfusionCounts, EvalError> {
    if actual.len() != predicted.len() {
        return Err(EvalError::LengthMismatch {
            actual: actual.len(),
            predicted: predicted.len(),
        });
    }
    if actual.is_empty() {
        return Err(EvalError::Empty);
    }
    let mut counts = ConfusionCounts::default();
    for (&a, &p) in actual.iter().zip(predicted) {
        counts.record(a, p);
    }
    Ok(counts)
}

/// A competition score in `[0, 100]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Score(f64);

impl Score {
    /// `None` outside `[0, 100]` or for NaN.
    pub fn new(value: f64) -> Option<Score> {
        (0.0..=100.0).contains(&value).then_some(Score(value))
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

/// Evaluates the score as one exact rational, rounded once.
pub fn score(counts: &ConfusionCounts) -> Result<Score, EvalError> {
    let n_normal = counts.n_normal() as u128;
    let n_fault = counts.n_fault() as u128;
    if n_normal == 0 {
        return Err(EvalError::EmptyClassInTest(Class::Normal));
    }
    if n_fault == 0 {
        return Err(EvalError::EmptyClassInTest(Class::Abnormal));
    }
    // 100 * (2 Nn Nf - fn Nf - fp Nn) / (2 Nn Nf)
    let denom = 2 * n_normal * n_fault;
    let numer = 100 * (denom - counts.fn_ as u128 * n_fault - counts.fp as u128 * n_normal);
    Ok(Score(numer as f64 / denom as f64))
}

/// Score straight from label sequences.
pub fn score_labels(actual: &[Class], predicted: &[Class]) -> Result<Score, EvalError> {
    score(&confusion(actual, predicted)?)
}

/// Seeded shuffle of `0..n` cut into `k` contiguous folds; the first `n % k`
/// folds are one larger.
pub fn kfold_split(n: usize, k: usize, seed: u64) -> Result<Vec<Vec<usize>>, EvalError> {
    if k < 2 || k > n {
        return Err(EvalError::InvalidK { k, n });
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut seeded(seed));
    let (base, extra) = (n / k, n % k);
    let mut folds = Vec::with_capacity(k);
    let mut start = 0;
    for f in 0..k {
        let size = base + usize::from(f < extra);
        folds.push(order[start..start + size].to_vec());
        start += size;
    }
    Ok(folds)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvOutcome {
    pub mean: f64,
    pub fold_scores: Vec<f64>,
}

fn has_both(labels: &[Class], idx: impl Iterator<Item = usize>) -> bool {
    let mut seen = [false; 2];
    for i in idx {
        seen[labels[i].as_index()] = true;
        if seen[0] && seen[1] {
            return true;
        }
    }
    false
}

/// k-fold cross-validated competition score.
///
/// Folds are redrawn (up to [`FOLD_REDRAWS`] times) until every training part
/// and every held-out fold contains both classes.
pub fn cross_validate(
    features: &Matrix,
    labels: &[Class],
    cfg: &LearnerConfig,
    k: usize,
    seed: u64,
) -> Result<CvOutcome, EvalError> {
    let n = labels.len();
    if features.rows() != n {
        return Err(EvalError::LengthMismatch {
            actual: n,
            predicted: features.rows(),
        });
    }
    let attempt_seeds = derive_seeds(seed, FOLD_REDRAWS);
    let folds = attempt_seeds
        .iter()
        .map(|&s| kfold_split(n, k, s))
        .find(|draw| match draw {
            Err(_) => true,
            Ok(folds) => folds.iter().enumerate().all(|(f, test)| {
                has_both(labels, test.iter().copied())
                    && has_both(
                        labels,
                        folds
                            .iter()
                            .enumerate()
                            .filter(|(g, _)| *g != f)
                            .flat_map(|(_, v)| v.iter().copied()),
                    )
            }),
        })
        .ok_or(EvalError::DegenerateFolds(FOLD_REDRAWS))??;

    let mut fold_scores = Vec::with_capacity(k);
    for (f, test_idx) in folds.iter().enumerate() {
        let train_idx: Vec<usize> = folds
            .iter()
            .enumerate()
            .filter(|(g, _)| *g != f)
            .flat_map(|(_, v)| v.iter().copied())
            .collect();
        let train_y: Vec<Class> = train_idx.iter().map(|&i| labels[i]).collect();
        let model = train(cfg, &features.select(&train_idx), &train_y)?;
        let test_x = features.select(test_idx);
        let predicted = model.predict_all(&test_x);
        let actual: Vec<Class> = test_idx.iter().map(|&i| labels[i]).collect();
        fold_scores.push(score_labels(&actual, &predicted)?.value());
    }
    let mean = fold_scores.iter().sum::<f64>() / fold_scores.len() as f64;
    Ok(CvOutcome { mean, fold_scores })
}

/// Mean and sample standard deviation over runs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunStatistics {
    pub runs: usize,
    pub mean: f64,
    pub std: f64,
}

impl RunStatistics {
    /// `None` for an empty slice. One run has std 0.
    pub fn from_scores(scores: &[f64]) -> Option<Self> {
        if scores.is_empty() {
            return None;
        }
        let n = scores.len() as f64;
        let mean = scores.iter().sum::<f64>() / n;
        let std = if scores.len() == 1 {
            0.0
        } else {
            libm::sqrt(scores.iter().map(|s| (s - mean) * (s - mean)).sum::<f64>() / (n - 1.0))
        };
        Some(RunStatistics {
            runs: scores.len(),
            mean,
            std,
        })
    }
}

/// Runs `experiment` once per derived child seed and summarizes the scores.
pub fn repeated_runs(
    mut experiment: impl FnMut(u64) -> Score,
    n_runs: usize,
    master_seed: u64,
) -> Option<RunStatistics> {
    let scores: Vec<f64> = derive_seeds(master_seed, n_runs)
        .into_iter()
        .map(|s| experiment(s).value())
        .collect();
    RunStatistics::from_scores(&scores)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learners::Algorithm;
    use alloc::vec;
    use proptest::prelude::*;
    use Class::{Abnormal as F, Normal as N};

    #[test]
    fn confusion_cells() {
        let c = confusion(&[N, N, F, F], &[N, F, N, F]).unwrap();
        assert_eq!(
            c,
            ConfusionCounts {
                tp: 1,
                fn_: 1,
                fp: 1,
                tn: 1
            }
        );
        let perfect = confusion(&[N, F, F], &[N, F, F]).unwrap();
        assert_eq!((perfect.fn_, perfect.fp), (0, 0));
        let blind = confusion(&[F; 4], &[N; 4]).unwrap();
        assert_eq!((blind.fp, blind.tn), (4, 0));
        assert!(matches!(
            confusion(&[N], &[N, F]),
            Err(EvalError::LengthMismatch { .. })
        ));
        assert_eq!(confusion(&[], &[]), Err(EvalError::Empty));
    }

    #[test]
    fn score_examples() {
        let s = |tp, fn_, fp, tn| score(&ConfusionCounts { tp, fn_, fp, tn }).unwrap().value();
        assert_eq!(s(90, 10, 5, 45), 90.0);
        assert_eq!(s(100, 0, 0, 50), 100.0);
        assert_eq!(s(0, 100, 50, 0), 0.0);
        assert_eq!(
            score(&ConfusionCounts {
                tp: 3,
                fn_: 0,
                fp: 0,
                tn: 0
            }),
            Err(EvalError::EmptyClassInTest(Class::Abnormal))
        );
    }

    #[test]
    fn fold_sizes() {
        let folds = kfold_split(10, 5, 1).unwrap();
        assert!(folds.iter().all(|f| f.len() == 2));
        let sizes: Vec<usize> = kfold_split(11, 5, 1)
            .unwrap()
            .iter()
            .map(Vec::len)
            .collect();
        assert_eq!(sizes, vec![3, 2, 2, 2, 2]);
        assert_eq!(
            kfold_split(11, 5, 9).unwrap(),
            kfold_split(11, 5, 9).unwrap()
        );
        assert_eq!(
            kfold_split(3, 5, 0),
            Err(EvalError::InvalidK { k: 5, n: 3 })
        );
        assert!(kfold_split(3, 1, 0).is_err());
    }

    #[test]
    fn separable_cv_is_perfect() {
        let rows: Vec<Vec<f64>> = (0..100).map(|i| vec![i as f64]).collect();
        let y: Vec<Class> = (0..100)
            .map(|i| Class::from_index(usize::from(i >= 50)))
            .collect();
        let cfg = LearnerConfig::for_algorithm(Algorithm::Cart);
        let cv = cross_validate(&Matrix::from_rows(&rows).unwrap(), &y, &cfg, 5, 3).unwrap();
        assert_eq!(cv.mean, 100.0);
        assert_eq!(cv.fold_scores.len(), 5);
    }

    #[test]
    fn cv_rejects_bad_k_and_degenerate_labels() {
        let rows: Vec<Vec<f64>> = (0..4).map(|i| vec![i as f64]).collect();
        let x = Matrix::from_rows(&rows).unwrap();
        let cfg = LearnerConfig::for_algorithm(Algorithm::Knn);
        assert!(matches!(
            cross_validate(&x, &[N, F, N, F], &cfg, 5, 0),
            Err(EvalError::InvalidK { .. })
        ));
        assert_eq!(
            cross_validate(&x, &[N, N, N, F], &cfg, 2, 0),
            Err(EvalError::DegenerateFolds(FOLD_REDRAWS))
        );
    }

    #[test]
    fn run_statistics() {
        let st = repeated_runs(|_| Score(90.0), 4, 1).unwrap();
        assert_eq!((st.mean, st.std, st.runs), (90.0, 0.0, 4));
        assert_eq!(
            repeated_runs(|s| Score(s as f64 % 100.0), 1, 2)
                .unwrap()
                .std,
            0.0
        );
        let st = RunStatistics::from_scores(&[80.0, 90.0]).unwrap();
        assert_eq!(st.mean, 85.0);
        // sqrt(50)
        assert!((st.std - 7.0710678118654755).abs() < 1e-12);
        assert!(RunStatistics::from_scores(&[]).is_none());
    }

    proptest! {
        #[test]
        fn score_invariants(tp in 0usize..500, fn_ in 0usize..500, fp in 0usize..500, tn in 0usize..500, c in 1usize..50) {
            prop_assume!(tp + fn_ > 0 && fp + tn > 0);
            let base = ConfusionCounts { tp, fn_, fp, tn };
            let s = score(&base).unwrap().value();
            prop_assert!((0.0..=100.0).contains(&s));
            let scaled = ConfusionCounts { tp: tp * c, fn_: fn_ * c, fp: fp * c, tn: tn * c };
            prop_assert_eq!(score(&scaled).unwrap().value(), s);
            if tp > 0 {
                let worse = ConfusionCounts { tp: tp - 1, fn_: fn_ + 1, fp, tn };
                prop_assert!(score(&worse).unwrap().value() <= s);
            }
            if tn > 0 {
                let worse = ConfusionCounts { tp, fn_, fp: fp + 1, tn: tn - 1 };
                prop_assert!(score(&worse).unwrap().value() <= s);
            }
        }

        #[test]
        fn folds_partition_indices(n in 2usize..200, k in 2usize..12, seed in any::<u64>()) {
            prop_assume!(k <= n);
            let folds = kfold_split(n, k, seed).unwrap();
            let sizes: Vec<usize> = folds.iter().map(Vec::len).collect();
            prop_assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
            let mut all: Vec<usize> = folds.concat();
            all.sort();
            prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
        }
    }
}
