use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{standardize_fit, LearnerError, Matrix, StandardizationParams};
use crate::record::Class;

/// Brute-force k-nearest-neighbours over z-scored features.
///
/// Euclidean distance; equal distances prefer the lower training row, and a
/// split vote goes to abnormal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnnModel {
    k: usize,
    scaling: StandardizationParams,
    points: Matrix,
    labels: Vec<Class>,
}

impl KnnModel {
    pub(super) fn fit(k: usize, features: &Matrix, labels: &[Class]) -> Result<Self, LearnerError> {
        let scaling = standardize_fit(features)?;
        Ok(KnnModel {
            k,
            points: scaling.apply_matrix(features),
            scaling,
            labels: labels.to_vec(),
        })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn n_features(&self) -> usize {
        self.points.cols()
    }

    /// Standardized training rows.
    pub fn points(&self) -> &Matrix {
        &self.points
    }

    pub fn scaling(&self) -> &StandardizationParams {
        &self.scaling
    }

    /// Indices of the `k` nearest training rows, nearest first.
    pub fn neighbours(&self, row: &[f64]) -> Vec<usize> {
        let q = self.scaling.apply(row);
        // (squared distance, row) kept sorted ascending
        let mut best: Vec<(f64, usize)> = Vec::with_capacity(self.k + 1);
        for (i, p) in self.points.iter_rows().enumerate() {
            let d: f64 = p.iter().zip(&q).map(|(a, b)| (a - b) * (a - b)).sum();
            if best.len() == self.k && d >= best[self.k - 1].0 {
                continue;
            }
            let pos = best.partition_point(|&(bd, _)| bd <= d);
            best.insert(pos, (d, i));
            best.truncate(self.k);
        }
        best.into_iter().map(|(_, i)| i).collect()
    }

    pub fn predict(&self, row: &[f64]) -> Class {
        let neighbours = self.neighbours(row);
        let abnormal = neighbours
            .iter()
            .filter(|&&i| self.labels[i] == Class::Abnormal)
            .count();
        if 2 * abnormal >= neighbours.len() {
            Class::Abnormal
        } else {
            Class::Normal
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learners::{train, Algorithm, LearnerConfig, TrainedModel};
    use alloc::vec;
    use proptest::prelude::*;

    #[test]
    fn memorizes_training_rows() {
        let rows: Vec<Vec<f64>> = (0..20).map(|i| vec![i as f64, (i * i) as f64]).collect();
        let labels: Vec<Class> = (0..20).map(|i| Class::from_index(i % 2)).collect();
        let m = KnnModel::fit(3, &Matrix::from_rows(&rows).unwrap(), &labels).unwrap();
        assert_eq!(m.points().rows(), 20);
    }

    #[test]
    fn hand_checked_query() {
        // standardization fitted on the fixture; distances computed by hand
        // after z-scoring still put the three A points nearest to (0.9, 1.0)
        let rows = vec![
            vec![0.0, 0.0],
            vec![0.0, 0.1],
            vec![1.0, 1.0],
            vec![1.0, 0.9],
            vec![1.0, 1.1],
        ];
        let labels = vec![
            Class::Normal,
            Class::Normal,
            Class::Abnormal,
            Class::Abnormal,
            Class::Abnormal,
        ];
        let m = KnnModel::fit(3, &Matrix::from_rows(&rows).unwrap(), &labels).unwrap();
        assert_eq!(m.predict(&[0.9, 1.0]), Class::Abnormal);
        assert_eq!(m.predict(&[0.0, 0.05]), Class::Normal);
    }

    #[test]
    fn distance_ties_prefer_lower_row() {
        let rows = vec![vec![1.0], vec![-1.0], vec![1.0], vec![-1.0]];
        let labels = vec![
            Class::Normal,
            Class::Abnormal,
            Class::Abnormal,
            Class::Normal,
        ];
        let m = KnnModel::fit(1, &Matrix::from_rows(&rows).unwrap(), &labels).unwrap();
        assert_eq!(m.neighbours(&[0.0]), vec![0]);
        assert_eq!(m.predict(&[0.0]), Class::Normal);
        let m2 = KnnModel::fit(2, &Matrix::from_rows(&rows).unwrap(), &labels).unwrap();
        assert_eq!(m2.neighbours(&[0.0]), vec![0, 1]);
        // one vote each: goes to abnormal
        assert_eq!(m2.predict(&[0.0]), Class::Abnormal);
    }

    fn fixture(n: usize, seed: u64) -> (Matrix, Vec<Class>) {
        use rand::Rng;
        let mut rng = crate::rng::seeded(seed);
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..4).map(|_| rng.random_range(-5.0..5.0)).collect())
            .collect();
        let labels = (0..n)
            .map(|_| Class::from_index(rng.random_range(0..2)))
            .collect();
        (Matrix::from_rows(&rows).unwrap(), labels)
    }

    #[test]
    fn k1_reproduces_training_labels() {
        let (x, y) = fixture(60, 9);
        let mut cfg = LearnerConfig::for_algorithm(Algorithm::Knn);
        cfg.knn_k = 1;
        let m = train(&cfg, &x, &y).unwrap();
        assert_eq!(m.predict_all(&x), y);
    }

    proptest! {
        #[test]
        fn affine_rescaling_keeps_labels(
            seed in any::<u64>(),
            scales in prop::collection::vec(0.2f64..20.0, 4),
            offsets in prop::collection::vec(-50.0f64..50.0, 4),
            flip in prop::collection::vec(any::<bool>(), 4),
        ) {
            let (x, y) = fixture(40, seed);
            let (q, _) = fixture(15, seed ^ 0xdead);
            let affine = |r: &[f64]| -> Vec<f64> {
                r.iter().enumerate().map(|(j, v)| {
                    let s = if flip[j] { -scales[j] } else { scales[j] };
                    v * s + offsets[j]
                }).collect()
            };
            let cfg = LearnerConfig::for_algorithm(Algorithm::Knn);
            let a = train(&cfg, &x, &y).unwrap();
            let b = train(&cfg, &x.map_rows(affine), &y).unwrap();
            if let (TrainedModel::Knn(ka), TrainedModel::Knn(kb)) = (&a, &b) {
                for row in q.iter_rows() {
                    // near-ties can reorder under rounding; compare only clear cases
                    let qa = ka.scaling().apply(row);
                    let mut d: Vec<f64> = ka.points().iter_rows()
                        .map(|p| p.iter().zip(&qa).map(|(u, v)| (u - v) * (u - v)).sum())
                        .collect();
                    d.sort_by(f64::total_cmp);
                    if d[3] - d[2] > 1e-6 && d[2] - d[1] > 1e-9 {
                        prop_assert_eq!(ka.predict(row), kb.predict(&affine(row)));
                    }
                }
            }
        }
    }
}
