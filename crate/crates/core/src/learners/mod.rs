//! Classifiers behind one train/predict contract: brute-force KNN, a Gini
//! CART tree and a small sigmoid MLP.

mod cart;
mod knn;
mod mlp;
mod standardize;

use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::FeatureVector;
use crate::record::Class;

pub use cart::{CartModel, CartNode};
pub use knn::KnnModel;
pub use mlp::{mlp_gradient, mlp_loss, Dense, MlpGradient, MlpModel};
pub use standardize::{standardize_fit, StandardizationParams};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LearnerError {
    #[error("cannot fit on an empty matrix")]
    EmptyMatrix,
    #[error("training data holds a single class")]
    SingleClassDataset,
    #[error("{algorithm} needs at least {needed} samples, got {got}")]
    TooFewSamples {
        algorithm: Algorithm,
        needed: usize,
        got: usize,
    },
    #[error("invalid learner config: {0}")]
    Config(&'static str),
    #[error("{rows} feature rows but {labels} labels")]
    LengthMismatch { rows: usize, labels: usize },
    #[error("row width {got} does not match {expected}")]
    WidthMismatch { expected: usize, got: usize },
    #[error("non-finite feature value")]
    NonFinite,
}

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(
            rows * cols,
            data.len(),
            "matrix shape does not match data length"
        );
        Matrix { rows, cols, data }
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self, LearnerError> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            let r = r.as_ref();
            if r.len() != cols {
                return Err(LearnerError::WidthMismatch {
                    expected: cols,
                    got: r.len(),
                });
            }
            data.extend_from_slice(r);
        }
        Ok(Matrix {
            rows: rows.len(),
            cols,
            data,
        })
    }

    pub fn from_features(fvs: &[FeatureVector]) -> Self {
        let mut data = Vec::with_capacity(fvs.len() * 10);
        for fv in fvs {
            data.extend_from_slice(&fv.x);
        }
        Matrix {
            rows: fvs.len(),
            cols: 10,
            data,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[f64]> {
        // chunks_exact on an empty slice with cols = 0 would panic
        self.data.chunks(self.cols.max(1)).take(self.rows)
    }

    pub fn select(&self, indices: &[usize]) -> Matrix {
        let mut data = Vec::with_capacity(indices.len() * self.cols);
        for &i in indices {
            data.extend_from_slice(self.row(i));
        }
        Matrix {
            rows: indices.len(),
            cols: self.cols,
            data,
        }
    }

    pub fn map_rows(&self, mut f: impl FnMut(&[f64]) -> Vec<f64>) -> Matrix {
        let mut data = Vec::with_capacity(self.data.len());
        for row in self.iter_rows() {
            data.extend(f(row));
        }
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Knn,
    Cart,
    Mlp,
}

impl Algorithm {
    pub const ALL: [Algorithm; 3] = [Algorithm::Knn, Algorithm::Cart, Algorithm::Mlp];

    pub const fn name(self) -> &'static str {
        match self {
            Algorithm::Knn => "knn",
            Algorithm::Cart => "cart",
            Algorithm::Mlp => "mlp",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = LearnerError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "knn" => Ok(Algorithm::Knn),
            "cart" => Ok(Algorithm::Cart),
            "mlp" | "dnn" => Ok(Algorithm::Mlp),
            _ => Err(LearnerError::Config("unknown algorithm")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitCriterion {
    Gini,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CartConfig {
    pub max_depth: usize,
    pub min_leaf: usize,
    pub criterion: SplitCriterion,
}

impl Default for CartConfig {
    fn default() -> Self {
        CartConfig {
            max_depth: 12,
            min_leaf: 5,
            criterion: SplitCriterion::Gini,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Sigmoid,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpConfig {
    pub hidden: Vec<usize>,
    pub activation: Activation,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub init_scale: f64,
    pub seed: u64,
}

impl Default for MlpConfig {
    fn default() -> Self {
        MlpConfig {
            hidden: alloc::vec![16],
            activation: Activation::Sigmoid,
            learning_rate: 0.01,
            epochs: 200,
            batch_size: 32,
            init_scale: 0.1,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearnerConfig {
    pub algorithm: Algorithm,
    pub knn_k: usize,
    pub cart: CartConfig,
    pub mlp: MlpConfig,
}

impl Default for LearnerConfig {
    fn default() -> Self {
        LearnerConfig::for_algorithm(Algorithm::Knn)
    }
}

impl LearnerConfig {
    pub fn for_algorithm(algorithm: Algorithm) -> Self {
        LearnerConfig {
            algorithm,
            knn_k: 3,
            cart: CartConfig::default(),
            mlp: MlpConfig::default(),
        }
    }

    pub fn validate(&self) -> Result<(), LearnerError> {
        if self.knn_k == 0 {
            return Err(LearnerError::Config("knn_k must be at least 1"));
        }
        if self.cart.max_depth == 0 {
            return Err(LearnerError::Config("cart.max_depth must be at least 1"));
        }
        if self.cart.min_leaf == 0 {
            return Err(LearnerError::Config("cart.min_leaf must be at least 1"));
        }
        let m = &self.mlp;
        if !(m.learning_rate.is_finite() && m.learning_rate > 0.0) {
            return Err(LearnerError::Config("mlp.learning_rate must be positive"));
        }
        if m.epochs == 0 {
            return Err(LearnerError::Config("mlp.epochs must be at least 1"));
        }
        if m.batch_size == 0 {
            return Err(LearnerError::Config("mlp.batch_size must be at least 1"));
        }
        if m.hidden.is_empty() || m.hidden.contains(&0) {
            return Err(LearnerError::Config(
                "mlp.hidden needs at least one non-empty layer",
            ));
        }
        if !(m.init_scale.is_finite() && m.init_scale > 0.0) {
            return Err(LearnerError::Config("mlp.init_scale must be positive"));
        }
        Ok(())
    }

    /// Smallest training set this configuration accepts.
    pub fn min_samples(&self) -> usize {
        match self.algorithm {
            Algorithm::Knn => self.knn_k,
            Algorithm::Cart => 2 * self.cart.min_leaf,
            Algorithm::Mlp => self.mlp.batch_size,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "algorithm", rename_all = "lowercase")]
pub enum TrainedModel {
    Knn(KnnModel),
    Cart(CartModel),
    Mlp(MlpModel),
}

impl TrainedModel {
    pub fn algorithm(&self) -> Algorithm {
        match self {
            TrainedModel::Knn(_) => Algorithm::Knn,
            TrainedModel::Cart(_) => Algorithm::Cart,
            TrainedModel::Mlp(_) => Algorithm::Mlp,
        }
    }

    pub fn n_features(&self) -> usize {
        match self {
            TrainedModel::Knn(m) => m.n_features(),
            TrainedModel::Cart(m) => m.n_features(),
            TrainedModel::Mlp(m) => m.n_features(),
        }
    }

    pub fn predict(&self, row: &[f64]) -> Class {
        match self {
            TrainedModel::Knn(m) => m.predict(row),
            TrainedModel::Cart(m) => m.predict(row),
            TrainedModel::Mlp(m) => m.predict(row),
        }
    }

    pub fn predict_all(&self, x: &Matrix) -> Vec<Class> {
        x.iter_rows().map(|r| self.predict(r)).collect()
    }
}

/// Trains `cfg.algorithm` on `features` / `labels`. Deterministic given the
/// inputs (the MLP seed is part of `cfg`).
pub fn train(
    cfg: &LearnerConfig,
    features: &Matrix,
    labels: &[Class],
) -> Result<TrainedModel, LearnerError> {
    cfg.validate()?;
    if features.rows() != labels.len() {
        return Err(LearnerError::LengthMismatch {
            rows: features.rows(),
            labels: labels.len(),
        });
    }
    if features.rows() == 0 {
        return Err(LearnerError::EmptyMatrix);
    }
    if features.data.iter().any(|v| !v.is_finite()) {
        return Err(LearnerError::NonFinite);
    }
    let first = labels[0];
    if labels.iter().all(|&y| y == first) {
        return Err(LearnerError::SingleClassDataset);
    }
    let needed = cfg.min_samples();
    if features.rows() < needed {
        return Err(LearnerError::TooFewSamples {
            algorithm: cfg.algorithm,
            needed,
            got: features.rows(),
        });
    }
    Ok(match cfg.algorithm {
        Algorithm::Knn => TrainedModel::Knn(KnnModel::fit(cfg.knn_k, features, labels)?),
        Algorithm::Cart => TrainedModel::Cart(CartModel::fit(&cfg.cart, features, labels)),
        Algorithm::Mlp => TrainedModel::Mlp(MlpModel::fit(&cfg.mlp, features, labels)?),
    })
}

pub fn predict(model: &TrainedModel, row: &[f64]) -> Class {
    model.predict(row)
}
