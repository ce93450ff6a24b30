//! From-scratch binary classifiers sharing one scoring interface: an MLP,
//! a random forest, gradient-boosted trees, and linear/RBF SVMs, plus a
//! scaler/PCA/classifier composite pipeline.

pub mod forest;
pub mod gbdt;
pub mod mlp;
pub mod pipeline;
pub mod svm;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::FeatureMatrix;
use crate::num::Real;

#[derive(Debug, Error)]
pub enum LearnError {
    #[error("feature dimension mismatch: model expects {expected}, got {got}")]
    DimMismatch { expected: usize, got: usize },
    #[error("training labels contain a single class")]
    SingleClassInput,
    #[error("label {0} is not binary (expected 0 or 1)")]
    BadLabel(u8),
    #[error("empty training set")]
    EmptyTrainingSet,
    #[error("loss became non-finite at epoch {epoch}")]
    NonFiniteLoss { epoch: usize },
    #[error("labels length {got} does not match sample count {expected}")]
    LabelLength { expected: usize, got: usize },
    #[error("invalid architecture: {0}")]
    BadArchitecture(String),
    #[error("invalid hyperparameter: {0}")]
    BadHyperparameter(String),
    #[error("pipeline stages invalid: {0}")]
    StageDimMismatch(String),
    #[error(transparent)]
    Feature(#[from] crate::features::FeatureError),
}

/// Validates a binary label vector against the sample count.
pub(crate) fn check_labels(n: usize, y: &[u8]) -> Result<(), LearnError> {
    if y.len() != n {
        return Err(LearnError::LabelLength { expected: n, got: y.len() });
    }
    if n == 0 {
        return Err(LearnError::EmptyTrainingSet);
    }
    if let Some(&bad) = y.iter().find(|&&v| v > 1) {
        return Err(LearnError::BadLabel(bad));
    }
    Ok(())
}

pub(crate) fn sigmoid<T: Real>(z: T) -> T {
    // split by sign for numerical stability at large |z|
    if z >= T::zero() {
        T::one() / (T::one() + (-z).exp())
    } else {
        let e = z.exp();
        e / (T::one() + e)
    }
}

/// Any trained classifier, tagged for JSON serialization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ClassifierModel<T> {
    Mlp(mlp::MlpModel<T>),
    Forest(forest::ForestModel<T>),
    Gbdt(gbdt::GbdtModel<T>),
    Svm(svm::SvmModel<T>),
}

impl<T: Real> ClassifierModel<T> {
    pub fn input_dim(&self) -> usize {
        match self {
            ClassifierModel::Mlp(m) => m.input_dim(),
            ClassifierModel::Forest(m) => m.dim,
            ClassifierModel::Gbdt(m) => m.dim,
            ClassifierModel::Svm(m) => m.input_dim(),
        }
    }

    /// Per-row score in [0, 1]: probability for MLP/GBDT, vote fraction for
    /// the forest, sigmoid of the margin for SVMs.
    pub fn predict_score(&self, x: &FeatureMatrix<T>) -> Result<Vec<T>, LearnError> {
        if x.d != self.input_dim() {
            return Err(LearnError::DimMismatch { expected: self.input_dim(), got: x.d });
        }
        Ok(match self {
            ClassifierModel::Mlp(m) => m.predict_score(x),
            ClassifierModel::Forest(m) => m.predict_score(x),
            ClassifierModel::Gbdt(m) => m.predict_score(x),
            ClassifierModel::Svm(m) => m.predict_score(x),
        })
    }

    /// Hard labels: score >= threshold maps to 1 (inclusive).
    pub fn predict(&self, x: &FeatureMatrix<T>, threshold: T) -> Result<Vec<u8>, LearnError> {
        Ok(self
            .predict_score(x)?
            .into_iter()
            .map(|s| u8::from(s >= threshold))
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sigmoid_endpoints_and_symmetry() {
        assert_eq!(sigmoid(0.0f64), 0.5);
        assert!(sigmoid(40.0f64) > 0.999999);
        assert!(sigmoid(-40.0f64) < 1e-6);
        for z in [-3.0f64, -0.5, 0.2, 2.5] {
            assert!((sigmoid(z) + sigmoid(-z) - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn label_validation() {
        assert!(check_labels(3, &[0, 1, 1]).is_ok());
        assert!(matches!(check_labels(2, &[0]), Err(LearnError::LabelLength { .. })));
        assert!(matches!(check_labels(0, &[]), Err(LearnError::EmptyTrainingSet)));
        assert!(matches!(check_labels(2, &[0, 2]), Err(LearnError::BadLabel(2))));
    }
}
