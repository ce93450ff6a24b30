//! Composite model: ordered scaler/PCA transforms feeding one terminal
//! classifier, fitted on training data only and immutable afterwards.

use serde::{Deserialize, Serialize};

use super::forest::{train_forest, ForestParams};
use super::gbdt::{train_gbdt, GbdtParams};
use super::mlp::{train_mlp, MlpParams};
use super::svm::{train_svm, SvmParams};
use super::{ClassifierModel, LearnError};
use crate::features::{
    apply_scaler, fit_pca, fit_scaler, transform, FeatureMatrix, PcaModel, Scaler,
};
use crate::num::Real;

/// One pipeline stage before fitting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "stage", rename_all = "snake_case")]
pub enum StageSpec<T> {
    Scaler,
    Pca { k: usize },
    Classifier(ClassifierSpec<T>),
}

/// Classifier choice plus its hyperparameters; the MLP lists hidden layer
/// sizes only, since the input width is known at fit time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum ClassifierSpec<T> {
    Mlp { hidden: Vec<usize>, params: MlpParams<T> },
    Forest(ForestParams),
    Gbdt(GbdtParams<T>),
    Svm(SvmParams<T>),
}

/// Validated stage list: exactly one classifier, in the terminal position.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineSpec<T> {
    stages: Vec<StageSpec<T>>,
}

pub fn make_pipeline<T: Real>(stages: Vec<StageSpec<T>>) -> Result<PipelineSpec<T>, LearnError> {
    let classifier_positions: Vec<usize> = stages
        .iter()
        .enumerate()
        .filter_map(|(i, s)| matches!(s, StageSpec::Classifier(_)).then_some(i))
        .collect();
    match classifier_positions.as_slice() {
        [] => Err(LearnError::StageDimMismatch(
            "pipeline needs a terminal classifier".into(),
        )),
        [last] if *last == stages.len() - 1 => Ok(PipelineSpec { stages }),
        [one] => Err(LearnError::StageDimMismatch(format!(
            "classifier at position {one} must be the final stage"
        ))),
        many => Err(LearnError::StageDimMismatch(format!(
            "exactly one classifier allowed, found {}",
            many.len()
        ))),
    }
}

impl<T: Real> PipelineSpec<T> {
    pub fn stages(&self) -> &[StageSpec<T>] {
        &self.stages
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "transform", rename_all = "snake_case")]
pub enum FittedTransform<T> {
    Scaler(Scaler<T>),
    Pca(PcaModel<T>),
}

/// Fitted transforms plus the trained terminal classifier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedPipeline<T> {
    pub transforms: Vec<FittedTransform<T>>,
    pub classifier: ClassifierModel<T>,
}

/// Fits every stage in order on the training data only. A PCA stage whose k
/// exceeds min(n-1, d) is clamped with a warning rather than failing.
pub fn fit_pipeline<T: Real>(
    spec: &PipelineSpec<T>,
    x: &FeatureMatrix<T>,
    y: &[u8],
) -> Result<FittedPipeline<T>, LearnError> {
    let mut current = x.clone();
    let mut transforms = Vec::new();
    let mut classifier = None;
    for stage in &spec.stages {
        match stage {
            StageSpec::Scaler => {
                let scaler = fit_scaler(&current)?;
                current = apply_scaler(&current, &scaler)?;
                transforms.push(FittedTransform::Scaler(scaler));
            }
            StageSpec::Pca { k } => {
                let max_k = current.n.saturating_sub(1).min(current.d);
                if max_k == 0 {
                    return Err(LearnError::StageDimMismatch(
                        "too few samples for a PCA stage".into(),
                    ));
                }
                let k_eff = (*k).min(max_k).max(1);
                if k_eff != *k {
                    log::warn!("pca k clamped from {k} to {k_eff} (n = {}, d = {})", current.n, current.d);
                }
                let model = fit_pca(&current, k_eff)?;
                current = transform(&model, &current)?;
                transforms.push(FittedTransform::Pca(model));
            }
            StageSpec::Classifier(c) => {
                classifier = Some(match c {
                    ClassifierSpec::Mlp { hidden, params } => {
                        let mut arch = vec![current.d];
                        arch.extend_from_slice(hidden);
                        arch.push(1);
                        ClassifierModel::Mlp(train_mlp(&current, y, &arch, params)?)
                    }
                    ClassifierSpec::Forest(p) => {
                        ClassifierModel::Forest(train_forest(&current, y, p)?)
                    }
                    ClassifierSpec::Gbdt(p) => ClassifierModel::Gbdt(train_gbdt(&current, y, p)?),
                    ClassifierSpec::Svm(p) => ClassifierModel::Svm(train_svm(&current, y, p)?),
                });
            }
        }
    }
    Ok(FittedPipeline {
        transforms,
        classifier: classifier.expect("spec validated to end with a classifier"),
    })
}

impl<T: Real> FittedPipeline<T> {
    fn apply_transforms(&self, x: &FeatureMatrix<T>) -> Result<FeatureMatrix<T>, LearnError> {
        let mut current = x.clone();
        for t in &self.transforms {
            current = match t {
                FittedTransform::Scaler(s) => apply_scaler(&current, s)?,
                FittedTransform::Pca(p) => transform(p, &current)?,
            };
        }
        Ok(current)
    }

    pub fn predict_score(&self, x: &FeatureMatrix<T>) -> Result<Vec<T>, LearnError> {
        self.classifier.predict_score(&self.apply_transforms(x)?)
    }

    pub fn predict(&self, x: &FeatureMatrix<T>, threshold: T) -> Result<Vec<u8>, LearnError> {
        Ok(self
            .predict_score(x)?
            .into_iter()
            .map(|s| u8::from(s >= threshold))
            .collect())
    }

    /// Per-epoch or per-round training loss when the classifier records one.
    pub fn loss_history(&self) -> Option<&[T]> {
        match &self.classifier {
            ClassifierModel::Mlp(m) => Some(&m.loss_history),
            ClassifierModel::Gbdt(m) => Some(&m.loss_history),
            ClassifierModel::Forest(_) | ClassifierModel::Svm(_) => None,
        }
    }
}
