//! Dataset splitting, cross-validation folds, and binary classification
//! metrics: confusion counts, precision/recall/F1/accuracy, ROC curves, AUC.
//!
//! The positive class is tumor (label 1) throughout. Metrics with a zero
//! denominator are reported as errors here and as `null` in serialized
//! reports, never silently coerced to 0.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::num::{real, Real};
use crate::rng::rng_from_seed;
use rand::seq::SliceRandom;

#[derive(Debug, Error, PartialEq)]
pub enum EvalError {
    #[error("label vector is empty")]
    EmptyClass,
    #[error("fold count {k} out of range for {n} samples (need 2 <= k <= n)")]
    KOutOfRange { k: usize, n: usize },
    #[error("length mismatch: {left} labels vs {right} values")]
    LengthMismatch { left: usize, right: usize },
    #[error("labels must be 0 or 1, found {0}")]
    BadLabel(u8),
    #[error("test fraction {0} must lie in [0, 1)")]
    BadFraction(f64),
    #[error("score at index {0} is not finite")]
    NonFiniteScore(usize),
    #[error("need both classes present, found only one")]
    SingleClassInput,
    #[error("metric {0} is undefined (zero denominator)")]
    UndefinedMetric(&'static str),
}

fn check_binary(labels: &[u8]) -> Result<(), EvalError> {
    match labels.iter().find(|&&l| l > 1) {
        Some(&l) => Err(EvalError::BadLabel(l)),
        None => Ok(()),
    }
}

/// Index split produced by [`stratified_split`]. Both lists are sorted
/// ascending; together they partition `0..n`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Split {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

/// Splits indices into train/test with per-class test counts of
/// `round(n_c * test_frac)` (round half up). Membership within each class is
/// chosen by a seeded shuffle, so the split depends only on `(labels, seed)`.
pub fn stratified_split(labels: &[u8], test_frac: f64, seed: u64) -> Result<Split, EvalError> {
    if labels.is_empty() {
        return Err(EvalError::EmptyClass);
    }
    check_binary(labels)?;
    if !(0.0..1.0).contains(&test_frac) {
        return Err(EvalError::BadFraction(test_frac));
    }
    let mut rng = rng_from_seed(seed);
    let mut train = Vec::new();
    let mut test = Vec::new();
    for class in 0u8..=1 {
        let mut idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        if idx.is_empty() {
            continue;
        }
        let n_test = (idx.len() as f64 * test_frac + 0.5).floor() as usize;
        idx.shuffle(&mut rng);
        test.extend_from_slice(&idx[..n_test]);
        train.extend_from_slice(&idx[n_test..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok(Split { train, test })
}

/// Returns `k` disjoint validation index sets whose union is `0..n`. Fold
/// sizes differ by at most one; with `stratify_labels`, per-class counts per
/// fold also differ by at most one. Each fold is sorted ascending.
pub fn kfold(
    n: usize,
    k: usize,
    seed: u64,
    stratify_labels: Option<&[u8]>,
) -> Result<Vec<Vec<usize>>, EvalError> {
    if k < 2 || k > n {
        return Err(EvalError::KOutOfRange { k, n });
    }
    if let Some(labels) = stratify_labels {
        if labels.len() != n {
            return Err(EvalError::LengthMismatch { left: labels.len(), right: n });
        }
        check_binary(labels)?;
    }
    let mut rng = rng_from_seed(seed);
    let mut folds = vec![Vec::new(); k];
    // One round-robin cursor shared across classes keeps total fold sizes
    // within one of each other even when per-class counts are uneven.
    let mut cursor = 0usize;
    let groups: Vec<Vec<usize>> = match stratify_labels {
        None => vec![(0..n).collect()],
        Some(labels) => (0u8..=1)
            .map(|c| (0..n).filter(|&i| labels[i] == c).collect())
            .filter(|g: &Vec<usize>| !g.is_empty())
            .collect(),
    };
    for mut group in groups {
        group.shuffle(&mut rng);
        for idx in group {
            folds[cursor].push(idx);
            cursor = (cursor + 1) % k;
        }
    }
    for fold in &mut folds {
        fold.sort_unstable();
    }
    Ok(folds)
}

/// Binary confusion counts with tumor (label 1) as the positive class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    pub r#fn: u64,
}

impl ConfusionMatrix {
    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.tn + self.r#fn
    }
}

pub fn confusion(y_true: &[u8], y_pred: &[u8]) -> Result<ConfusionMatrix, EvalError> {
    if y_true.len() != y_pred.len() {
        return Err(EvalError::LengthMismatch { left: y_true.len(), right: y_pred.len() });
    }
    check_binary(y_true)?;
    check_binary(y_pred)?;
    let mut cm = ConfusionMatrix { tp: 0, fp: 0, tn: 0, r#fn: 0 };
    for (&t, &p) in y_true.iter().zip(y_pred) {
        match (t, p) {
            (1, 1) => cm.tp += 1,
            (0, 1) => cm.fp += 1,
            (0, 0) => cm.tn += 1,
            _ => cm.r#fn += 1,
        }
    }
    Ok(cm)
}

fn ratio<T: Real>(num: u64, den: u64, name: &'static str) -> Result<T, EvalError> {
    if den == 0 {
        return Err(EvalError::UndefinedMetric(name));
    }
    Ok(real::<T>(num as f64) / real::<T>(den as f64))
}

pub fn precision<T: Real>(cm: &ConfusionMatrix) -> Result<T, EvalError> {
    ratio(cm.tp, cm.tp + cm.fp, "precision")
}

pub fn recall<T: Real>(cm: &ConfusionMatrix) -> Result<T, EvalError> {
    ratio(cm.tp, cm.tp + cm.r#fn, "recall")
}

pub fn f1<T: Real>(cm: &ConfusionMatrix) -> Result<T, EvalError> {
    let p: T = precision(cm).map_err(|_| EvalError::UndefinedMetric("f1"))?;
    let r: T = recall(cm).map_err(|_| EvalError::UndefinedMetric("f1"))?;
    if p + r == T::zero() {
        return Err(EvalError::UndefinedMetric("f1"));
    }
    Ok(real::<T>(2.0) * p * r / (p + r))
}

pub fn accuracy<T: Real>(cm: &ConfusionMatrix) -> Result<T, EvalError> {
    ratio(cm.tp + cm.tn, cm.total(), "accuracy")
}

/// One operating point of a ROC curve. The first point carries an infinite
/// threshold (nothing predicted positive).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RocPoint<T> {
    pub threshold: T,
    pub fpr: T,
    pub tpr: T,
}

/// ROC curve with one point per distinct score (descending) plus the (0, 0)
/// sentinel. Tied scores flip together, so trapezoids across tie groups
/// contribute the half-credit expected by the pairwise AUC interpretation.
/// Integer counts back the points so [`auc`] can work in exact arithmetic.
#[derive(Debug, Clone, PartialEq)]
pub struct RocCurve<T> {
    pub points: Vec<RocPoint<T>>,
    pub tp_counts: Vec<u64>,
    pub fp_counts: Vec<u64>,
    pub pos: u64,
    pub neg: u64,
}

impl<T: Real> RocCurve<T> {
    /// CSV rendering with header `threshold,fpr,tpr`, one row per point.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("threshold,fpr,tpr\n");
        for p in &self.points {
            out.push_str(&format!("{},{},{}\n", p.threshold, p.fpr, p.tpr));
        }
        out
    }
}

pub fn roc_curve<T: Real>(y_true: &[u8], scores: &[T]) -> Result<RocCurve<T>, EvalError> {
    if y_true.len() != scores.len() {
        return Err(EvalError::LengthMismatch { left: y_true.len(), right: scores.len() });
    }
    check_binary(y_true)?;
    if let Some(i) = scores.iter().position(|s| !s.is_finite()) {
        return Err(EvalError::NonFiniteScore(i));
    }
    let pos = y_true.iter().filter(|&&l| l == 1).count() as u64;
    let neg = y_true.len() as u64 - pos;
    if pos == 0 || neg == 0 {
        return Err(EvalError::SingleClassInput);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_unstable_by(|&a, &b| scores[b].partial_cmp(&scores[a]).expect("finite scores"));

    let mut points = vec![RocPoint { threshold: T::infinity(), fpr: T::zero(), tpr: T::zero() }];
    let mut tp_counts = vec![0u64];
    let mut fp_counts = vec![0u64];
    let (mut tp, mut fp) = (0u64, 0u64);
    let mut i = 0;
    while i < order.len() {
        let score = scores[order[i]];
        while i < order.len() && scores[order[i]] == score {
            match y_true[order[i]] {
                1 => tp += 1,
                _ => fp += 1,
            }
            i += 1;
        }
        points.push(RocPoint {
            threshold: score,
            fpr: real::<T>(fp as f64) / real::<T>(neg as f64),
            tpr: real::<T>(tp as f64) / real::<T>(pos as f64),
        });
        tp_counts.push(tp);
        fp_counts.push(fp);
    }
    Ok(RocCurve { points, tp_counts, fp_counts, pos, neg })
}

/// Trapezoidal area under the ROC curve.
///
/// The trapezoid sum is accumulated over the exact integer counts, giving an
/// exact numerator S with denominator D = 2 * pos * neg. The division is
/// performed only when S/D >= 1/2; the other side is obtained as
/// 1 - (D - S)/D, which is an exact float subtraction. This makes
/// `auc(complemented scores) == 1 - auc(scores)` hold bitwise.
pub fn auc<T: Real>(curve: &RocCurve<T>) -> T {
    let d = 2u128 * curve.pos as u128 * curve.neg as u128;
    if d == 0 {
        return real::<T>(0.5);
    }
    let mut s = 0u128;
    for i in 1..curve.tp_counts.len() {
        let dfp = (curve.fp_counts[i] - curve.fp_counts[i - 1]) as u128;
        let tp_sum = (curve.tp_counts[i] + curve.tp_counts[i - 1]) as u128;
        s += dfp * tp_sum;
    }
    if 2 * s >= d {
        real::<T>(s as f64) / real::<T>(d as f64)
    } else {
        T::one() - real::<T>((d - s) as f64) / real::<T>(d as f64)
    }
}

/// Metric block shared by the headline report and per-fold entries.
/// `None` serializes as JSON `null` and marks an undefined (0/0) metric.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetricSummary<T> {
    pub confusion: ConfusionMatrix,
    pub precision: Option<T>,
    pub recall: Option<T>,
    pub f1: Option<T>,
    pub accuracy: Option<T>,
    pub auc: Option<T>,
}

impl<T: Real> MetricSummary<T> {
    pub fn from_parts(cm: ConfusionMatrix, auc: Option<T>) -> Self {
        MetricSummary {
            confusion: cm,
            precision: precision(&cm).ok(),
            recall: recall(&cm).ok(),
            f1: f1(&cm).ok(),
            accuracy: accuracy(&cm).ok(),
            auc,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReportMeta {
    pub model: String,
    pub seed: u64,
    pub config_hash: String,
    pub positive_class: String,
}

/// Full evaluation report: headline metrics on the test split, optional
/// per-fold cross-validation metrics, and run metadata.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalReport<T> {
    #[serde(flatten)]
    pub metrics: MetricSummary<T>,
    pub per_fold: Option<Vec<MetricSummary<T>>>,
    pub metadata: ReportMeta,
}
