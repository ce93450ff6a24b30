//! Gradient-boosted regression trees with the logistic objective, trained by
//! Newton boosting: per-round gradients g = p - y and Hessians h = p(1 - p),
//! leaf weights -G/(H + lambda), split gain from the G^2/(H + lambda) score.

use serde::{Deserialize, Serialize};

use super::{check_labels, sigmoid, LearnError};
use crate::features::FeatureMatrix;
use crate::num::{real, Real};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "node", rename_all = "snake_case")]
pub enum RegNode<T> {
    Split {
        feature: usize,
        threshold: T,
        left: Box<RegNode<T>>,
        right: Box<RegNode<T>>,
    },
    Leaf {
        weight: T,
    },
}

impl<T: Real> RegNode<T> {
    pub fn output(&self, row: &[T]) -> T {
        match self {
            RegNode::Leaf { weight } => *weight,
            RegNode::Split { feature, threshold, left, right } => {
                if row[*feature] < *threshold {
                    left.output(row)
                } else {
                    right.output(row)
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            RegNode::Leaf { .. } => 0,
            RegNode::Split { left, right, .. } => 1 + left.depth().max(right.depth()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbdtModel<T> {
    /// Initial prediction in log-odds.
    pub base_score: T,
    pub trees: Vec<RegNode<T>>,
    pub learning_rate: T,
    pub max_depth: usize,
    pub dim: usize,
    /// Mean training log-loss before boosting and after each round.
    pub loss_history: Vec<T>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GbdtParams<T> {
    pub n_rounds: usize,
    pub max_depth: usize,
    pub learning_rate: T,
    pub reg_lambda: T,
    /// Initial probability override; defaults to the training positive rate.
    pub base_score: Option<T>,
    pub seed: u64,
}

impl<T: Real> Default for GbdtParams<T> {
    fn default() -> Self {
        Self {
            n_rounds: 100,
            max_depth: 6,
            learning_rate: real(0.3),
            reg_lambda: real(1.0),
            base_score: None,
            seed: 0,
        }
    }
}

/// Leaf score -G/(H + lambda) for the gradient/Hessian sums of a node.
fn leaf_weight<T: Real>(g: T, h: T, lambda: T) -> T {
    -g / (h + lambda)
}

/// Structure score G^2/(H + lambda) used in split gain.
fn node_score<T: Real>(g: T, h: T, lambda: T) -> T {
    g * g / (h + lambda)
}

fn grow_reg_tree<T: Real>(
    x: &FeatureMatrix<T>,
    grad: &[T],
    hess: &[T],
    indices: &[usize],
    depth: usize,
    params: &GbdtParams<T>,
) -> RegNode<T> {
    let g_sum: T = indices.iter().map(|&i| grad[i]).sum();
    let h_sum: T = indices.iter().map(|&i| hess[i]).sum();
    let leaf = || RegNode::Leaf { weight: leaf_weight(g_sum, h_sum, params.reg_lambda) };
    if depth >= params.max_depth || indices.len() < 2 {
        return leaf();
    }
    let parent_score = node_score(g_sum, h_sum, params.reg_lambda);
    let mut best: Option<(usize, T, T)> = None; // (feature, threshold, gain)
    for f in 0..x.d {
        let mut vals: Vec<(T, T, T)> = indices
            .iter()
            .map(|&i| (x.row(i)[f], grad[i], hess[i]))
            .collect();
        vals.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite features"));
        let mut gl = T::zero();
        let mut hl = T::zero();
        for w in 0..vals.len() - 1 {
            gl += vals[w].1;
            hl += vals[w].2;
            if vals[w].0 == vals[w + 1].0 {
                continue;
            }
            let threshold = (vals[w].0 + vals[w + 1].0) / real(2.0);
            let gain = node_score(gl, hl, params.reg_lambda)
                + node_score(g_sum - gl, h_sum - hl, params.reg_lambda)
                - parent_score;
            if gain > T::zero() && best.is_none_or(|b| gain > b.2) {
                best = Some((f, threshold, gain));
            }
        }
    }
    let Some((feature, threshold, _)) = best else {
        return leaf();
    };
    let (left_idx, right_idx): (Vec<usize>, Vec<usize>) =
        indices.iter().partition(|&&i| x.row(i)[feature] < threshold);
    RegNode::Split {
        feature,
        threshold,
        left: Box::new(grow_reg_tree(x, grad, hess, &left_idx, depth + 1, params)),
        right: Box::new(grow_reg_tree(x, grad, hess, &right_idx, depth + 1, params)),
    }
}

fn mean_log_loss<T: Real>(logits: &[T], y: &[u8]) -> T {
    let eps = real::<T>(1e-12).max(T::epsilon());
    let n = real::<T>(y.len() as f64);
    logits
        .iter()
        .zip(y)
        .map(|(&z, &yi)| {
            let p = sigmoid(z).max(eps).min(T::one() - eps);
            if yi == 1 {
                -p.ln()
            } else {
                -(T::one() - p).ln()
            }
        })
        .sum::<T>()
        / n
}

/// Trains by Newton boosting. The seed parameter keeps the training
/// signature uniform across models; tree growth itself is deterministic.
pub fn train_gbdt<T: Real>(
    x: &FeatureMatrix<T>,
    y: &[u8],
    params: &GbdtParams<T>,
) -> Result<GbdtModel<T>, LearnError> {
    check_labels(x.n, y)?;
    let base_prob = match params.base_score {
        Some(p) => {
            if p <= T::zero() || p >= T::one() {
                return Err(LearnError::BadHyperparameter(format!(
                    "base_score probability must lie in (0, 1), got {p}"
                )));
            }
            p
        }
        None => {
            let pos = y.iter().filter(|&&v| v == 1).count();
            if pos == 0 || pos == y.len() {
                return Err(LearnError::SingleClassInput);
            }
            real::<T>(pos as f64 / y.len() as f64)
        }
    };
    let base_score = (base_prob / (T::one() - base_prob)).ln();
    let mut logits = vec![base_score; x.n];
    let mut loss_history = vec![mean_log_loss(&logits, y)];
    let mut trees = Vec::with_capacity(params.n_rounds);
    let all: Vec<usize> = (0..x.n).collect();
    for _ in 0..params.n_rounds {
        let mut grad = vec![T::zero(); x.n];
        let mut hess = vec![T::zero(); x.n];
        for i in 0..x.n {
            let p = sigmoid(logits[i]);
            grad[i] = p - real(f64::from(y[i]));
            hess[i] = p * (T::one() - p);
        }
        let tree = grow_reg_tree(x, &grad, &hess, &all, 0, params);
        for i in 0..x.n {
            logits[i] += params.learning_rate * tree.output(x.row(i));
        }
        trees.push(tree);
        loss_history.push(mean_log_loss(&logits, y));
    }
    Ok(GbdtModel {
        base_score,
        trees,
        learning_rate: params.learning_rate,
        max_depth: params.max_depth,
        dim: x.d,
        loss_history,
    })
}

impl<T: Real> GbdtModel<T> {
    pub fn decision_logit(&self, row: &[T]) -> T {
        let mut z = self.base_score;
        for t in &self.trees {
            z += self.learning_rate * t.output(row);
        }
        z
    }

    pub fn predict_score(&self, x: &FeatureMatrix<T>) -> Vec<T> {
        (0..x.n).map(|i| sigmoid(self.decision_logit(x.row(i)))).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;
    use rand::Rng;

    type S = f64;

    fn toy() -> (FeatureMatrix<S>, Vec<u8>) {
        let mut rng = rng_from_seed(8);
        let mut rows = Vec::new();
        let mut y = Vec::new();
        for _ in 0..60 {
            let v: f64 = rng.gen_range(-2.0..2.0);
            let w: f64 = rng.gen_range(-2.0..2.0);
            rows.push(vec![v, w]);
            y.push(u8::from(v + 0.5 * w > 0.1));
        }
        (FeatureMatrix::from_rows(&rows, None).unwrap(), y)
    }

    #[test]
    fn zero_rounds_predicts_base_rate() {
        let (x, y) = toy();
        let pos_rate = y.iter().filter(|&&v| v == 1).count() as f64 / y.len() as f64;
        let params = GbdtParams { n_rounds: 0, ..Default::default() };
        let model = train_gbdt(&x, &y, &params).unwrap();
        for p in model.predict_score(&x) {
            assert!((p - pos_rate).abs() < 1e-12);
        }
    }

    #[test]
    fn single_leaf_round_matches_hand_computation() {
        // depth 0, lr 1, lambda 0, base probability 0.5, labels 3 pos / 1 neg:
        // every p starts at 0.5 so G = 3(0.5-1) + (0.5-0) = -1, H = 4 * 0.25 = 1,
        // leaf weight = -G/(H+0) = 1, new logit 1 for every row
        let x: FeatureMatrix<S> = FeatureMatrix::from_rows(
            &[vec![0.0], vec![1.0], vec![2.0], vec![3.0]],
            None,
        )
        .unwrap();
        let y = vec![1, 1, 1, 0];
        let params = GbdtParams {
            n_rounds: 1,
            max_depth: 0,
            learning_rate: 1.0,
            reg_lambda: 0.0,
            base_score: Some(0.5),
            seed: 0,
        };
        let model = train_gbdt(&x, &y, &params).unwrap();
        assert_eq!(model.base_score, 0.0);
        assert_eq!(model.trees.len(), 1);
        let RegNode::Leaf { weight } = model.trees[0] else {
            panic!("depth 0 must give a single leaf");
        };
        assert!((weight - 1.0).abs() < 1e-12, "leaf weight {weight}");
        let expect = sigmoid(1.0f64);
        for p in model.predict_score(&x) {
            assert!((p - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn lr_zero_freezes_base_rate() {
        let (x, y) = toy();
        let params = GbdtParams { n_rounds: 10, learning_rate: 0.0, ..Default::default() };
        let model = train_gbdt(&x, &y, &params).unwrap();
        let pos_rate = y.iter().filter(|&&v| v == 1).count() as f64 / y.len() as f64;
        for p in model.predict_score(&x) {
            assert_eq!(p, sigmoid((pos_rate / (1.0 - pos_rate)).ln()));
        }
    }

    #[test]
    fn training_loss_non_increasing() {
        let (x, y) = toy();
        let params = GbdtParams { n_rounds: 30, ..Default::default() };
        let model = train_gbdt(&x, &y, &params).unwrap();
        assert_eq!(model.loss_history.len(), 31);
        for w in model.loss_history.windows(2) {
            assert!(w[1] <= w[0] + 1e-9, "loss rose {} -> {}", w[0], w[1]);
        }
    }

    #[test]
    fn fits_separable_data() {
        let (x, y) = toy();
        let params = GbdtParams { n_rounds: 50, max_depth: 3, ..Default::default() };
        let model = train_gbdt(&x, &y, &params).unwrap();
        let acc = model
            .predict_score(&x)
            .iter()
            .zip(&y)
            .filter(|(p, &l)| u8::from(**p >= 0.5) == l)
            .count() as f64
            / y.len() as f64;
        assert!(acc >= 0.95, "training accuracy {acc}");
    }

    #[test]
    fn depth_limit_respected() {
        let (x, y) = toy();
        let params = GbdtParams { n_rounds: 5, max_depth: 2, ..Default::default() };
        let model = train_gbdt(&x, &y, &params).unwrap();
        for t in &model.trees {
            assert!(t.depth() <= 2);
        }
    }

    #[test]
    fn single_class_rejected_without_base_override() {
        let (x, _) = toy();
        let y = vec![1u8; x.n];
        assert!(matches!(
            train_gbdt(&x, &y, &GbdtParams::default()),
            Err(LearnError::SingleClassInput)
        ));
        // an explicit base probability makes the single-class case trainable
        let params = GbdtParams { base_score: Some(0.5), n_rounds: 2, ..Default::default() };
        assert!(train_gbdt(&x, &y, &params).is_ok());
    }

    #[test]
    fn deterministic_and_serializable() {
        let (x, y) = toy();
        let params = GbdtParams { n_rounds: 8, ..Default::default() };
        let a = train_gbdt(&x, &y, &params).unwrap();
        let b = train_gbdt(&x, &y, &params).unwrap();
        let ja = serde_json::to_string(&a).unwrap();
        assert_eq!(ja, serde_json::to_string(&b).unwrap());
        let back: GbdtModel<S> = serde_json::from_str(&ja).unwrap();
        assert_eq!(a, back);
    }
}
