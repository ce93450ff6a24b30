//! Random forest: bootstrapped Gini trees over random feature subsets with
//! majority-vote prediction.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{check_labels, LearnError};
use crate::features::FeatureMatrix;
use crate::num::{real, Real};
use crate::rng::rng_from_seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "node", rename_all = "snake_case")]
pub enum TreeNode<T> {
    Split {
        feature: usize,
        threshold: T,
        left: Box<TreeNode<T>>,
        right: Box<TreeNode<T>>,
    },
    Leaf {
        /// class sample counts [negative, positive] at this leaf
        counts: [u64; 2],
    },
}

impl<T: Real> TreeNode<T> {
    /// Hard vote of a single tree; leaf ties go to the positive class.
    pub fn vote(&self, row: &[T]) -> u8 {
        match self {
            TreeNode::Leaf { counts } => u8::from(counts[1] >= counts[0]),
            TreeNode::Split { feature, threshold, left, right } => {
                if row[*feature] < *threshold {
                    left.vote(row)
                } else {
                    right.vote(row)
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 0,
            TreeNode::Split { left, right, .. } => 1 + left.depth().max(right.depth()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestModel<T> {
    pub trees: Vec<TreeNode<T>>,
    pub n_trees: usize,
    pub feature_subsample: usize,
    pub dim: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForestParams {
    pub n_trees: usize,
    pub max_depth: Option<usize>,
    pub min_samples_split: usize,
    pub seed: u64,
}

impl Default for ForestParams {
    fn default() -> Self {
        Self { n_trees: 100, max_depth: None, min_samples_split: 2, seed: 0 }
    }
}

/// Winning split of a greedy Gini search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitCandidate<T> {
    pub feature: usize,
    pub threshold: T,
    pub gain: T,
}

fn gini<T: Real>(counts: [u64; 2]) -> T {
    let n = counts[0] + counts[1];
    if n == 0 {
        return T::zero();
    }
    let n_t = real::<T>(n as f64);
    let p0 = real::<T>(counts[0] as f64) / n_t;
    let p1 = real::<T>(counts[1] as f64) / n_t;
    T::one() - p0 * p0 - p1 * p1
}

/// Greedy Gini split search over the given candidate features, with
/// thresholds at midpoints between consecutive distinct values. Rows go left
/// when value < threshold. Returns the first-encountered maximum-gain split
/// with positive gain (features in given order, thresholds ascending).
pub fn find_best_split<T: Real>(
    x: &FeatureMatrix<T>,
    y: &[u8],
    indices: &[usize],
    features: &[usize],
) -> Option<SplitCandidate<T>> {
    let mut parent = [0u64; 2];
    for &i in indices {
        parent[y[i] as usize] += 1;
    }
    let parent_gini = gini::<T>(parent);
    let n_t = real::<T>(indices.len() as f64);
    let mut best: Option<SplitCandidate<T>> = None;
    for &f in features {
        let mut vals: Vec<(T, u8)> = indices.iter().map(|&i| (x.row(i)[f], y[i])).collect();
        vals.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite features"));
        let mut left = [0u64; 2];
        let mut right = parent;
        for w in 0..vals.len() - 1 {
            left[vals[w].1 as usize] += 1;
            right[vals[w].1 as usize] -= 1;
            if vals[w].0 == vals[w + 1].0 {
                continue;
            }
            let threshold = (vals[w].0 + vals[w + 1].0) / real(2.0);
            let nl = real::<T>((w + 1) as f64);
            let nr = n_t - nl;
            let gain = parent_gini - (nl * gini::<T>(left) + nr * gini::<T>(right)) / n_t;
            if gain > T::zero() && best.is_none_or(|b| gain > b.gain) {
                best = Some(SplitCandidate { feature: f, threshold, gain });
            }
        }
    }
    best
}

fn grow_tree<T: Real, R: Rng>(
    x: &FeatureMatrix<T>,
    y: &[u8],
    indices: &[usize],
    depth: usize,
    n_features: usize,
    params: &ForestParams,
    rng: &mut R,
) -> TreeNode<T> {
    let mut counts = [0u64; 2];
    for &i in indices {
        counts[y[i] as usize] += 1;
    }
    let pure = counts[0] == 0 || counts[1] == 0;
    let depth_capped = params.max_depth.is_some_and(|d| depth >= d);
    if pure || indices.len() < params.min_samples_split || depth_capped {
        return TreeNode::Leaf { counts };
    }
    let mut features = rand::seq::index::sample(rng, x.d, n_features).into_vec();
    features.sort_unstable();
    let Some(split) = find_best_split(x, y, indices, &features) else {
        return TreeNode::Leaf { counts };
    };
    let (left_idx, right_idx): (Vec<usize>, Vec<usize>) = indices
        .iter()
        .partition(|&&i| x.row(i)[split.feature] < split.threshold);
    TreeNode::Split {
        feature: split.feature,
        threshold: split.threshold,
        left: Box::new(grow_tree(x, y, &left_idx, depth + 1, n_features, params, rng)),
        right: Box::new(grow_tree(x, y, &right_idx, depth + 1, n_features, params, rng)),
    }
}

/// Trains trees on seeded bootstrap samples; tree t draws from a stream
/// seeded with seed XOR t, so per-tree results are order-independent.
pub fn train_forest<T: Real>(
    x: &FeatureMatrix<T>,
    y: &[u8],
    params: &ForestParams,
) -> Result<ForestModel<T>, LearnError> {
    check_labels(x.n, y)?;
    if params.n_trees == 0 {
        return Err(LearnError::BadHyperparameter("n_trees must be positive".into()));
    }
    let n_features = ((x.d as f64).sqrt().floor() as usize).clamp(1, x.d);
    let trees = (0..params.n_trees)
        .map(|t| {
            let mut rng = rng_from_seed(params.seed ^ t as u64);
            let bootstrap: Vec<usize> = (0..x.n).map(|_| rng.gen_range(0..x.n)).collect();
            grow_tree(x, y, &bootstrap, 0, n_features, params, &mut rng)
        })
        .collect();
    Ok(ForestModel {
        trees,
        n_trees: params.n_trees,
        feature_subsample: n_features,
        dim: x.d,
    })
}

impl<T: Real> ForestModel<T> {
    /// Fraction of trees voting positive.
    pub fn predict_score(&self, x: &FeatureMatrix<T>) -> Vec<T> {
        (0..x.n)
            .map(|i| {
                let votes: u64 = self.trees.iter().map(|t| u64::from(t.vote(x.row(i)))).sum();
                real::<T>(votes as f64 / self.trees.len() as f64)
            })
            .collect()
    }
}
