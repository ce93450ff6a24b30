//! Multilayer perceptron with ReLU hidden layers and a sigmoid output,
//! trained by mini-batch gradient descent on mean binary cross-entropy.

use rand::seq::SliceRandom;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{check_labels, sigmoid, LearnError};
use crate::features::FeatureMatrix;
use crate::num::{real, Real};
use crate::rng::rng_from_seed;

/// Layer sizes run input through hidden layers to the single output unit.
/// weights[l] is (layer_sizes[l+1] x layer_sizes[l]) row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpModel<T> {
    pub layer_sizes: Vec<usize>,
    pub weights: Vec<Vec<T>>,
    pub biases: Vec<Vec<T>>,
    /// Mean training BCE after each epoch.
    pub loss_history: Vec<T>,
}

/// Parameter-shaped gradient container.
#[derive(Debug, Clone)]
pub struct MlpGradient<T> {
    pub weights: Vec<Vec<T>>,
    pub biases: Vec<Vec<T>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MlpParams<T> {
    pub epochs: usize,
    pub lr: T,
    pub batch: usize,
    pub seed: u64,
}

impl<T: Real> Default for MlpParams<T> {
    fn default() -> Self {
        Self { epochs: 200, lr: real(0.1), batch: 32, seed: 0 }
    }
}

impl<T: Real> MlpModel<T> {
    pub fn input_dim(&self) -> usize {
        self.layer_sizes[0]
    }

    /// He-style seeded initialization: weights N(0, 2/fan_in), biases zero.
    pub fn init(arch: &[usize], seed: u64) -> Result<Self, LearnError> {
        if arch.len() < 2 {
            return Err(LearnError::BadArchitecture(
                "need at least input and output layers".into(),
            ));
        }
        if *arch.last().expect("nonempty") != 1 {
            return Err(LearnError::BadArchitecture("output layer must have size 1".into()));
        }
        if arch.iter().any(|&s| s == 0) {
            return Err(LearnError::BadArchitecture("zero-size layer".into()));
        }
        let mut rng = rng_from_seed(seed);
        let mut weights = Vec::new();
        let mut biases = Vec::new();
        for l in 0..arch.len() - 1 {
            let fan_in = arch[l];
            let dist = Normal::new(0.0f64, (2.0 / fan_in as f64).sqrt()).expect("valid sigma");
            weights.push(
                (0..arch[l + 1] * fan_in)
                    .map(|_| real::<T>(dist.sample(&mut rng)))
                    .collect(),
            );
            biases.push(vec![T::zero(); arch[l + 1]]);
        }
        Ok(Self {
            layer_sizes: arch.to_vec(),
            weights,
            biases,
            loss_history: Vec::new(),
        })
    }

    /// Forward pass keeping every activation (index 0 is the input row).
    fn forward(&self, row: &[T]) -> Vec<Vec<T>> {
        let mut acts = vec![row.to_vec()];
        let last = self.weights.len() - 1;
        for (l, (w, b)) in self.weights.iter().zip(&self.biases).enumerate() {
            let n_in = self.layer_sizes[l];
            let prev = &acts[l];
            let mut z: Vec<T> = b
                .iter()
                .enumerate()
                .map(|(o, &bias)| {
                    let mut acc = bias;
                    for (i, &p) in prev.iter().enumerate() {
                        acc += w[o * n_in + i] * p;
                    }
                    acc
                })
                .collect();
            if l == last {
                for v in &mut z {
                    *v = sigmoid(*v);
                }
            } else {
                for v in &mut z {
                    if *v < T::zero() {
                        *v = T::zero();
                    }
                }
            }
            acts.push(z);
        }
        acts
    }

    pub fn predict_score(&self, x: &FeatureMatrix<T>) -> Vec<T> {
        (0..x.n)
            .map(|i| *self.forward(x.row(i)).last().expect("layers").first().expect("unit"))
            .collect()
    }

    fn zero_gradient(&self) -> MlpGradient<T> {
        MlpGradient {
            weights: self.weights.iter().map(|w| vec![T::zero(); w.len()]).collect(),
            biases: self.biases.iter().map(|b| vec![T::zero(); b.len()]).collect(),
        }
    }
}

fn bce<T: Real>(p: T, y: T) -> T {
    let eps = real::<T>(1e-12).max(T::epsilon());
    let p = p.max(eps).min(T::one() - eps);
    -(y * p.ln() + (T::one() - y) * (T::one() - p).ln())
}

/// Mean binary cross-entropy of the model on the given rows.
pub fn bce_loss<T: Real>(model: &MlpModel<T>, x: &FeatureMatrix<T>, y: &[u8]) -> T {
    let scores = model.predict_score(x);
    let n = real::<T>(x.n as f64);
    scores
        .iter()
        .zip(y)
        .map(|(&p, &yi)| bce(p, real(f64::from(yi))))
        .sum::<T>()
        / n
}

/// Analytic gradient of the mean BCE over the given rows, by backpropagation.
pub fn bce_gradient<T: Real>(
    model: &MlpModel<T>,
    x: &FeatureMatrix<T>,
    y: &[u8],
    rows: &[usize],
) -> MlpGradient<T> {
    let mut grad = model.zero_gradient();
    let scale = T::one() / real::<T>(rows.len() as f64);
    let layers = model.weights.len();
    for &i in rows {
        let acts = model.forward(x.row(i));
        let p = acts[layers][0];
        // sigmoid + BCE collapse: dL/dz_out = p - y
        let mut delta = vec![(p - real::<T>(f64::from(y[i]))) * scale];
        for l in (0..layers).rev() {
            let n_in = model.layer_sizes[l];
            let prev = &acts[l];
            for (o, &d) in delta.iter().enumerate() {
                grad.biases[l][o] += d;
                for (j, &a) in prev.iter().enumerate() {
                    grad.weights[l][o * n_in + j] += d * a;
                }
            }
            if l == 0 {
                break;
            }
            // propagate through the ReLU of layer l-1's output
            let mut next = vec![T::zero(); n_in];
            for (j, nx) in next.iter_mut().enumerate() {
                if acts[l][j] > T::zero() {
                    let mut acc = T::zero();
                    for (o, &d) in delta.iter().enumerate() {
                        acc += model.weights[l][o * n_in + j] * d;
                    }
                    *nx = acc;
                }
            }
            delta = next;
        }
    }
    grad
}

/// Trains by mini-batch gradient descent; records mean training BCE per
/// epoch and fails fast if the loss stops being finite.
pub fn train_mlp<T: Real>(
    x: &FeatureMatrix<T>,
    y: &[u8],
    arch: &[usize],
    params: &MlpParams<T>,
) -> Result<MlpModel<T>, LearnError> {
    check_labels(x.n, y)?;
    if arch.first() != Some(&x.d) {
        return Err(LearnError::BadArchitecture(format!(
            "input layer {:?} does not match feature dimension {}",
            arch.first(),
            x.d
        )));
    }
    if params.batch == 0 {
        return Err(LearnError::BadHyperparameter("batch must be positive".into()));
    }
    let mut model = MlpModel::init(arch, params.seed)?;
    let mut rng = rng_from_seed(params.seed.wrapping_add(1));
    let mut order: Vec<usize> = (0..x.n).collect();
    for epoch in 0..params.epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(params.batch) {
            let grad = bce_gradient(&model, x, y, chunk);
            for l in 0..model.weights.len() {
                for (wv, gv) in model.weights[l].iter_mut().zip(&grad.weights[l]) {
                    *wv -= params.lr * *gv;
                }
                for (bv, gv) in model.biases[l].iter_mut().zip(&grad.biases[l]) {
                    *bv -= params.lr * *gv;
                }
            }
        }
        let loss = bce_loss(&model, x, y);
        if !loss.is_finite() {
            return Err(LearnError::NonFiniteLoss { epoch });
        }
        model.loss_history.push(loss);
    }
    Ok(model)
}
