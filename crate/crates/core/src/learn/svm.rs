//! Support vector machines trained with the Pegasos stochastic subgradient
//! scheme: primal updates for the linear kernel, dual violation counts for
//! RBF. The bias term is updated alongside but left unregularized.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{check_labels, sigmoid, LearnError};
use crate::features::FeatureMatrix;
use crate::num::{real, Real};
use crate::rng::rng_from_seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SvmKernel {
    Linear,
    Rbf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kernel", rename_all = "lowercase")]
pub enum SvmModel<T> {
    Linear {
        w: Vec<T>,
        b: T,
    },
    Rbf {
        dim: usize,
        support_vectors: Vec<Vec<T>>,
        dual_coef: Vec<T>,
        gamma: T,
        b: T,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SvmParams<T> {
    pub kernel: SvmKernel,
    pub c: T,
    /// RBF width; ignored by the linear kernel.
    pub gamma: T,
    pub epochs: usize,
    pub seed: u64,
}

impl<T: Real> Default for SvmParams<T> {
    fn default() -> Self {
        Self {
            kernel: SvmKernel::Linear,
            c: T::one(),
            gamma: real(0.5),
            epochs: 100,
            seed: 0,
        }
    }
}

/// exp(-gamma * ||a - b||^2)
pub fn rbf_kernel<T: Real>(a: &[T], b: &[T], gamma: T) -> T {
    let sq: T = a.iter().zip(b).map(|(&x, &y)| (x - y) * (x - y)).sum();
    (-gamma * sq).exp()
}

fn signed_labels<T: Real>(y: &[u8]) -> Result<Vec<T>, LearnError> {
    if y.iter().all(|&v| v == 0) || y.iter().all(|&v| v == 1) {
        return Err(LearnError::SingleClassInput);
    }
    Ok(y.iter()
        .map(|&v| if v == 1 { T::one() } else { -T::one() })
        .collect())
}

pub fn train_svm<T: Real>(
    x: &FeatureMatrix<T>,
    y: &[u8],
    params: &SvmParams<T>,
) -> Result<SvmModel<T>, LearnError> {
    check_labels(x.n, y)?;
    if params.c <= T::zero() {
        return Err(LearnError::BadHyperparameter("C must be positive".into()));
    }
    if params.epochs == 0 {
        return Err(LearnError::BadHyperparameter("epochs must be positive".into()));
    }
    if params.kernel == SvmKernel::Rbf && params.gamma <= T::zero() {
        return Err(LearnError::BadHyperparameter("gamma must be positive".into()));
    }
    let ys = signed_labels::<T>(y)?;
    let lambda = T::one() / (params.c * real::<T>(x.n as f64));
    let mut rng = rng_from_seed(params.seed);
    let mut order: Vec<usize> = (0..x.n).collect();
    match params.kernel {
        SvmKernel::Linear => {
            // the bias rides along as a constant-1 feature so it shares the
            // 1/(lambda t) step and decay; split back out at the end
            let mut w = vec![T::zero(); x.d + 1];
            let mut t = T::zero();
            for _ in 0..params.epochs {
                order.shuffle(&mut rng);
                for &i in &order {
                    t += T::one();
                    let eta = T::one() / (lambda * t);
                    let margin = ys[i]
                        * (x.row(i).iter().zip(&w).map(|(&xi, &wi)| xi * wi).sum::<T>()
                            + w[x.d]);
                    let decay = T::one() - eta * lambda;
                    for wv in &mut w {
                        *wv *= decay;
                    }
                    if margin < T::one() {
                        for (wv, &xi) in w.iter_mut().zip(x.row(i)) {
                            *wv += eta * ys[i] * xi;
                        }
                        w[x.d] += eta * ys[i];
                    }
                }
            }
            let b = w.pop().expect("augmented entry");
            Ok(SvmModel::Linear { w, b })
        }
        SvmKernel::Rbf => {
            // Gram matrix is affordable at desk scale and keeps the loop O(n)
            let gram: Vec<T> = (0..x.n)
                .flat_map(|i| {
                    (0..x.n)
                        .map(|j| rbf_kernel(x.row(i), x.row(j), params.gamma))
                        .collect::<Vec<T>>()
                })
                .collect();
            let mut beta = vec![T::zero(); x.n]; // violation counts
            let mut t = T::zero();
            for _ in 0..params.epochs {
                order.shuffle(&mut rng);
                for &i in &order {
                    t += T::one();
                    let f = (0..x.n)
                        .map(|j| beta[j] * ys[j] * gram[i * x.n + j])
                        .sum::<T>()
                        / (lambda * t);
                    if ys[i] * f < T::one() {
                        beta[i] += T::one();
                    }
                }
            }
            let total = t;
            let mut support_vectors = Vec::new();
            let mut dual_coef = Vec::new();
            for i in 0..x.n {
                if beta[i] > T::zero() {
                    support_vectors.push(x.row(i).to_vec());
                    dual_coef.push(beta[i] * ys[i] / (lambda * total));
                }
            }
            Ok(SvmModel::Rbf {
                dim: x.d,
                support_vectors,
                dual_coef,
                gamma: params.gamma,
                b: T::zero(),
            })
        }
    }
}

impl<T: Real> SvmModel<T> {
    pub fn input_dim(&self) -> usize {
        match self {
            SvmModel::Linear { w, .. } => w.len(),
            SvmModel::Rbf { dim, .. } => *dim,
        }
    }

    /// Raw margin f(x); the sigmoid of this value is the score.
    pub fn decision_value(&self, row: &[T]) -> T {
        match self {
            SvmModel::Linear { w, b } => {
                row.iter().zip(w).map(|(&xi, &wi)| xi * wi).sum::<T>() + *b
            }
            SvmModel::Rbf { support_vectors, dual_coef, gamma, b, .. } => {
                support_vectors
                    .iter()
                    .zip(dual_coef)
                    .map(|(sv, &a)| a * rbf_kernel(sv, row, *gamma))
                    .sum::<T>()
                    + *b
            }
        }
    }

    pub fn decision_values(&self, x: &FeatureMatrix<T>) -> Vec<T> {
        (0..x.n).map(|i| self.decision_value(x.row(i))).collect()
    }

    pub fn predict_score(&self, x: &FeatureMatrix<T>) -> Vec<T> {
        self.decision_values(x).into_iter().map(sigmoid).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;
    use rand::Rng;
    use rand_distr::{Distribution, Normal};

    type S = f64;

    fn blobs(n_per: usize, sep: f64, seed: u64) -> (FeatureMatrix<S>, Vec<u8>) {
        let mut rng = rng_from_seed(seed);
        let noise = Normal::new(0.0, 1.0).unwrap();
        let mut rows = Vec::new();
        let mut y = Vec::new();
        for class in 0..2u8 {
            let center = if class == 0 { -sep } else { sep };
            for _ in 0..n_per {
                rows.push(vec![
                    center + noise.sample(&mut rng),
                    center + noise.sample(&mut rng),
                ]);
                y.push(class);
            }
        }
        (FeatureMatrix::from_rows(&rows, None).unwrap(), y)
    }

    #[test]
    fn separable_pair_boundary_between_points() {
        let x = FeatureMatrix::from_rows(&[vec![-1.0], vec![1.0]], None).unwrap();
        let y = vec![0, 1];
        let params = SvmParams { c: 1000.0, epochs: 200, seed: 3, ..Default::default() };
        let model = train_svm(&x, &y, &params).unwrap();
        let f_neg = model.decision_value(&[-1.0]);
        let f_pos = model.decision_value(&[1.0]);
        assert!(f_neg < 0.0 && f_pos > 0.0, "margins {f_neg} / {f_pos}");
        let SvmModel::Linear { w, b } = &model else { panic!("linear kernel") };
        let boundary = -b / w[0];
        assert!((-1.0..1.0).contains(&boundary), "boundary at {boundary}");
    }

    #[test]
    fn rbf_solves_xor() {
        let x = FeatureMatrix::from_rows(
            &[vec![0.0, 0.0], vec![0.0, 1.0], vec![1.0, 0.0], vec![1.0, 1.0]],
            None,
        )
        .unwrap();
        let y = vec![0, 1, 1, 0];
        let params = SvmParams {
            kernel: SvmKernel::Rbf,
            c: 100.0,
            gamma: 1.0,
            epochs: 500,
            seed: 1,
        };
        let model = train_svm(&x, &y, &params).unwrap();
        let preds: Vec<u8> = model
            .predict_score(&x)
            .iter()
            .map(|&p| u8::from(p >= 0.5))
            .collect();
        assert_eq!(preds, y);
    }

    #[test]
    fn rbf_kernel_properties() {
        let mut rng = rng_from_seed(7);
        for _ in 0..20 {
            let a: Vec<f64> = (0..4).map(|_| rng.gen_range(-3.0..3.0)).collect();
            let b: Vec<f64> = (0..4).map(|_| rng.gen_range(-3.0..3.0)).collect();
            let g = rng.gen_range(0.1..2.0);
            assert_eq!(rbf_kernel(&a, &a, g), 1.0);
            assert_eq!(rbf_kernel(&a, &b, g), rbf_kernel(&b, &a, g));
            assert!(rbf_kernel(&a, &b, g) <= 1.0);
            assert!(rbf_kernel(&a, &b, g) > 0.0);
        }
    }

    #[test]
    fn linear_separates_blobs_held_out() {
        let (xtr, ytr) = blobs(150, 2.0, 5);
        let (xte, yte) = blobs(50, 2.0, 6);
        let params = SvmParams { c: 10.0, epochs: 50, seed: 2, ..Default::default() };
        let model = train_svm(&xtr, &ytr, &params).unwrap();
        let acc = model
            .predict_score(&xte)
            .iter()
            .zip(&yte)
            .filter(|(p, &l)| u8::from(**p >= 0.5) == l)
            .count() as f64
            / yte.len() as f64;
        assert!(acc >= 0.95, "held-out accuracy {acc}");
    }

    #[test]
    fn scores_are_sigmoid_of_decisions() {
        let (x, y) = blobs(20, 2.0, 9);
        let model = train_svm(&x, &y, &SvmParams { epochs: 20, seed: 4, ..Default::default() }).unwrap();
        let decisions = model.decision_values(&x);
        let scores = model.predict_score(&x);
        for (d, s) in decisions.iter().zip(&scores) {
            assert_eq!(crate::learn::sigmoid(*d), *s);
            assert!(*s >= 0.0 && *s <= 1.0);
        }
        // sigmoid is strictly increasing, so score order mirrors margin order
        let mut by_decision: Vec<usize> = (0..x.n).collect();
        by_decision.sort_by(|&a, &b| decisions[a].partial_cmp(&decisions[b]).unwrap());
        for w in by_decision.windows(2) {
            assert!(scores[w[0]] <= scores[w[1]]);
        }
    }

    #[test]
    fn single_class_rejected() {
        let x = FeatureMatrix::from_rows(&[vec![0.0], vec![1.0]], None).unwrap();
        assert!(matches!(
            train_svm(&x, &[1, 1], &SvmParams::<S>::default()),
            Err(LearnError::SingleClassInput)
        ));
    }

    #[test]
    fn hyperparameter_validation() {
        let x = FeatureMatrix::from_rows(&[vec![0.0], vec![1.0]], None).unwrap();
        let y = [0, 1];
        assert!(matches!(
            train_svm(&x, &y, &SvmParams { c: 0.0, ..Default::default() }),
            Err(LearnError::BadHyperparameter(_))
        ));
        assert!(matches!(
            train_svm(&x, &y, &SvmParams { epochs: 0, ..Default::default() }),
            Err(LearnError::BadHyperparameter(_))
        ));
        assert!(matches!(
            train_svm(
                &x,
                &y,
                &SvmParams { kernel: SvmKernel::Rbf, gamma: 0.0, ..Default::default() }
            ),
            Err(LearnError::BadHyperparameter(_))
        ));
    }

    #[test]
    fn deterministic_and_serializable() {
        let (x, y) = blobs(15, 2.0, 11);
        for kernel in [SvmKernel::Linear, SvmKernel::Rbf] {
            let params = SvmParams { kernel, epochs: 10, seed: 13, ..Default::default() };
            let a = train_svm(&x, &y, &params).unwrap();
            let b = train_svm(&x, &y, &params).unwrap();
            let ja = serde_json::to_string(&a).unwrap();
            assert_eq!(ja, serde_json::to_string(&b).unwrap());
            let back: SvmModel<S> = serde_json::from_str(&ja).unwrap();
            assert_eq!(a, back);
        }
    }
}
