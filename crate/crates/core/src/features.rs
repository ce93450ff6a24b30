//! Patch feature vectors, per-column standardization, and PCA built on a
//! one-sided Jacobi SVD.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::num::{real, to_f64, Real};
use crate::tile::Patch;

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("need at least 2 samples, got {0}")]
    TooFewSamples(usize),
    #[error("k = {k} exceeds min(n-1, d) = {max}")]
    KTooLarge { k: usize, max: usize },
    #[error("data has zero total variance")]
    DegenerateData,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimMismatch { expected: usize, got: usize },
    #[error("non-finite value at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },
    #[error("labels length {got} does not match sample count {expected}")]
    LabelLength { expected: usize, got: usize },
}

/// Row-major n x d sample matrix with optional binary labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMatrix<T> {
    pub n: usize,
    pub d: usize,
    pub values: Vec<T>,
    pub labels: Option<Vec<u8>>,
}

impl<T: Real> FeatureMatrix<T> {
    pub fn new(
        n: usize,
        d: usize,
        values: Vec<T>,
        labels: Option<Vec<u8>>,
    ) -> Result<Self, FeatureError> {
        assert_eq!(values.len(), n * d, "values length must equal n * d");
        for (i, v) in values.iter().enumerate() {
            if !v.is_finite() {
                return Err(FeatureError::NonFinite { row: i / d.max(1), col: i % d.max(1) });
            }
        }
        if let Some(ref l) = labels {
            if l.len() != n {
                return Err(FeatureError::LabelLength { expected: n, got: l.len() });
            }
        }
        Ok(Self { n, d, values, labels })
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.values[i * self.d..(i + 1) * self.d]
    }

    pub fn from_rows(rows: &[Vec<T>], labels: Option<Vec<u8>>) -> Result<Self, FeatureError> {
        let n = rows.len();
        let d = rows.first().map_or(0, Vec::len);
        let mut values = Vec::with_capacity(n * d);
        for r in rows {
            assert_eq!(r.len(), d, "ragged rows");
            values.extend_from_slice(r);
        }
        Self::new(n, d, values, labels)
    }
}

/// Flattens patch RGB bytes row-major, channel-interleaved, scaled to [0, 1];
/// dimension is 3 * size^2.
pub fn patch_to_features<T: Real>(p: &Patch) -> Vec<T> {
    p.pixels
        .data()
        .iter()
        .map(|&b| real::<T>(f64::from(b) / 255.0))
        .collect()
}

/// Per-column standardization parameters (population std, floored at 1e-8).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scaler<T> {
    pub mean: Vec<T>,
    pub std: Vec<T>,
}

pub fn fit_scaler<T: Real>(x: &FeatureMatrix<T>) -> Result<Scaler<T>, FeatureError> {
    if x.n < 2 {
        return Err(FeatureError::TooFewSamples(x.n));
    }
    let n_t = real::<T>(x.n as f64);
    let mut mean = vec![T::zero(); x.d];
    for i in 0..x.n {
        for (j, m) in mean.iter_mut().enumerate() {
            *m += x.row(i)[j];
        }
    }
    for m in &mut mean {
        *m /= n_t;
    }
    let mut std = vec![T::zero(); x.d];
    for i in 0..x.n {
        for (j, s) in std.iter_mut().enumerate() {
            let d = x.row(i)[j] - mean[j];
            *s += d * d;
        }
    }
    let floor = real::<T>(1e-8);
    for s in &mut std {
        *s = (*s / n_t).sqrt().max(floor);
    }
    Ok(Scaler { mean, std })
}

pub fn apply_scaler<T: Real>(
    x: &FeatureMatrix<T>,
    scaler: &Scaler<T>,
) -> Result<FeatureMatrix<T>, FeatureError> {
    if scaler.mean.len() != x.d {
        return Err(FeatureError::DimMismatch { expected: scaler.mean.len(), got: x.d });
    }
    let values = x
        .values
        .chunks_exact(x.d)
        .flat_map(|row| {
            row.iter()
                .enumerate()
                .map(|(j, &v)| (v - scaler.mean[j]) / scaler.std[j])
        })
        .collect();
    FeatureMatrix::new(x.n, x.d, values, x.labels.clone())
}

/// PCA model: principal axes as rows, sorted by explained variance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaModel<T> {
    pub mean: Vec<T>,
    /// k x d, row-major; rows orthonormal.
    pub components: Vec<T>,
    pub explained_variance: Vec<T>,
    pub k: usize,
    pub d: usize,
}

/// One-sided Jacobi orthogonalization of the columns of `a` (m x n,
/// row-major, m >= 1). On return the columns of `a` are mutually orthogonal
/// (equal to U * Sigma) and `v` (n x n, row-major) holds the accumulated
/// right rotations, so original A = a_out * v^T with v orthogonal.
fn jacobi_orthogonalize<T: Real>(a: &mut [T], m: usize, n: usize) -> Vec<T> {
    let mut v = vec![T::zero(); n * n];
    for i in 0..n {
        v[i * n + i] = T::one();
    }
    let tol = real::<T>(1e-15).max(T::epsilon() * real(8.0));
    for _sweep in 0..100 {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let mut app = T::zero();
                let mut aqq = T::zero();
                let mut apq = T::zero();
                for r in 0..m {
                    let x = a[r * n + p];
                    let y = a[r * n + q];
                    app += x * x;
                    aqq += y * y;
                    apq += x * y;
                }
                if apq.abs() <= tol * (app * aqq).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (aqq - app) / (real::<T>(2.0) * apq);
                let t = {
                    let s = if zeta >= T::zero() { T::one() } else { -T::one() };
                    s / (zeta.abs() + (T::one() + zeta * zeta).sqrt())
                };
                let c = T::one() / (T::one() + t * t).sqrt();
                let s = c * t;
                for r in 0..m {
                    let x = a[r * n + p];
                    let y = a[r * n + q];
                    a[r * n + p] = c * x - s * y;
                    a[r * n + q] = s * x + c * y;
                }
                for r in 0..n {
                    let x = v[r * n + p];
                    let y = v[r * n + q];
                    v[r * n + p] = c * x - s * y;
                    v[r * n + q] = s * x + c * y;
                }
            }
        }
        if !rotated {
            break;
        }
    }
    v
}

/// Singular triplets of a row-major m x n matrix, sorted by descending
/// singular value: returns (sigma, right_vectors) where right_vectors is
/// min-side count rows each of length n... see fit_pca for orientation use.
struct ThinSvd<T> {
    /// descending singular values, one per column of the factored side
    sigma: Vec<T>,
    /// right singular vectors of the original n-column matrix, row per
    /// triplet, each of length n
    right: Vec<Vec<T>>,
}

/// Computes singular values and right singular vectors of the row-major
/// m x n matrix `a`. Always factors the orientation with fewer columns.
fn thin_svd<T: Real>(a: &[T], m: usize, n: usize) -> ThinSvd<T> {
    if n <= m {
        let mut work = a.to_vec();
        let v = jacobi_orthogonalize(&mut work, m, n);
        let mut order: Vec<usize> = (0..n).collect();
        let sig: Vec<T> = (0..n)
            .map(|j| (0..m).map(|r| work[r * n + j] * work[r * n + j]).sum::<T>().sqrt())
            .collect();
        order.sort_by(|&i, &j| to_f64(sig[j]).partial_cmp(&to_f64(sig[i])).expect("finite"));
        let sigma = order.iter().map(|&j| sig[j]).collect();
        let right = order
            .iter()
            .map(|&j| (0..n).map(|r| v[r * n + j]).collect())
            .collect();
        ThinSvd { sigma, right }
    } else {
        // factor A^T (n x m); right vectors of A are the orthogonalized
        // columns of A^T normalized by their singular values
        let mut work = vec![T::zero(); n * m];
        for r in 0..m {
            for c in 0..n {
                work[c * m + r] = a[r * n + c];
            }
        }
        let _v = jacobi_orthogonalize(&mut work, n, m);
        let sig: Vec<T> = (0..m)
            .map(|j| (0..n).map(|r| work[r * m + j] * work[r * m + j]).sum::<T>().sqrt())
            .collect();
        let mut order: Vec<usize> = (0..m).collect();
        order.sort_by(|&i, &j| to_f64(sig[j]).partial_cmp(&to_f64(sig[i])).expect("finite"));
        let mut right = Vec::with_capacity(m);
        let mut sigma = Vec::with_capacity(m);
        for &j in &order {
            let s = sig[j];
            sigma.push(s);
            if s > T::zero() {
                right.push((0..n).map(|r| work[r * m + j] / s).collect());
            } else {
                right.push(vec![T::zero(); n]);
            }
        }
        ThinSvd { sigma, right }
    }
}

/// Fits PCA: centers columns, factors the centered matrix, keeps the top-k
/// axes with variances sigma^2 / (n - 1). Each component's largest-magnitude
/// entry is made positive so the output is sign-deterministic.
pub fn fit_pca<T: Real>(x: &FeatureMatrix<T>, k: usize) -> Result<PcaModel<T>, FeatureError> {
    if x.n < 2 {
        return Err(FeatureError::TooFewSamples(x.n));
    }
    let max_k = (x.n - 1).min(x.d);
    if k == 0 || k > max_k {
        return Err(FeatureError::KTooLarge { k, max: max_k });
    }
    let n_t = real::<T>(x.n as f64);
    let mut mean = vec![T::zero(); x.d];
    for i in 0..x.n {
        for (j, m) in mean.iter_mut().enumerate() {
            *m += x.row(i)[j];
        }
    }
    for m in &mut mean {
        *m /= n_t;
    }
    let mut centered = Vec::with_capacity(x.n * x.d);
    for i in 0..x.n {
        for j in 0..x.d {
            centered.push(x.row(i)[j] - mean[j]);
        }
    }
    let total: T = centered.iter().map(|&v| v * v).sum();
    if total <= T::zero() {
        return Err(FeatureError::DegenerateData);
    }
    let svd = thin_svd(&centered, x.n, x.d);
    let denom = real::<T>((x.n - 1) as f64);
    let mut components = Vec::with_capacity(k * x.d);
    let mut explained = Vec::with_capacity(k);
    for i in 0..k {
        let mut axis = svd.right[i].clone();
        let mut arg = 0usize;
        for (j, v) in axis.iter().enumerate() {
            if v.abs() > axis[arg].abs() {
                arg = j;
            }
        }
        if axis[arg] < T::zero() {
            for v in &mut axis {
                *v = -*v;
            }
        }
        components.extend_from_slice(&axis);
        explained.push(svd.sigma[i] * svd.sigma[i] / denom);
    }
    Ok(PcaModel {
        mean,
        components,
        explained_variance: explained,
        k,
        d: x.d,
    })
}

/// Projects rows onto the principal axes: (X - mean) * components^T.
pub fn transform<T: Real>(
    m: &PcaModel<T>,
    x: &FeatureMatrix<T>,
) -> Result<FeatureMatrix<T>, FeatureError> {
    if x.d != m.d {
        return Err(FeatureError::DimMismatch { expected: m.d, got: x.d });
    }
    let mut values = Vec::with_capacity(x.n * m.k);
    for i in 0..x.n {
        let row = x.row(i);
        for c in 0..m.k {
            let comp = &m.components[c * m.d..(c + 1) * m.d];
            let dot = row
                .iter()
                .zip(comp)
                .zip(&m.mean)
                .map(|((&v, &w), &mu)| (v - mu) * w)
                .sum();
            values.push(dot);
        }
    }
    FeatureMatrix::new(x.n, m.k, values, x.labels.clone())
}

/// Maps projected rows back: Y * components + mean.
pub fn inverse_transform<T: Real>(
    m: &PcaModel<T>,
    y: &FeatureMatrix<T>,
) -> Result<FeatureMatrix<T>, FeatureError> {
    if y.d != m.k {
        return Err(FeatureError::DimMismatch { expected: m.k, got: y.d });
    }
    let mut values = Vec::with_capacity(y.n * m.d);
    for i in 0..y.n {
        let row = y.row(i);
        for j in 0..m.d {
            let mut acc = m.mean[j];
            for c in 0..m.k {
                acc += row[c] * m.components[c * m.d + j];
            }
            values.push(acc);
        }
    }
    FeatureMatrix::new(y.n, m.d, values, y.labels.clone())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::raster::RgbRaster;
    use crate::rng::rng_from_seed;
    use rand::Rng;

    type S = f64;

    fn fm(rows: &[&[f64]]) -> FeatureMatrix<S> {
        FeatureMatrix::from_rows(
            &rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>(),
            None,
        )
        .unwrap()
    }

    fn random_fm(n: usize, d: usize, seed: u64) -> FeatureMatrix<S> {
        let mut rng = rng_from_seed(seed);
        let values = (0..n * d).map(|_| rng.gen_range(-2.0..2.0)).collect();
        FeatureMatrix::new(n, d, values, None).unwrap()
    }

    #[test]
    fn patch_features_layout() {
        let mut px = RgbRaster::filled(2, 2, [0, 0, 0]);
        px.set_pixel(0, 0, [255, 0, 0]);
        let p = Patch {
            slide_id: "s".into(),
            x: 0,
            y: 0,
            pixels: px,
            coverage: 1.0,
        };
        let f: Vec<S> = patch_to_features(&p);
        assert_eq!(f.len(), 12);
        assert_eq!(f[0], 1.0);
        assert!(f[1..].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn feature_matrix_validation() {
        assert!(matches!(
            FeatureMatrix::new(1, 2, vec![1.0, f64::NAN], None),
            Err(FeatureError::NonFinite { .. })
        ));
        assert!(matches!(
            FeatureMatrix::new(2, 1, vec![1.0, 2.0], Some(vec![0])),
            Err(FeatureError::LabelLength { .. })
        ));
    }

    #[test]
    fn scaler_hand_case() {
        let x = fm(&[&[0.0], &[2.0]]);
        let s = fit_scaler(&x).unwrap();
        assert_eq!(s.mean, vec![1.0]);
        assert_eq!(s.std, vec![1.0]); // population std of {0, 2}
        let scaled = apply_scaler(&x, &s).unwrap();
        assert_eq!(scaled.values, vec![-1.0, 1.0]);
    }

    #[test]
    fn scaler_constant_column_floors_std() {
        let x = fm(&[&[5.0, 1.0], &[5.0, 3.0]]);
        let s = fit_scaler(&x).unwrap();
        let scaled = apply_scaler(&x, &s).unwrap();
        assert_eq!(scaled.row(0)[0], 0.0);
        assert_eq!(scaled.row(1)[0], 0.0);
    }

    #[test]
    fn scaler_self_standardizes() {
        let x = random_fm(40, 6, 3);
        let s = fit_scaler(&x).unwrap();
        let z = apply_scaler(&x, &s).unwrap();
        let zs = fit_scaler(&z).unwrap();
        for j in 0..6 {
            assert!(zs.mean[j].abs() < 1e-12);
            assert!((zs.std[j] - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn scaler_needs_two_samples() {
        let x = fm(&[&[1.0, 2.0]]);
        assert!(matches!(fit_scaler(&x), Err(FeatureError::TooFewSamples(1))));
    }

    #[test]
    fn pca_collinear_line() {
        let x = fm(&[&[0.0, 0.0], &[1.0, 2.0], &[2.0, 4.0], &[-1.0, -2.0]]);
        let m = fit_pca(&x, 1).unwrap();
        let axis = &m.components[..2];
        let expect = [1.0 / 5f64.sqrt(), 2.0 / 5f64.sqrt()];
        for (a, e) in axis.iter().zip(expect) {
            assert!((a - e).abs() < 1e-10, "axis {axis:?}");
        }
        // the single component carries all the variance
        let total: f64 = {
            let s = fit_scaler(&x).unwrap();
            let n = x.n as f64;
            // recompute as sum of per-column sample variances
            let mut t = 0.0;
            for j in 0..x.d {
                let mu = s.mean[j];
                let ss: f64 = (0..x.n).map(|i| (x.row(i)[j] - mu).powi(2)).sum();
                t += ss / (n - 1.0);
            }
            t
        };
        assert!((m.explained_variance[0] - total).abs() < 1e-10);
    }

    /// Two-sided cyclic Jacobi eigensolver for symmetric matrices; the
    /// covariance route is independent of the SVD implementation.
    fn sym_eigenvalues(mut a: Vec<Vec<f64>>) -> Vec<f64> {
        let n = a.len();
        for _ in 0..200 {
            let mut off = 0.0;
            for p in 0..n {
                for q in p + 1..n {
                    off += a[p][q] * a[p][q];
                }
            }
            if off < 1e-28 {
                break;
            }
            for p in 0..n {
                for q in p + 1..n {
                    if a[p][q].abs() < 1e-30 {
                        continue;
                    }
                    let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                    let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                    let c = 1.0 / (t * t + 1.0).sqrt();
                    let s = c * t;
                    for r in 0..n {
                        let (arp, arq) = (a[r][p], a[r][q]);
                        a[r][p] = c * arp - s * arq;
                        a[r][q] = s * arp + c * arq;
                    }
                    for r in 0..n {
                        let (apr, aqr) = (a[p][r], a[q][r]);
                        a[p][r] = c * apr - s * aqr;
                        a[q][r] = s * apr + c * aqr;
                    }
                }
            }
        }
        let mut eig: Vec<f64> = (0..n).map(|i| a[i][i]).collect();
        eig.sort_by(|x, y| y.partial_cmp(x).unwrap());
        eig
    }

    fn covariance_eigenvalues(x: &FeatureMatrix<S>) -> Vec<f64> {
        let n = x.n as f64;
        let mut mean = vec![0.0; x.d];
        for i in 0..x.n {
            for j in 0..x.d {
                mean[j] += x.row(i)[j] / n;
            }
        }
        let mut cov = vec![vec![0.0; x.d]; x.d];
        for i in 0..x.n {
            for a in 0..x.d {
                for b in 0..x.d {
                    cov[a][b] += (x.row(i)[a] - mean[a]) * (x.row(i)[b] - mean[b]) / (n - 1.0);
                }
            }
        }
        sym_eigenvalues(cov)
    }

    #[test]
    fn pca_variances_match_covariance_eigenvalues() {
        let x = random_fm(10, 5, 42);
        let m = fit_pca(&x, 5).unwrap();
        let eig = covariance_eigenvalues(&x);
        for (got, want) in m.explained_variance.iter().zip(&eig) {
            assert!(
                (got - want).abs() < 1e-8,
                "variance {got} vs eigenvalue {want}"
            );
        }
        // sorted non-increasing
        for w in m.explained_variance.windows(2) {
            assert!(w[0] >= w[1] - 1e-12);
        }
    }

    #[test]
    fn pca_components_orthonormal() {
        let x = random_fm(10, 5, 42);
        let m = fit_pca(&x, 5).unwrap();
        for a in 0..m.k {
            for b in 0..m.k {
                let dot: f64 = (0..m.d)
                    .map(|j| m.components[a * m.d + j] * m.components[b * m.d + j])
                    .sum();
                let want = if a == b { 1.0 } else { 0.0 };
                assert!((dot - want).abs() < 1e-8, "gram[{a}][{b}] = {dot}");
            }
        }
    }

    #[test]
    fn pca_full_rank_reconstruction() {
        let x = random_fm(10, 5, 42);
        let m = fit_pca(&x, 5).unwrap();
        let y = transform(&m, &x).unwrap();
        let back = inverse_transform(&m, &y).unwrap();
        let num: f64 = x
            .values
            .iter()
            .zip(&back.values)
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        let den: f64 = x.values.iter().map(|v| v * v).sum();
        assert!((num / den).sqrt() < 1e-8, "relative error {}", (num / den).sqrt());
    }

    #[test]
    fn pca_wide_matrix_transposed_path() {
        // d > n exercises the transposed factorization
        let x = random_fm(6, 9, 7);
        let m = fit_pca(&x, 5).unwrap();
        for a in 0..m.k {
            for b in 0..m.k {
                let dot: f64 = (0..m.d)
                    .map(|j| m.components[a * m.d + j] * m.components[b * m.d + j])
                    .sum();
                let want = if a == b { 1.0 } else { 0.0 };
                assert!((dot - want).abs() < 1e-8);
            }
        }
        let eig = covariance_eigenvalues(&x);
        for (got, want) in m.explained_variance.iter().zip(&eig) {
            assert!((got - want).abs() < 1e-8);
        }
        let y = transform(&m, &x).unwrap();
        let back = inverse_transform(&m, &y).unwrap();
        let num: f64 = x.values.iter().zip(&back.values).map(|(a, b)| (a - b) * (a - b)).sum();
        let den: f64 = x.values.iter().map(|v| v * v).sum();
        assert!((num / den).sqrt() < 1e-8);
    }

    #[test]
    fn pca_transform_of_mean_is_zero() {
        let x = random_fm(8, 4, 9);
        let m = fit_pca(&x, 3).unwrap();
        let mean_row = FeatureMatrix::new(1, 4, m.mean.clone(), None).unwrap();
        let y = transform(&m, &mean_row).unwrap();
        assert!(y.values.iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn pca_projection_shrinks_distances() {
        let x = random_fm(20, 6, 13);
        let m = fit_pca(&x, 3).unwrap();
        let y = transform(&m, &x).unwrap();
        let mut rng = rng_from_seed(99);
        for _ in 0..50 {
            let a = rng.gen_range(0..20);
            let b = rng.gen_range(0..20);
            let dx: f64 = x
                .row(a)
                .iter()
                .zip(x.row(b))
                .map(|(p, q)| (p - q) * (p - q))
                .sum::<f64>()
                .sqrt();
            let dy: f64 = y
                .row(a)
                .iter()
                .zip(y.row(b))
                .map(|(p, q)| (p - q) * (p - q))
                .sum::<f64>()
                .sqrt();
            assert!(dy <= dx + 1e-8);
        }
    }

    #[test]
    fn pca_explained_bounded_by_total() {
        let x = random_fm(12, 5, 21);
        let n = x.n as f64;
        let mut total = 0.0;
        for j in 0..x.d {
            let mu: f64 = (0..x.n).map(|i| x.row(i)[j]).sum::<f64>() / n;
            total += (0..x.n).map(|i| (x.row(i)[j] - mu).powi(2)).sum::<f64>() / (n - 1.0);
        }
        let partial = fit_pca(&x, 3).unwrap();
        let sum3: f64 = partial.explained_variance.iter().sum();
        assert!(sum3 <= total + 1e-8);
        let full = fit_pca(&x, 5).unwrap();
        let sum5: f64 = full.explained_variance.iter().sum();
        assert!((sum5 - total).abs() < 1e-8, "full rank: {sum5} vs {total}");
    }

    #[test]
    fn pca_sign_convention_deterministic() {
        let x = random_fm(10, 5, 17);
        let a = fit_pca(&x, 4).unwrap();
        let b = fit_pca(&x, 4).unwrap();
        assert_eq!(a, b);
        for c in 0..a.k {
            let row = &a.components[c * a.d..(c + 1) * a.d];
            let maxv = row.iter().fold(0.0f64, |m, &v| m.max(v.abs()));
            assert!(row.iter().any(|&v| v.abs() == maxv && v > 0.0));
        }
    }

    #[test]
    fn pca_error_cases() {
        let x = random_fm(5, 3, 1);
        assert!(matches!(fit_pca(&x, 0), Err(FeatureError::KTooLarge { .. })));
        assert!(matches!(fit_pca(&x, 4), Err(FeatureError::KTooLarge { max: 3, .. })));
        let constant = fm(&[&[1.0, 1.0], &[1.0, 1.0], &[1.0, 1.0]]);
        assert!(matches!(fit_pca(&constant, 1), Err(FeatureError::DegenerateData)));
        let m = fit_pca(&x, 2).unwrap();
        let wrong = random_fm(4, 5, 2);
        assert!(matches!(transform(&m, &wrong), Err(FeatureError::DimMismatch { .. })));
        assert!(matches!(
            inverse_transform(&m, &random_fm(4, 3, 2)),
            Err(FeatureError::DimMismatch { .. })
        ));
    }

    #[test]
    fn pca_model_json_round_trip() {
        let x = random_fm(10, 4, 5);
        let m = fit_pca(&x, 2).unwrap();
        let json = serde_json::to_string(&m).unwrap();
        let back: PcaModel<S> = serde_json::from_str(&json).unwrap();
        assert_eq!(m, back);
    }
}
