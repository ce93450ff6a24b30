//! Stain normalization: optical density transform, sparse-NMF stain
//! estimation, and concentration-space color transfer between slides.

use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::num::{real, to_f64, Real};
use crate::raster::RgbRaster;
use crate::rng::{derive_seed, hash_label, rng_from_seed};

#[derive(Debug, Error)]
pub enum StainError {
    #[error("too few foreground pixels for stain fitting: {found} (need >= {need})")]
    InsufficientTissue { found: usize, need: usize },
    #[error("empty input")]
    EmptyInput,
    #[error("lambda must be positive for fitting, got {0}")]
    NonPositiveLambda(f64),
    #[error("stain model json: {0}")]
    Json(String),
}

/// Per-pixel optical densities, three nonnegative channels per pixel.
#[derive(Debug, Clone, PartialEq)]
pub struct OdImage<T> {
    pub width: usize,
    pub height: usize,
    /// 3 values per pixel, row-major, R G B order.
    pub od: Vec<T>,
}

/// od = -ln((I + 1) / 256); I = 255 maps to exactly 0.
pub fn rgb_to_od<T: Real>(raster: &RgbRaster) -> OdImage<T> {
    let od = raster
        .data()
        .iter()
        .map(|&v| -real::<T>((f64::from(v) + 1.0) / 256.0).ln())
        .collect();
    OdImage {
        width: raster.width(),
        height: raster.height(),
        od,
    }
}

/// I = clamp(round(256 * exp(-od) - 1), 0, 255); exact inverse of
/// [`rgb_to_od`] on the byte lattice.
pub fn od_to_rgb<T: Real>(od: &OdImage<T>) -> RgbRaster {
    let data = od
        .od
        .iter()
        .map(|&v| {
            let i = (real::<T>(256.0) * (-v).exp() - real::<T>(1.0)).round();
            to_f64(i).clamp(0.0, 255.0) as u8
        })
        .collect();
    RgbRaster::new(od.width, od.height, data).expect("same pixel count")
}

/// 3x2 stain color matrix; columns are unit-norm RGB-OD stain signatures.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StainMatrix<T> {
    /// cols[j] is stain j's (R, G, B) optical-density direction.
    pub cols: [[T; 3]; 2],
}

impl<T: Real> StainMatrix<T> {
    pub fn from_column_major(v: &[T]) -> Option<Self> {
        if v.len() != 6 {
            return None;
        }
        Some(Self {
            cols: [[v[0], v[1], v[2]], [v[3], v[4], v[5]]],
        })
    }

    pub fn to_column_major(&self) -> Vec<T> {
        self.cols.concat()
    }

    /// W * h for a single pixel's concentration pair.
    pub fn mul_conc(&self, h: [T; 2]) -> [T; 3] {
        let mut out = [T::zero(); 3];
        for r in 0..3 {
            out[r] = self.cols[0][r] * h[0] + self.cols[1][r] * h[1];
        }
        out
    }

    /// W^T u for a single pixel's OD triple.
    fn dot_cols(&self, u: [T; 3]) -> [T; 2] {
        let mut out = [T::zero(); 2];
        for (j, col) in self.cols.iter().enumerate() {
            out[j] = col[0] * u[0] + col[1] * u[1] + col[2] * u[2];
        }
        out
    }

    fn normalize_columns(&mut self, fallback: &StainMatrix<T>) {
        for j in 0..2 {
            let n = self.cols[j].iter().map(|&v| v * v).sum::<T>().sqrt();
            if n < real(1e-12) {
                // collapsed column: deterministic reset instead of 0/0
                self.cols[j] = fallback.cols[j];
            } else {
                for v in &mut self.cols[j] {
                    *v /= n;
                }
            }
        }
    }
}

/// Fit metadata carried alongside the stain matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StainMeta<T> {
    pub lambda: T,
    pub iters_run: usize,
    pub converged: bool,
}

/// Fitted stain model: color matrix plus per-stain concentration scales.
#[derive(Debug, Clone, PartialEq)]
pub struct StainModel<T> {
    pub w: StainMatrix<T>,
    /// 99th-percentile concentration per stain row.
    pub max_c: [T; 2],
    pub meta: StainMeta<T>,
}

#[derive(Serialize, Deserialize)]
struct StainModelWire<T> {
    #[serde(rename = "W")]
    w: Vec<T>,
    max_c: Vec<T>,
    meta: StainMeta<T>,
}

impl<T: Real> StainModel<T> {
    pub fn to_json(&self) -> String {
        let wire = StainModelWire {
            w: self.w.to_column_major(),
            max_c: self.max_c.to_vec(),
            meta: self.meta,
        };
        serde_json::to_string_pretty(&wire).expect("plain numeric payload")
    }

    pub fn from_json(s: &str) -> Result<Self, StainError> {
        let wire: StainModelWire<T> =
            serde_json::from_str(s).map_err(|e| StainError::Json(e.to_string()))?;
        let w = StainMatrix::from_column_major(&wire.w)
            .ok_or_else(|| StainError::Json(format!("W must have 6 entries, got {}", wire.w.len())))?;
        if wire.max_c.len() != 2 {
            return Err(StainError::Json(format!(
                "max_c must have 2 entries, got {}",
                wire.max_c.len()
            )));
        }
        Ok(Self {
            w,
            max_c: [wire.max_c[0], wire.max_c[1]],
            meta: wire.meta,
        })
    }
}

/// Parameters for [`fit_stain_model`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StainFitParams<T> {
    pub lambda: T,
    pub iters: usize,
    pub tol: T,
    pub bg_od_threshold: T,
    pub seed: u64,
    /// Foreground pixels are subsampled to at most this many for fitting.
    pub max_pixels: usize,
}

impl<T: Real> Default for StainFitParams<T> {
    fn default() -> Self {
        Self {
            lambda: real(0.1),
            iters: 200,
            tol: real(1e-6),
            bg_od_threshold: real(0.15),
            seed: 0,
            max_pixels: 50_000,
        }
    }
}

/// Fit result: the model plus the per-iteration objective trace.
#[derive(Debug, Clone)]
pub struct StainFit<T> {
    pub model: StainModel<T>,
    /// Objective after initialization and after each alternating iteration;
    /// non-increasing.
    pub objective: Vec<T>,
}

/// Reference H&E starting directions (normalized): hematoxylin then eosin.
pub fn reference_stains<T: Real>() -> StainMatrix<T> {
    let mut m = StainMatrix {
        cols: [
            [real(0.65), real(0.70), real(0.29)],
            [real(0.07), real(0.99), real(0.11)],
        ],
    };
    let fallback = m;
    m.normalize_columns(&fallback);
    m
}

pub const MIN_FOREGROUND_PIXELS: usize = 100;

/// Solves the per-pixel nonnegative lasso
/// min_{h >= 0} ||u - W h||^2 + lambda (h0 + h1)
/// by cyclic coordinate descent, warm-started from `h`.
fn lasso_pixel<T: Real>(gram01: T, b: [T; 2], lambda: T, h: &mut [T; 2]) {
    let half = lambda / real(2.0);
    let stop = real::<T>(1e-12).max(T::epsilon() * real(4.0));
    for _ in 0..200 {
        let h0 = (b[0] - gram01 * h[1] - half).max(T::zero());
        let h1 = (b[1] - gram01 * h0 - half).max(T::zero());
        let delta = (h0 - h[0]).abs().max((h1 - h[1]).abs());
        h[0] = h0;
        h[1] = h1;
        if delta < stop {
            break;
        }
    }
}

/// Per-pixel nonnegative stain concentrations for a fixed matrix.
pub fn concentrations<T: Real>(raster: &RgbRaster, w: &StainMatrix<T>, lambda: T) -> Vec<[T; 2]> {
    debug_assert!(lambda >= T::zero());
    let od = rgb_to_od::<T>(raster);
    let gram01 = (0..3).map(|r| w.cols[0][r] * w.cols[1][r]).sum::<T>();
    od.od
        .chunks_exact(3)
        .map(|p| {
            let b = w.dot_cols([p[0], p[1], p[2]]);
            let mut h = [T::zero(); 2];
            lasso_pixel(gram01, b, lambda, &mut h);
            h
        })
        .collect()
}

/// ||V - W H||_F^2 over the pixel set, computed from the residual directly.
fn fit_residual<T: Real>(v: &[[T; 3]], w: &StainMatrix<T>, h: &[[T; 2]]) -> T {
    let mut acc = T::zero();
    for (u, hp) in v.iter().zip(h) {
        let rec = w.mul_conc(*hp);
        for r in 0..3 {
            let d = u[r] - rec[r];
            acc += d * d;
        }
    }
    acc
}

/// Quadratic-form fit value c - 2<B, W> + <W A, W>; equals
/// ||V - W H||_F^2 with A = H H^T, B = V H^T, c = ||V||_F^2.
fn fit_quadratic<T: Real>(w: &StainMatrix<T>, a: &[[T; 2]; 2], b: &[[T; 3]; 2], c: T) -> T {
    let mut cross = T::zero();
    let mut quad = T::zero();
    for j in 0..2 {
        for r in 0..3 {
            cross += b[j][r] * w.cols[j][r];
        }
        for k in 0..2 {
            let coldot = (0..3).map(|r| w.cols[j][r] * w.cols[k][r]).sum::<T>();
            quad += a[j][k] * coldot;
        }
    }
    c - real::<T>(2.0) * cross + quad
}

/// Estimates the stain model by alternating minimization of
/// ||V - W H||_F^2 + lambda * sum(H) over W >= 0 with unit columns and H >= 0.
pub fn fit_stain_model<T: Real>(
    raster: &RgbRaster,
    params: &StainFitParams<T>,
) -> Result<StainFit<T>, StainError> {
    if params.lambda <= T::zero() {
        return Err(StainError::NonPositiveLambda(to_f64(params.lambda)));
    }
    let od = rgb_to_od::<T>(raster);
    let mut fg: Vec<[T; 3]> = od
        .od
        .chunks_exact(3)
        .filter_map(|p| {
            let u = [p[0], p[1], p[2]];
            let norm = u.iter().map(|&v| v * v).sum::<T>().sqrt();
            (norm >= params.bg_od_threshold).then_some(u)
        })
        .collect();
    if fg.len() < MIN_FOREGROUND_PIXELS {
        return Err(StainError::InsufficientTissue {
            found: fg.len(),
            need: MIN_FOREGROUND_PIXELS,
        });
    }
    if fg.len() > params.max_pixels {
        let mut rng = rng_from_seed(derive_seed(params.seed, &[hash_label("stain_subsample")]));
        let mut idx =
            rand::seq::index::sample(&mut rng, fg.len(), params.max_pixels).into_vec();
        idx.sort_unstable();
        fg = idx.into_iter().map(|i| fg[i]).collect();
    }
    fit_on_pixels(&fg, params)
}

/// Core alternating minimization on an explicit foreground pixel set.
pub fn fit_on_pixels<T: Real>(
    v: &[[T; 3]],
    params: &StainFitParams<T>,
) -> Result<StainFit<T>, StainError> {
    if params.lambda <= T::zero() {
        return Err(StainError::NonPositiveLambda(to_f64(params.lambda)));
    }
    if v.is_empty() {
        return Err(StainError::EmptyInput);
    }
    let reference = reference_stains::<T>();
    let mut w = reference;
    // seeded perturbation of the reference directions
    let mut rng = rng_from_seed(derive_seed(params.seed, &[hash_label("stain_init")]));
    let noise = Normal::new(0.0f64, 0.05).expect("valid sigma");
    for col in &mut w.cols {
        for x in col.iter_mut() {
            *x = (*x + real::<T>(noise.sample(&mut rng))).max(T::zero());
        }
    }
    w.normalize_columns(&reference);

    let c_norm: T = v.iter().flatten().map(|&x| x * x).sum();
    let mut h = vec![[T::zero(); 2]; v.len()];
    let h_step = |w: &StainMatrix<T>, h: &mut Vec<[T; 2]>| {
        let gram01 = (0..3).map(|r| w.cols[0][r] * w.cols[1][r]).sum::<T>();
        for (u, hp) in v.iter().zip(h.iter_mut()) {
            let b = w.dot_cols(*u);
            lasso_pixel(gram01, b, params.lambda, hp);
        }
    };
    let objective_of = |w: &StainMatrix<T>, h: &[[T; 2]]| {
        let sum_h: T = h.iter().flatten().copied().sum();
        fit_residual(v, w, h) + params.lambda * sum_h
    };

    h_step(&w, &mut h);
    let mut objective = vec![objective_of(&w, &h)];
    let mut iters_run = 0usize;
    let mut converged = false;

    for _ in 0..params.iters {
        iters_run += 1;
        // W-step: projected gradient with backtracking on the quadratic form
        let mut a = [[T::zero(); 2]; 2];
        let mut b = [[T::zero(); 3]; 2];
        for (u, hp) in v.iter().zip(&h) {
            for j in 0..2 {
                for k in 0..2 {
                    a[j][k] += hp[j] * hp[k];
                }
                for r in 0..3 {
                    b[j][r] += u[r] * hp[j];
                }
            }
        }
        let current_fit = fit_quadratic(&w, &a, &b, c_norm);
        let trace_a = a[0][0] + a[1][1];
        let mut step = T::one() / (real::<T>(2.0) * trace_a + real(1e-12));
        for _ in 0..40 {
            let mut cand = w;
            for j in 0..2 {
                for r in 0..3 {
                    // grad = 2 (W A - B)
                    let g = real::<T>(2.0)
                        * ((0..2).map(|k| w.cols[k][r] * a[k][j]).sum::<T>() - b[j][r]);
                    cand.cols[j][r] = (w.cols[j][r] - step * g).max(T::zero());
                }
            }
            cand.normalize_columns(&reference);
            if fit_quadratic(&cand, &a, &b, c_norm) <= current_fit {
                w = cand;
                break;
            }
            step /= real(2.0);
        }
        // H-step warm-started from the previous concentrations
        h_step(&w, &mut h);

        let obj = objective_of(&w, &h);
        let prev = *objective.last().expect("trace nonempty");
        objective.push(obj);
        let denom = prev.abs().max(real(1e-12));
        if (prev - obj) / denom < params.tol {
            converged = true;
            break;
        }
    }

    // canonical order: hematoxylin (larger blue OD) first
    if w.cols[0][2] < w.cols[1][2] {
        w.cols.swap(0, 1);
        for hp in &mut h {
            hp.swap(0, 1);
        }
    }
    let row = |j: usize| h.iter().map(|hp| hp[j]).collect::<Vec<T>>();
    let max_c = [
        percentile(&row(0), 99.0)?,
        percentile(&row(1), 99.0)?,
    ];
    Ok(StainFit {
        model: StainModel {
            w,
            max_c,
            meta: StainMeta {
                lambda: params.lambda,
                iters_run,
                converged,
            },
        },
        objective,
    })
}

const SCALE_EPS: f64 = 1e-8;

/// Re-expresses a slide's stain concentrations under a target model:
/// H is estimated against `source.w`, each row rescaled by
/// `target.max_c / max(source.max_c, 1e-8)`, and pixels rebuilt through
/// `target.w`.
pub fn normalize_stain<T: Real>(
    raster: &RgbRaster,
    source: &StainModel<T>,
    target: &StainModel<T>,
    lambda: T,
) -> RgbRaster {
    let h = concentrations(raster, &source.w, lambda);
    let scale = [
        target.max_c[0] / source.max_c[0].max(real(SCALE_EPS)),
        target.max_c[1] / source.max_c[1].max(real(SCALE_EPS)),
    ];
    let mut od = Vec::with_capacity(h.len() * 3);
    for hp in &h {
        let rec = target.w.mul_conc([hp[0] * scale[0], hp[1] * scale[1]]);
        od.extend_from_slice(&rec);
    }
    od_to_rgb(&OdImage {
        width: raster.width(),
        height: raster.height(),
        od,
    })
}

/// Linear-interpolation percentile at rank p/100 * (n-1) over sorted values.
pub fn percentile<T: Real>(values: &[T], p: f64) -> Result<T, StainError> {
    if values.is_empty() {
        return Err(StainError::EmptyInput);
    }
    debug_assert!((0.0..=100.0).contains(&p));
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite values"));
    let rank = p / 100.0 * (sorted.len() - 1) as f64;
    let lo = rank.floor() as usize;
    let hi = rank.ceil() as usize;
    let frac = real::<T>(rank - lo as f64);
    Ok(sorted[lo] + (sorted[hi] - sorted[lo]) * frac)
}
