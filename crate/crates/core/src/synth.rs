//! Deterministic synthetic slide generator.
//!
//! Each slide is a white background with elliptical tissue blobs whose color
//! comes from a two-stain composition: per-pixel concentrations are turned
//! into optical densities through the reference stain matrix and then into
//! RGB bytes. Benign slides (class 0) use smooth low-frequency concentration
//! texture; tumor slides (class 1) use spiky high-frequency texture. The
//! spiky distribution shape survives per-stain scale normalization, so the
//! classes stay separable after color transfer to a common template.

use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::corpus::{CorpusEntry, CorpusError, CorpusManifest, LABEL_BENIGN, LABEL_TUMOR};
use crate::pyramid::{LevelEntry, PyramidError, PyramidManifest};
use crate::raster::{RasterError, RgbRaster};
use crate::rng::{derive_seed, hash_label, rng_from_seed};
use crate::stain::{od_to_rgb, reference_stains, OdImage};
use rand::seq::SliceRandom;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("need at least 2 slides, got {0}")]
    TooFewSlides(usize),
    #[error("class balance {0} must lie in [0, 1]")]
    BadBalance(f64),
    #[error("io error at {path}: {reason}")]
    Io { path: String, reason: String },
    #[error(transparent)]
    Raster(#[from] RasterError),
    #[error(transparent)]
    Pyramid(#[from] PyramidError),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
}

/// Level-0 slide edge length in pixels; levels 1 and 2 are 2x and 4x
/// box-downsampled, so the default working level is 128x128.
pub const SLIDE_SIZE: usize = 512;

#[derive(Debug, Clone, Copy)]
struct Ellipse {
    cx: f64,
    cy: f64,
    a: f64,
    b: f64,
    cos_t: f64,
    sin_t: f64,
}

impl Ellipse {
    fn sample(rng: &mut ChaCha8Rng, cx: f64, cy: f64, a_range: (f64, f64), b_range: (f64, f64)) -> Self {
        let theta = rng.gen_range(0.0..PI);
        Ellipse {
            cx: cx + rng.gen_range(-40.0..40.0),
            cy: cy + rng.gen_range(-40.0..40.0),
            a: rng.gen_range(a_range.0..a_range.1),
            b: rng.gen_range(b_range.0..b_range.1),
            cos_t: theta.cos(),
            sin_t: theta.sin(),
        }
    }

    fn contains(&self, x: f64, y: f64) -> bool {
        let dx = x - self.cx;
        let dy = y - self.cy;
        let u = (dx * self.cos_t + dy * self.sin_t) / self.a;
        let v = (-dx * self.sin_t + dy * self.cos_t) / self.b;
        u * u + v * v <= 1.0
    }
}

/// One sinusoidal texture plane: amplitude * sin(2pi(fx x + px)) * sin(2pi(fy y + py)).
#[derive(Debug, Clone, Copy)]
struct Wave {
    fx: f64,
    fy: f64,
    px: f64,
    py: f64,
}

impl Wave {
    fn sample(rng: &mut ChaCha8Rng, freq: (f64, f64)) -> Self {
        Wave {
            fx: rng.gen_range(freq.0..freq.1),
            fy: rng.gen_range(freq.0..freq.1),
            px: rng.gen_range(0.0..1.0),
            py: rng.gen_range(0.0..1.0),
        }
    }

    fn at(&self, x: f64, y: f64) -> f64 {
        let s = SLIDE_SIZE as f64;
        (2.0 * PI * (self.fx * x / s + self.px)).sin() * (2.0 * PI * (self.fy * y / s + self.py)).sin()
    }
}

/// Per-pixel stain concentrations for one slide.
///
/// The benign amplitude is kept below the class gap so even a patch at a
/// sinusoid valley stays denser than a typical tumor patch after the
/// percentile-matched scale normalization.
fn concentration_at(class: u8, waves: &[Wave; 2], x: f64, y: f64) -> [f64; 2] {
    if class == 0 {
        // Smooth fields centered well away from zero.
        let h1 = 0.52 + 0.18 * waves[0].at(x, y);
        let h2 = 0.16 + 0.06 * waves[1].at(x, y);
        [h1.max(0.0), h2.max(0.0)]
    } else {
        // Spiky fields: fourth-power waves concentrate mass near the floor
        // with rare tall peaks, a different distribution shape at matched
        // scale.
        let t1 = waves[0].at(x, y);
        let t2 = waves[1].at(x, y);
        let h1 = 0.22 + 1.30 * (t1 * t1 * t1 * t1);
        let h2 = 0.08 + 0.20 * (t2 * t2 * t2 * t2);
        [h1, h2]
    }
}

/// Renders a level-0 slide: white background, tissue from two ellipses.
fn render_slide(rng: &mut ChaCha8Rng, class: u8) -> RgbRaster {
    let center = SLIDE_SIZE as f64 / 2.0;
    let main = Ellipse::sample(rng, center, center, (170.0, 220.0), (130.0, 180.0));
    let side_cx = main.cx + rng.gen_range(-120.0..120.0);
    let side_cy = main.cy + rng.gen_range(-120.0..120.0);
    let side = Ellipse::sample(rng, side_cx, side_cy, (40.0, 80.0), (30.0, 60.0));

    let freq = if class == 0 { (1.0, 3.0) } else { (24.0, 40.0) };
    let waves = [Wave::sample(rng, freq), Wave::sample(rng, freq)];

    let w_ref = reference_stains::<f64>();
    let mut od = vec![0.0f64; SLIDE_SIZE * SLIDE_SIZE * 3];
    for y in 0..SLIDE_SIZE {
        for x in 0..SLIDE_SIZE {
            let (fx, fy) = (x as f64, y as f64);
            if main.contains(fx, fy) || side.contains(fx, fy) {
                let h = concentration_at(class, &waves, fx, fy);
                let px = w_ref.mul_conc(h);
                let base = (y * SLIDE_SIZE + x) * 3;
                od[base] = px[0];
                od[base + 1] = px[1];
                od[base + 2] = px[2];
            }
        }
    }
    od_to_rgb(&OdImage { width: SLIDE_SIZE, height: SLIDE_SIZE, od })
}

fn write_pyramid(dir: &Path, slide_id: &str, level0: &RgbRaster) -> Result<(), SynthError> {
    fs::create_dir_all(dir).map_err(|e| SynthError::Io {
        path: dir.display().to_string(),
        reason: e.to_string(),
    })?;
    let levels = [
        (0usize, 1.0f64, level0.clone()),
        (1, 2.0, level0.box_downsample(2)),
        (2, 4.0, level0.box_downsample(4)),
    ];
    let mut entries = Vec::new();
    for (index, downsample, raster) in &levels {
        let file = format!("level{index}.png");
        raster.save_png(&dir.join(&file))?;
        entries.push(LevelEntry {
            index: *index,
            file,
            width: raster.width(),
            height: raster.height(),
            downsample: *downsample,
        });
    }
    let manifest = PyramidManifest { slide_id: slide_id.to_string(), levels: entries };
    manifest.write_json(&dir.join("manifest.json"))?;
    Ok(())
}

/// Generates `n_slides` synthetic slides under `out_dir` and writes
/// `corpus.json` listing them with ground-truth labels. The tumor count is
/// `round(n_slides * class_balance)`, clamped so both classes appear.
/// Identical `(seed, n_slides, class_balance)` produce byte-identical output.
pub fn synth_corpus(
    out_dir: &Path,
    n_slides: usize,
    class_balance: f64,
    seed: u64,
) -> Result<PathBuf, SynthError> {
    if n_slides < 2 {
        return Err(SynthError::TooFewSlides(n_slides));
    }
    if !(0.0..=1.0).contains(&class_balance) {
        return Err(SynthError::BadBalance(class_balance));
    }
    let n_tumor = ((n_slides as f64 * class_balance + 0.5).floor() as usize)
        .clamp(1, n_slides - 1);
    let mut classes = vec![1u8; n_tumor];
    classes.extend(vec![0u8; n_slides - n_tumor]);
    classes.shuffle(&mut rng_from_seed(derive_seed(seed, &[hash_label("synth-labels")])));

    fs::create_dir_all(out_dir).map_err(|e| SynthError::Io {
        path: out_dir.display().to_string(),
        reason: e.to_string(),
    })?;
    let mut entries = Vec::new();
    for (i, &class) in classes.iter().enumerate() {
        let slide_id = format!("slide_{i:03}");
        let mut rng = rng_from_seed(derive_seed(seed, &[hash_label("synth-slide"), i as u64]));
        let level0 = render_slide(&mut rng, class);
        write_pyramid(&out_dir.join("slides").join(&slide_id), &slide_id, &level0)?;
        entries.push(CorpusEntry {
            slide_id: slide_id.clone(),
            manifest: format!("slides/{slide_id}/manifest.json"),
            label: if class == 1 { LABEL_TUMOR } else { LABEL_BENIGN }.to_string(),
        });
    }
    let corpus = CorpusManifest { slides: entries };
    let path = out_dir.join("corpus.json");
    corpus.save(&path)?;
    Ok(path)
}
