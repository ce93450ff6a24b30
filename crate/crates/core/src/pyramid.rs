//! Manifest-based multi-resolution slide images.
//!
//! A slide is described by a JSON manifest listing its pyramid levels; each
//! level is a PNG file with a declared size and downsample factor relative to
//! level 0. The manifest stands in for proprietary slide containers so the
//! rest of the pipeline can address "level 2 of the slide" uniformly.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::raster::RgbRaster;

#[derive(Debug, Error)]
pub enum PyramidError {
    #[error("failed to read manifest {path}: {reason}")]
    Manifest { path: String, reason: String },
    #[error("manifest {path} declares no levels")]
    EmptyManifest { path: String },
    #[error("level {index} file missing: {path}")]
    MissingLevelFile { index: usize, path: String },
    #[error(
        "level {index}: declared {declared_w}x{declared_h} but file decodes to {actual_w}x{actual_h}"
    )]
    DimensionMismatch {
        index: usize,
        declared_w: usize,
        declared_h: usize,
        actual_w: usize,
        actual_h: usize,
    },
    #[error("level {index}: downsample {downsample} breaks monotonicity (level 0 must be 1.0, then strictly increasing)")]
    NonMonotonicDownsample { index: usize, downsample: f64 },
    #[error("level {index}: size inconsistent with downsample {downsample} (expected ~{expected_w}x{expected_h})")]
    InconsistentLevelSize {
        index: usize,
        downsample: f64,
        expected_w: usize,
        expected_h: usize,
    },
    #[error("level {level} out of range (pyramid has {count} levels)")]
    LevelOutOfRange { level: usize, count: usize },
}

/// One entry of the on-disk manifest. `file` is relative to the manifest dir.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelEntry {
    pub index: usize,
    pub file: String,
    pub width: usize,
    pub height: usize,
    pub downsample: f64,
}

/// On-disk manifest schema.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PyramidManifest {
    pub slide_id: String,
    pub levels: Vec<LevelEntry>,
}

impl PyramidManifest {
    pub fn from_json(path: &Path) -> Result<Self, PyramidError> {
        let text = fs::read_to_string(path).map_err(|e| PyramidError::Manifest {
            path: path.display().to_string(),
            reason: e.to_string(),
        })?;
        serde_json::from_str(&text).map_err(|e| PyramidError::Manifest {
            path: path.display().to_string(),
            reason: e.to_string(),
        })
    }

    pub fn write_json(&self, path: &Path) -> Result<(), PyramidError> {
        let text = serde_json::to_string_pretty(self).expect("manifest serializes");
        fs::write(path, text).map_err(|e| PyramidError::Manifest {
            path: path.display().to_string(),
            reason: e.to_string(),
        })
    }
}

/// A pyramid level held in memory.
#[derive(Debug, Clone)]
pub struct PyramidLevel {
    pub index: usize,
    pub downsample: f64,
    pub raster: RgbRaster,
}

/// Fully loaded multi-resolution slide. Immutable after load.
#[derive(Debug, Clone)]
pub struct PyramidImage {
    slide_id: String,
    levels: Vec<PyramidLevel>,
}

impl PyramidImage {
    pub fn slide_id(&self) -> &str {
        &self.slide_id
    }

    pub fn level_count(&self) -> usize {
        self.levels.len()
    }

    pub fn level(&self, index: usize) -> Option<&PyramidLevel> {
        self.levels.get(index)
    }

    pub fn levels(&self) -> &[PyramidLevel] {
        &self.levels
    }

    /// Default level the pipeline works at: 2 when present, else the highest.
    pub fn default_working_level(&self) -> usize {
        2.min(self.levels.len() - 1)
    }

    /// Rebuilds the manifest metadata (without file paths resolved to disk).
    pub fn to_manifest(&self) -> PyramidManifest {
        PyramidManifest {
            slide_id: self.slide_id.clone(),
            levels: self
                .levels
                .iter()
                .map(|l| LevelEntry {
                    index: l.index,
                    file: format!("level{}.png", l.index),
                    width: l.raster.width(),
                    height: l.raster.height(),
                    downsample: l.downsample,
                })
                .collect(),
        }
    }
}

/// Loads a pyramid from its JSON manifest, decoding every level PNG.
pub fn load_pyramid(manifest_path: &Path) -> Result<PyramidImage, PyramidError> {
    let manifest = PyramidManifest::from_json(manifest_path)?;
    if manifest.levels.is_empty() {
        return Err(PyramidError::EmptyManifest {
            path: manifest_path.display().to_string(),
        });
    }
    let base_dir = manifest_path.parent().unwrap_or_else(|| Path::new("."));

    let mut entries = manifest.levels.clone();
    entries.sort_by_key(|e| e.index);

    let mut levels = Vec::with_capacity(entries.len());
    let mut prev_downsample = 0.0f64;
    for (pos, entry) in entries.iter().enumerate() {
        if pos == 0 {
            if entry.downsample != 1.0 {
                return Err(PyramidError::NonMonotonicDownsample {
                    index: entry.index,
                    downsample: entry.downsample,
                });
            }
        } else if entry.downsample <= prev_downsample {
            return Err(PyramidError::NonMonotonicDownsample {
                index: entry.index,
                downsample: entry.downsample,
            });
        }
        prev_downsample = entry.downsample;

        let file: PathBuf = base_dir.join(&entry.file);
        if !file.is_file() {
            return Err(PyramidError::MissingLevelFile {
                index: entry.index,
                path: file.display().to_string(),
            });
        }
        let raster = RgbRaster::load_png(&file).map_err(|_| PyramidError::MissingLevelFile {
            index: entry.index,
            path: file.display().to_string(),
        })?;
        if raster.width() != entry.width || raster.height() != entry.height {
            return Err(PyramidError::DimensionMismatch {
                index: entry.index,
                declared_w: entry.width,
                declared_h: entry.height,
                actual_w: raster.width(),
                actual_h: raster.height(),
            });
        }
        levels.push(PyramidLevel {
            index: entry.index,
            downsample: entry.downsample,
            raster,
        });
    }

    // |w_k - round(w_0 / ds_k)| <= 1 for every level, same for height
    let base_w = levels[0].raster.width() as f64;
    let base_h = levels[0].raster.height() as f64;
    for l in &levels[1..] {
        let expect_w = (base_w / l.downsample).round() as i64;
        let expect_h = (base_h / l.downsample).round() as i64;
        let dw = (l.raster.width() as i64 - expect_w).abs();
        let dh = (l.raster.height() as i64 - expect_h).abs();
        if dw > 1 || dh > 1 {
            return Err(PyramidError::InconsistentLevelSize {
                index: l.index,
                downsample: l.downsample,
                expected_w: expect_w.max(0) as usize,
                expected_h: expect_h.max(0) as usize,
            });
        }
    }

    Ok(PyramidImage {
        slide_id: manifest.slide_id,
        levels,
    })
}

/// Returns the stored raster for `level`, unmodified.
pub fn read_level(p: &PyramidImage, level: usize) -> Result<&RgbRaster, PyramidError> {
    p.level(level)
        .map(|l| &l.raster)
        .ok_or(PyramidError::LevelOutOfRange {
            level,
            count: p.level_count(),
        })
}
