//! Corpus manifest: the list of slides (pyramid manifests plus ground-truth
//! labels) that a pipeline run consumes. Shared by the synthetic generator
//! and the CLI stages.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("failed to read corpus manifest {path}: {reason}")]
    Read { path: String, reason: String },
    #[error("failed to write corpus manifest {path}: {reason}")]
    Write { path: String, reason: String },
    #[error("corpus manifest lists no slides")]
    Empty,
    #[error("slide {slide_id}: label {label:?} is not \"benign\" or \"tumor\"")]
    BadLabel { slide_id: String, label: String },
    #[error("duplicate slide id {0}")]
    DuplicateSlide(String),
}

pub const LABEL_BENIGN: &str = "benign";
pub const LABEL_TUMOR: &str = "tumor";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusEntry {
    pub slide_id: String,
    /// Pyramid manifest path, relative to the corpus manifest's directory.
    pub manifest: String,
    pub label: String,
}

impl CorpusEntry {
    /// Numeric class: tumor = 1, benign = 0.
    pub fn class(&self) -> u8 {
        u8::from(self.label == LABEL_TUMOR)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusManifest {
    pub slides: Vec<CorpusEntry>,
}

impl CorpusManifest {
    pub fn validate(&self) -> Result<(), CorpusError> {
        if self.slides.is_empty() {
            return Err(CorpusError::Empty);
        }
        let mut seen = std::collections::BTreeSet::new();
        for s in &self.slides {
            if s.label != LABEL_BENIGN && s.label != LABEL_TUMOR {
                return Err(CorpusError::BadLabel {
                    slide_id: s.slide_id.clone(),
                    label: s.label.clone(),
                });
            }
            if !seen.insert(s.slide_id.clone()) {
                return Err(CorpusError::DuplicateSlide(s.slide_id.clone()));
            }
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, CorpusError> {
        let text = fs::read_to_string(path).map_err(|e| CorpusError::Read {
            path: path.display().to_string(),
            reason: e.to_string(),
        })?;
        let manifest: CorpusManifest =
            serde_json::from_str(&text).map_err(|e| CorpusError::Read {
                path: path.display().to_string(),
                reason: e.to_string(),
            })?;
        manifest.validate()?;
        Ok(manifest)
    }

    pub fn save(&self, path: &Path) -> Result<(), CorpusError> {
        let text = serde_json::to_string_pretty(self).expect("corpus serializes");
        fs::write(path, text).map_err(|e| CorpusError::Write {
            path: path.display().to_string(),
            reason: e.to_string(),
        })
    }

    /// Resolves a slide's pyramid manifest path against the corpus location.
    pub fn manifest_path(&self, corpus_path: &Path, entry: &CorpusEntry) -> PathBuf {
        corpus_path
            .parent()
            .unwrap_or_else(|| Path::new("."))
            .join(&entry.manifest)
    }
}
