//! Pipeline configuration: TOML parsing, validation, and the config hash
//! that ties every artifact back to its exact settings.
//!
//! The hash covers semantic parameters only (seed, stage settings, model and
//! eval specs), not filesystem paths, so the same experiment run from two
//! directories produces identical report payloads.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::learn::pipeline::ClassifierSpec;
use crate::learn::forest::ForestParams;
use crate::learn::gbdt::GbdtParams;
use crate::learn::mlp::MlpParams;
use crate::learn::svm::{SvmKernel, SvmParams};
use crate::Scalar;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("failed to read config {path}: {reason}")]
    Read { path: String, reason: String },
    #[error("config parse error: {0}")]
    Parse(String),
    #[error("config is missing required key {0}")]
    MissingKey(&'static str),
    #[error("config key {key}: {reason}")]
    BadValue { key: &'static str, reason: String },
    #[error("config key {key} references missing path {path}")]
    MissingPath { key: &'static str, path: String },
}

fn default_sigma() -> f64 {
    2.0
}
/// Fraction of working-level pixel area; matches the segment module default
/// of area / 200.
fn default_min_area_frac() -> f64 {
    0.005
}
fn default_true() -> bool {
    true
}
fn default_tile_size() -> usize {
    256
}
fn default_min_coverage() -> f64 {
    0.5
}
fn default_lambda() -> f64 {
    0.1
}
fn default_iters() -> usize {
    200
}
fn default_tol() -> f64 {
    1e-6
}
fn default_bg_od() -> f64 {
    0.15
}
fn default_max_pixels() -> usize {
    50_000
}
fn default_test_frac() -> f64 {
    0.2
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SegmentSection {
    #[serde(default = "default_sigma")]
    pub sigma: f64,
    #[serde(default = "default_min_area_frac")]
    pub min_area_frac: f64,
    #[serde(default = "default_true")]
    pub tissue_is_dark: bool,
}

impl Default for SegmentSection {
    fn default() -> Self {
        SegmentSection {
            sigma: default_sigma(),
            min_area_frac: default_min_area_frac(),
            tissue_is_dark: true,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TileSection {
    #[serde(default = "default_tile_size")]
    pub size: usize,
    /// Defaults to `size` when omitted (non-overlapping grid).
    #[serde(default)]
    pub stride: Option<usize>,
    #[serde(default = "default_min_coverage")]
    pub min_coverage: f64,
}

impl Default for TileSection {
    fn default() -> Self {
        TileSection { size: default_tile_size(), stride: None, min_coverage: default_min_coverage() }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StainSection {
    #[serde(default = "default_true")]
    pub enabled: bool,
    #[serde(default = "default_lambda")]
    pub lambda: f64,
    #[serde(default = "default_iters")]
    pub iters: usize,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_bg_od")]
    pub bg_od_threshold: f64,
    #[serde(default = "default_max_pixels")]
    pub max_pixels: usize,
}

impl Default for StainSection {
    fn default() -> Self {
        StainSection {
            enabled: true,
            lambda: default_lambda(),
            iters: default_iters(),
            tol: default_tol(),
            bg_od_threshold: default_bg_od(),
            max_pixels: default_max_pixels(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeatureSection {
    #[serde(default = "default_true")]
    pub scale: bool,
    /// 0 disables PCA; otherwise the number of principal components.
    #[serde(default)]
    pub pca: usize,
}

impl Default for FeatureSection {
    fn default() -> Self {
        Self { scale: true, pca: 0 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalSection {
    #[serde(default = "default_test_frac")]
    pub test_frac: f64,
    /// 0 disables cross-validation; otherwise the fold count (>= 2).
    #[serde(default)]
    pub k_folds: usize,
}

impl Default for EvalSection {
    fn default() -> Self {
        EvalSection { test_frac: default_test_frac(), k_folds: 0 }
    }
}

/// Flat model section: `kind` picks the classifier, remaining keys override
/// that classifier's defaults. Keys for other kinds are rejected.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub kind: String,
    pub c: Option<f64>,
    pub kernel: Option<String>,
    pub gamma: Option<f64>,
    pub epochs: Option<usize>,
    pub n_trees: Option<usize>,
    pub max_depth: Option<usize>,
    pub n_rounds: Option<usize>,
    pub learning_rate: Option<f64>,
    pub reg_lambda: Option<f64>,
    pub base_score: Option<f64>,
    pub hidden: Option<Vec<usize>>,
    pub lr: Option<f64>,
    pub batch: Option<usize>,
}

impl ModelSection {
    fn reject_foreign_keys(&self, allowed: &[&str]) -> Result<(), ConfigError> {
        let set = |name: &'static str, present: bool| -> Result<(), ConfigError> {
            if present && !allowed.contains(&name) {
                return Err(ConfigError::BadValue {
                    key: "model",
                    reason: format!("key {name:?} does not apply to kind {:?}", self.kind),
                });
            }
            Ok(())
        };
        set("c", self.c.is_some())?;
        set("kernel", self.kernel.is_some())?;
        set("gamma", self.gamma.is_some())?;
        set("epochs", self.epochs.is_some())?;
        set("n_trees", self.n_trees.is_some())?;
        set("max_depth", self.max_depth.is_some())?;
        set("n_rounds", self.n_rounds.is_some())?;
        set("learning_rate", self.learning_rate.is_some())?;
        set("reg_lambda", self.reg_lambda.is_some())?;
        set("base_score", self.base_score.is_some())?;
        set("hidden", self.hidden.is_some())?;
        set("lr", self.lr.is_some())?;
        set("batch", self.batch.is_some())?;
        Ok(())
    }

    /// Builds the classifier spec, taking defaults for absent keys. The
    /// model seed is filled in from the global config seed by the caller.
    pub fn to_spec(&self, seed: u64) -> Result<ClassifierSpec<Scalar>, ConfigError> {
        match self.kind.as_str() {
            "svm" => {
                self.reject_foreign_keys(&["c", "kernel", "gamma", "epochs"])?;
                let mut p = SvmParams::<Scalar>::default();
                p.seed = seed;
                if let Some(c) = self.c {
                    p.c = c;
                }
                if let Some(g) = self.gamma {
                    p.gamma = g;
                }
                if let Some(e) = self.epochs {
                    p.epochs = e;
                }
                if let Some(k) = &self.kernel {
                    p.kernel = match k.as_str() {
                        "linear" => SvmKernel::Linear,
                        "rbf" => SvmKernel::Rbf,
                        other => {
                            return Err(ConfigError::BadValue {
                                key: "model.kernel",
                                reason: format!("unknown kernel {other:?}"),
                            })
                        }
                    };
                }
                Ok(ClassifierSpec::Svm(p))
            }
            "forest" => {
                self.reject_foreign_keys(&["n_trees", "max_depth"])?;
                let mut p = ForestParams::default();
                p.seed = seed;
                if let Some(n) = self.n_trees {
                    p.n_trees = n;
                }
                if self.max_depth.is_some() {
                    p.max_depth = self.max_depth;
                }
                Ok(ClassifierSpec::Forest(p))
            }
            "gbdt" => {
                self.reject_foreign_keys(&[
                    "n_rounds",
                    "max_depth",
                    "learning_rate",
                    "reg_lambda",
                    "base_score",
                ])?;
                let mut p = GbdtParams::<Scalar>::default();
                p.seed = seed;
                if let Some(n) = self.n_rounds {
                    p.n_rounds = n;
                }
                if let Some(d) = self.max_depth {
                    p.max_depth = d;
                }
                if let Some(lr) = self.learning_rate {
                    p.learning_rate = lr;
                }
                if let Some(l) = self.reg_lambda {
                    p.reg_lambda = l;
                }
                p.base_score = self.base_score;
                Ok(ClassifierSpec::Gbdt(p))
            }
            "mlp" => {
                self.reject_foreign_keys(&["hidden", "epochs", "lr", "batch"])?;
                let mut p = MlpParams::<Scalar>::default();
                p.seed = seed;
                if let Some(e) = self.epochs {
                    p.epochs = e;
                }
                if let Some(lr) = self.lr {
                    p.lr = lr;
                }
                if let Some(b) = self.batch {
                    p.batch = b;
                }
                let hidden = self.hidden.clone().unwrap_or_else(|| vec![32]);
                Ok(ClassifierSpec::Mlp { hidden, params: p })
            }
            other => Err(ConfigError::BadValue {
                key: "model.kind",
                reason: format!("unknown model kind {other:?} (svm|forest|gbdt|mlp)"),
            }),
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathsSection {
    pub corpus: Option<String>,
    pub out: Option<String>,
    pub template: Option<String>,
}

/// Raw on-disk schema. All sections except `paths`/`model`/`seed` may be
/// omitted and take defaults.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub seed: Option<u64>,
    #[serde(default)]
    pub paths: PathsSection,
    #[serde(default)]
    pub segment: SegmentSection,
    #[serde(default)]
    pub tile: TileSection,
    #[serde(default)]
    pub stain: StainSection,
    #[serde(default)]
    pub features: FeatureSection,
    pub model: Option<ModelSection>,
    #[serde(default)]
    pub eval: EvalSection,
}

/// Validated configuration with paths resolved against the config file dir.
#[derive(Debug, Clone)]
pub struct PipelineConfig {
    pub seed: u64,
    pub corpus: PathBuf,
    pub out_dir: PathBuf,
    /// Stain template image; `None` falls back to the first benign slide.
    pub template: Option<PathBuf>,
    pub segment: SegmentSection,
    pub tile: TileSection,
    pub stain: StainSection,
    pub features: FeatureSection,
    pub model: ModelSection,
    pub eval: EvalSection,
    pub config_hash: String,
}

/// The hashed view: every semantic knob, no filesystem paths.
#[derive(Serialize)]
struct HashedView<'a> {
    seed: u64,
    segment: &'a SegmentSection,
    tile: &'a TileSection,
    stain: &'a StainSection,
    features: &'a FeatureSection,
    model: &'a ModelSection,
    eval: &'a EvalSection,
}

fn check(cond: bool, key: &'static str, reason: &str) -> Result<(), ConfigError> {
    if cond {
        Ok(())
    } else {
        Err(ConfigError::BadValue { key, reason: reason.to_string() })
    }
}

impl PipelineConfig {
    /// Parses and validates a config file. `seed_override` and
    /// `out_override` come from the CLI flags and take precedence.
    pub fn load(
        path: &Path,
        seed_override: Option<u64>,
        out_override: Option<&Path>,
    ) -> Result<Self, ConfigError> {
        let text = fs::read_to_string(path).map_err(|e| ConfigError::Read {
            path: path.display().to_string(),
            reason: e.to_string(),
        })?;
        let file: ConfigFile = toml::from_str(&text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        Self::from_file(file, base, seed_override, out_override)
    }

    pub fn from_file(
        file: ConfigFile,
        base_dir: &Path,
        seed_override: Option<u64>,
        out_override: Option<&Path>,
    ) -> Result<Self, ConfigError> {
        let seed = seed_override.or(file.seed).ok_or(ConfigError::MissingKey("seed"))?;
        let model = file.model.ok_or(ConfigError::MissingKey("model"))?;

        let corpus_rel = file.paths.corpus.as_deref().ok_or(ConfigError::MissingKey("paths.corpus"))?;
        let corpus = base_dir.join(corpus_rel);
        if !corpus.is_file() {
            return Err(ConfigError::MissingPath {
                key: "paths.corpus",
                path: corpus.display().to_string(),
            });
        }
        let out_dir = match out_override {
            Some(p) => p.to_path_buf(),
            None => base_dir.join(file.paths.out.as_deref().unwrap_or("out")),
        };
        let template = match &file.paths.template {
            Some(t) => {
                let p = base_dir.join(t);
                if file.stain.enabled && !p.is_file() {
                    return Err(ConfigError::MissingPath {
                        key: "paths.template",
                        path: p.display().to_string(),
                    });
                }
                Some(p)
            }
            None => None,
        };

        check(file.segment.sigma >= 0.0, "segment.sigma", "must be >= 0")?;
        check(
            (0.0..=1.0).contains(&file.segment.min_area_frac),
            "segment.min_area_frac",
            "must lie in [0, 1]",
        )?;
        check(file.tile.size > 0, "tile.size", "must be positive")?;
        check(file.tile.stride != Some(0), "tile.stride", "must be positive")?;
        check(
            (0.0..=1.0).contains(&file.tile.min_coverage),
            "tile.min_coverage",
            "must lie in [0, 1]",
        )?;
        check(file.stain.lambda > 0.0, "stain.lambda", "must be positive")?;
        check(file.stain.iters >= 1, "stain.iters", "must be >= 1")?;
        check(file.stain.bg_od_threshold >= 0.0, "stain.bg_od_threshold", "must be >= 0")?;
        check(
            (0.0..1.0).contains(&file.eval.test_frac),
            "eval.test_frac",
            "must lie in [0, 1)",
        )?;
        check(
            file.eval.k_folds == 0 || file.eval.k_folds >= 2,
            "eval.k_folds",
            "must be 0 (disabled) or >= 2",
        )?;
        // Fails fast on unknown kinds or misplaced hyperparameter keys.
        model.to_spec(seed)?;

        let hash_view = HashedView {
            seed,
            segment: &file.segment,
            tile: &file.tile,
            stain: &file.stain,
            features: &file.features,
            model: &model,
            eval: &file.eval,
        };
        let canonical = toml::to_string(&hash_view).expect("config serializes");
        let config_hash = hex_digest(canonical.as_bytes());

        Ok(PipelineConfig {
            seed,
            corpus,
            out_dir,
            template,
            segment: file.segment,
            tile: file.tile,
            stain: file.stain,
            features: file.features,
            model,
            eval: file.eval,
            config_hash,
        })
    }

    pub fn tile_stride(&self) -> usize {
        self.tile.stride.unwrap_or(self.tile.size)
    }
}

pub fn hex_digest(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    digest.iter().map(|b| format!("{b:02x}")).collect()
}
