//! End-to-end pipeline orchestration: segment -> tile -> normalize ->
//! featurize -> train -> evaluate.
//!
//! Each stage is a standalone function that reads prior-stage artifacts from
//! the output directory and writes its own, so running the stages one by one
//! through the CLI is exactly equivalent to [`run_pipeline`]. All artifacts
//! are emitted in sorted order with seeded randomness only, so identical
//! configs and corpora produce byte-identical outputs.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::{ConfigError, PipelineConfig};
use crate::corpus::{CorpusEntry, CorpusError, CorpusManifest, LABEL_BENIGN};
use crate::eval::{
    auc, confusion, kfold, roc_curve, stratified_split, EvalReport, MetricSummary, ReportMeta,
};
use crate::features::{patch_to_features, FeatureMatrix};
use crate::learn::pipeline::{fit_pipeline, make_pipeline, FittedPipeline, StageSpec};
use crate::pyramid::load_pyramid;
use crate::raster::{BinaryMask, RgbRaster};
use crate::rng::{derive_seed, hash_label};
use crate::segment::{build_mask, SegmentParams};
use crate::stain::{fit_stain_model, normalize_stain, StainFitParams, StainModel};
use crate::tile::{extract_patches, TileParams};
use crate::Scalar;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("corpus lists no slides")]
    CorpusEmpty,
    #[error("missing input: {0}")]
    MissingInput(String),
    #[error("{stage} stage failed: {reason}")]
    Stage { stage: &'static str, reason: String },
}

impl PipelineError {
    /// CLI exit code: 2 config, 3 missing input, 4 stage failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Config(_) => 2,
            PipelineError::CorpusEmpty | PipelineError::MissingInput(_) => 3,
            PipelineError::Stage { .. } => 4,
        }
    }
}

fn stage<E: std::fmt::Display>(name: &'static str) -> impl Fn(E) -> PipelineError {
    move |e| PipelineError::Stage { stage: name, reason: e.to_string() }
}

fn write_file(path: &Path, bytes: &[u8], stage_name: &'static str) -> Result<(), PipelineError> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(stage(stage_name))?;
    }
    fs::write(path, bytes).map_err(stage(stage_name))
}

fn read_artifact(path: &Path, hint: &str) -> Result<String, PipelineError> {
    if !path.is_file() {
        return Err(PipelineError::MissingInput(format!(
            "{} ({hint})",
            path.display()
        )));
    }
    fs::read_to_string(path)
        .map_err(|e| PipelineError::MissingInput(format!("{}: {e}", path.display())))
}

/// Corpus slides in deterministic slide-id order.
fn load_sorted_corpus(cfg: &PipelineConfig) -> Result<(CorpusManifest, Vec<CorpusEntry>), PipelineError> {
    let manifest = CorpusManifest::load(&cfg.corpus).map_err(|e| match e {
        CorpusError::Empty => PipelineError::CorpusEmpty,
        CorpusError::Read { path, reason } => {
            PipelineError::MissingInput(format!("{path}: {reason}"))
        }
        other => PipelineError::Stage { stage: "corpus", reason: other.to_string() },
    })?;
    let mut slides = manifest.slides.clone();
    slides.sort_by(|a, b| a.slide_id.cmp(&b.slide_id));
    Ok((manifest, slides))
}

fn working_raster(
    cfg: &PipelineConfig,
    manifest: &CorpusManifest,
    entry: &CorpusEntry,
) -> Result<(usize, RgbRaster), PipelineError> {
    let path = manifest.manifest_path(&cfg.corpus, entry);
    let pyramid = load_pyramid(&path)
        .map_err(|e| PipelineError::MissingInput(format!("slide {}: {e}", entry.slide_id)))?;
    let level = pyramid.default_working_level();
    let raster = pyramid.level(level).expect("working level exists").raster.clone();
    Ok((level, raster))
}

// ---------------------------------------------------------------------------
// Artifact schemas
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SegmentRecord {
    pub slide_id: String,
    pub label: String,
    pub working_level: usize,
    pub width: usize,
    pub height: usize,
    /// Mask PNG path relative to the output directory.
    pub mask: String,
    /// Component CSV path relative to the output directory.
    pub components: String,
    pub n_components: usize,
    pub tissue_px: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SegmentManifest {
    pub version: u32,
    pub config_hash: String,
    pub slides: Vec<SegmentRecord>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PatchRow {
    pub path: String,
    pub slide_id: String,
    pub x: usize,
    pub y: usize,
    pub coverage: f64,
    pub label: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FeatureArtifact {
    pub version: u32,
    pub config_hash: String,
    pub matrix: FeatureMatrix<Scalar>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelArtifact {
    pub version: u32,
    pub config_hash: String,
    pub model_kind: String,
    pub pipeline: FittedPipeline<Scalar>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SplitArtifact {
    pub version: u32,
    pub config_hash: String,
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

pub const PATCH_MANIFEST_HEADER: &str = "path,slide_id,x,y,coverage,label";

fn patch_manifest_to_csv(rows: &[PatchRow]) -> String {
    let mut out = String::from(PATCH_MANIFEST_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.path, r.slide_id, r.x, r.y, r.coverage, r.label
        ));
    }
    out
}

fn parse_patch_manifest(text: &str, origin: &Path) -> Result<Vec<PatchRow>, PipelineError> {
    let bad = |line: usize, why: &str| PipelineError::Stage {
        stage: "manifest",
        reason: format!("{} line {line}: {why}", origin.display()),
    };
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h == PATCH_MANIFEST_HEADER => {}
        _ => return Err(bad(1, "missing or wrong header")),
    }
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let parts: Vec<&str> = line.split(',').collect();
        if parts.len() != 6 {
            return Err(bad(i + 2, "expected 6 columns"));
        }
        rows.push(PatchRow {
            path: parts[0].to_string(),
            slide_id: parts[1].to_string(),
            x: parts[2].parse().map_err(|_| bad(i + 2, "bad x"))?,
            y: parts[3].parse().map_err(|_| bad(i + 2, "bad y"))?,
            coverage: parts[4].parse().map_err(|_| bad(i + 2, "bad coverage"))?,
            label: parts[5].to_string(),
        });
    }
    Ok(rows)
}

// ---------------------------------------------------------------------------
// Stages
// ---------------------------------------------------------------------------

/// Segments every corpus slide at its working level; writes per-slide mask
/// PNGs and component CSVs plus `segment_manifest.json`.
pub fn stage_segment(cfg: &PipelineConfig) -> Result<SegmentManifest, PipelineError> {
    let (manifest, slides) = load_sorted_corpus(cfg)?;
    let mut records = Vec::new();
    for entry in &slides {
        let (level, raster) = working_raster(cfg, &manifest, entry)?;
        let min_area_px =
            (cfg.segment.min_area_frac * (raster.width() * raster.height()) as f64).round() as usize;
        let params = SegmentParams {
            sigma: cfg.segment.sigma,
            min_area_px,
            tissue_is_dark: cfg.segment.tissue_is_dark,
        };
        let seg = build_mask(&raster, &params).map_err(stage("segment"))?;

        let mask_rel = format!("masks/{}_mask.png", entry.slide_id);
        let comp_rel = format!("masks/{}_components.csv", entry.slide_id);
        let mask_path = cfg.out_dir.join(&mask_rel);
        if let Some(parent) = mask_path.parent() {
            fs::create_dir_all(parent).map_err(stage("segment"))?;
        }
        seg.mask.save_png_1bit(&mask_path).map_err(stage("segment"))?;

        let mut csv = String::from("label,area_px,bbox,contour_area\n");
        for c in &seg.components {
            let b = &c.bounding_box;
            csv.push_str(&format!(
                "{},{},{}:{}:{}:{},{}\n",
                c.label, c.area_px, b.x, b.y, b.w, b.h, c.contour_area
            ));
        }
        write_file(&cfg.out_dir.join(&comp_rel), csv.as_bytes(), "segment")?;

        records.push(SegmentRecord {
            slide_id: entry.slide_id.clone(),
            label: entry.label.clone(),
            working_level: level,
            width: raster.width(),
            height: raster.height(),
            mask: mask_rel,
            components: comp_rel,
            n_components: seg.components.len(),
            tissue_px: seg.mask.count_true(),
        });
    }
    let out = SegmentManifest { version: 1, config_hash: cfg.config_hash.clone(), slides: records };
    let json = serde_json::to_string_pretty(&out).expect("manifest serializes");
    write_file(&cfg.out_dir.join("segment_manifest.json"), json.as_bytes(), "segment")?;
    Ok(out)
}

/// Extracts mask-covered patches from each slide's working level; writes
/// patch PNGs and `patches_manifest.csv`.
pub fn stage_tile(cfg: &PipelineConfig) -> Result<Vec<PatchRow>, PipelineError> {
    let seg_path = cfg.out_dir.join("segment_manifest.json");
    let text = read_artifact(&seg_path, "run the segment stage first")?;
    let seg: SegmentManifest =
        serde_json::from_str(&text).map_err(stage("tile"))?;
    let (manifest, slides) = load_sorted_corpus(cfg)?;
    let by_id: BTreeMap<&str, &SegmentRecord> =
        seg.slides.iter().map(|r| (r.slide_id.as_str(), r)).collect();

    let params = TileParams {
        size: cfg.tile.size,
        stride: cfg.tile_stride(),
        min_coverage: cfg.tile.min_coverage,
    };
    let mut rows = Vec::new();
    for entry in &slides {
        let record = by_id.get(entry.slide_id.as_str()).ok_or_else(|| {
            PipelineError::MissingInput(format!(
                "slide {} absent from segment manifest",
                entry.slide_id
            ))
        })?;
        let (_, raster) = working_raster(cfg, &manifest, entry)?;
        let mask_path = cfg.out_dir.join(&record.mask);
        if !mask_path.is_file() {
            return Err(PipelineError::MissingInput(mask_path.display().to_string()));
        }
        let mask = BinaryMask::load_png(&mask_path).map_err(stage("tile"))?;
        let patches =
            extract_patches(&raster, &mask, &entry.slide_id, &params).map_err(stage("tile"))?;
        for p in &patches {
            let rel = format!("patches/{}.png", p.stem());
            let path = cfg.out_dir.join(&rel);
            if let Some(parent) = path.parent() {
                fs::create_dir_all(parent).map_err(stage("tile"))?;
            }
            p.pixels.save_png(&path).map_err(stage("tile"))?;
            rows.push(PatchRow {
                path: rel,
                slide_id: entry.slide_id.clone(),
                x: p.x,
                y: p.y,
                coverage: p.coverage,
                label: entry.label.clone(),
            });
        }
    }
    write_file(
        &cfg.out_dir.join("patches_manifest.csv"),
        patch_manifest_to_csv(&rows).as_bytes(),
        "tile",
    )?;
    Ok(rows)
}

fn stain_params(cfg: &PipelineConfig, scope: &str) -> StainFitParams<Scalar> {
    StainFitParams {
        lambda: cfg.stain.lambda,
        iters: cfg.stain.iters,
        tol: cfg.stain.tol,
        bg_od_threshold: cfg.stain.bg_od_threshold,
        seed: derive_seed(cfg.seed, &[hash_label("stain"), hash_label(scope)]),
        max_pixels: cfg.stain.max_pixels,
    }
}

/// Fits the template stain model, fits one model per slide, and rewrites
/// every patch into the template's stain space. Writes stain model JSONs,
/// normalized patch PNGs, and `normalized_manifest.csv`.
pub fn stage_normalize(cfg: &PipelineConfig) -> Result<(), PipelineError> {
    if !cfg.stain.enabled {
        log::info!("stain stage disabled in config; skipping normalization");
        return Ok(());
    }
    let rows = {
        let path = cfg.out_dir.join("patches_manifest.csv");
        let text = read_artifact(&path, "run the tile stage first")?;
        parse_patch_manifest(&text, &path)?
    };
    let (manifest, slides) = load_sorted_corpus(cfg)?;

    // Template: explicit image, else the first benign slide's working level.
    let template_raster = match &cfg.template {
        Some(path) => RgbRaster::load_png(path)
            .map_err(|e| PipelineError::MissingInput(format!("{}: {e}", path.display())))?,
        None => {
            let first_benign = slides
                .iter()
                .find(|s| s.label == LABEL_BENIGN)
                .ok_or_else(|| PipelineError::Stage {
                    stage: "normalize",
                    reason: "no benign slide to use as default stain template; set paths.template"
                        .into(),
                })?;
            log::warn!(
                "no stain template configured; defaulting to first benign slide {}",
                first_benign.slide_id
            );
            working_raster(cfg, &manifest, first_benign)?.1
        }
    };
    let target = fit_stain_model(&template_raster, &stain_params(cfg, "target"))
        .map_err(stage("normalize"))?
        .model;
    write_file(
        &cfg.out_dir.join("stain/target_model.json"),
        target.to_json().as_bytes(),
        "normalize",
    )?;

    let mut out_rows = Vec::with_capacity(rows.len());
    for entry in &slides {
        let slide_rows: Vec<&PatchRow> =
            rows.iter().filter(|r| r.slide_id == entry.slide_id).collect();
        if slide_rows.is_empty() {
            continue;
        }
        let (_, raster) = working_raster(cfg, &manifest, entry)?;
        let source = fit_stain_model(&raster, &stain_params(cfg, &entry.slide_id))
            .map_err(stage("normalize"))?
            .model;
        write_file(
            &cfg.out_dir.join(format!("stain/{}_model.json", entry.slide_id)),
            source.to_json().as_bytes(),
            "normalize",
        )?;
        for row in slide_rows {
            let src_path = cfg.out_dir.join(&row.path);
            if !src_path.is_file() {
                return Err(PipelineError::MissingInput(src_path.display().to_string()));
            }
            let patch = RgbRaster::load_png(&src_path).map_err(stage("normalize"))?;
            let normalized = normalize_stain(&patch, &source, &target, cfg.stain.lambda);
            let file_name = Path::new(&row.path)
                .file_name()
                .expect("manifest rows carry file names")
                .to_string_lossy()
                .to_string();
            let rel = format!("normalized/{file_name}");
            let dst = cfg.out_dir.join(&rel);
            if let Some(parent) = dst.parent() {
                fs::create_dir_all(parent).map_err(stage("normalize"))?;
            }
            normalized.save_png(&dst).map_err(stage("normalize"))?;
            out_rows.push(PatchRow { path: rel, ..row.clone() });
        }
    }
    write_file(
        &cfg.out_dir.join("normalized_manifest.csv"),
        patch_manifest_to_csv(&out_rows).as_bytes(),
        "normalize",
    )?;
    Ok(())
}

/// Flattens every patch (normalized when the stain stage is enabled) into a
/// labeled feature matrix; writes `features.json`.
pub fn stage_featurize(cfg: &PipelineConfig) -> Result<FeatureArtifact, PipelineError> {
    let manifest_rel = if cfg.stain.enabled {
        "normalized_manifest.csv"
    } else {
        "patches_manifest.csv"
    };
    let path = cfg.out_dir.join(manifest_rel);
    let hint = if cfg.stain.enabled {
        "run the normalize stage first"
    } else {
        "run the tile stage first"
    };
    let rows = parse_patch_manifest(&read_artifact(&path, hint)?, &path)?;
    if rows.is_empty() {
        return Err(PipelineError::Stage {
            stage: "featurize",
            reason: "patch manifest has no rows; no tissue patches were extracted".into(),
        });
    }
    let mut feature_rows = Vec::with_capacity(rows.len());
    let mut labels = Vec::with_capacity(rows.len());
    for row in &rows {
        let p = cfg.out_dir.join(&row.path);
        if !p.is_file() {
            return Err(PipelineError::MissingInput(p.display().to_string()));
        }
        let raster = RgbRaster::load_png(&p).map_err(stage("featurize"))?;
        let patch = crate::tile::Patch {
            slide_id: row.slide_id.clone(),
            x: row.x,
            y: row.y,
            pixels: raster,
            coverage: row.coverage,
        };
        feature_rows.push(patch_to_features::<Scalar>(&patch));
        labels.push(u8::from(row.label == crate::corpus::LABEL_TUMOR));
    }
    let matrix =
        FeatureMatrix::from_rows(&feature_rows, Some(labels)).map_err(stage("featurize"))?;
    let artifact = FeatureArtifact { version: 1, config_hash: cfg.config_hash.clone(), matrix };
    let json = serde_json::to_string(&artifact).expect("features serialize");
    write_file(&cfg.out_dir.join("features.json"), json.as_bytes(), "featurize")?;
    Ok(artifact)
}

fn submatrix(
    x: &FeatureMatrix<Scalar>,
    labels: &[u8],
    idx: &[usize],
) -> Result<(FeatureMatrix<Scalar>, Vec<u8>), PipelineError> {
    let rows: Vec<Vec<Scalar>> = idx.iter().map(|&i| x.row(i).to_vec()).collect();
    let y: Vec<u8> = idx.iter().map(|&i| labels[i]).collect();
    let m = FeatureMatrix::from_rows(&rows, Some(y.clone())).map_err(stage("train"))?;
    Ok((m, y))
}

fn labeled_matrix(artifact: &FeatureArtifact) -> Result<(FeatureMatrix<Scalar>, Vec<u8>), PipelineError> {
    let labels = artifact.matrix.labels.clone().ok_or_else(|| PipelineError::Stage {
        stage: "train",
        reason: "features.json carries no labels".into(),
    })?;
    Ok((artifact.matrix.clone(), labels))
}

fn build_spec(cfg: &PipelineConfig) -> Result<crate::learn::pipeline::PipelineSpec<Scalar>, PipelineError> {
    let mut stages = Vec::new();
    if cfg.features.scale {
        stages.push(StageSpec::Scaler);
    }
    if cfg.features.pca > 0 {
        stages.push(StageSpec::Pca { k: cfg.features.pca });
    }
    let classifier = cfg
        .model
        .to_spec(derive_seed(cfg.seed, &[hash_label("model")]))
        .map_err(PipelineError::Config)?;
    stages.push(StageSpec::Classifier(classifier));
    make_pipeline(stages).map_err(stage("train"))
}

fn load_features(cfg: &PipelineConfig, caller: &'static str) -> Result<FeatureArtifact, PipelineError> {
    let path = cfg.out_dir.join("features.json");
    let text = read_artifact(&path, "run the featurize stage first")?;
    serde_json::from_str(&text).map_err(stage(caller))
}

/// Splits the data, fits the configured model pipeline on the training rows,
/// and writes `split.json`, `model.json`, and `training_history.csv`.
pub fn stage_train(cfg: &PipelineConfig) -> Result<ModelArtifact, PipelineError> {
    let artifact = load_features(cfg, "train")?;
    let (x, labels) = labeled_matrix(&artifact)?;
    let split = stratified_split(&labels, cfg.eval.test_frac, derive_seed(cfg.seed, &[hash_label("split")]))
        .map_err(stage("train"))?;
    let split_artifact = SplitArtifact {
        version: 1,
        config_hash: cfg.config_hash.clone(),
        train: split.train.clone(),
        test: split.test.clone(),
    };
    let json = serde_json::to_string_pretty(&split_artifact).expect("split serializes");
    write_file(&cfg.out_dir.join("split.json"), json.as_bytes(), "train")?;

    let spec = build_spec(cfg)?;
    let (x_train, y_train) = submatrix(&x, &labels, &split.train)?;
    let fitted = fit_pipeline(&spec, &x_train, &y_train).map_err(stage("train"))?;

    let mut history = String::from("epoch,loss\n");
    if let Some(losses) = fitted.loss_history() {
        for (i, loss) in losses.iter().enumerate() {
            history.push_str(&format!("{i},{loss}\n"));
        }
    }
    write_file(&cfg.out_dir.join("training_history.csv"), history.as_bytes(), "train")?;

    let model = ModelArtifact {
        version: 1,
        config_hash: cfg.config_hash.clone(),
        model_kind: cfg.model.kind.clone(),
        pipeline: fitted,
    };
    let json = serde_json::to_string(&model).expect("model serializes");
    write_file(&cfg.out_dir.join("model.json"), json.as_bytes(), "train")?;
    Ok(model)
}

fn fold_metrics(
    cfg: &PipelineConfig,
    x: &FeatureMatrix<Scalar>,
    labels: &[u8],
    train_idx: &[usize],
) -> Result<Vec<MetricSummary<Scalar>>, PipelineError> {
    let k = cfg.eval.k_folds;
    let folds = kfold(
        train_idx.len(),
        k,
        derive_seed(cfg.seed, &[hash_label("cv")]),
        Some(&train_idx.iter().map(|&i| labels[i]).collect::<Vec<u8>>()),
    )
    .map_err(stage("evaluate"))?;
    let spec = build_spec(cfg)?;
    let mut out = Vec::with_capacity(folds.len());
    for fold in &folds {
        let val: Vec<usize> = fold.iter().map(|&j| train_idx[j]).collect();
        let fit_rows: Vec<usize> = {
            let held: std::collections::BTreeSet<usize> = fold.iter().copied().collect();
            train_idx
                .iter()
                .enumerate()
                .filter(|(j, _)| !held.contains(j))
                .map(|(_, &i)| i)
                .collect()
        };
        let (x_fit, y_fit) = submatrix(x, labels, &fit_rows)?;
        let (x_val, y_val) = submatrix(x, labels, &val)?;
        let fitted = fit_pipeline(&spec, &x_fit, &y_fit).map_err(stage("evaluate"))?;
        let scores = fitted.predict_score(&x_val).map_err(stage("evaluate"))?;
        let preds: Vec<u8> = scores.iter().map(|&s| u8::from(s >= 0.5)).collect();
        let cm = confusion(&y_val, &preds).map_err(stage("evaluate"))?;
        let fold_auc = roc_curve(&y_val, &scores).ok().map(|c| auc(&c));
        out.push(MetricSummary::from_parts(cm, fold_auc));
    }
    Ok(out)
}

/// Scores the held-out test rows with the trained model and writes
/// `report.json` plus `roc.csv`. Cross-validation metrics are included when
/// `eval.k_folds >= 2`.
pub fn stage_evaluate(cfg: &PipelineConfig) -> Result<EvalReport<Scalar>, PipelineError> {
    let artifact = load_features(cfg, "evaluate")?;
    let (x, labels) = labeled_matrix(&artifact)?;
    let split: SplitArtifact = {
        let path = cfg.out_dir.join("split.json");
        let text = read_artifact(&path, "run the train stage first")?;
        serde_json::from_str(&text).map_err(stage("evaluate"))?
    };
    let model: ModelArtifact = {
        let path = cfg.out_dir.join("model.json");
        let text = read_artifact(&path, "run the train stage first")?;
        serde_json::from_str(&text).map_err(stage("evaluate"))?
    };

    let (x_test, y_test) = submatrix(&x, &labels, &split.test)?;
    let scores = model.pipeline.predict_score(&x_test).map_err(stage("evaluate"))?;
    let preds: Vec<u8> = scores.iter().map(|&s| u8::from(s >= 0.5)).collect();
    let cm = confusion(&y_test, &preds).map_err(stage("evaluate"))?;

    let (test_auc, roc_csv) = match roc_curve(&y_test, &scores) {
        Ok(curve) => (Some(auc(&curve)), curve.to_csv()),
        Err(_) => (None, String::from("threshold,fpr,tpr\n")),
    };
    write_file(&cfg.out_dir.join("roc.csv"), roc_csv.as_bytes(), "evaluate")?;

    let per_fold = if cfg.eval.k_folds >= 2 {
        Some(fold_metrics(cfg, &x, &labels, &split.train)?)
    } else {
        None
    };

    let report = EvalReport {
        metrics: MetricSummary::from_parts(cm, test_auc),
        per_fold,
        metadata: ReportMeta {
            model: model.model_kind.clone(),
            seed: cfg.seed,
            config_hash: cfg.config_hash.clone(),
            positive_class: "tumor".into(),
        },
    };
    let json = serde_json::to_string_pretty(&report).expect("report serializes");
    write_file(&cfg.out_dir.join("report.json"), json.as_bytes(), "evaluate")?;
    Ok(report)
}

/// Runs all stages in order. Identical configs and corpora yield
/// byte-identical `report.json` payloads.
pub fn run_pipeline(cfg: &PipelineConfig) -> Result<EvalReport<Scalar>, PipelineError> {
    stage_segment(cfg)?;
    stage_tile(cfg)?;
    stage_normalize(cfg)?;
    stage_featurize(cfg)?;
    stage_train(cfg)?;
    stage_evaluate(cfg)
}

/// Loads a saved stain model artifact (used by tests and external tools).
pub fn load_stain_model(path: &Path) -> Result<StainModel<Scalar>, PipelineError> {
    let text = read_artifact(path, "stain model")?;
    StainModel::from_json(&text).map_err(stage("normalize"))
}

#[allow(unused)]
fn _schema_docs() -> PathBuf {
    // Artifact layout under the output directory:
    //   masks/{slide}_mask.png, masks/{slide}_components.csv
    //   segment_manifest.json
    //   patches/{slide}_{x}_{y}.png, patches_manifest.csv
    //   stain/target_model.json, stain/{slide}_model.json
    //   normalized/{slide}_{x}_{y}.png, normalized_manifest.csv
    //   features.json, split.json, model.json, training_history.csv
    //   report.json, roc.csv
    PathBuf::new()
}
