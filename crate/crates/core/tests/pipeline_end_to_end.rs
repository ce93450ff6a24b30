//! End-to-end runs of the full pipeline over small synthetic corpora:
//! artifact layout, determinism, stage-by-stage equivalence, and exit-code
//! classification of failure modes.

use std::fs;
use std::path::{Path, PathBuf};

use histopipe::config::{ConfigFile, ModelSection, PipelineConfig};
use histopipe::pipeline::{
    run_pipeline, stage_evaluate, stage_featurize, stage_normalize, stage_segment, stage_tile,
    stage_train, PipelineError,
};
use histopipe::synth::synth_corpus;

fn base_config(corpus_dir: &Path, out: &Path, kind: &str) -> PipelineConfig {
    let mut file = ConfigFile::default();
    file.seed = Some(42);
    file.paths.corpus = Some("corpus.json".into());
    file.tile.size = 32;
    // Patches touching the slide background confuse brightness-sensitive
    // models, so keep only windows that are almost entirely tissue.
    file.tile.min_coverage = 0.9;
    file.model = Some(ModelSection {
        kind: kind.into(),
        c: if kind == "svm" { Some(10.0) } else { None },
        epochs: if kind == "svm" { Some(120) } else { None },
        n_trees: if kind == "forest" { Some(60) } else { None },
        ..Default::default()
    });
    PipelineConfig::from_file(file, corpus_dir, None, Some(out)).unwrap()
}

fn make_corpus(n: usize, seed: u64) -> (tempfile::TempDir, PathBuf) {
    let dir = tempfile::tempdir().unwrap();
    let corpus = synth_corpus(dir.path(), n, 0.5, seed).unwrap();
    (dir, corpus)
}

#[test]
fn full_pipeline_produces_expected_artifacts() {
    let (dir, _) = make_corpus(6, 7);
    let out = dir.path().join("out");
    let cfg = base_config(dir.path(), &out, "svm");
    let report = run_pipeline(&cfg).unwrap();

    for rel in [
        "segment_manifest.json",
        "patches_manifest.csv",
        "normalized_manifest.csv",
        "stain/target_model.json",
        "features.json",
        "split.json",
        "model.json",
        "training_history.csv",
        "report.json",
        "roc.csv",
    ] {
        assert!(out.join(rel).is_file(), "missing artifact {rel}");
    }
    for i in 0..6 {
        assert!(out.join(format!("masks/slide_{i:03}_mask.png")).is_file());
        assert!(out.join(format!("masks/slide_{i:03}_components.csv")).is_file());
        assert!(out.join(format!("stain/slide_{i:03}_model.json")).is_file());
    }
    let acc = report.metrics.accuracy.expect("test accuracy defined");
    assert!(acc > 0.5, "classifier should beat chance, got {acc}");
    assert_eq!(report.metadata.positive_class, "tumor");
    assert_eq!(report.metadata.seed, 42);
    assert_eq!(report.metadata.config_hash, cfg.config_hash);

    let roc = fs::read_to_string(out.join("roc.csv")).unwrap();
    assert!(roc.starts_with("threshold,fpr,tpr\n"));

    let manifest = fs::read_to_string(out.join("patches_manifest.csv")).unwrap();
    let mut lines = manifest.lines();
    assert_eq!(lines.next().unwrap(), "path,slide_id,x,y,coverage,label");
    let first = lines.next().expect("at least one patch row");
    assert!(first.starts_with("patches/slide_000_"), "row: {first}");
}

#[test]
fn reruns_are_byte_identical_across_directories() {
    let (dir, _) = make_corpus(4, 9);
    let out1 = dir.path().join("out1");
    let out2 = dir.path().join("out2");
    run_pipeline(&base_config(dir.path(), &out1, "svm")).unwrap();
    run_pipeline(&base_config(dir.path(), &out2, "svm")).unwrap();
    for rel in ["report.json", "roc.csv", "patches_manifest.csv", "training_history.csv"] {
        assert_eq!(
            fs::read(out1.join(rel)).unwrap(),
            fs::read(out2.join(rel)).unwrap(),
            "{rel} differs between identical runs"
        );
    }
}

#[test]
fn staged_run_equals_single_pipeline_run() {
    let (dir, _) = make_corpus(4, 13);
    let out_staged = dir.path().join("staged");
    let out_single = dir.path().join("single");

    let cfg = base_config(dir.path(), &out_staged, "forest");
    stage_segment(&cfg).unwrap();
    stage_tile(&cfg).unwrap();
    stage_normalize(&cfg).unwrap();
    stage_featurize(&cfg).unwrap();
    stage_train(&cfg).unwrap();
    stage_evaluate(&cfg).unwrap();

    run_pipeline(&base_config(dir.path(), &out_single, "forest")).unwrap();

    for rel in ["report.json", "roc.csv", "model.json", "features.json"] {
        assert_eq!(
            fs::read(out_staged.join(rel)).unwrap(),
            fs::read(out_single.join(rel)).unwrap(),
            "{rel} differs between staged and single runs"
        );
    }
}

#[test]
fn stain_disabled_uses_raw_patches() {
    let (dir, _) = make_corpus(4, 21);
    let out = dir.path().join("out");
    let mut file = ConfigFile::default();
    file.seed = Some(1);
    file.paths.corpus = Some("corpus.json".into());
    file.tile.size = 32;
    file.stain.enabled = false;
    file.model = Some(ModelSection { kind: "gbdt".into(), n_rounds: Some(30), ..Default::default() });
    let cfg = PipelineConfig::from_file(file, dir.path(), None, Some(&out)).unwrap();
    let report = run_pipeline(&cfg).unwrap();
    assert!(!out.join("normalized_manifest.csv").exists());
    assert!(!out.join("stain").exists());
    assert!(report.metrics.accuracy.is_some());
}

#[test]
fn missing_prior_stage_maps_to_exit_code_3() {
    let (dir, _) = make_corpus(2, 3);
    let out = dir.path().join("out");
    let cfg = base_config(dir.path(), &out, "svm");
    let err = stage_tile(&cfg).unwrap_err();
    assert!(matches!(err, PipelineError::MissingInput(_)), "{err:?}");
    assert_eq!(err.exit_code(), 3);
    let err = stage_train(&cfg).unwrap_err();
    assert_eq!(err.exit_code(), 3);
}

#[test]
fn cross_validation_populates_per_fold() {
    let (dir, _) = make_corpus(6, 17);
    let out = dir.path().join("out");
    let mut file = ConfigFile::default();
    file.seed = Some(5);
    file.paths.corpus = Some("corpus.json".into());
    file.tile.size = 32;
    file.eval.k_folds = 3;
    file.model = Some(ModelSection {
        kind: "svm".into(),
        c: Some(10.0),
        epochs: Some(60),
        ..Default::default()
    });
    let cfg = PipelineConfig::from_file(file, dir.path(), None, Some(&out)).unwrap();
    let report = run_pipeline(&cfg).unwrap();
    let folds = report.per_fold.expect("per-fold metrics present");
    assert_eq!(folds.len(), 3);
    let total: u64 = folds.iter().map(|f| f.confusion.total()).sum();
    let split: histopipe::pipeline::SplitArtifact =
        serde_json::from_str(&fs::read_to_string(out.join("split.json")).unwrap()).unwrap();
    assert_eq!(total as usize, split.train.len(), "folds must cover the training rows");
}
