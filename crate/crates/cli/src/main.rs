//! Command line interface for the slide pipeline.
//!
//! Exit codes: 0 success, 2 configuration or usage error, 3 missing input
//! artifact, 4 stage failure.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use histopipe::config::PipelineConfig;
use histopipe::eval::EvalReport;
use histopipe::pipeline::{
    run_pipeline, stage_evaluate, stage_featurize, stage_normalize, stage_segment, stage_tile,
    stage_train, PipelineError,
};
use histopipe::synth::{synth_corpus, SynthError};
use histopipe::Scalar;

#[derive(Parser)]
#[command(
    name = "histopipe",
    version,
    about = "Histopathology slide pipeline: segment, tile, stain-normalize, featurize, train, evaluate"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct StageArgs {
    /// TOML configuration file
    #[arg(long)]
    config: PathBuf,
    /// Overrides the seed from the config file
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the output directory from the config file
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Segment tissue on every corpus slide and write masks
    Segment(StageArgs),
    /// Extract mask-covered patches from segmented slides
    Tile(StageArgs),
    /// Fit stain models and rewrite patches into the template's stain space
    Normalize(StageArgs),
    /// Flatten patches into a labeled feature matrix
    Featurize(StageArgs),
    /// Split the data and train the configured model
    Train(StageArgs),
    /// Score the held-out split and write the evaluation report
    Evaluate(StageArgs),
    /// Run all stages in order
    Pipeline(StageArgs),
    /// Generate a synthetic labeled slide corpus
    Synth {
        /// Directory to create the corpus in
        #[arg(long)]
        out: PathBuf,
        /// Seed for every random choice in the generator
        #[arg(long)]
        seed: u64,
        /// Number of slides to generate
        #[arg(long, default_value_t = 20)]
        n_slides: usize,
        /// Fraction of slides labeled tumor
        #[arg(long, default_value_t = 0.5)]
        balance: f64,
    },
}

fn load_config(args: &StageArgs) -> Result<PipelineConfig, (u8, String)> {
    PipelineConfig::load(&args.config, args.seed, args.out.as_deref())
        .map_err(|e| (2, e.to_string()))
}

fn pipeline_code(e: PipelineError) -> (u8, String) {
    (e.exit_code() as u8, e.to_string())
}

fn synth_code(e: SynthError) -> (u8, String) {
    let code = match e {
        SynthError::TooFewSlides(_) | SynthError::BadBalance(_) => 2,
        _ => 4,
    };
    (code, e.to_string())
}

fn print_report(report: &EvalReport<Scalar>) {
    let fmt = |v: Option<Scalar>| match v {
        Some(x) => format!("{x:.4}"),
        None => "null".to_string(),
    };
    println!(
        "accuracy={} precision={} recall={} f1={} auc={}",
        fmt(report.metrics.accuracy),
        fmt(report.metrics.precision),
        fmt(report.metrics.recall),
        fmt(report.metrics.f1),
        fmt(report.metrics.auc),
    );
}

fn run(cli: Cli) -> Result<(), (u8, String)> {
    match cli.command {
        Command::Segment(args) => {
            let cfg = load_config(&args)?;
            let manifest = stage_segment(&cfg).map_err(pipeline_code)?;
            println!("segmented {} slides into {}", manifest.slides.len(), cfg.out_dir.display());
        }
        Command::Tile(args) => {
            let cfg = load_config(&args)?;
            let rows = stage_tile(&cfg).map_err(pipeline_code)?;
            println!("extracted {} patches into {}", rows.len(), cfg.out_dir.display());
        }
        Command::Normalize(args) => {
            let cfg = load_config(&args)?;
            stage_normalize(&cfg).map_err(pipeline_code)?;
            println!("normalized patches into {}", cfg.out_dir.display());
        }
        Command::Featurize(args) => {
            let cfg = load_config(&args)?;
            let artifact = stage_featurize(&cfg).map_err(pipeline_code)?;
            println!(
                "featurized {} patches ({} features each)",
                artifact.matrix.n, artifact.matrix.d
            );
        }
        Command::Train(args) => {
            let cfg = load_config(&args)?;
            let model = stage_train(&cfg).map_err(pipeline_code)?;
            println!("trained {} model into {}", model.model_kind, cfg.out_dir.display());
        }
        Command::Evaluate(args) => {
            let cfg = load_config(&args)?;
            let report = stage_evaluate(&cfg).map_err(pipeline_code)?;
            print_report(&report);
        }
        Command::Pipeline(args) => {
            let cfg = load_config(&args)?;
            let report = run_pipeline(&cfg).map_err(pipeline_code)?;
            print_report(&report);
        }
        Command::Synth { out, seed, n_slides, balance } => {
            let path = synth_corpus(&out, n_slides, balance, seed).map_err(synth_code)?;
            println!("wrote {n_slides}-slide corpus manifest {}", path.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err((code, message)) => {
            eprintln!("error: {message}");
            ExitCode::from(code)
        }
    }
}
