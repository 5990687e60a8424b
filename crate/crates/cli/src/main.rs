use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use emostock::commands::{
    self, AnalyzeArgs, Context, EvaluateArgs, IngestArgs, LabelArgs, PredictArgs, SeriesArgs,
    SynthArgs, TrainArgs,
};

/// Emotion-driven stock market prediction pipeline.
#[derive(Debug, Parser)]
#[command(name = "emostock", version, about)]
struct Cli {
    /// Flat key = value configuration file; command-line flags win
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed for every randomized step
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a reproducible synthetic corpus and market with a planted
    /// emotion-to-market dependency
    Synth(SynthArgs),
    /// Filter raw tweets down to the stock-relevant ones by keyword
    Ingest(IngestArgs),
    /// Train the Naive Bayes emotion classifier and label tweets
    Label(LabelArgs),
    /// Aggregate labelled tweets into a daily emotion-proportion series
    Series(SeriesArgs),
    /// Correlation and Granger-causality grid over the training period
    Analyze(AnalyzeArgs),
    /// Fit a discretizer and classifier for one market attribute
    Train(TrainArgs),
    /// Predict labels for the upcoming trading day from serialized models
    Predict(PredictArgs),
    /// Run the cross-validation and holdout experiment matrix
    Evaluate(EvaluateArgs),
}

impl Command {
    fn stage(&self) -> &'static str {
        match self {
            Command::Synth(_) => "synth",
            Command::Ingest(_) => "ingest",
            Command::Label(_) => "label",
            Command::Series(_) => "series",
            Command::Analyze(_) => "analyze",
            Command::Train(_) => "train",
            Command::Predict(_) => "predict",
            Command::Evaluate(_) => "evaluate",
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let stage = cli.command.stage();
    let run = || -> emostock::Result<()> {
        let ctx = Context::new(cli.config.as_deref(), cli.seed)?;
        match &cli.command {
            Command::Synth(args) => commands::cmd_synth(args, &ctx),
            Command::Ingest(args) => commands::cmd_ingest(args, &ctx),
            Command::Label(args) => commands::cmd_label(args, &ctx),
            Command::Series(args) => commands::cmd_series(args, &ctx),
            Command::Analyze(args) => commands::cmd_analyze(args, &ctx),
            Command::Train(args) => commands::cmd_train(args, &ctx),
            Command::Predict(args) => commands::cmd_predict(args, &ctx),
            Command::Evaluate(args) => commands::cmd_evaluate(args, &ctx),
        }
    };
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {stage}: {err}");
            ExitCode::FAILURE
        }
    }
}
