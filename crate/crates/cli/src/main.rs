//! `viewfuse` command-line driver. Each subcommand wraps one pipeline step
//! and writes a `<output>.config.json` with the fully resolved settings.

mod commands;
mod io;

use std::process::ExitCode;

use clap::{Parser, Subcommand};
use commands::{EncodeDiArgs, EvalArgs, FuseArgs, KeyframesArgs, PredictArgs, RankpoolArgs, SynthArgs, TrainArgs};

#[derive(Debug, Parser)]
#[command(
    name = "viewfuse",
    version,
    about = "Multi-view action recognition pipeline on depth and RGB video"
)]
struct Cli {
    /// Seed for corpus generation and training shuffles.
    #[arg(long, global = true, default_value_t = 7)]
    seed: u64,

    /// Log more; repeat for debug output.
    #[arg(long, short, global = true, action = clap::ArgAction::Count)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic multi-view corpus with its manifest.
    Synth(SynthArgs),
    /// Rank frame pairs by similarity and export the key-frame stack.
    Keyframes(KeyframesArgs),
    /// Encode a video as a dynamic image.
    EncodeDi(EncodeDiArgs),
    /// Solve the exact rank-pooling objective for a feature sequence.
    RankpoolExact(RankpoolArgs),
    /// Train one stream's classifier on the training side of a split.
    Train(TrainArgs),
    /// Score sequences with a trained model.
    Predict(PredictArgs),
    /// Fuse aligned score files.
    Fuse(FuseArgs),
    /// Accuracy, confusion, ROC and AUC for streams and their fusions.
    Eval(EvalArgs),
}

fn error_json(kind: &str, message: &str) -> String {
    serde_json::json!({ "error": { "kind": kind, "message": message } }).to_string()
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            if !e.use_stderr() {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            eprintln!("{}", e.render());
            eprintln!(
                "{}",
                error_json("usage", e.kind().as_str().unwrap_or("invalid arguments"))
            );
            return ExitCode::from(1);
        }
    };
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    env_logger::Builder::new()
        .filter_level(level)
        .format_timestamp(None)
        .init();

    let result = match &cli.command {
        Command::Synth(a) => commands::synth(a, cli.seed),
        Command::Keyframes(a) => commands::keyframes(a, cli.seed),
        Command::EncodeDi(a) => commands::encode_di(a, cli.seed),
        Command::RankpoolExact(a) => commands::rankpool_exact(a, cli.seed),
        Command::Train(a) => commands::train(a, cli.seed),
        Command::Predict(a) => commands::predict(a, cli.seed),
        Command::Fuse(a) => commands::fuse(a, cli.seed),
        Command::Eval(a) => commands::eval(a, cli.seed),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let kind = if e.is_io() { "io" } else { "validation" };
            eprintln!("{}", error_json(kind, &e.to_string()));
            ExitCode::from(if e.is_io() { 2 } else { 1 })
        }
    }
}
