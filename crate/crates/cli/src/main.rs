//! `polseg`: train, apply and analyse statement segmenters from the command
//! line. Every structured output is one JSON record per line.
//!
//! Exit status is 0 on success, 1 for usage and validation errors
//! (including unreadable files), and 2 for malformed or inconsistent data.

mod commands;
mod error;
mod io;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::error::USAGE;

#[derive(Debug, Parser)]
#[command(name = "polseg", version, about = "Statement segmentation and labelling for political text")]
struct Cli {
    /// Seed for every random choice.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,

    /// Category vocabulary as `id<TAB>name` lines.
    #[arg(long, global = true, value_name = "TSV")]
    vocab: Option<PathBuf>,

    /// Suppress progress messages on stderr.
    #[arg(long, global = true)]
    quiet: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Train a CRF segmenter with early stopping on a development set.
    Train(commands::train::Args),
    /// Segment and label a corpus.
    Predict(commands::predict::Args),
    /// Score predicted spans against gold spans.
    Eval(commands::eval::Args),
    /// Left-right scale per document or party-year.
    Rile(commands::rile::Args),
    /// Fit or apply a low-rank projection of category salience.
    Project(commands::project::Args),
    /// Constrained generation with an n-gram scorer.
    GenDemo(commands::gen_demo::Args),
    /// Turn plain text lines into corpus records.
    Tokenize(commands::text::TokenizeArgs),
    /// Write a rule-generated corpus with known answers.
    Synth(commands::text::SynthArgs),
    /// Parse delimited sequence-to-sequence output into statements.
    ParseT5(commands::text::ParseT5Args),
}

/// Settings shared by every subcommand.
#[derive(Debug, Clone)]
pub struct Global {
    pub seed: u64,
    pub vocab: Option<PathBuf>,
    pub log: io::Log,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(USAGE)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let global = Global {
        seed: cli.seed,
        vocab: cli.vocab,
        log: io::Log { quiet: cli.quiet },
    };
    let result = match cli.command {
        Command::Train(a) => commands::train::run(&global, a),
        Command::Predict(a) => commands::predict::run(&global, a),
        Command::Eval(a) => commands::eval::run(&global, a),
        Command::Rile(a) => commands::rile::run(&global, a),
        Command::Project(a) => commands::project::run(&global, a),
        Command::GenDemo(a) => commands::gen_demo::run(&global, a),
        Command::Tokenize(a) => commands::text::tokenize(&global, a),
        Command::Synth(a) => commands::text::synth(&global, a),
        Command::ParseT5(a) => commands::text::parse_t5(&global, a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code)
        }
    }
}
