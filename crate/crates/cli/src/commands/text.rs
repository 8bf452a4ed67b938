use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};

use clap::ValueEnum;
use polseg::corpus::{format_corpus, Document};
use polseg::seq2seq::{parse_t5_output, parse_tagged_statements, TILDE_DELIMITER, UNK_DELIMITER};
use polseg::synthetic::{self, SyntheticConfig};
use polseg::tokenize::tokenize as split_tokens;
use polseg::Error;
use serde::Serialize;

use crate::error::{config, CliError, CliResult};
use crate::io::Output;
use crate::Global;

fn read_input(path: Option<&Path>) -> CliResult<String> {
    match path {
        Some(p) => fs::read_to_string(p).map_err(|e| {
            Error::Io {
                path: p.to_path_buf(),
                source: e,
            }
            .into()
        }),
        None => {
            let mut s = String::new();
            std::io::stdin().read_to_string(&mut s)?;
            Ok(s)
        }
    }
}

#[derive(Debug, clap::Args)]
pub struct TokenizeArgs {
    /// Plain text, one document per non-empty line (stdin if absent).
    #[arg(long, value_name = "PATH")]
    input: Option<PathBuf>,

    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,

    /// Documents are named `<prefix>-<n>`.
    #[arg(long, default_value = "doc")]
    id_prefix: String,

    #[arg(long)]
    party: Option<String>,

    #[arg(long)]
    year: Option<String>,
}

pub fn tokenize(_g: &Global, a: TokenizeArgs) -> CliResult {
    let text = read_input(a.input.as_deref())?;
    let docs: Vec<Document> = text
        .lines()
        .filter(|l| !l.trim().is_empty())
        .enumerate()
        .map(|(i, line)| {
            let mut d = Document::new(format!("{}-{i:04}", a.id_prefix), split_tokens(line));
            d.party = a.party.clone();
            d.year = a.year.clone();
            d
        })
        .collect();
    let mut out = Output::open(a.out.as_deref())?;
    out.text(&format_corpus(&docs))?;
    out.finish()
}

#[derive(Debug, clap::Args)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 200)]
    documents: usize,

    #[arg(long, default_value_t = 5)]
    categories: usize,

    /// Probability that a statement's label is swapped for another.
    #[arg(long, default_value_t = 0.0)]
    label_noise: f64,

    /// Probability that a statement ends with `.`.
    #[arg(long, default_value_t = 0.9)]
    boundary_rate: f64,

    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,

    /// Also write the category vocabulary here.
    #[arg(long, value_name = "PATH")]
    vocab_out: Option<PathBuf>,
}

pub fn synth(g: &Global, a: SynthArgs) -> CliResult {
    let cfg = SyntheticConfig {
        n_documents: a.documents,
        n_categories: a.categories,
        label_noise: a.label_noise,
        boundary_marker_rate: a.boundary_rate,
        seed: g.seed,
        ..SyntheticConfig::default()
    };
    cfg.validate().map_err(config)?;
    let docs = synthetic::generate(&cfg)?;
    if let Some(p) = &a.vocab_out {
        let tsv = synthetic::category_vocabulary(cfg.n_categories)?.to_tsv();
        fs::write(p, tsv).map_err(|e| CliError::usage(format!("{}: {e}", p.display())))?;
    }
    let mut out = Output::open(a.out.as_deref())?;
    out.text(&format_corpus(&docs))?;
    out.finish()
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Delimiter {
    /// `~~~`, or `<unk>` when a line has no tildes.
    Auto,
    Tilde,
    Unk,
}

#[derive(Debug, clap::Args)]
pub struct ParseT5Args {
    /// One generated output per non-empty line (stdin if absent).
    #[arg(long, value_name = "PATH")]
    input: Option<PathBuf>,

    #[arg(long, value_enum, default_value = "auto")]
    delimiter: Delimiter,

    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
}

#[derive(Serialize)]
struct Statement<'a> {
    text: &'a str,
    category: &'a str,
}

#[derive(Serialize)]
struct ParsedLine<'a> {
    line: usize,
    statements: Vec<Statement<'a>>,
}

pub fn parse_t5(_g: &Global, a: ParseT5Args) -> CliResult {
    let text = read_input(a.input.as_deref())?;
    let mut out = Output::open(a.out.as_deref())?;
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let parsed = match a.delimiter {
            Delimiter::Auto => parse_t5_output(line),
            Delimiter::Tilde => parse_tagged_statements(line, TILDE_DELIMITER),
            Delimiter::Unk => parse_tagged_statements(line, UNK_DELIMITER),
        }
        .map_err(|e| CliError::from(e).with_context(&format!("line {}", i + 1)))?;
        out.record(&ParsedLine {
            line: i + 1,
            statements: parsed
                .iter()
                .map(|s| Statement {
                    text: &s.text,
                    category: &s.category,
                })
                .collect(),
        })?;
    }
    out.finish()
}
