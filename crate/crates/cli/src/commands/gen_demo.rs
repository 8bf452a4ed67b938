use std::path::PathBuf;

use polseg::generation::{constrained_beam_search, NgramScorer, TokenTrie, DEFAULT_BEAM_WIDTH};
use polseg::tagset::LabeledSpan;
use polseg::tokenize::DefaultTokenizer;
use serde::Serialize;

use super::par_map;
use crate::error::{CliError, CliResult};
use crate::io::{self, Output};
use crate::Global;

#[derive(Debug, clap::Args)]
pub struct Args {
    /// Documents to segment; only their tokens are used.
    #[arg(long, value_name = "JSONL")]
    corpus: PathBuf,

    /// Gold-segmented corpus the n-gram scorer is trained on.
    #[arg(long, value_name = "JSONL")]
    train: PathBuf,

    #[arg(long, default_value_t = DEFAULT_BEAM_WIDTH)]
    beam: usize,

    /// N-gram order of the scorer.
    #[arg(long, default_value_t = 4)]
    order: usize,

    /// Add-k smoothing constant.
    #[arg(long, default_value_t = 0.1)]
    smoothing: f64,

    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,

    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Serialize)]
struct Generated<'a> {
    id: &'a str,
    emitted: String,
    spans: Vec<LabeledSpan>,
    score: f64,
}

pub fn run(g: &Global, a: Args) -> CliResult {
    if a.beam == 0 {
        return Err(CliError::usage("--beam must be at least 1"));
    }
    let train = io::corpus(&a.train)?;
    let vocab = io::vocabulary(g.vocab.as_deref(), &train)?;
    let trie = TokenTrie::build(&vocab, &DefaultTokenizer)?;
    let scorer = NgramScorer::from_corpus(a.order, a.smoothing, &train, &trie).map_err(|e| e.in_file(&a.train))?;
    let docs = io::corpus(&a.corpus)?;
    g.log.info(format!("scoring with an order-{} model over {} documents", a.order, train.len()));

    let decoded = par_map(&docs, a.threads, |doc| {
        if doc.is_empty() {
            return Ok(None);
        }
        constrained_beam_search(&scorer, &doc.tokens, &trie, a.beam)
            .map(Some)
            .map_err(|e| CliError::from(e).with_context(&format!("document `{}`", doc.id)))
    })?;
    let mut out = Output::open(a.out.as_deref())?;
    for (doc, d) in docs.iter().zip(decoded) {
        let rec = match d {
            Some(d) => Generated {
                id: &doc.id,
                emitted: d.emitted.join(" "),
                spans: d.spans,
                score: d.score,
            },
            None => Generated {
                id: &doc.id,
                emitted: String::new(),
                spans: Vec::new(),
                score: 0.0,
            },
        };
        out.record(&rec)?;
    }
    out.finish()
}
