use std::path::PathBuf;

use polseg::evaluation::{prf, Averaging, Prf};
use serde::Serialize;

use crate::error::{CliError, CliResult};
use crate::io::{self, Output};
use crate::Global;

#[derive(Debug, clap::Args)]
pub struct Args {
    #[arg(long, value_name = "JSONL")]
    gold: PathBuf,

    #[arg(long, value_name = "JSONL")]
    pred: PathBuf,

    /// Also write one record per gold or predicted category.
    #[arg(long)]
    per_category: bool,

    /// Report (stdout if absent).
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
}

#[derive(Serialize)]
struct ModeRecord {
    mode: &'static str,
    documents: usize,
    precision: f64,
    recall: f64,
    f1: f64,
}

#[derive(Serialize)]
struct CategoryRecord<'a> {
    category: &'a str,
    gold: usize,
    predicted: usize,
    matched: usize,
    #[serde(flatten)]
    scores: Prf,
}

pub fn run(_g: &Global, a: Args) -> CliResult {
    let gold_docs = io::corpus(&a.gold)?;
    let pred_docs = io::corpus(&a.pred)?;
    if gold_docs.len() != pred_docs.len() {
        return Err(CliError::data(format!(
            "{} gold documents but {} predicted",
            gold_docs.len(),
            pred_docs.len()
        )));
    }
    let mut gold = Vec::with_capacity(gold_docs.len());
    let mut pred = Vec::with_capacity(pred_docs.len());
    for (i, (g, p)) in gold_docs.iter().zip(&pred_docs).enumerate() {
        if g.id != p.id || g.len() != p.len() {
            return Err(CliError::data(format!(
                "document {i}: gold `{}` ({} tokens) does not match predicted `{}` ({} tokens)",
                g.id,
                g.len(),
                p.id,
                p.len()
            )));
        }
        gold.push(g.gold().map_err(|e| e.in_file(&a.gold))?.to_vec());
        pred.push(p.gold().map_err(|e| e.in_file(&a.pred))?.to_vec());
    }
    let report = prf(&gold, &pred)?;

    let mut out = Output::open(a.out.as_deref())?;
    for (name, mode) in [
        ("micro", Averaging::Micro),
        ("macro_by_document", Averaging::MacroByDocument),
        ("support_weighted", Averaging::SupportWeighted),
    ] {
        let p = report.get(mode);
        out.record(&ModeRecord {
            mode: name,
            documents: report.documents,
            precision: p.precision,
            recall: p.recall,
            f1: p.f1,
        })?;
    }
    if a.per_category {
        for (category, c) in &report.per_category {
            out.record(&CategoryRecord {
                category,
                gold: c.gold,
                predicted: c.predicted,
                matched: c.matched,
                scores: c.scores(),
            })?;
        }
    }
    out.finish()
}
