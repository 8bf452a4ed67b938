use std::collections::{BTreeSet, HashMap};
use std::path::PathBuf;

use clap::ValueEnum;
use polseg::analytics::{rile_excluding, CountVector, RileGroups};
use polseg::corpus::Document;
use polseg::evaluation::spearman;
use polseg::Error;
use serde::Serialize;

use crate::error::{CliError, CliResult};
use crate::io::{self, Output};
use crate::Global;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum UnitKind {
    Document,
    PartyYear,
}

#[derive(Debug, clap::Args)]
pub struct Args {
    /// Corpus with (predicted or gold) spans.
    #[arg(long, value_name = "JSONL")]
    corpus: PathBuf,

    /// Right and left category groups (built-in grouping if absent).
    #[arg(long, value_name = "PATH")]
    groups: Option<PathBuf>,

    /// Categories dropped from the statement count, comma separated.
    #[arg(long, value_delimiter = ',')]
    exclude: Vec<String>,

    #[arg(long, value_enum, default_value = "document")]
    by: UnitKind,

    /// Reference corpus; adds its scores and the rank correlation.
    #[arg(long, value_name = "JSONL")]
    gold: Option<PathBuf>,

    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
}

/// A scoring unit: a document, or all documents of one party in one year.
#[derive(Debug, Clone)]
pub struct Unit {
    pub key: String,
    pub party: Option<String>,
    pub year: Option<String>,
    pub counts: CountVector,
}

/// Groups documents into units in order of first appearance.
pub fn units(docs: &[Document], by: UnitKind) -> polseg::Result<Vec<Unit>> {
    let mut out: Vec<Unit> = Vec::new();
    let mut index: HashMap<String, usize> = HashMap::new();
    for doc in docs {
        let counts = CountVector::from_spans(doc.gold()?);
        let key = match by {
            UnitKind::Document => doc.id.clone(),
            UnitKind::PartyYear => format!(
                "{}/{}",
                doc.party.as_deref().unwrap_or(""),
                doc.year.as_deref().unwrap_or("")
            ),
        };
        let merge_into = match by {
            UnitKind::PartyYear => index.get(&key).copied(),
            UnitKind::Document => None,
        };
        match merge_into {
            Some(i) => out[i].counts.merge(&counts),
            None => {
                index.insert(key.clone(), out.len());
                out.push(Unit {
                    key,
                    party: doc.party.clone(),
                    year: doc.year.clone(),
                    counts,
                });
            }
        }
    }
    Ok(out)
}

#[derive(Serialize)]
struct UnitRecord<'a> {
    unit: &'a str,
    party: Option<&'a str>,
    year: Option<&'a str>,
    statements: u64,
    rile: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    gold_rile: Option<Option<f64>>,
}

#[derive(Serialize)]
struct Correlation {
    spearman: Option<f64>,
    units: usize,
}

fn score(counts: &CountVector, groups: &RileGroups, exclude: &BTreeSet<String>) -> CliResult<Option<f64>> {
    match rile_excluding(counts, groups, exclude) {
        Ok(v) => Ok(Some(v)),
        Err(Error::UndefinedScore(_)) => Ok(None),
        Err(e) => Err(e.into()),
    }
}

pub fn run(g: &Global, a: Args) -> CliResult {
    let groups = match &a.groups {
        Some(p) => RileGroups::read(p)?,
        None => RileGroups::default(),
    };
    let exclude: BTreeSet<String> = a.exclude.iter().map(|s| s.trim().to_string()).collect();
    let docs = io::corpus(&a.corpus)?;
    let predicted = units(&docs, a.by).map_err(|e| e.in_file(&a.corpus))?;
    let gold = match &a.gold {
        Some(p) => {
            let gold = units(&io::corpus(p)?, a.by).map_err(|e| e.in_file(p))?;
            let keys = |us: &[Unit]| us.iter().map(|u| u.key.clone()).collect::<Vec<_>>();
            if keys(&gold) != keys(&predicted) {
                return Err(CliError::data("gold and predicted corpora have different units"));
            }
            Some(gold)
        }
        None => None,
    };

    let mut out = Output::open(a.out.as_deref())?;
    let mut pairs = (Vec::new(), Vec::new());
    for (i, u) in predicted.iter().enumerate() {
        let rile = score(&u.counts, &groups, &exclude)?;
        if rile.is_none() {
            g.log.warn(format!("unit `{}` has no counted statements", u.key));
        }
        let gold_rile = match &gold {
            Some(gs) => Some(score(&gs[i].counts, &groups, &exclude)?),
            None => None,
        };
        if let (Some(p), Some(Some(r))) = (rile, gold_rile) {
            pairs.0.push(p);
            pairs.1.push(r);
        }
        out.record(&UnitRecord {
            unit: &u.key,
            party: u.party.as_deref(),
            year: u.year.as_deref(),
            statements: u.counts.total(),
            rile,
            gold_rile,
        })?;
    }
    if gold.is_some() {
        let rho = match spearman(&pairs.0, &pairs.1) {
            Ok(r) => Some(r),
            Err(e @ (Error::UndefinedMetric(_) | Error::InvalidInput(_))) => {
                g.log.warn(format!("rank correlation not reported: {e}"));
                None
            }
            Err(e) => return Err(e.into()),
        };
        out.record(&Correlation {
            spearman: rho,
            units: pairs.0.len(),
        })?;
    }
    out.finish()
}
