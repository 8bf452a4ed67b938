use std::collections::BTreeSet;
use std::fs;
use std::path::PathBuf;

use polseg::analytics::{nmf_fit, nmf_project, salience_matrix, NmfModel};
use polseg::tagset::CategoryVocabulary;
use polseg::Error;
use serde::Serialize;

use super::par_map;
use super::rile::{units, Unit, UnitKind};
use crate::error::{CliError, CliResult};
use crate::io::{self, Output};
use crate::Global;

#[derive(Debug, clap::Args)]
pub struct Args {
    /// Corpus whose units are fitted, or projected with `--model`.
    #[arg(long, value_name = "JSONL")]
    corpus: PathBuf,

    /// Apply a previously fitted basis instead of fitting.
    #[arg(long, value_name = "PATH", conflicts_with_all = ["fit_out", "components", "iters"])]
    model: Option<PathBuf>,

    /// Where to save the fitted basis.
    #[arg(long, value_name = "PATH")]
    fit_out: Option<PathBuf>,

    #[arg(long, value_enum, default_value = "party-year")]
    unit: UnitKind,

    #[arg(long, default_value_t = 2)]
    components: usize,

    /// Multiplicative update iterations.
    #[arg(long, default_value_t = 5000)]
    iters: usize,

    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,

    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Serialize)]
struct Coordinates<'a> {
    unit: &'a str,
    party: Option<&'a str>,
    year: Option<&'a str>,
    coords: Vec<f64>,
}

impl<'a> Coordinates<'a> {
    fn new(u: &'a Unit, coords: Vec<f64>) -> Self {
        Self {
            unit: &u.key,
            party: u.party.as_deref(),
            year: u.year.as_deref(),
            coords,
        }
    }
}

pub fn run(g: &Global, a: Args) -> CliResult {
    let docs = io::corpus(&a.corpus)?;
    let units = units(&docs, a.unit).map_err(|e| e.in_file(&a.corpus))?;
    let mut out = Output::open(a.out.as_deref())?;

    if let Some(path) = &a.model {
        let text = fs::read_to_string(path).map_err(|e| Error::Io {
            path: path.clone(),
            source: e,
        })?;
        let model: NmfModel = serde_json::from_str(&text)
            .map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
        let coords = par_map(&units, a.threads, |u| match nmf_project(&model, &u.counts) {
            Ok(w) => Ok(Some(w.to_vec())),
            Err(Error::UndefinedScore(_)) => Ok(None),
            Err(e) => Err(CliError::from(e).with_context(&format!("unit `{}`", u.key))),
        })?;
        for (u, c) in units.iter().zip(coords) {
            match c {
                Some(c) => out.record(&Coordinates::new(u, c))?,
                None => g.log.warn(format!("unit `{}` has no statements in the basis categories; skipped", u.key)),
            }
        }
        return out.finish();
    }

    let categories: Vec<String> = match &g.vocab {
        Some(p) => CategoryVocabulary::read_tsv(p)?.ids().map(String::from).collect(),
        None => {
            let seen: BTreeSet<&str> = units.iter().flat_map(|u| u.counts.iter().map(|(c, _)| c)).collect();
            seen.into_iter().map(String::from).collect()
        }
    };
    let counts: Vec<_> = units.iter().map(|u| u.counts.clone()).collect();
    let salience = salience_matrix(&counts, &categories)?;
    for (i, u) in units.iter().enumerate() {
        if !salience.kept.contains(&i) {
            g.log.warn(format!("unit `{}` has no statements; excluded from the fit", u.key));
        }
    }
    let fit = nmf_fit(&salience.matrix, a.components, a.iters, g.seed)?;
    g.log.info(format!(
        "fitted {} units over {} categories; objective {:.6e} after {} iterations",
        salience.kept.len(),
        categories.len(),
        fit.final_objective(),
        fit.iterations
    ));
    for (row, &i) in salience.kept.iter().enumerate() {
        out.record(&Coordinates::new(&units[i], fit.w.row(row).to_vec()))?;
    }
    if let Some(path) = &a.fit_out {
        let model = NmfModel::new(categories, &fit)?;
        let mut text = serde_json::to_string(&model).map_err(|e| CliError::data(e.to_string()))?;
        text.push('\n');
        fs::write(path, text).map_err(|e| CliError::usage(format!("{}: {e}", path.display())))?;
    }
    out.finish()
}
