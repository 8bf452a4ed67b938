use std::fs;
use std::path::PathBuf;

use polseg::corpus::{format_corpus, Document};
use polseg::crf::{BoundaryOracle, EmissionMatrix, Transitions};
use polseg::emissions::parse_emission_blocks;
use polseg::model::{decode_spans, decode_spans_with_oracle, CrfModel};
use polseg::tagset::{expand_bio, CategoryVocabulary, LabeledSpan, TagVocabulary};
use polseg::Error;

use super::par_map;
use crate::error::{CliError, CliResult};
use crate::io::{self, Output};
use crate::Global;

#[derive(Debug, clap::Args)]
#[command(group(clap::ArgGroup::new("source").required(true).args(["model", "emissions"])))]
pub struct Args {
    /// Trained model file.
    #[arg(long, value_name = "PATH")]
    model: Option<PathBuf>,

    /// Precomputed emission scores, one block per document in corpus
    /// order. Needs `--vocab`; transitions are zero.
    #[arg(long, value_name = "PATH")]
    emissions: Option<PathBuf>,

    #[arg(long, value_name = "JSONL")]
    corpus: PathBuf,

    /// Output corpus (stdout if absent).
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,

    /// Fix statement starts to the gold boundaries; only categories are
    /// predicted.
    #[arg(long)]
    oracle_boundaries: bool,

    /// Restrict decoding to structurally valid tag sequences.
    #[arg(long)]
    legality_mask: bool,

    /// Worker threads (all cores if absent).
    #[arg(long)]
    threads: Option<usize>,
}

enum Scores {
    Model(Box<CrfModel>),
    Precomputed(Vec<EmissionMatrix>),
}

pub fn run(g: &Global, a: Args) -> CliResult {
    let docs = io::corpus(&a.corpus)?;
    let (tags, transitions, scores) = match (&a.model, &a.emissions) {
        (Some(path), _) => {
            let m = CrfModel::load(path)?;
            (m.tags.clone(), m.transitions.clone(), Scores::Model(Box::new(m)))
        }
        (None, Some(path)) => {
            let vocab_path = g
                .vocab
                .as_deref()
                .ok_or_else(|| CliError::usage("--emissions needs --vocab"))?;
            let tags = expand_bio(CategoryVocabulary::read_tsv(vocab_path)?)?;
            let blocks = read_blocks(path, &tags, &docs)?;
            let tr = Transitions::zeros(tags.len());
            (tags, tr, Scores::Precomputed(blocks))
        }
        (None, None) => unreachable!("clap requires a score source"),
    };

    let indices: Vec<usize> = (0..docs.len()).collect();
    let predicted = par_map(&indices, a.threads, |&i| {
        let doc = &docs[i];
        let em = match &scores {
            Scores::Model(m) => m.emissions(&doc.tokens)?,
            Scores::Precomputed(blocks) => blocks[i].clone(),
        };
        let spans = decode(doc, &tags, &transitions, &em, &a)
            .map_err(|e| CliError::from(e).with_context(&format!("document `{}`", doc.id)))?;
        let mut out = doc.clone();
        out.spans = Some(spans);
        Ok(out)
    })?;

    let mut out = Output::open(a.out.as_deref())?;
    out.text(&format_corpus(&predicted))?;
    out.finish()?;
    g.log.info(format!("predicted {} documents", predicted.len()));
    Ok(())
}

fn decode(
    doc: &Document,
    tags: &TagVocabulary,
    transitions: &Transitions,
    em: &EmissionMatrix,
    a: &Args,
) -> polseg::Result<Vec<LabeledSpan>> {
    if doc.is_empty() {
        return Ok(Vec::new());
    }
    if a.oracle_boundaries {
        let gold = doc
            .gold()
            .map_err(|_| Error::InvalidInput("--oracle-boundaries needs gold spans".into()))?;
        let oracle = BoundaryOracle::from_spans(doc.len(), gold)?;
        decode_spans_with_oracle(tags, transitions, em, &oracle)
    } else {
        decode_spans(tags, transitions, em, a.legality_mask)
    }
}

fn read_blocks(path: &PathBuf, tags: &TagVocabulary, docs: &[Document]) -> CliResult<Vec<EmissionMatrix>> {
    let text = fs::read_to_string(path).map_err(|e| Error::Io {
        path: path.clone(),
        source: e,
    })?;
    let blocks = parse_emission_blocks(&text, Some(tags.len())).map_err(|e| e.in_file(path))?;
    if blocks.len() != docs.len() {
        return Err(CliError::data(format!(
            "{}: {} emission blocks for {} documents",
            path.display(),
            blocks.len(),
            docs.len()
        )));
    }
    for (i, (b, d)) in blocks.iter().zip(docs).enumerate() {
        if b.n_tokens() != d.len() {
            return Err(CliError::data(format!(
                "{}: block {i} has {} rows but document `{}` has {} tokens",
                path.display(),
                b.n_tokens(),
                d.id,
                d.len()
            )));
        }
    }
    Ok(blocks)
}
