use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use polseg::corpus::{read_corpus, vocabulary_from_corpus, Document};
use polseg::tagset::CategoryVocabulary;
use serde::Serialize;

use crate::error::{CliError, CliResult};

/// Buffered writer over a file, or stdout when no path is given.
pub struct Output {
    inner: BufWriter<Box<dyn Write>>,
    path: Option<PathBuf>,
}

impl Output {
    pub fn open(path: Option<&Path>) -> CliResult<Self> {
        let sink: Box<dyn Write> = match path {
            Some(p) => Box::new(
                File::create(p).map_err(|e| CliError::usage(format!("{}: {e}", p.display())))?,
            ),
            None => Box::new(io::stdout().lock()),
        };
        Ok(Self {
            inner: BufWriter::new(sink),
            path: path.map(Path::to_path_buf),
        })
    }

    pub fn record<T: Serialize>(&mut self, value: &T) -> CliResult {
        let line = serde_json::to_string(value).map_err(|e| CliError::data(e.to_string()))?;
        self.text(&line)?;
        self.text("\n")
    }

    pub fn text(&mut self, s: &str) -> CliResult {
        self.inner.write_all(s.as_bytes()).map_err(|e| self.fail(e))
    }

    pub fn finish(mut self) -> CliResult {
        self.inner.flush().map_err(|e| self.fail(e))
    }

    fn fail(&self, e: io::Error) -> CliError {
        match &self.path {
            Some(p) => CliError::usage(format!("{}: {e}", p.display())),
            None => CliError::usage(format!("stdout: {e}")),
        }
    }
}

pub fn corpus(path: &Path) -> CliResult<Vec<Document>> {
    Ok(read_corpus(path)?)
}

/// Categories from the `--vocab` file if given, else from `docs` in order
/// of first appearance.
pub fn vocabulary(vocab: Option<&Path>, docs: &[Document]) -> CliResult<CategoryVocabulary> {
    match vocab {
        Some(p) => Ok(CategoryVocabulary::read_tsv(p)?),
        None => vocabulary_from_corpus(docs).map_err(|e| {
            CliError::data(format!("cannot derive a category vocabulary from the corpus: {e}"))
        }),
    }
}

/// Progress messages on stderr, silenced by `--quiet`.
#[derive(Debug, Clone, Copy)]
pub struct Log {
    pub quiet: bool,
}

impl Log {
    pub fn info(&self, msg: impl AsRef<str>) {
        if !self.quiet {
            eprintln!("{}", msg.as_ref());
        }
    }

    pub fn warn(&self, msg: impl AsRef<str>) {
        eprintln!("warning: {}", msg.as_ref());
    }
}
