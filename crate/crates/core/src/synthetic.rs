//! Rule-generated corpora with a known answer.
//!
//! Each category owns a private word list; a statement draws its content
//! words from its category's list, mixed with shared function words, and
//! usually ends with `.`. Segmentation and labelling are therefore
//! recoverable from the tokens alone, apart from adjacent same-category
//! statements that lack the final marker.

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::Document;
use crate::error::{Error, Result};
use crate::tagset::{CategoryVocabulary, LabeledSpan};

const STEMS: [&str; 10] = [
    "tax", "army", "school", "farm", "river", "court", "rail", "clinic", "union", "border",
];
const FUNCTION_WORDS: [&str; 8] = ["we", "will", "the", "and", "of", "to", "our", "for"];
const PARTIES: [&str; 3] = ["ALP", "BLU", "GRN"];

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticConfig {
    pub n_documents: usize,
    pub n_categories: usize,
    pub min_statements: usize,
    pub max_statements: usize,
    /// Words per statement, excluding the final marker.
    pub min_statement_len: usize,
    pub max_statement_len: usize,
    pub words_per_category: usize,
    pub function_word_rate: f64,
    pub boundary_marker_rate: f64,
    /// Probability that a statement's label is replaced by a different
    /// category.
    pub label_noise: f64,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            n_documents: 200,
            n_categories: 5,
            min_statements: 3,
            max_statements: 8,
            min_statement_len: 3,
            max_statement_len: 8,
            words_per_category: 12,
            function_word_rate: 0.25,
            boundary_marker_rate: 0.9,
            label_noise: 0.0,
            seed: 0,
        }
    }
}

impl SyntheticConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_categories == 0 || self.words_per_category == 0 {
            return Err(Error::invalid("need at least one category and one word per category"));
        }
        if self.min_statements == 0 || self.min_statements > self.max_statements {
            return Err(Error::invalid("statement count range is empty"));
        }
        if self.min_statement_len == 0 || self.min_statement_len > self.max_statement_len {
            return Err(Error::invalid("statement length range is empty"));
        }
        for (name, p) in [
            ("function_word_rate", self.function_word_rate),
            ("boundary_marker_rate", self.boundary_marker_rate),
            ("label_noise", self.label_noise),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::invalid(format!("{name} must lie in [0, 1], got {p}")));
            }
        }
        if self.label_noise > 0.0 && self.n_categories < 2 {
            return Err(Error::invalid("label noise needs at least two categories"));
        }
        Ok(())
    }
}

pub fn category_id(c: usize) -> String {
    format!("c{c}")
}

pub fn category_vocabulary(n_categories: usize) -> Result<CategoryVocabulary> {
    CategoryVocabulary::from_ids((0..n_categories).map(category_id))
}

/// The `j`-th word owned by category `c`.
pub fn category_word(c: usize, j: usize) -> String {
    let stem = STEMS[c % STEMS.len()];
    match c / STEMS.len() {
        0 => format!("{stem}{j}"),
        round => format!("{stem}{round}x{j}"),
    }
}

/// Category that owns `word`, if any.
pub fn owner(word: &str, cfg: &SyntheticConfig) -> Option<usize> {
    (0..cfg.n_categories).find(|&c| (0..cfg.words_per_category).any(|j| category_word(c, j) == word))
}

pub fn generate(cfg: &SyntheticConfig) -> Result<Vec<Document>> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let vocab: Vec<Vec<String>> = (0..cfg.n_categories)
        .map(|c| (0..cfg.words_per_category).map(|j| category_word(c, j)).collect())
        .collect();
    let mut docs = Vec::with_capacity(cfg.n_documents);
    for d in 0..cfg.n_documents {
        let mut tokens = Vec::new();
        let mut spans = Vec::new();
        let n_statements = rng.random_range(cfg.min_statements..=cfg.max_statements);
        for _ in 0..n_statements {
            let c = rng.random_range(0..cfg.n_categories);
            let start = tokens.len();
            let len = rng.random_range(cfg.min_statement_len..=cfg.max_statement_len);
            // the first word is always a content word
            tokens.push(vocab[c].choose(&mut rng).expect("non-empty").clone());
            for _ in 1..len {
                let word = if rng.random_bool(cfg.function_word_rate) {
                    FUNCTION_WORDS.choose(&mut rng).expect("non-empty").to_string()
                } else {
                    vocab[c].choose(&mut rng).expect("non-empty").clone()
                };
                tokens.push(word);
            }
            if rng.random_bool(cfg.boundary_marker_rate) {
                tokens.push(".".to_string());
            }
            let label = if cfg.label_noise > 0.0 && rng.random_bool(cfg.label_noise) {
                let other = rng.random_range(0..cfg.n_categories - 1);
                if other >= c {
                    other + 1
                } else {
                    other
                }
            } else {
                c
            };
            spans.push(LabeledSpan::new(start, tokens.len(), category_id(label)));
        }
        let mut doc = Document::new(format!("synth-{d:04}"), tokens).with_spans(spans);
        doc.party = Some(PARTIES[d % PARTIES.len()].to_string());
        doc.year = Some((2000 + (d / PARTIES.len()) % 10).to_string());
        docs.push(doc);
    }
    Ok(docs)
}
