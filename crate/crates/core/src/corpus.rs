//! Line-delimited JSON corpus files.
//!
//! One document per line:
//!
//! ```text
//! {"id":"uk-1992-lab","party":"LAB","year":"1992","tokens":["We","will","act","."],"spans":[[0,4,"504"]]}
//! ```
//!
//! `party`, `year`, `country`, and `spans` are optional. Spans are
//! `[start, end, category]` triples and must tile the token list.

use std::fmt;
use std::fs;
use std::path::Path;

use serde::de::{self, Visitor};
use serde::{Deserialize, Deserializer, Serialize};

use crate::error::{Error, Result};
use crate::tagset::{check_cover, CategoryVocabulary, LabeledSpan};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub party: Option<String>,
    #[serde(
        default,
        skip_serializing_if = "Option::is_none",
        deserialize_with = "string_or_number"
    )]
    pub year: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub country: Option<String>,
    pub tokens: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spans: Option<Vec<LabeledSpan>>,
}

impl Document {
    pub fn new(id: impl Into<String>, tokens: Vec<String>) -> Self {
        Self {
            id: id.into(),
            party: None,
            year: None,
            country: None,
            tokens,
            spans: None,
        }
    }

    pub fn with_spans(mut self, spans: Vec<LabeledSpan>) -> Self {
        self.spans = Some(spans);
        self
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Gold spans, or an error naming the document when it has none.
    pub fn gold(&self) -> Result<&[LabeledSpan]> {
        self.spans
            .as_deref()
            .ok_or_else(|| Error::invalid(format!("document `{}` has no spans", self.id)))
    }

    pub fn validate(&self) -> Result<()> {
        if self.tokens.is_empty() {
            return Err(Error::invalid(format!("document `{}` has no tokens", self.id)));
        }
        if let Some(spans) = &self.spans {
            check_cover(self.tokens.len(), spans)?;
        }
        Ok(())
    }
}

fn string_or_number<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Option<String>, D::Error> {
    struct V;
    impl<'de> Visitor<'de> for V {
        type Value = Option<String>;
        fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
            f.write_str("a string or an integer")
        }
        fn visit_str<E: de::Error>(self, v: &str) -> std::result::Result<Self::Value, E> {
            Ok(Some(v.to_string()))
        }
        fn visit_u64<E: de::Error>(self, v: u64) -> std::result::Result<Self::Value, E> {
            Ok(Some(v.to_string()))
        }
        fn visit_i64<E: de::Error>(self, v: i64) -> std::result::Result<Self::Value, E> {
            Ok(Some(v.to_string()))
        }
        fn visit_none<E: de::Error>(self) -> std::result::Result<Self::Value, E> {
            Ok(None)
        }
        fn visit_unit<E: de::Error>(self) -> std::result::Result<Self::Value, E> {
            Ok(None)
        }
    }
    d.deserialize_any(V)
}

pub fn parse_corpus(text: &str) -> Result<Vec<Document>> {
    let mut docs = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let parse_err = |message: String| Error::Parse {
            line: i + 1,
            message,
        };
        let doc: Document = serde_json::from_str(line).map_err(|e| parse_err(e.to_string()))?;
        doc.validate().map_err(|e| parse_err(e.to_string()))?;
        docs.push(doc);
    }
    Ok(docs)
}

pub fn read_corpus(path: impl AsRef<Path>) -> Result<Vec<Document>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_corpus(&text).map_err(|e| e.in_file(path))
}

pub fn format_corpus(docs: &[Document]) -> String {
    let mut out = String::new();
    for doc in docs {
        out.push_str(&serde_json::to_string(doc).expect("documents serialize"));
        out.push('\n');
    }
    out
}

pub fn write_corpus(path: impl AsRef<Path>, docs: &[Document]) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, format_corpus(docs)).map_err(|e| Error::io(path, e))
}

/// Categories in order of first appearance across the documents' spans.
pub fn vocabulary_from_corpus(docs: &[Document]) -> Result<CategoryVocabulary> {
    let mut seen = std::collections::HashSet::new();
    let mut ids = Vec::new();
    for span in docs.iter().filter_map(|d| d.spans.as_ref()).flatten() {
        if seen.insert(span.category.as_str()) {
            ids.push(span.category.clone());
        }
    }
    CategoryVocabulary::from_ids(ids)
}

/// Fails on the first span whose category is missing from `vocab`.
pub fn check_categories(docs: &[Document], vocab: &CategoryVocabulary) -> Result<()> {
    for doc in docs {
        for span in doc.spans.iter().flatten() {
            if !vocab.contains(&span.category) {
                return Err(Error::UnknownCategory(format!(
                    "{} (document `{}`)",
                    span.category, doc.id
                )));
            }
        }
    }
    Ok(())
}
