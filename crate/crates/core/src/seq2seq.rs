//! Parser for sequence-to-sequence tagged output, where each statement is
//! followed by its category code and statements are separated by a
//! delimiter (`~~~`, or `<unk>` when the model could not reproduce tildes):
//!
//! ```text
//! We want X. 416~~~ And Y. 501
//! ```

use crate::error::{Error, Result};

pub const TILDE_DELIMITER: &str = "~~~";
pub const UNK_DELIMITER: &str = "<unk>";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TaggedStatement {
    pub text: String,
    pub category: String,
}

/// Splits `text` on `delimiter`; the last whitespace-separated token of each
/// chunk is its category id and the rest is the statement.
pub fn parse_tagged_statements(text: &str, delimiter: &str) -> Result<Vec<TaggedStatement>> {
    if delimiter.is_empty() {
        return Err(Error::invalid("delimiter must not be empty"));
    }
    let chunks: Vec<&str> = text.split(delimiter).collect();
    let last = chunks.len() - 1;
    let mut out = Vec::with_capacity(chunks.len());
    for (i, chunk) in chunks.into_iter().enumerate() {
        let chunk = chunk.trim();
        // a trailing delimiter leaves an empty final chunk
        if chunk.is_empty() && i == last && i > 0 {
            continue;
        }
        let (statement, category) = match chunk.rsplit_once(char::is_whitespace) {
            Some((s, c)) => (s.trim_end(), c),
            None => ("", chunk),
        };
        if category.is_empty() || statement.is_empty() {
            return Err(Error::Malformed {
                position: i,
                message: format!("chunk {i} lacks a statement followed by a category id"),
            });
        }
        out.push(TaggedStatement {
            text: statement.to_string(),
            category: category.to_string(),
        });
    }
    Ok(out)
}

/// Parses with `~~~`, or with `<unk>` when the text contains no tildes.
pub fn parse_t5_output(text: &str) -> Result<Vec<TaggedStatement>> {
    let delimiter = if !text.contains(TILDE_DELIMITER) && text.contains(UNK_DELIMITER) {
        UNK_DELIMITER
    } else {
        TILDE_DELIMITER
    };
    parse_tagged_statements(text, delimiter)
}
