//! Category vocabularies, their BIO expansion, and conversion between
//! labelled spans and per-token tag sequences.
//!
//! Statements form a total cover of every document, so the `O` tag never
//! labels a real token. It is kept at index 0 only so that unconstrained
//! decoders have somewhere to put probability mass; [`legality_masks`]
//! forbids it outright.

use std::collections::HashMap;
use std::fmt;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::crf::TagMask;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Category {
    pub id: String,
    pub name: String,
}

/// Ordered set of categories. Order is significant: it fixes tag indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CategoryVocabulary {
    categories: Vec<Category>,
    index: HashMap<String, usize>,
}

impl CategoryVocabulary {
    pub fn new(categories: Vec<Category>) -> Result<Self> {
        let mut index = HashMap::with_capacity(categories.len());
        for (i, c) in categories.iter().enumerate() {
            if c.id.is_empty() {
                return Err(Error::invalid(format!("category {i} has an empty id")));
            }
            if c.id.chars().any(char::is_whitespace) {
                return Err(Error::invalid(format!(
                    "category id `{}` contains whitespace",
                    c.id
                )));
            }
            if index.insert(c.id.clone(), i).is_some() {
                return Err(Error::invalid(format!("duplicate category id `{}`", c.id)));
            }
        }
        Ok(Self { categories, index })
    }

    /// Vocabulary whose display names equal the ids.
    pub fn from_ids<I, S>(ids: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self::new(
            ids.into_iter()
                .map(|id| {
                    let id = id.into();
                    Category {
                        name: id.clone(),
                        id,
                    }
                })
                .collect(),
        )
    }

    /// Parses the `id<TAB>display_name` format. Blank lines are skipped; a
    /// line without a tab uses the id as its display name.
    pub fn parse_tsv(text: &str) -> Result<Self> {
        let mut categories = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() {
                continue;
            }
            let (id, name) = match line.split_once('\t') {
                Some((id, name)) => (id.trim(), name.trim()),
                None => (line.trim(), line.trim()),
            };
            if id.is_empty() {
                return Err(Error::Parse {
                    line: lineno + 1,
                    message: "empty category id".into(),
                });
            }
            categories.push(Category {
                id: id.to_string(),
                name: name.to_string(),
            });
        }
        Self::new(categories)
    }

    pub fn read_tsv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse_tsv(&text).map_err(|e| e.in_file(path))
    }

    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        for c in &self.categories {
            out.push_str(&c.id);
            out.push('\t');
            out.push_str(&c.name);
            out.push('\n');
        }
        out
    }

    pub fn len(&self) -> usize {
        self.categories.len()
    }

    pub fn is_empty(&self) -> bool {
        self.categories.is_empty()
    }

    pub fn get(&self, index: usize) -> Option<&Category> {
        self.categories.get(index)
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn contains(&self, id: &str) -> bool {
        self.index.contains_key(id)
    }

    pub fn iter(&self) -> impl Iterator<Item = &Category> {
        self.categories.iter()
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.categories.iter().map(|c| c.id.as_str())
    }

    pub fn categories(&self) -> &[Category] {
        &self.categories
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Tag {
    Outside,
    Begin(usize),
    Inside(usize),
}

impl Tag {
    pub fn category(self) -> Option<usize> {
        match self {
            Tag::Outside => None,
            Tag::Begin(c) | Tag::Inside(c) => Some(c),
        }
    }
}

/// BIO expansion of a category vocabulary.
///
/// Layout: index 0 is `O`; category `c` owns `B-c` at `1 + 2c` and `I-c`
/// at `2 + 2c`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TagVocabulary {
    source: CategoryVocabulary,
}

pub type TagSequence = Vec<usize>;

pub const OUTSIDE: usize = 0;

pub fn expand_bio(vocab: CategoryVocabulary) -> Result<TagVocabulary> {
    if vocab.is_empty() {
        return Err(Error::invalid("category vocabulary is empty"));
    }
    Ok(TagVocabulary { source: vocab })
}

impl TagVocabulary {
    pub fn len(&self) -> usize {
        2 * self.source.len() + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn categories(&self) -> &CategoryVocabulary {
        &self.source
    }

    pub fn begin(&self, category: usize) -> usize {
        1 + 2 * category
    }

    pub fn inside(&self, category: usize) -> usize {
        2 + 2 * category
    }

    pub fn tag(&self, index: usize) -> Tag {
        debug_assert!(index < self.len());
        match index {
            0 => Tag::Outside,
            i if i % 2 == 1 => Tag::Begin((i - 1) / 2),
            i => Tag::Inside((i - 2) / 2),
        }
    }

    pub fn index(&self, tag: Tag) -> usize {
        match tag {
            Tag::Outside => OUTSIDE,
            Tag::Begin(c) => self.begin(c),
            Tag::Inside(c) => self.inside(c),
        }
    }

    /// Human-readable tag label such as `B-504`.
    pub fn label(&self, index: usize) -> String {
        match self.tag(index) {
            Tag::Outside => "O".to_string(),
            Tag::Begin(c) => format!("B-{}", self.source.categories[c].id),
            Tag::Inside(c) => format!("I-{}", self.source.categories[c].id),
        }
    }

    pub fn is_begin(&self, index: usize) -> bool {
        index % 2 == 1
    }

    /// Whether `to` may directly follow `from` under BIO rules.
    pub fn transition_allowed(&self, from: usize, to: usize) -> bool {
        match self.tag(to) {
            Tag::Inside(c) => matches!(self.tag(from), Tag::Begin(p) | Tag::Inside(p) if p == c),
            _ => true,
        }
    }
}

/// Half-open token interval `[start, end)` labelled with a category id.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(from = "(usize, usize, String)", into = "(usize, usize, String)")]
pub struct LabeledSpan {
    pub start: usize,
    pub end: usize,
    pub category: String,
}

impl LabeledSpan {
    pub fn new(start: usize, end: usize, category: impl Into<String>) -> Self {
        Self {
            start,
            end,
            category: category.into(),
        }
    }

    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end <= self.start
    }
}

impl From<(usize, usize, String)> for LabeledSpan {
    fn from((start, end, category): (usize, usize, String)) -> Self {
        Self {
            start,
            end,
            category,
        }
    }
}

impl From<LabeledSpan> for (usize, usize, String) {
    fn from(s: LabeledSpan) -> Self {
        (s.start, s.end, s.category)
    }
}

impl fmt::Display for LabeledSpan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {}) {}", self.start, self.end, self.category)
    }
}

/// Checks that `spans` are sorted, non-empty, and tile `[0, n_tokens)`.
pub fn check_cover(n_tokens: usize, spans: &[LabeledSpan]) -> Result<()> {
    let mut expected = 0;
    for span in spans {
        if span.start != expected {
            let (position, reason) = if span.start > expected {
                (expected, "gap before span")
            } else {
                (span.start, "overlapping span")
            };
            return Err(Error::Coverage {
                position,
                reason: reason.into(),
            });
        }
        if span.end <= span.start {
            return Err(Error::Coverage {
                position: span.start,
                reason: "empty span".into(),
            });
        }
        if span.end > n_tokens {
            return Err(Error::Coverage {
                position: n_tokens,
                reason: format!("span end {} beyond document length", span.end),
            });
        }
        expected = span.end;
    }
    if expected != n_tokens {
        return Err(Error::Coverage {
            position: expected,
            reason: "tokens left uncovered".into(),
        });
    }
    Ok(())
}

pub fn spans_to_tags(
    tagvocab: &TagVocabulary,
    n_tokens: usize,
    spans: &[LabeledSpan],
) -> Result<TagSequence> {
    check_cover(n_tokens, spans)?;
    let mut tags = Vec::with_capacity(n_tokens);
    for span in spans {
        let c = tagvocab
            .categories()
            .index_of(&span.category)
            .ok_or_else(|| Error::UnknownCategory(span.category.clone()))?;
        tags.push(tagvocab.begin(c));
        tags.extend(std::iter::repeat_n(tagvocab.inside(c), span.len() - 1));
    }
    Ok(tags)
}

/// Decodes a tag sequence into a total cover, repairing structural errors.
///
/// An `I-c` with no open span of category `c` starts a new span. An `O`
/// closes the open span but its token is absorbed into it, so coverage stays
/// total; leading `O` tokens are absorbed by the first span. A sequence of
/// only `O` becomes one span of the first category.
pub fn tags_to_spans(tagvocab: &TagVocabulary, tags: &[usize]) -> Vec<LabeledSpan> {
    let mut spans: Vec<LabeledSpan> = Vec::new();
    let mut open: Option<usize> = None;
    let mut leading_outside = 0;
    let id = |c: usize| tagvocab.categories().categories[c].id.clone();

    for (t, &tag) in tags.iter().enumerate() {
        match tagvocab.tag(tag) {
            Tag::Begin(c) => {
                spans.push(LabeledSpan::new(t, t + 1, id(c)));
                open = Some(c);
            }
            Tag::Inside(c) if open == Some(c) => {
                spans.last_mut().expect("open span").end = t + 1;
            }
            Tag::Inside(c) => {
                spans.push(LabeledSpan::new(t, t + 1, id(c)));
                open = Some(c);
            }
            Tag::Outside => {
                open = None;
                match spans.last_mut() {
                    Some(last) => last.end = t + 1,
                    None => leading_outside += 1,
                }
            }
        }
    }
    match spans.first_mut() {
        Some(first) => first.start = 0,
        None if leading_outside > 0 => spans.push(LabeledSpan::new(0, leading_outside, id(0))),
        None => {}
    }
    spans
}

/// Structural legality mask for a document of `n_tokens` tokens: `O` is
/// forbidden everywhere, the first token must carry a `B` tag, and `I-c`
/// may only follow `B-c` or `I-c`.
pub fn legality_masks(tagvocab: &TagVocabulary, n_tokens: usize) -> Result<TagMask> {
    if n_tokens == 0 {
        return Err(Error::invalid("legality mask needs at least one token"));
    }
    let k = tagvocab.len();
    let mut mask = TagMask::allow_all(n_tokens, k);
    for t in 0..n_tokens {
        mask.forbid_tag(t, OUTSIDE);
    }
    for tag in 0..k {
        if !tagvocab.is_begin(tag) {
            mask.forbid_tag(0, tag);
        }
    }
    for from in 0..k {
        for to in 0..k {
            if !tagvocab.transition_allowed(from, to) {
                mask.forbid_transition(from, to);
            }
        }
    }
    Ok(mask)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vocab(ids: &[&str]) -> TagVocabulary {
        expand_bio(CategoryVocabulary::from_ids(ids.iter().copied()).unwrap()).unwrap()
    }

    fn span(s: usize, e: usize, c: &str) -> LabeledSpan {
        LabeledSpan::new(s, e, c)
    }

    #[test]
    fn bio_expansion_sizes() {
        assert_eq!(vocab(&["x"]).len(), 3);
        assert_eq!(vocab(&["x", "y"]).len(), 5);
        let ids: Vec<String> = (0..137).map(|i| format!("{i:03}")).collect();
        let tv = expand_bio(CategoryVocabulary::from_ids(ids).unwrap()).unwrap();
        assert_eq!(tv.len(), 275);
    }

    #[test]
    fn bio_layout() {
        let tv = vocab(&["x", "y"]);
        let labels: Vec<_> = (0..tv.len()).map(|i| tv.label(i)).collect();
        assert_eq!(labels, ["O", "B-x", "I-x", "B-y", "I-y"]);
        for i in 0..tv.len() {
            assert_eq!(tv.index(tv.tag(i)), i);
        }
    }

    #[test]
    fn empty_vocabulary_rejected() {
        let v = CategoryVocabulary::new(vec![]).unwrap();
        assert!(matches!(expand_bio(v), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn duplicate_ids_rejected() {
        assert!(CategoryVocabulary::from_ids(["a", "b", "a"]).is_err());
        assert!(CategoryVocabulary::from_ids([""]).is_err());
    }

    #[test]
    fn tsv_round_trip() {
        let text = "504\tWelfare State Expansion\n416\tAnti-Growth Economy\n\n000\n";
        let v = CategoryVocabulary::parse_tsv(text).unwrap();
        assert_eq!(v.len(), 3);
        assert_eq!(v.get(0).unwrap().name, "Welfare State Expansion");
        assert_eq!(v.get(2).unwrap().name, "000");
        assert_eq!(CategoryVocabulary::parse_tsv(&v.to_tsv()).unwrap(), v);
    }

    #[test]
    fn spans_to_tags_examples() {
        let tv = vocab(&["x", "y"]);
        assert_eq!(spans_to_tags(&tv, 3, &[span(0, 3, "x")]).unwrap(), [1, 2, 2]);
        assert_eq!(
            spans_to_tags(&tv, 4, &[span(0, 2, "x"), span(2, 4, "y")]).unwrap(),
            [1, 2, 3, 4]
        );
    }

    #[test]
    fn spans_to_tags_coverage_errors() {
        let tv = vocab(&["x", "y"]);
        let gap = spans_to_tags(&tv, 3, &[span(0, 1, "x"), span(2, 3, "y")]);
        assert!(matches!(gap, Err(Error::Coverage { position: 1, .. })));
        let overlap = spans_to_tags(&tv, 3, &[span(0, 2, "x"), span(1, 3, "y")]);
        assert!(matches!(overlap, Err(Error::Coverage { position: 1, .. })));
        let beyond = spans_to_tags(&tv, 3, &[span(0, 4, "x")]);
        assert!(matches!(beyond, Err(Error::Coverage { position: 3, .. })));
        let short = spans_to_tags(&tv, 3, &[span(0, 2, "x")]);
        assert!(matches!(short, Err(Error::Coverage { position: 2, .. })));
        let unknown = spans_to_tags(&tv, 1, &[span(0, 1, "z")]);
        assert!(matches!(unknown, Err(Error::UnknownCategory(_))));
    }

    #[test]
    fn tags_to_spans_examples() {
        let tv = vocab(&["x", "y"]);
        assert_eq!(
            tags_to_spans(&tv, &[1, 2, 3]),
            [span(0, 2, "x"), span(2, 3, "y")]
        );
        assert_eq!(tags_to_spans(&tv, &[2, 2]), [span(0, 2, "x")]);
        assert_eq!(
            tags_to_spans(&tv, &[1, 4]),
            [span(0, 1, "x"), span(1, 2, "y")]
        );
    }

    #[test]
    fn outside_tags_are_absorbed() {
        let tv = vocab(&["x", "y"]);
        assert_eq!(
            tags_to_spans(&tv, &[0, 1, 0, 2, 3]),
            [span(0, 3, "x"), span(3, 4, "x"), span(4, 5, "y")]
        );
        assert_eq!(tags_to_spans(&tv, &[0, 0]), [span(0, 2, "x")]);
        assert!(tags_to_spans(&tv, &[]).is_empty());
    }

    #[test]
    fn mask_structure() {
        let tv = vocab(&["x"]);
        let m = legality_masks(&tv, 2).unwrap();
        assert!(!m.tag_allowed(0, 0) && !m.tag_allowed(1, 0));
        assert!(m.tag_allowed(0, 1) && !m.tag_allowed(0, 2));
        assert!(m.tag_allowed(1, 1) && m.tag_allowed(1, 2));
        assert!(m.transition_allowed(1, 2) && m.transition_allowed(2, 2));
        assert!(!m.transition_allowed(0, 2));

        let tv = vocab(&["x", "y"]);
        let m = legality_masks(&tv, 3).unwrap();
        // B-x -> I-y is illegal, I-x -> B-y is fine
        assert!(!m.transition_allowed(1, 4));
        assert!(m.transition_allowed(2, 3));
        assert!(legality_masks(&tv, 0).is_err());
    }
}
