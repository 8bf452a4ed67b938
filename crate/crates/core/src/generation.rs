//! Segmentation as constrained text generation.
//!
//! The decoder reproduces the input token by token and, after each
//! statement, spells out a label tag ` [(name)]`. At every step it may
//! either copy the next input token, open a tag (once at least one token has
//! been copied since the previous tag), or continue the tag it is inside.
//! Tags are matched against a trie over their tokenizations, so every
//! emitted sequence corresponds to exactly one segmentation:
//!
//! ```text
//! input:   a b c
//! emitted: a b [(X)] c [(Y)]      spans: [0,2) X, [2,3) Y
//! ```
//!
//! Scores come from any [`Scorer`], a function of the emitted history that
//! rates each candidate next token.

use std::cmp::Ordering;
use std::collections::{BTreeMap, HashMap, HashSet};

use crate::corpus::Document;
use crate::error::{Error, Result};
use crate::tagset::{check_cover, CategoryVocabulary, LabeledSpan};
use crate::tokenize::Tokenizer;

pub const DEFAULT_BEAM_WIDTH: usize = 3;

/// The text spelled out after a statement of the category named `name`.
pub fn tag_string(name: &str) -> String {
    format!(" [({name})]")
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
struct Node {
    children: BTreeMap<String, usize>,
    leaf: Option<usize>,
}

/// Prefix tree over the token sequences of all tag strings. Each leaf maps
/// to a category, and no tag's path is a prefix of another's.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenTrie {
    nodes: Vec<Node>,
    categories: Vec<String>,
    paths: Vec<Vec<String>>,
}

const ROOT: usize = 0;

impl TokenTrie {
    pub fn build(vocab: &CategoryVocabulary, tokenizer: &dyn Tokenizer) -> Result<Self> {
        if vocab.is_empty() {
            return Err(Error::invalid("cannot build a tag trie without categories"));
        }
        let mut names = HashSet::new();
        let mut trie = TokenTrie {
            nodes: vec![Node::default()],
            categories: Vec::with_capacity(vocab.len()),
            paths: Vec::with_capacity(vocab.len()),
        };
        for (ci, cat) in vocab.iter().enumerate() {
            if !names.insert(cat.name.as_str()) {
                return Err(Error::invalid(format!("duplicate display name `{}`", cat.name)));
            }
            let path = tokenizer.tokenize(&tag_string(&cat.name));
            if path.is_empty() {
                return Err(Error::invalid(format!("tag for `{}` tokenizes to nothing", cat.id)));
            }
            let mut node = ROOT;
            for tok in &path {
                if let Some(other) = trie.nodes[node].leaf {
                    return Err(prefix_clash(&trie.categories[other], &cat.id));
                }
                node = match trie.nodes[node].children.get(tok) {
                    Some(&child) => child,
                    None => {
                        trie.nodes.push(Node::default());
                        let child = trie.nodes.len() - 1;
                        trie.nodes[node].children.insert(tok.clone(), child);
                        child
                    }
                };
            }
            if let Some(other) = trie.nodes[node].leaf {
                return Err(Error::invalid(format!(
                    "categories `{}` and `{}` have identical tag tokenizations",
                    trie.categories[other], cat.id
                )));
            }
            if !trie.nodes[node].children.is_empty() {
                return Err(prefix_clash(&cat.id, "another category"));
            }
            trie.nodes[node].leaf = Some(ci);
            trie.categories.push(cat.id.clone());
            trie.paths.push(path);
        }
        Ok(trie)
    }

    /// Category whose tag tokenizes to exactly `tokens`.
    pub fn accepts<S: AsRef<str>>(&self, tokens: &[S]) -> Option<&str> {
        let mut node = ROOT;
        for t in tokens {
            node = *self.nodes[node].children.get(t.as_ref())?;
        }
        self.nodes[node].leaf.map(|c| self.categories[c].as_str())
    }

    pub fn categories(&self) -> &[String] {
        &self.categories
    }

    pub fn tag_tokens(&self, category: &str) -> Option<&[String]> {
        let i = self.categories.iter().position(|c| c == category)?;
        Some(&self.paths[i])
    }

    /// Tokens that can open a tag.
    pub fn openers(&self) -> impl Iterator<Item = &str> {
        self.nodes[ROOT].children.keys().map(String::as_str)
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }
}

fn prefix_clash(a: &str, b: &str) -> Error {
    Error::invalid(format!("tag of `{a}` is a prefix of the tag of `{b}`"))
}

/// A candidate next emission.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Next<'a> {
    Token(&'a str),
    End,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum StepKind {
    /// Copy the next input token.
    Parrot,
    /// Open or continue a tag.
    Tag,
    End,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Step<'a> {
    pub kind: StepKind,
    pub next: Next<'a>,
}

/// Position of a partial emission within the grammar.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct DecodeState {
    cursor: usize,
    node: Option<usize>,
    parroted: bool,
    start: usize,
    spans: Vec<(usize, usize, usize)>,
    finished: bool,
}

impl DecodeState {
    pub fn new() -> Self {
        Self::default()
    }

    /// Index of the next input token to copy.
    pub fn cursor(&self) -> usize {
        self.cursor
    }

    pub fn in_tag(&self) -> bool {
        self.node.is_some()
    }

    pub fn is_finished(&self) -> bool {
        self.finished
    }

    pub fn n_spans(&self) -> usize {
        self.spans.len()
    }

    /// Statements closed so far.
    pub fn spans(&self, trie: &TokenTrie) -> Vec<LabeledSpan> {
        self.spans
            .iter()
            .map(|&(s, e, c)| LabeledSpan::new(s, e, trie.categories[c].clone()))
            .collect()
    }

    fn category_ids<'s>(&'s self, trie: &'s TokenTrie) -> impl Iterator<Item = &'s str> + 's {
        self.spans.iter().map(move |&(_, _, c)| trie.categories[c].as_str())
    }

    /// The state after taking `step`, which must be one of this state's
    /// legal continuations.
    pub fn advance(&self, step: &Step<'_>, trie: &TokenTrie) -> Self {
        let mut next = self.clone();
        match (step.kind, step.next) {
            (StepKind::Parrot, _) => {
                next.cursor += 1;
                next.parroted = true;
            }
            (StepKind::Tag, Next::Token(tok)) => {
                let from = self.node.unwrap_or(ROOT);
                let child = trie.nodes[from].children[tok];
                match trie.nodes[child].leaf {
                    Some(c) => {
                        next.spans.push((self.start, self.cursor, c));
                        next.start = self.cursor;
                        next.node = None;
                        next.parroted = false;
                    }
                    None => next.node = Some(child),
                }
            }
            (StepKind::Tag, Next::End) => unreachable!("tag steps carry a token"),
            (StepKind::End, _) => next.finished = true,
        }
        next
    }
}

/// Every step the grammar allows from `state`, copies first, then tag
/// tokens in trie order, then the end marker.
pub fn legal_continuations<'a, S: AsRef<str>>(
    state: &DecodeState,
    trie: &'a TokenTrie,
    input: &'a [S],
) -> Vec<Step<'a>> {
    let tag = |t: &'a String| Step {
        kind: StepKind::Tag,
        next: Next::Token(t.as_str()),
    };
    if state.finished {
        return Vec::new();
    }
    if let Some(node) = state.node {
        return trie.nodes[node].children.keys().map(tag).collect();
    }
    let mut out = Vec::new();
    if let Some(tok) = input.get(state.cursor) {
        out.push(Step {
            kind: StepKind::Parrot,
            next: Next::Token(tok.as_ref()),
        });
    }
    if state.parroted {
        out.extend(trie.nodes[ROOT].children.keys().map(tag));
    } else if state.cursor == input.len() && !state.spans.is_empty() {
        out.push(Step {
            kind: StepKind::End,
            next: Next::End,
        });
    }
    out
}

/// Rates candidate next emissions given the emitted history. Must return
/// one score per candidate and be deterministic.
pub trait Scorer: Sync {
    fn score(&self, history: &[&str], candidates: &[Next<'_>]) -> Result<Vec<f64>>;
}

/// Scores every candidate 0.
#[derive(Debug, Clone, Copy, Default)]
pub struct UniformScorer;

impl Scorer for UniformScorer {
    fn score(&self, _history: &[&str], candidates: &[Next<'_>]) -> Result<Vec<f64>> {
        Ok(vec![0.0; candidates.len()])
    }
}

/// Fixed additive score per token string, independent of history.
#[derive(Debug, Clone, Default)]
pub struct TokenBiasScorer {
    biases: HashMap<String, f64>,
    end: f64,
}

impl TokenBiasScorer {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_bias(mut self, token: impl Into<String>, bias: f64) -> Self {
        self.biases.insert(token.into(), bias);
        self
    }

    pub fn with_end(mut self, bias: f64) -> Self {
        self.end = bias;
        self
    }
}

impl Scorer for TokenBiasScorer {
    fn score(&self, _history: &[&str], candidates: &[Next<'_>]) -> Result<Vec<f64>> {
        Ok(candidates
            .iter()
            .map(|c| match c {
                Next::Token(t) => self.biases.get(*t).copied().unwrap_or(0.0),
                Next::End => self.end,
            })
            .collect())
    }
}

const NGRAM_START: &str = "\u{0}<s>";
const NGRAM_END: &str = "\u{0}</s>";

/// Add-k smoothed n-gram log-probabilities over emitted sequences.
#[derive(Debug, Clone)]
pub struct NgramScorer {
    order: usize,
    k: f64,
    counts: HashMap<Vec<String>, HashMap<String, u64>>,
    totals: HashMap<Vec<String>, u64>,
    vocab_size: usize,
}

impl NgramScorer {
    /// Trains on emitted token sequences (without the end marker).
    pub fn train<S: AsRef<str>>(order: usize, k: f64, sequences: &[Vec<S>]) -> Result<Self> {
        if order == 0 {
            return Err(Error::invalid("n-gram order must be at least 1"));
        }
        if !(k > 0.0 && k.is_finite()) {
            return Err(Error::invalid(format!("smoothing constant must be positive, got {k}")));
        }
        let mut counts: HashMap<Vec<String>, HashMap<String, u64>> = HashMap::new();
        let mut totals: HashMap<Vec<String>, u64> = HashMap::new();
        let mut vocab: HashSet<String> = HashSet::new();
        for seq in sequences {
            let mut padded: Vec<String> = vec![NGRAM_START.to_string(); order - 1];
            padded.extend(seq.iter().map(|t| t.as_ref().to_string()));
            padded.push(NGRAM_END.to_string());
            for i in order - 1..padded.len() {
                let ctx = padded[i + 1 - order..i].to_vec();
                let tok = padded[i].clone();
                vocab.insert(tok.clone());
                *totals.entry(ctx.clone()).or_insert(0) += 1;
                *counts.entry(ctx).or_default().entry(tok).or_insert(0) += 1;
            }
        }
        Ok(Self {
            order,
            k,
            counts,
            totals,
            // one slot for unseen tokens
            vocab_size: vocab.len() + 1,
        })
    }

    /// Trains on the rendered gold segmentations of `docs`.
    pub fn from_corpus(order: usize, k: f64, docs: &[Document], trie: &TokenTrie) -> Result<Self> {
        let mut sequences = Vec::with_capacity(docs.len());
        for doc in docs {
            sequences.push(render(doc.gold()?, &doc.tokens, trie)?);
        }
        Self::train(order, k, &sequences)
    }

    pub fn order(&self) -> usize {
        self.order
    }

    fn log_prob(&self, ctx: &[String], tok: &str) -> f64 {
        let c = self
            .counts
            .get(ctx)
            .and_then(|m| m.get(tok))
            .copied()
            .unwrap_or(0) as f64;
        let n = self.totals.get(ctx).copied().unwrap_or(0) as f64;
        ((c + self.k) / (n + self.k * self.vocab_size as f64)).ln()
    }
}

impl Scorer for NgramScorer {
    fn score(&self, history: &[&str], candidates: &[Next<'_>]) -> Result<Vec<f64>> {
        let n = self.order - 1;
        let mut ctx: Vec<String> = Vec::with_capacity(n);
        let have = history.len().min(n);
        ctx.extend(std::iter::repeat_n(NGRAM_START.to_string(), n - have));
        ctx.extend(history[history.len() - have..].iter().map(|t| t.to_string()));
        Ok(candidates
            .iter()
            .map(|c| match c {
                Next::Token(t) => self.log_prob(&ctx, t),
                Next::End => self.log_prob(&ctx, NGRAM_END),
            })
            .collect())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Decoded {
    pub spans: Vec<LabeledSpan>,
    /// Emitted tokens, without the end marker.
    pub emitted: Vec<String>,
    pub score: f64,
}

#[derive(Debug, Clone)]
struct Hypothesis<'a> {
    state: DecodeState,
    history: Vec<&'a str>,
    score: f64,
}

// Higher score first, then fewer spans, then smaller category id sequence.
fn rank(a: &Hypothesis<'_>, b: &Hypothesis<'_>, trie: &TokenTrie) -> Ordering {
    b.score
        .total_cmp(&a.score)
        .then_with(|| a.state.n_spans().cmp(&b.state.n_spans()))
        .then_with(|| a.state.category_ids(trie).cmp(b.state.category_ids(trie)))
}

fn scored<'a, S: Scorer + ?Sized>(
    scorer: &S,
    history: &[&str],
    steps: &[Step<'a>],
) -> Result<Vec<f64>> {
    let candidates: Vec<Next<'a>> = steps.iter().map(|s| s.next).collect();
    let scores = scorer.score(history, &candidates)?;
    if scores.len() != candidates.len() {
        return Err(Error::Dimension {
            what: "scorer output".into(),
            expected: candidates.len(),
            actual: scores.len(),
        });
    }
    if let Some(bad) = scores.iter().find(|s| s.is_nan() || **s == f64::INFINITY) {
        return Err(Error::invalid(format!("scorer returned {bad}")));
    }
    Ok(scores)
}

fn check_input<S: AsRef<str>>(input: &[S]) -> Result<()> {
    if input.is_empty() {
        return Err(Error::invalid("cannot decode an empty input"));
    }
    Ok(())
}

fn finish<'a>(h: Hypothesis<'a>, trie: &TokenTrie) -> Decoded {
    Decoded {
        spans: h.state.spans(trie),
        emitted: h.history.iter().map(|t| t.to_string()).collect(),
        score: h.score,
    }
}

/// Beam search under the parrot-or-tag grammar. Scores are summed raw.
/// Finished hypotheses leave the beam and do not take up its slots.
pub fn constrained_beam_search<S: AsRef<str>, C: Scorer + ?Sized>(
    scorer: &C,
    input: &[S],
    trie: &TokenTrie,
    width: usize,
) -> Result<Decoded> {
    if width == 0 {
        return Err(Error::invalid("beam width must be at least 1"));
    }
    check_input(input)?;
    let mut beam = vec![Hypothesis {
        state: DecodeState::new(),
        history: Vec::new(),
        score: 0.0,
    }];
    let mut finished: Vec<Hypothesis<'_>> = Vec::new();
    while !beam.is_empty() {
        let mut expanded = Vec::new();
        for hyp in &beam {
            let steps = legal_continuations(&hyp.state, trie, input);
            let scores = scored(scorer, &hyp.history, &steps)?;
            for (step, s) in steps.iter().zip(scores) {
                let mut history = hyp.history.clone();
                if let Next::Token(t) = step.next {
                    history.push(t);
                }
                let next = Hypothesis {
                    state: hyp.state.advance(step, trie),
                    history,
                    score: hyp.score + s,
                };
                if next.state.is_finished() {
                    finished.push(next);
                } else {
                    expanded.push(next);
                }
            }
        }
        expanded.sort_by(|a, b| rank(a, b, trie));
        expanded.truncate(width);
        beam = expanded;
    }
    finished.sort_by(|a, b| rank(a, b, trie));
    let best = finished
        .into_iter()
        .next()
        .ok_or_else(|| Error::Infeasible("no complete hypothesis".into()))?;
    Ok(finish(best, trie))
}

/// Takes the best-ranked legal step at every position.
pub fn greedy_decode<S: AsRef<str>, C: Scorer + ?Sized>(
    scorer: &C,
    input: &[S],
    trie: &TokenTrie,
) -> Result<Decoded> {
    check_input(input)?;
    let mut hyp = Hypothesis {
        state: DecodeState::new(),
        history: Vec::new(),
        score: 0.0,
    };
    while !hyp.state.is_finished() {
        let steps = legal_continuations(&hyp.state, trie, input);
        let scores = scored(scorer, &hyp.history, &steps)?;
        let mut best: Option<Hypothesis<'_>> = None;
        for (step, s) in steps.iter().zip(scores) {
            let mut history = hyp.history.clone();
            if let Next::Token(t) = step.next {
                history.push(t);
            }
            let cand = Hypothesis {
                state: hyp.state.advance(step, trie),
                history,
                score: hyp.score + s,
            };
            if best.as_ref().is_none_or(|b| rank(&cand, b, trie) == Ordering::Less) {
                best = Some(cand);
            }
        }
        hyp = best.expect("unfinished states have a legal step");
    }
    Ok(finish(hyp, trie))
}

/// The step sequence that generates `spans` over `input`, ending with the
/// end marker.
pub fn render_steps<'a, S: AsRef<str>>(
    spans: &[LabeledSpan],
    input: &'a [S],
    trie: &'a TokenTrie,
) -> Result<Vec<Step<'a>>> {
    check_input(input)?;
    check_cover(input.len(), spans)?;
    let mut steps = Vec::new();
    for span in spans {
        let tag = trie
            .tag_tokens(&span.category)
            .ok_or_else(|| Error::UnknownCategory(span.category.clone()))?;
        steps.extend(input[span.start..span.end].iter().map(|t| Step {
            kind: StepKind::Parrot,
            next: Next::Token(t.as_ref()),
        }));
        steps.extend(tag.iter().map(|t| Step {
            kind: StepKind::Tag,
            next: Next::Token(t.as_str()),
        }));
    }
    steps.push(Step {
        kind: StepKind::End,
        next: Next::End,
    });
    Ok(steps)
}

/// The emitted tokens that generate `spans` over `input`.
pub fn render<S: AsRef<str>>(spans: &[LabeledSpan], input: &[S], trie: &TokenTrie) -> Result<Vec<String>> {
    Ok(render_steps(spans, input, trie)?
        .into_iter()
        .filter_map(|s| match s.next {
            Next::Token(t) => Some(t.to_string()),
            Next::End => None,
        })
        .collect())
}

/// Total score of a step sequence, accumulated in the same order as the
/// beam search. Fails if a step is not legal where it occurs.
pub fn score_steps<S: AsRef<str>, C: Scorer + ?Sized>(
    scorer: &C,
    steps: &[Step<'_>],
    trie: &TokenTrie,
    input: &[S],
) -> Result<f64> {
    let mut state = DecodeState::new();
    let mut history: Vec<&str> = Vec::new();
    let mut total = 0.0;
    for (pos, step) in steps.iter().enumerate() {
        let legal = legal_continuations(&state, trie, input);
        let i = legal.iter().position(|l| l == step).ok_or_else(|| Error::Malformed {
            position: pos,
            message: "step not allowed by the grammar".into(),
        })?;
        let scores = scored(scorer, &history, &legal)?;
        total += scores[i];
        state = state.advance(step, trie);
        if let Next::Token(t) = step.next {
            history.push(t);
        }
    }
    if !state.is_finished() {
        return Err(Error::Malformed {
            position: steps.len(),
            message: "sequence ends before the end marker".into(),
        });
    }
    Ok(total)
}

/// Recovers the segmentation from emitted tokens (end marker omitted).
///
/// When an input token coincides with a tag token, copying is tried first
/// and tag readings are tried on backtrack.
pub fn parse_tagged_output<S: AsRef<str>, T: AsRef<str>>(
    emitted: &[S],
    trie: &TokenTrie,
    input: &[T],
) -> Result<Vec<LabeledSpan>> {
    check_input(input)?;
    let mut furthest = 0;
    let mut stack = vec![(DecodeState::new(), 0usize)];
    while let Some((state, pos)) = stack.pop() {
        let legal = legal_continuations(&state, trie, input);
        if pos == emitted.len() {
            if legal.iter().any(|s| s.kind == StepKind::End) {
                return Ok(state.spans(trie));
            }
            furthest = furthest.max(pos);
            continue;
        }
        let tok = emitted[pos].as_ref();
        let matching: Vec<&Step<'_>> = legal.iter().filter(|s| s.next == Next::Token(tok)).collect();
        if matching.is_empty() {
            furthest = furthest.max(pos);
        }
        for step in matching.into_iter().rev() {
            stack.push((state.advance(step, trie), pos + 1));
        }
    }
    let message = match emitted.get(furthest) {
        Some(t) => format!("unexpected token `{}`", t.as_ref()),
        None => "output ends inside a statement or tag".into(),
    };
    Err(Error::Malformed {
        position: furthest,
        message,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tagset::Category;
    use crate::tokenize::{tokenize, DefaultTokenizer};

    fn trie(names: &[&str]) -> TokenTrie {
        let vocab = CategoryVocabulary::new(
            names
                .iter()
                .map(|n| Category {
                    id: n.replace(|c: char| !c.is_alphanumeric(), "_"),
                    name: n.to_string(),
                })
                .collect(),
        )
        .unwrap();
        TokenTrie::build(&vocab, &DefaultTokenizer).unwrap()
    }

    fn sp(s: usize, e: usize, c: &str) -> LabeledSpan {
        LabeledSpan::new(s, e, c)
    }

    #[test]
    fn trie_membership() {
        let t = trie(&["X"]);
        assert_eq!(t.accepts(&tokenize(" [(X)]")), Some("X"));
        assert_eq!(t.accepts(&tokenize(" [(Y)]")), None);
        assert_eq!(t.accepts(&tokenize(" [(X)")), None);
        let t = trie(&["Peace", "Peace: Positive"]);
        assert_eq!(t.accepts(&tokenize(" [(Peace)]")), Some("Peace"));
        assert_eq!(t.accepts(&tokenize(" [(Peace: Positive)]")), Some("Peace__Positive"));
        // "[", "(", "Peace" are shared
        assert_eq!(t.n_nodes(), 1 + 3 + 2 + 4);
        assert_eq!(t.accepts(&["hello"]), None);
    }

    #[test]
    fn trie_rejects_duplicates() {
        let vocab = CategoryVocabulary::new(vec![
            Category { id: "1".into(), name: "Same".into() },
            Category { id: "2".into(), name: "Same".into() },
        ])
        .unwrap();
        assert!(TokenTrie::build(&vocab, &DefaultTokenizer).is_err());
        // different names, identical tokenization
        let vocab = CategoryVocabulary::new(vec![
            Category { id: "1".into(), name: "a b".into() },
            Category { id: "2".into(), name: "a  b".into() },
        ])
        .unwrap();
        assert!(TokenTrie::build(&vocab, &DefaultTokenizer).is_err());
    }

    #[test]
    fn continuation_sets() {
        let t = trie(&["X"]);
        let input = ["a", "b"];
        let s0 = DecodeState::new();
        let steps = legal_continuations(&s0, &t, &input);
        assert_eq!(steps.len(), 1);
        assert_eq!(steps[0].next, Next::Token("a"));
        let s1 = s0.advance(&steps[0], &t);
        let steps = legal_continuations(&s1, &t, &input);
        assert_eq!(
            steps.iter().map(|s| s.next).collect::<Vec<_>>(),
            [Next::Token("b"), Next::Token("[")]
        );
        let s2 = s1.advance(&steps[1], &t);
        assert!(s2.in_tag());
        let steps = legal_continuations(&s2, &t, &input);
        assert_eq!(steps.iter().map(|s| s.next).collect::<Vec<_>>(), [Next::Token("(")]);
        let mut s = s1.advance(&legal_continuations(&s1, &t, &input)[0], &t);
        for tok in tokenize(" [(X)]") {
            let steps = legal_continuations(&s, &t, &input);
            let step = steps.iter().find(|st| st.next == Next::Token(&tok)).unwrap();
            s = s.advance(step, &t);
        }
        let steps = legal_continuations(&s, &t, &input);
        assert_eq!(steps.len(), 1);
        assert_eq!(steps[0].kind, StepKind::End);
    }

    #[test]
    fn parse_examples() {
        let t = trie(&["X", "Y"]);
        assert_eq!(
            parse_tagged_output(&tokenize("a [(X)]"), &t, &["a"]).unwrap(),
            [sp(0, 1, "X")]
        );
        assert_eq!(
            parse_tagged_output(&tokenize("a b [(X)] c [(Y)]"), &t, &["a", "b", "c"]).unwrap(),
            [sp(0, 2, "X"), sp(2, 3, "Y")]
        );
        match parse_tagged_output(&tokenize("a x [(X)]"), &t, &["a", "b"]) {
            Err(Error::Malformed { position: 1, .. }) => {}
            other => panic!("unexpected {other:?}"),
        }
        match parse_tagged_output(&tokenize("a b"), &t, &["a", "b"]) {
            Err(Error::Malformed { position: 2, .. }) => {}
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn input_tokens_that_look_like_tags() {
        let t = trie(&["X"]);
        let input = tokenize("a [ ( X ) ] b");
        let spans = vec![sp(0, 6, "X"), sp(6, 7, "X")];
        let emitted = render(&spans, &input, &t).unwrap();
        assert_eq!(parse_tagged_output(&emitted, &t, &input).unwrap(), spans);
    }

    #[test]
    fn single_token_single_category() {
        let t = trie(&["X"]);
        let d = constrained_beam_search(&UniformScorer, &["a"], &t, 3).unwrap();
        assert_eq!(d.spans, [sp(0, 1, "X")]);
        assert_eq!(d.emitted, tokenize("a [(X)]"));
    }

    #[test]
    fn uniform_ties_prefer_fewer_spans() {
        let t = trie(&["X"]);
        let input = ["a", "b"];
        let one = vec![sp(0, 2, "X")];
        let two = vec![sp(0, 1, "X"), sp(1, 2, "X")];
        for spans in [&one, &two] {
            let steps = render_steps(spans, &input, &t).unwrap();
            assert_eq!(score_steps(&UniformScorer, &steps, &t, &input).unwrap(), 0.0);
        }
        let d = constrained_beam_search(&UniformScorer, &input, &t, 3).unwrap();
        assert_eq!(d.spans, one);
    }

    #[test]
    fn rejects_bad_arguments() {
        let t = trie(&["X"]);
        assert!(matches!(
            constrained_beam_search(&UniformScorer, &["a"], &t, 0),
            Err(Error::InvalidInput(_))
        ));
        let empty: [&str; 0] = [];
        assert!(constrained_beam_search(&UniformScorer, &empty, &t, 3).is_err());
    }

    #[test]
    fn ngram_scorer_learns_rendered_gold() {
        let t = trie(&["X", "Y"]);
        let input = ["a", "b", "c"];
        let gold = vec![sp(0, 1, "X"), sp(1, 3, "Y")];
        let seq = render(&gold, &input, &t).unwrap();
        let scorer = NgramScorer::train(4, 0.01, &[seq]).unwrap();
        let d = constrained_beam_search(&scorer, &input, &t, 3).unwrap();
        assert_eq!(d.spans, gold);
        assert!(NgramScorer::train::<&str>(0, 1.0, &[]).is_err());
        assert!(NgramScorer::train::<&str>(2, 0.0, &[]).is_err());
    }
}
