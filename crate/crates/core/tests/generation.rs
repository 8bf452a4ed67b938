use std::collections::HashSet;

use polseg::generation::{
    constrained_beam_search, greedy_decode, legal_continuations, parse_tagged_output, render,
    render_steps, score_steps, DecodeState, Next, NgramScorer, Scorer, TokenBiasScorer, TokenTrie,
    UniformScorer,
};
use polseg::tagset::{CategoryVocabulary, LabeledSpan};
use polseg::tokenize::DefaultTokenizer;
use proptest::prelude::*;

fn trie(n_categories: usize) -> TokenTrie {
    let ids = ["X", "Y", "Z"][..n_categories].to_vec();
    TokenTrie::build(&CategoryVocabulary::from_ids(ids).unwrap(), &DefaultTokenizer).unwrap()
}

/// Every total cover of `n` tokens with every category assignment.
fn segmentations(n: usize, categories: &[String]) -> Vec<Vec<LabeledSpan>> {
    let mut out = Vec::new();
    for cuts in 0..1u32 << (n - 1) {
        let mut bounds = vec![0];
        bounds.extend((1..n).filter(|i| cuts & (1 << (i - 1)) != 0));
        bounds.push(n);
        let pieces = bounds.len() - 1;
        for mut code in 0..categories.len().pow(pieces as u32) {
            let mut spans = Vec::with_capacity(pieces);
            for w in bounds.windows(2) {
                spans.push(LabeledSpan::new(w[0], w[1], categories[code % categories.len()].clone()));
                code /= categories.len();
            }
            out.push(spans);
        }
    }
    out
}

fn inputs(n: usize) -> Vec<Vec<&'static str>> {
    // includes repeated tokens and tokens that collide with tag pieces
    let alphabet = ["a", "b", "(", "X"];
    let mut out = Vec::new();
    for code in 0..alphabet.len().pow(n as u32) {
        let mut c = code;
        out.push(
            (0..n)
                .map(|_| {
                    let t = alphabet[c % alphabet.len()];
                    c /= alphabet.len();
                    t
                })
                .collect(),
        );
    }
    out
}

#[test]
fn every_segmentation_round_trips_through_its_unique_emission() {
    for k in 1..=3 {
        let t = trie(k);
        for n in 1..=3 {
            for input in inputs(n) {
                let segs = segmentations(n, t.categories());
                let mut seen = HashSet::new();
                for s in &segs {
                    let emitted = render(s, &input, &t).unwrap();
                    assert_eq!(&parse_tagged_output(&emitted, &t, &input).unwrap(), s);
                    let steps = render_steps(s, &input, &t).unwrap();
                    score_steps(&UniformScorer, &steps, &t, &input).unwrap();
                    assert!(seen.insert(steps), "two segmentations share a step sequence");
                }
            }
        }
    }
}

#[test]
fn exhaustive_width_finds_the_enumerated_argmax() {
    let t = trie(2);
    let input = ["a", "b", "a"];
    let scorer = TokenBiasScorer::new()
        .with_bias("[", 1.5)
        .with_bias("(", -2.0)
        .with_bias("Y", 0.25)
        .with_end(-0.5);
    let best = segmentations(3, t.categories())
        .iter()
        .map(|s| score_steps(&scorer, &render_steps(s, &input, &t).unwrap(), &t, &input).unwrap())
        .fold(f64::NEG_INFINITY, f64::max);
    let d = constrained_beam_search(&scorer, &input, &t, 10_000).unwrap();
    assert_eq!(d.score, best);
}

#[test]
fn strong_tag_bias_puts_every_token_in_its_own_statement() {
    let scorer = TokenBiasScorer::new().with_bias("[", 10.0);
    for k in 1..=3 {
        let t = trie(k);
        for n in 1..=4 {
            let input = vec!["w"; n];
            let segs = segmentations(n, t.categories());
            let scores: Vec<f64> = segs
                .iter()
                .map(|s| score_steps(&scorer, &render_steps(s, &input, &t).unwrap(), &t, &input).unwrap())
                .collect();
            let best = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let d = constrained_beam_search(&scorer, &input, &t, 3).unwrap();
            assert_eq!(d.score, best);
            let singles: Vec<LabeledSpan> = (0..n).map(|i| LabeledSpan::new(i, i + 1, "X")).collect();
            assert_eq!(d.spans, singles);
        }
    }
}

#[test]
fn uniform_ties_resolve_to_one_statement_of_the_first_category() {
    for k in 1..=3 {
        let d = constrained_beam_search(&UniformScorer, &["a", "b"], &trie(k), 3).unwrap();
        assert_eq!(d.spans, [LabeledSpan::new(0, 2, "X")]);
    }
}

struct Recording<'s, S> {
    inner: &'s S,
    trie: &'s TokenTrie,
    input: &'s [&'s str],
    violations: std::sync::Mutex<usize>,
}

impl<S: Scorer> Scorer for Recording<'_, S> {
    fn score(&self, history: &[&str], candidates: &[Next<'_>]) -> polseg::Result<Vec<f64>> {
        // the history must parse as a legal prefix, and the candidates must
        // be exactly what the grammar allows after it
        let mut states = vec![DecodeState::new()];
        for tok in history {
            states = states
                .iter()
                .flat_map(|s| {
                    legal_continuations(s, self.trie, self.input)
                        .into_iter()
                        .filter(|st| st.next == Next::Token(tok))
                        .map(|st| s.advance(&st, self.trie))
                        .collect::<Vec<_>>()
                })
                .collect();
        }
        let ok = states.iter().any(|s| {
            let legal: Vec<Next<'_>> = legal_continuations(s, self.trie, self.input).iter().map(|st| st.next).collect();
            legal == candidates
        });
        if !ok {
            *self.violations.lock().unwrap() += 1;
        }
        self.inner.score(history, candidates)
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn beam_hypotheses_stay_legal(
        words in prop::collection::vec(prop::sample::select(vec!["a", "b", "[", "c"]), 1..6),
        biases in prop::collection::vec(-3.0f64..3.0, 6),
        k in 1usize..=3,
        width in 1usize..5,
    ) {
        let t = trie(k);
        let scorer = TokenBiasScorer::new()
            .with_bias("a", biases[0])
            .with_bias("[", biases[1])
            .with_bias("(", biases[2])
            .with_bias("Y", biases[3])
            .with_bias("]", biases[4])
            .with_end(biases[5]);
        let rec = Recording { inner: &scorer, trie: &t, input: &words, violations: Default::default() };
        let d = constrained_beam_search(&rec, &words, &t, width).unwrap();
        prop_assert_eq!(*rec.violations.lock().unwrap(), 0);
        polseg::tagset::check_cover(words.len(), &d.spans).unwrap();
        prop_assert_eq!(&render(&d.spans, &words, &t).unwrap(), &d.emitted);
        let steps = render_steps(&d.spans, &words, &t).unwrap();
        prop_assert_eq!(score_steps(&scorer, &steps, &t, &words).unwrap(), d.score);
    }

    #[test]
    fn width_one_is_greedy(
        words in prop::collection::vec(prop::sample::select(vec!["a", "b", "c"]), 1..6),
        seed_docs in prop::collection::vec((1usize..4, 0usize..3), 1..4),
        k in 1usize..=3,
    ) {
        let t = trie(k);
        let mut sequences = Vec::new();
        for (len, cat) in seed_docs {
            let toks = vec!["a"; len];
            let spans = vec![LabeledSpan::new(0, len, t.categories()[cat % k].clone())];
            sequences.push(render(&spans, &toks, &t).unwrap());
        }
        let scorer = NgramScorer::train(2, 0.5, &sequences).unwrap();
        prop_assert_eq!(
            constrained_beam_search(&scorer, &words, &t, 1).unwrap(),
            greedy_decode(&scorer, &words, &t).unwrap()
        );
    }
}
