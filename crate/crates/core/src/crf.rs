//! Exact inference for a first-order linear-chain CRF.
//!
//! Everything runs in log space. Constraints are expressed through a
//! [`TagMask`], which acts as a `-inf` overlay during inference and never
//! touches the stored parameters.

use std::collections::BTreeSet;

use ndarray::{Array1, Array2, ArrayView1};
use rand::Rng;

use crate::error::{Error, Result};
use crate::tagset::TagVocabulary;

/// Per-token, per-tag scores. Always at least one row, always finite.
#[derive(Debug, Clone, PartialEq)]
pub struct EmissionMatrix {
    scores: Array2<f64>,
}

impl EmissionMatrix {
    pub fn new(scores: Array2<f64>) -> Result<Self> {
        if scores.nrows() == 0 {
            return Err(Error::invalid("emission matrix has no rows"));
        }
        if scores.ncols() == 0 {
            return Err(Error::invalid("emission matrix has no columns"));
        }
        if let Some(((row, col), _)) = scores.indexed_iter().find(|(_, v)| !v.is_finite()) {
            return Err(Error::NonFinite { row, col });
        }
        Ok(Self { scores })
    }

    pub fn zeros(n_tokens: usize, n_tags: usize) -> Self {
        assert!(n_tokens > 0 && n_tags > 0);
        Self {
            scores: Array2::zeros((n_tokens, n_tags)),
        }
    }

    pub fn n_tokens(&self) -> usize {
        self.scores.nrows()
    }

    pub fn n_tags(&self) -> usize {
        self.scores.ncols()
    }

    pub fn scores(&self) -> &Array2<f64> {
        &self.scores
    }

    pub fn into_inner(self) -> Array2<f64> {
        self.scores
    }

    /// First `n` rows (or all of them if the matrix is shorter).
    pub fn truncated(&self, n: usize) -> Self {
        let n = n.clamp(1, self.n_tokens());
        Self {
            scores: self.scores.slice(ndarray::s![..n, ..]).to_owned(),
        }
    }
}

/// Tag-to-tag transition scores plus start and end scores.
#[derive(Debug, Clone, PartialEq)]
pub struct Transitions {
    pub scores: Array2<f64>,
    pub start: Array1<f64>,
    pub end: Array1<f64>,
}

impl Transitions {
    pub fn zeros(n_tags: usize) -> Self {
        Self {
            scores: Array2::zeros((n_tags, n_tags)),
            start: Array1::zeros(n_tags),
            end: Array1::zeros(n_tags),
        }
    }

    /// Uniform initialisation in `[-range, range]`.
    pub fn random<R: Rng>(n_tags: usize, range: f64, rng: &mut R) -> Self {
        let mut draw = || rng.random_range(-range..=range);
        let scores = Array2::from_shape_simple_fn((n_tags, n_tags), &mut draw);
        let start = Array1::from_shape_simple_fn(n_tags, &mut draw);
        let end = Array1::from_shape_simple_fn(n_tags, &mut draw);
        Self { scores, start, end }
    }

    pub fn n_tags(&self) -> usize {
        self.start.len()
    }

    pub fn validate(&self) -> Result<()> {
        let k = self.start.len();
        if self.end.len() != k {
            return Err(dim("end scores", k, self.end.len()));
        }
        if self.scores.dim() != (k, k) {
            return Err(dim("transition rows", k, self.scores.nrows()));
        }
        let all = self.scores.iter().chain(&self.start).chain(&self.end);
        if all.into_iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("transition scores must be finite"));
        }
        Ok(())
    }
}

/// Positions and transitions permitted during inference.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TagMask {
    tags: Array2<bool>,
    transitions: Array2<bool>,
}

impl TagMask {
    pub fn allow_all(n_tokens: usize, n_tags: usize) -> Self {
        Self {
            tags: Array2::from_elem((n_tokens, n_tags), true),
            transitions: Array2::from_elem((n_tags, n_tags), true),
        }
    }

    pub fn forbid_tag(&mut self, position: usize, tag: usize) {
        self.tags[[position, tag]] = false;
    }

    pub fn allow_tag(&mut self, position: usize, tag: usize) {
        self.tags[[position, tag]] = true;
    }

    pub fn forbid_transition(&mut self, from: usize, to: usize) {
        self.transitions[[from, to]] = false;
    }

    pub fn tag_allowed(&self, position: usize, tag: usize) -> bool {
        self.tags[[position, tag]]
    }

    pub fn transition_allowed(&self, from: usize, to: usize) -> bool {
        self.transitions[[from, to]]
    }

    pub fn n_tokens(&self) -> usize {
        self.tags.nrows()
    }

    /// Whether `path` respects every position and transition constraint.
    pub fn admits(&self, path: &[usize]) -> bool {
        path.len() == self.n_tokens()
            && path.iter().enumerate().all(|(t, &y)| self.tag_allowed(t, y))
            && path.windows(2).all(|w| self.transition_allowed(w[0], w[1]))
    }
}

/// Token positions where a statement must begin. Every other position must
/// continue the current statement.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BoundaryOracle {
    begins: BTreeSet<usize>,
}

impl BoundaryOracle {
    pub fn new(n_tokens: usize, begins: impl IntoIterator<Item = usize>) -> Result<Self> {
        let begins: BTreeSet<usize> = begins.into_iter().collect();
        if !begins.contains(&0) {
            return Err(Error::Infeasible("boundary oracle must contain position 0".into()));
        }
        if let Some(&last) = begins.iter().next_back() {
            if last >= n_tokens {
                return Err(Error::Infeasible(format!(
                    "boundary {last} outside document of {n_tokens} tokens"
                )));
            }
        }
        Ok(Self { begins })
    }

    /// Oracle taken from the starts of a span list.
    pub fn from_spans(n_tokens: usize, spans: &[crate::tagset::LabeledSpan]) -> Result<Self> {
        Self::new(n_tokens, spans.iter().map(|s| s.start))
    }

    pub fn contains(&self, position: usize) -> bool {
        self.begins.contains(&position)
    }

    pub fn positions(&self) -> impl Iterator<Item = usize> + '_ {
        self.begins.iter().copied()
    }
}

/// Gradients of the NLL with respect to every score.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub emissions: Array2<f64>,
    pub transitions: Array2<f64>,
    pub start: Array1<f64>,
    pub end: Array1<f64>,
}

fn dim(what: &str, expected: usize, actual: usize) -> Error {
    Error::Dimension {
        what: what.to_string(),
        expected,
        actual,
    }
}

fn check_shapes(em: &EmissionMatrix, tr: &Transitions, mask: Option<&TagMask>) -> Result<()> {
    let k = tr.n_tags();
    if em.n_tags() != k {
        return Err(dim("emission columns", k, em.n_tags()));
    }
    if tr.scores.dim() != (k, k) || tr.end.len() != k {
        return Err(dim("transition matrix", k, tr.scores.nrows()));
    }
    if let Some(mask) = mask {
        if mask.tags.dim() != (em.n_tokens(), k) {
            return Err(dim("mask positions", em.n_tokens(), mask.tags.nrows()));
        }
        if mask.transitions.dim() != (k, k) {
            return Err(dim("mask transitions", k, mask.transitions.nrows()));
        }
    }
    Ok(())
}

fn check_path(em: &EmissionMatrix, tags: &[usize]) -> Result<()> {
    if tags.len() != em.n_tokens() {
        return Err(dim("tag sequence length", em.n_tokens(), tags.len()));
    }
    if let Some(&bad) = tags.iter().find(|&&y| y >= em.n_tags()) {
        return Err(Error::invalid(format!("tag index {bad} out of range")));
    }
    Ok(())
}

pub(crate) fn log_sum_exp(values: impl IntoIterator<Item = f64> + Clone) -> f64 {
    let max = values.clone().into_iter().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    max + values.into_iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// Unnormalised log score of one tag path.
pub fn score_sequence(em: &EmissionMatrix, tr: &Transitions, tags: &[usize]) -> Result<f64> {
    check_shapes(em, tr, None)?;
    check_path(em, tags)?;
    let e = em.scores();
    let mut score = tr.start[tags[0]] + e[[0, tags[0]]];
    for t in 1..tags.len() {
        score = score + tr.scores[[tags[t - 1], tags[t]]] + e[[t, tags[t]]];
    }
    Ok(score + tr.end[tags[tags.len() - 1]])
}

struct Lattice<'a> {
    em: &'a Array2<f64>,
    tr: &'a Transitions,
    mask: Option<&'a TagMask>,
}

impl Lattice<'_> {
    fn emission(&self, t: usize, k: usize) -> f64 {
        match self.mask {
            Some(m) if !m.tag_allowed(t, k) => f64::NEG_INFINITY,
            _ => self.em[[t, k]],
        }
    }

    fn transition(&self, i: usize, j: usize) -> f64 {
        match self.mask {
            Some(m) if !m.transition_allowed(i, j) => f64::NEG_INFINITY,
            _ => self.tr.scores[[i, j]],
        }
    }

    fn forward(&self) -> Array2<f64> {
        let (n, k) = self.em.dim();
        let mut alpha = Array2::from_elem((n, k), f64::NEG_INFINITY);
        for j in 0..k {
            alpha[[0, j]] = self.tr.start[j] + self.emission(0, j);
        }
        for t in 1..n {
            for j in 0..k {
                let e = self.emission(t, j);
                if e == f64::NEG_INFINITY {
                    continue;
                }
                let prev = alpha.row(t - 1);
                alpha[[t, j]] =
                    log_sum_exp((0..k).map(|i| prev[i] + self.transition(i, j))) + e;
            }
        }
        alpha
    }

    fn backward(&self) -> Array2<f64> {
        let (n, k) = self.em.dim();
        let mut beta = Array2::from_elem((n, k), f64::NEG_INFINITY);
        for i in 0..k {
            beta[[n - 1, i]] = self.tr.end[i];
        }
        for t in (0..n - 1).rev() {
            for i in 0..k {
                let next = beta.row(t + 1);
                beta[[t, i]] = log_sum_exp(
                    (0..k).map(|j| self.transition(i, j) + self.emission(t + 1, j) + next[j]),
                );
            }
        }
        beta
    }
}

fn log_partition_from_alpha(alpha: &Array2<f64>, end: ArrayView1<f64>) -> f64 {
    let last = alpha.row(alpha.nrows() - 1);
    log_sum_exp(last.iter().zip(end).map(|(a, e)| a + e))
}

/// Log of the sum of exponentiated path scores over all (mask-legal) paths.
pub fn log_partition(em: &EmissionMatrix, tr: &Transitions, mask: Option<&TagMask>) -> Result<f64> {
    check_shapes(em, tr, mask)?;
    let lattice = Lattice {
        em: em.scores(),
        tr,
        mask,
    };
    let z = log_partition_from_alpha(&lattice.forward(), tr.end.view());
    if z == f64::NEG_INFINITY {
        return Err(Error::Infeasible("every tag path is masked out".into()));
    }
    Ok(z)
}

/// Negative log-likelihood of `gold` under the unconstrained model.
pub fn nll(em: &EmissionMatrix, tr: &Transitions, gold: &[usize]) -> Result<f64> {
    let score = score_sequence(em, tr, gold)?;
    Ok(log_partition(em, tr, None)? - score)
}

/// NLL together with its gradients (expected minus observed counts).
pub fn nll_gradients(
    em: &EmissionMatrix,
    tr: &Transitions,
    gold: &[usize],
) -> Result<(f64, Gradients)> {
    check_shapes(em, tr, None)?;
    check_path(em, gold)?;
    let e = em.scores();
    let (n, k) = e.dim();
    let lattice = Lattice { em: e, tr, mask: None };
    let alpha = lattice.forward();
    let beta = lattice.backward();
    let z = log_partition_from_alpha(&alpha, tr.end.view());
    let loss = z - score_sequence(em, tr, gold)?;

    let mut d_em = Array2::zeros((n, k));
    for t in 0..n {
        for j in 0..k {
            d_em[[t, j]] = (alpha[[t, j]] + beta[[t, j]] - z).exp();
        }
    }
    let mut d_start = d_em.row(0).to_owned();
    let mut d_end = d_em.row(n - 1).to_owned();
    let mut d_tr = Array2::zeros((k, k));
    for t in 0..n - 1 {
        for i in 0..k {
            let a = alpha[[t, i]];
            for j in 0..k {
                d_tr[[i, j]] +=
                    (a + tr.scores[[i, j]] + e[[t + 1, j]] + beta[[t + 1, j]] - z).exp();
            }
        }
    }

    for (t, &y) in gold.iter().enumerate() {
        d_em[[t, y]] -= 1.0;
    }
    for w in gold.windows(2) {
        d_tr[[w[0], w[1]]] -= 1.0;
    }
    d_start[gold[0]] -= 1.0;
    d_end[gold[n - 1]] -= 1.0;

    Ok((
        loss,
        Gradients {
            emissions: d_em,
            transitions: d_tr,
            start: d_start,
            end: d_end,
        },
    ))
}

/// Highest-scoring legal path and its score.
///
/// Among equally scoring paths the one with the lowest tag index at the
/// earliest differing position wins. The returned score is bit-identical to
/// [`score_sequence`] on the returned path.
pub fn viterbi(
    em: &EmissionMatrix,
    tr: &Transitions,
    mask: Option<&TagMask>,
) -> Result<(Vec<usize>, f64)> {
    check_shapes(em, tr, mask)?;
    let lattice = Lattice {
        em: em.scores(),
        tr,
        mask,
    };
    let (n, k) = em.scores().dim();

    // delta[t][j]: best score of a prefix ending in tag j at t, accumulated
    // in the same order as score_sequence.
    let mut delta = Array2::from_elem((n, k), f64::NEG_INFINITY);
    for j in 0..k {
        delta[[0, j]] = tr.start[j] + lattice.emission(0, j);
    }
    for t in 1..n {
        for j in 0..k {
            let e = lattice.emission(t, j);
            if e == f64::NEG_INFINITY {
                continue;
            }
            let best = (0..k)
                .map(|i| delta[[t - 1, i]] + lattice.transition(i, j))
                .fold(f64::NEG_INFINITY, f64::max);
            delta[[t, j]] = best + e;
        }
    }
    let best = (0..k)
        .map(|j| delta[[n - 1, j]] + tr.end[j])
        .fold(f64::NEG_INFINITY, f64::max);
    if best == f64::NEG_INFINITY {
        return Err(Error::Infeasible("no legal tag path".into()));
    }

    let tight = |t: usize, i: usize, j: usize| {
        let step = delta[[t - 1, i]] + lattice.transition(i, j);
        step != f64::NEG_INFINITY && step + lattice.emission(t, j) == delta[[t, j]]
    };

    // on_best[t][j]: (t, j) lies on some optimal path
    let mut on_best = Array2::from_elem((n, k), false);
    for j in 0..k {
        on_best[[n - 1, j]] =
            delta[[n - 1, j]] != f64::NEG_INFINITY && delta[[n - 1, j]] + tr.end[j] == best;
    }
    for t in (0..n - 1).rev() {
        for i in 0..k {
            on_best[[t, i]] = (0..k).any(|j| on_best[[t + 1, j]] && tight(t + 1, i, j));
        }
    }

    let mut path = Vec::with_capacity(n);
    path.push((0..k).find(|&j| on_best[[0, j]]).expect("optimal start"));
    for t in 1..n {
        let prev = path[t - 1];
        let next = (0..k)
            .find(|&j| on_best[[t, j]] && tight(t, prev, j))
            .expect("optimal continuation");
        path.push(next);
    }
    Ok((path, best))
}

/// Viterbi restricted so that statements begin exactly at the oracle
/// positions: `B` tags there, `I` tags everywhere else.
pub fn constrained_viterbi(
    em: &EmissionMatrix,
    tr: &Transitions,
    oracle: &BoundaryOracle,
    tagvocab: &TagVocabulary,
) -> Result<(Vec<usize>, f64)> {
    let n = em.n_tokens();
    if let Some(last) = oracle.positions().last() {
        if last >= n {
            return Err(Error::Infeasible(format!(
                "boundary {last} outside document of {n} tokens"
            )));
        }
    }
    if tagvocab.len() != tr.n_tags() {
        return Err(dim("tag vocabulary", tr.n_tags(), tagvocab.len()));
    }
    let mut mask = crate::tagset::legality_masks(tagvocab, n)?;
    for t in 0..n {
        let must_begin = oracle.contains(t);
        for tag in 1..tagvocab.len() {
            if tagvocab.is_begin(tag) != must_begin {
                mask.forbid_tag(t, tag);
            }
        }
    }
    viterbi(em, tr, Some(&mask))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tagset::{expand_bio, legality_masks, tags_to_spans, CategoryVocabulary};
    use ndarray::array;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_instance(rng: &mut ChaCha8Rng, n: usize, k: usize) -> (EmissionMatrix, Transitions) {
        let em = Array2::from_shape_simple_fn((n, k), || rng.random_range(-2.0..2.0));
        (EmissionMatrix::new(em).unwrap(), Transitions::random(k, 2.0, rng))
    }

    /// Every tag path of length `n` over `k` tags, in lexicographic order.
    fn all_paths(n: usize, k: usize) -> Vec<Vec<usize>> {
        let mut out = vec![vec![]];
        for _ in 0..n {
            out = out
                .into_iter()
                .flat_map(|p| {
                    (0..k).map(move |y| {
                        let mut q = p.clone();
                        q.push(y);
                        q
                    })
                })
                .collect();
        }
        out
    }

    #[test]
    fn zero_parameters_score_zero() {
        let em = EmissionMatrix::zeros(3, 4);
        let tr = Transitions::zeros(4);
        assert_eq!(score_sequence(&em, &tr, &[0, 3, 2]).unwrap(), 0.0);
    }

    #[test]
    fn single_token_read_off() {
        let em = EmissionMatrix::new(array![[1.0, 2.0]]).unwrap();
        let tr = Transitions::zeros(2);
        assert_eq!(score_sequence(&em, &tr, &[1]).unwrap(), 2.0);
    }

    #[test]
    fn hand_expanded_two_token_score() {
        let em = EmissionMatrix::new(array![[0.3, -1.2], [0.7, 0.25]]).unwrap();
        let tr = Transitions {
            scores: array![[0.1, -0.4], [0.9, 0.05]],
            start: array![0.5, -0.5],
            end: array![-0.25, 0.125],
        };
        // start[1] + em[0][1] + tr[1][0] + em[1][0] + end[0]
        let expected = -0.5 + -1.2 + 0.9 + 0.7 + -0.25;
        let got = score_sequence(&em, &tr, &[1, 0]).unwrap();
        assert!((got - expected).abs() < 1e-12);
        assert!(score_sequence(&em, &tr, &[1]).is_err());
    }

    #[test]
    fn uniform_partition() {
        let em = EmissionMatrix::zeros(4, 3);
        let z = log_partition(&em, &Transitions::zeros(3), None).unwrap();
        assert!((z - 4.0 * 3f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn partition_matches_enumeration_with_mask() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let tv = expand_bio(CategoryVocabulary::from_ids(["a"]).unwrap()).unwrap();
        let (em, tr) = random_instance(&mut rng, 3, 3);
        let mask = legality_masks(&tv, 3).unwrap();
        let scores: Vec<f64> = all_paths(3, 3)
            .into_iter()
            .filter(|p| mask.admits(p))
            .map(|p| score_sequence(&em, &tr, &p).unwrap())
            .collect();
        let brute = log_sum_exp(scores.iter().copied());
        let z = log_partition(&em, &tr, Some(&mask)).unwrap();
        assert!((z - brute).abs() < 1e-10);
    }

    #[test]
    fn fully_masked_is_infeasible() {
        let em = EmissionMatrix::zeros(2, 2);
        let mut mask = TagMask::allow_all(2, 2);
        mask.forbid_tag(1, 0);
        mask.forbid_tag(1, 1);
        let tr = Transitions::zeros(2);
        assert!(matches!(log_partition(&em, &tr, Some(&mask)), Err(Error::Infeasible(_))));
        assert!(matches!(viterbi(&em, &tr, Some(&mask)), Err(Error::Infeasible(_))));
    }

    #[test]
    fn nll_special_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let (em, tr) = random_instance(&mut rng, 4, 1);
        assert!(nll(&em, &tr, &[0, 0, 0, 0]).unwrap().abs() < 1e-12);
        let em = EmissionMatrix::zeros(2, 2);
        let v = nll(&em, &Transitions::zeros(2), &[0, 1]).unwrap();
        assert!((v - 2.0 * 2f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn nll_matches_path_probability() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let (em, tr) = random_instance(&mut rng, 3, 2);
        let gold = [1, 0, 1];
        let paths = all_paths(3, 2);
        let total: f64 = paths
            .iter()
            .map(|p| score_sequence(&em, &tr, p).unwrap().exp())
            .sum();
        let p_gold = score_sequence(&em, &tr, &gold).unwrap().exp() / total;
        assert!((nll(&em, &tr, &gold).unwrap() + p_gold.ln()).abs() < 1e-10);
    }

    #[test]
    fn uniform_gradient() {
        let em = EmissionMatrix::zeros(1, 2);
        let (_, g) = nll_gradients(&em, &Transitions::zeros(2), &[0]).unwrap();
        assert_eq!(g.emissions, array![[-0.5, 0.5]]);
    }

    #[test]
    fn gradient_rows_sum_to_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let (em, tr) = random_instance(&mut rng, 5, 4);
        let (_, g) = nll_gradients(&em, &tr, &[0, 3, 1, 1, 2]).unwrap();
        for row in g.emissions.rows() {
            assert!(row.sum().abs() < 1e-12);
        }
        assert!(g.transitions.sum().abs() < 1e-12);
        assert!(g.start.sum().abs() < 1e-12);
        assert!(g.end.sum().abs() < 1e-12);
    }

    #[test]
    fn decoupled_viterbi_is_pointwise_argmax() {
        let em = EmissionMatrix::new(array![[0.0, 5.0, 1.0], [3.0, 0.0, 1.0], [0.0, 1.0, 2.0]])
            .unwrap();
        let (path, score) = viterbi(&em, &Transitions::zeros(3), None).unwrap();
        assert_eq!(path, [1, 0, 2]);
        assert_eq!(score, 10.0);
    }

    #[test]
    fn viterbi_tie_breaks_to_lowest_earliest() {
        // Paths [0,1] and [1,0] both score 1; [0,1] is lexicographically first.
        let em = EmissionMatrix::new(array![[0.0, 0.0], [0.0, 0.0]]).unwrap();
        let mut tr = Transitions::zeros(2);
        tr.scores = array![[0.0, 1.0], [1.0, 0.0]];
        let (path, score) = viterbi(&em, &tr, None).unwrap();
        assert_eq!(path, [0, 1]);
        assert_eq!(score, 1.0);

        let em = EmissionMatrix::zeros(3, 3);
        let (path, _) = viterbi(&em, &Transitions::zeros(3), None).unwrap();
        assert_eq!(path, [0, 0, 0]);
    }

    #[test]
    fn viterbi_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..50 {
            let n = rng.random_range(1..=5);
            let k = rng.random_range(1..=3);
            let (em, tr) = random_instance(&mut rng, n, k);
            let brute = all_paths(n, k)
                .iter()
                .map(|p| score_sequence(&em, &tr, p).unwrap())
                .fold(f64::NEG_INFINITY, f64::max);
            let (path, score) = viterbi(&em, &tr, None).unwrap();
            assert_eq!(score, brute);
            assert_eq!(score_sequence(&em, &tr, &path).unwrap(), score);
        }
    }

    #[test]
    fn masked_viterbi_yields_total_cover() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let tv = expand_bio(CategoryVocabulary::from_ids(["a", "b"]).unwrap()).unwrap();
        for _ in 0..20 {
            let (em, tr) = random_instance(&mut rng, 6, tv.len());
            let mask = legality_masks(&tv, 6).unwrap();
            let (path, _) = viterbi(&em, &tr, Some(&mask)).unwrap();
            assert!(mask.admits(&path));
            let spans = tags_to_spans(&tv, &path);
            let back = crate::tagset::spans_to_tags(&tv, 6, &spans).unwrap();
            assert_eq!(back, path);
        }
    }

    #[test]
    fn oracle_single_segment() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let tv = expand_bio(CategoryVocabulary::from_ids(["a", "b", "c"]).unwrap()).unwrap();
        let (em, tr) = random_instance(&mut rng, 3, tv.len());
        let oracle = BoundaryOracle::new(3, [0]).unwrap();
        let (path, score) = constrained_viterbi(&em, &tr, &oracle, &tv).unwrap();
        let spans = tags_to_spans(&tv, &path);
        assert_eq!(spans.len(), 1);
        let best = (0..3)
            .map(|c| {
                let p = [tv.begin(c), tv.inside(c), tv.inside(c)];
                score_sequence(&em, &tr, &p).unwrap()
            })
            .fold(f64::NEG_INFINITY, f64::max);
        assert_eq!(score, best);
    }

    #[test]
    fn oracle_every_position_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        for n in 1..=4 {
            for c in 1..=3 {
                let ids: Vec<String> = (0..c).map(|i| format!("c{i}")).collect();
                let tv = expand_bio(CategoryVocabulary::from_ids(ids).unwrap()).unwrap();
                let (em, tr) = random_instance(&mut rng, n, tv.len());
                let oracle = BoundaryOracle::new(n, 0..n).unwrap();
                let (path, score) = constrained_viterbi(&em, &tr, &oracle, &tv).unwrap();
                let brute = all_paths(n, c)
                    .iter()
                    .map(|cats| {
                        let p: Vec<usize> = cats.iter().map(|&x| tv.begin(x)).collect();
                        score_sequence(&em, &tr, &p).unwrap()
                    })
                    .fold(f64::NEG_INFINITY, f64::max);
                assert_eq!(score, brute);
                assert!(path.iter().all(|&y| tv.is_begin(y)));
            }
        }
    }

    #[test]
    fn oracle_requires_position_zero() {
        assert!(BoundaryOracle::new(3, [1]).is_err());
        assert!(BoundaryOracle::new(3, [0, 3]).is_err());
    }

    #[test]
    fn shape_errors() {
        let em = EmissionMatrix::zeros(2, 3);
        assert!(matches!(
            log_partition(&em, &Transitions::zeros(2), None),
            Err(Error::Dimension { .. })
        ));
        assert!(EmissionMatrix::new(Array2::zeros((0, 3))).is_err());
        assert!(matches!(
            EmissionMatrix::new(array![[0.0, f64::NAN]]),
            Err(Error::NonFinite { row: 0, col: 1 })
        ));
    }
}
