//! Exact-match span evaluation and rank correlation.
//!
//! A predicted span counts only if its start, end, and category all agree
//! with a gold span. Scores are reported three ways: pooled over the corpus
//! (micro), averaged over documents, and per category weighted by gold
//! support.

use std::collections::{BTreeMap, HashMap};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::tagset::LabeledSpan;

/// Index pairs `(gold, pred)` of exactly matching spans.
pub fn match_spans(gold: &[LabeledSpan], pred: &[LabeledSpan]) -> Vec<(usize, usize)> {
    let mut unused: HashMap<&LabeledSpan, Vec<usize>> = HashMap::new();
    for (i, g) in gold.iter().enumerate().rev() {
        unused.entry(g).or_default().push(i);
    }
    let mut pairs = Vec::new();
    for (j, p) in pred.iter().enumerate() {
        if let Some(i) = unused.get_mut(p).and_then(Vec::pop) {
            pairs.push((i, j));
        }
    }
    pairs.sort_unstable();
    pairs
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct Counts {
    pub gold: usize,
    pub predicted: usize,
    pub matched: usize,
}

impl Counts {
    fn add(&mut self, other: Counts) {
        self.gold += other.gold;
        self.predicted += other.predicted;
        self.matched += other.matched;
    }

    pub fn scores(&self) -> Prf {
        let precision = ratio(self.matched, self.predicted);
        let recall = ratio(self.matched, self.gold);
        Prf::new(precision, recall)
    }
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl Prf {
    pub fn new(precision: f64, recall: f64) -> Self {
        Self {
            precision,
            recall,
            f1: f1(precision, recall),
        }
    }
}

pub fn f1(precision: f64, recall: f64) -> f64 {
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Averaging {
    Micro,
    MacroByDocument,
    SupportWeighted,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub documents: usize,
    pub per_category: BTreeMap<String, Counts>,
    pub totals: Counts,
    pub micro: Prf,
    pub macro_by_document: Prf,
    pub support_weighted: Prf,
}

impl EvalReport {
    pub fn get(&self, mode: Averaging) -> Prf {
        match mode {
            Averaging::Micro => self.micro,
            Averaging::MacroByDocument => self.macro_by_document,
            Averaging::SupportWeighted => self.support_weighted,
        }
    }
}

/// Scores aligned gold and predicted documents in every averaging mode.
///
/// Macro-by-document averages each document's micro scores; documents with
/// neither gold nor predicted spans are skipped. Support-weighted averages
/// per-category scores with weights proportional to gold support, so
/// categories never predicted still weigh in with zero.
pub fn prf(gold: &[Vec<LabeledSpan>], pred: &[Vec<LabeledSpan>]) -> Result<EvalReport> {
    if gold.len() != pred.len() {
        return Err(Error::invalid(format!(
            "{} gold documents but {} predicted",
            gold.len(),
            pred.len()
        )));
    }
    let mut per_category: BTreeMap<String, Counts> = BTreeMap::new();
    let mut totals = Counts::default();
    let mut doc_scores = Vec::new();

    for (g, p) in gold.iter().zip(pred) {
        let pairs = match_spans(g, p);
        for s in g {
            per_category.entry(s.category.clone()).or_default().gold += 1;
        }
        for s in p {
            per_category.entry(s.category.clone()).or_default().predicted += 1;
        }
        for &(i, _) in &pairs {
            per_category.get_mut(&g[i].category).unwrap().matched += 1;
        }
        let doc = Counts {
            gold: g.len(),
            predicted: p.len(),
            matched: pairs.len(),
        };
        totals.add(doc);
        if doc.gold + doc.predicted > 0 {
            doc_scores.push(doc.scores());
        }
    }
    if totals.gold == 0 {
        return Err(Error::UndefinedMetric("gold corpus contains no spans".into()));
    }

    let n = doc_scores.len() as f64;
    let macro_by_document = Prf {
        precision: doc_scores.iter().map(|s| s.precision).sum::<f64>() / n,
        recall: doc_scores.iter().map(|s| s.recall).sum::<f64>() / n,
        f1: doc_scores.iter().map(|s| s.f1).sum::<f64>() / n,
    };

    let support = totals.gold as f64;
    let mut weighted = Prf {
        precision: 0.0,
        recall: 0.0,
        f1: 0.0,
    };
    for counts in per_category.values().filter(|c| c.gold > 0) {
        let w = counts.gold as f64;
        let s = counts.scores();
        weighted.precision += w * s.precision;
        weighted.recall += w * s.recall;
        weighted.f1 += w * s.f1;
    }
    weighted.precision /= support;
    weighted.recall /= support;
    weighted.f1 /= support;

    Ok(EvalReport {
        documents: gold.len(),
        per_category,
        totals,
        micro: totals.scores(),
        macro_by_document,
        support_weighted: weighted,
    })
}

/// Fractional ranks (1-based), ties sharing the mean of their positions.
pub fn fractional_ranks(xs: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..xs.len()).collect();
    order.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut ranks = vec![0.0; xs.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && xs[order[j + 1]] == xs[order[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &idx in &order[i..=j] {
            ranks[idx] = rank;
        }
        i = j + 1;
    }
    ranks
}

fn pearson(xs: &[f64], ys: &[f64]) -> Option<f64> {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Spearman rank correlation: Pearson correlation of fractional ranks.
pub fn spearman(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() {
        return Err(Error::invalid(format!(
            "spearman needs equal lengths, got {} and {}",
            xs.len(),
            ys.len()
        )));
    }
    if xs.len() < 2 {
        return Err(Error::invalid("spearman needs at least two observations"));
    }
    if xs.iter().chain(ys).any(|v| v.is_nan()) {
        return Err(Error::invalid("spearman input contains NaN"));
    }
    pearson(&fractional_ranks(xs), &fractional_ranks(ys))
        .ok_or_else(|| Error::UndefinedMetric("spearman of a constant sequence".into()))
}
