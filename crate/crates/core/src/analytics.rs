//! Downstream analytics over predicted statements: the right-left scale,
//! two-labeller agreement filtering, salience vectors, and a non-negative
//! factorization used to place units on a low-dimensional map.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use ndarray::{Array1, Array2, ArrayView1, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tagset::{CategoryVocabulary, LabeledSpan};

const DEFAULT_GROUPS: &str = include_str!("../data/rile_groups.txt");

/// Right- and left-leaning category ids. Everything else counts as other.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RileGroups {
    right: BTreeSet<String>,
    left: BTreeSet<String>,
}

impl RileGroups {
    pub fn new<I, J, S, T>(right: I, left: J) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        J: IntoIterator<Item = T>,
        S: Into<String>,
        T: Into<String>,
    {
        let right: BTreeSet<String> = right.into_iter().map(Into::into).collect();
        let left: BTreeSet<String> = left.into_iter().map(Into::into).collect();
        if let Some(both) = right.intersection(&left).next() {
            return Err(Error::invalid(format!(
                "category `{both}` is in both the right and the left group"
            )));
        }
        Ok(Self { right, left })
    }

    /// Parses `[right]` / `[left]` sections with one id per line. `#` starts
    /// a comment.
    pub fn parse(text: &str) -> Result<Self> {
        let mut right = Vec::new();
        let mut left = Vec::new();
        let mut section: Option<&mut Vec<String>> = None;
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            match line {
                "[right]" => section = Some(&mut right),
                "[left]" => section = Some(&mut left),
                _ if line.starts_with('[') => {
                    return Err(Error::Parse {
                        line: i + 1,
                        message: format!("unknown section `{line}`"),
                    })
                }
                _ => {
                    if line.split_whitespace().count() != 1 {
                        return Err(Error::Parse {
                            line: i + 1,
                            message: "expected a single category id".into(),
                        });
                    }
                    match section.as_mut() {
                        Some(ids) => ids.push(line.to_string()),
                        None => {
                            return Err(Error::Parse {
                                line: i + 1,
                                message: "category id outside a section".into(),
                            })
                        }
                    }
                }
            }
        }
        Self::new(right, left)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text).map_err(|e| e.in_file(path))
    }

    pub fn right(&self) -> &BTreeSet<String> {
        &self.right
    }

    pub fn left(&self) -> &BTreeSet<String> {
        &self.left
    }

    /// Group ids that the vocabulary does not contain.
    pub fn missing_from<'a>(&'a self, vocab: &CategoryVocabulary) -> Vec<&'a str> {
        self.right
            .iter()
            .chain(&self.left)
            .filter(|id| !vocab.contains(id))
            .map(String::as_str)
            .collect()
    }
}

impl Default for RileGroups {
    fn default() -> Self {
        Self::parse(DEFAULT_GROUPS).expect("bundled groups parse")
    }
}

/// Statement counts per category for one unit.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CountVector(BTreeMap<String, u64>);

impl CountVector {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_spans<'a>(spans: impl IntoIterator<Item = &'a LabeledSpan>) -> Self {
        let mut counts = Self::new();
        for s in spans {
            counts.add(&s.category, 1);
        }
        counts
    }

    pub fn add(&mut self, category: &str, n: u64) {
        *self.0.entry(category.to_string()).or_insert(0) += n;
    }

    pub fn get(&self, category: &str) -> u64 {
        self.0.get(category).copied().unwrap_or(0)
    }

    pub fn total(&self) -> u64 {
        self.0.values().sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, u64)> {
        self.0.iter().map(|(k, &v)| (k.as_str(), v))
    }

    pub fn merge(&mut self, other: &CountVector) {
        for (c, n) in other.iter() {
            self.add(c, n);
        }
    }
}

impl<S: Into<String>> FromIterator<(S, u64)> for CountVector {
    fn from_iter<I: IntoIterator<Item = (S, u64)>>(iter: I) -> Self {
        let mut counts = Self::new();
        for (c, n) in iter {
            counts.add(&c.into(), n);
        }
        counts
    }
}

/// `(R - L) / N`, where N counts every statement of the unit.
pub fn rile(counts: &CountVector, groups: &RileGroups) -> Result<f64> {
    let n = counts.total();
    if n == 0 {
        return Err(Error::UndefinedScore("right-left score of a unit with no statements".into()));
    }
    let mut r = 0u64;
    let mut l = 0u64;
    for (c, k) in counts.iter() {
        if groups.right.contains(c) {
            r += k;
        } else if groups.left.contains(c) {
            l += k;
        }
    }
    Ok((r as f64 - l as f64) / n as f64)
}

/// [`rile`] after dropping the `excluded` categories from the counts.
pub fn rile_excluding(
    counts: &CountVector,
    groups: &RileGroups,
    excluded: &BTreeSet<String>,
) -> Result<f64> {
    let kept: CountVector = counts
        .iter()
        .filter(|(c, _)| !excluded.contains(*c))
        .map(|(c, n)| (c.to_string(), n))
        .collect();
    rile(&kept, groups)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Agreement {
    pub spans: Vec<LabeledSpan>,
    pub rate: f64,
}

/// Keeps the spans on which a second labeller, run over the same
/// boundaries, assigned the same category.
pub fn ensemble_agreement<S: AsRef<str>>(spans: &[LabeledSpan], labels_b: &[S]) -> Result<Agreement> {
    if spans.len() != labels_b.len() {
        return Err(Error::invalid(format!(
            "{} spans but {} second-labeller categories",
            spans.len(),
            labels_b.len()
        )));
    }
    if spans.is_empty() {
        return Err(Error::UndefinedMetric("agreement rate over zero spans".into()));
    }
    let agreed: Vec<LabeledSpan> = spans
        .iter()
        .zip(labels_b)
        .filter(|(s, b)| s.category == b.as_ref())
        .map(|(s, _)| s.clone())
        .collect();
    let rate = agreed.len() as f64 / spans.len() as f64;
    Ok(Agreement { spans: agreed, rate })
}

/// Row-normalized salience vectors. Rows correspond to `kept` units, in
/// order; units with no statements in `categories` are skipped and reported
/// in `warnings`.
#[derive(Debug, Clone, PartialEq)]
pub struct Salience {
    pub matrix: Array2<f64>,
    pub kept: Vec<usize>,
    pub warnings: Vec<String>,
}

/// Salience of one unit over `categories`; `None` when it has no statements
/// there. Counts outside `categories` are ignored.
pub fn salience_row<S: AsRef<str>>(counts: &CountVector, categories: &[S]) -> Option<Array1<f64>> {
    let raw: Array1<f64> = categories.iter().map(|c| counts.get(c.as_ref()) as f64).collect();
    let n = raw.sum();
    (n > 0.0).then(|| raw / n)
}

pub fn salience_matrix<S: AsRef<str>>(units: &[CountVector], categories: &[S]) -> Result<Salience> {
    if categories.is_empty() {
        return Err(Error::invalid("salience needs at least one category"));
    }
    let mut rows = Vec::new();
    let mut kept = Vec::new();
    let mut warnings = Vec::new();
    for (i, unit) in units.iter().enumerate() {
        match salience_row(unit, categories) {
            Some(row) => {
                rows.extend(row);
                kept.push(i);
            }
            None => warnings.push(format!("unit {i} has no statements; excluded")),
        }
    }
    let matrix = Array2::from_shape_vec((kept.len(), categories.len()), rows).expect("row lengths agree");
    Ok(Salience { matrix, kept, warnings })
}

pub const PROJECTION_TOLERANCE: f64 = 1e-10;
pub const PROJECTION_MAX_ITERS: usize = 500;

// Active-set enumeration bound for the exact starting point of projections.
const EXACT_START_MAX_RANK: usize = 12;

/// Result of [`nmf_fit`]. `trace[0]` is the objective at initialization,
/// `trace[i]` the objective after iteration `i`, and the last entry the
/// objective after the final per-row refinement of `w`.
#[derive(Debug, Clone, PartialEq)]
pub struct NmfFit {
    pub w: Array2<f64>,
    pub h: Array2<f64>,
    pub trace: Vec<f64>,
    pub iterations: usize,
    pub seed: u64,
}

impl NmfFit {
    pub fn final_objective(&self) -> f64 {
        *self.trace.last().expect("trace is never empty")
    }
}

/// A fitted basis with the column categories it refers to.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NmfModel {
    pub categories: Vec<String>,
    pub h: Vec<Vec<f64>>,
    pub iterations: usize,
    pub seed: u64,
    pub final_objective: f64,
}

impl NmfModel {
    pub fn new(categories: Vec<String>, fit: &NmfFit) -> Result<Self> {
        if categories.len() != fit.h.ncols() {
            return Err(Error::Dimension {
                what: "basis columns".into(),
                expected: categories.len(),
                actual: fit.h.ncols(),
            });
        }
        Ok(Self {
            categories,
            h: fit.h.rows().into_iter().map(|r| r.to_vec()).collect(),
            iterations: fit.iterations,
            seed: fit.seed,
            final_objective: fit.final_objective(),
        })
    }

    pub fn basis(&self) -> Result<Array2<f64>> {
        let c = self.categories.len();
        let flat: Vec<f64> = self.h.iter().flatten().copied().collect();
        if self.h.iter().any(|r| r.len() != c) {
            return Err(Error::Dimension {
                what: "basis row".into(),
                expected: c,
                actual: self.h.iter().map(Vec::len).find(|&l| l != c).unwrap_or(0),
            });
        }
        Ok(Array2::from_shape_vec((self.h.len(), c), flat).expect("checked shape"))
    }
}

pub fn objective(x: &Array2<f64>, w: &Array2<f64>, h: &Array2<f64>) -> f64 {
    let r = x - &w.dot(h);
    r.iter().map(|v| v * v).sum()
}

fn check_nonnegative(x: &Array2<f64>) -> Result<()> {
    for ((i, j), &v) in x.indexed_iter() {
        if !v.is_finite() {
            return Err(Error::NonFinite { row: i, col: j });
        }
        if v < 0.0 {
            return Err(Error::invalid(format!("negative entry {v} at ({i}, {j})")));
        }
    }
    Ok(())
}

// a <- a * num / den, entry-wise; entries with a zero denominator are kept.
fn multiplicative_step(a: &mut Array2<f64>, num: &Array2<f64>, den: &Array2<f64>) {
    ndarray::Zip::from(a).and(num).and(den).for_each(|a, &n, &d| {
        if d > 0.0 {
            *a *= n / d;
        }
    });
}

/// Squared-Frobenius NMF by multiplicative updates, `x ≈ w h`.
pub fn nmf_fit(x: &Array2<f64>, k: usize, iters: usize, seed: u64) -> Result<NmfFit> {
    if k == 0 {
        return Err(Error::invalid("factorization rank must be at least 1"));
    }
    if iters == 0 {
        return Err(Error::invalid("iteration count must be at least 1"));
    }
    if x.is_empty() {
        return Err(Error::invalid("cannot factorize an empty matrix"));
    }
    check_nonnegative(x)?;
    let (u, c) = x.dim();
    let scale = (x.mean().unwrap_or(0.0) / k as f64).sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw = |rows, cols| {
        Array2::from_shape_simple_fn((rows, cols), || {
            let z: f64 = StandardNormal.sample(&mut rng);
            z.abs() * scale
        })
    };
    let mut w = draw(u, k);
    let mut h = draw(k, c);
    let mut trace = Vec::with_capacity(iters + 2);
    trace.push(objective(x, &w, &h));
    for _ in 0..iters {
        let num = w.t().dot(x);
        let den = w.t().dot(&w).dot(&h);
        multiplicative_step(&mut h, &num, &den);
        let num = x.dot(&h.t());
        let den = w.dot(&h.dot(&h.t()));
        multiplicative_step(&mut w, &num, &den);
        trace.push(objective(x, &w, &h));
    }
    // Each row of w is replaced by its projection onto the final basis, so
    // that projecting a training row reproduces its fitted coordinates.
    if h.rows().into_iter().all(|r| r.iter().any(|&v| v > 0.0)) {
        for (i, xi) in x.rows().into_iter().enumerate() {
            let wi = project_row(&h, xi)?;
            let old: f64 = residual(xi, w.row(i), &h);
            if residual(xi, wi.view(), &h) <= old {
                w.row_mut(i).assign(&wi);
            }
        }
    }
    trace.push(objective(x, &w, &h));
    Ok(NmfFit {
        w,
        h,
        trace,
        iterations: iters,
        seed,
    })
}

fn residual(x: ArrayView1<f64>, w: ArrayView1<f64>, h: &Array2<f64>) -> f64 {
    let r = &x - &w.dot(h);
    r.iter().map(|v| v * v).sum()
}

/// Exact non-negative least squares by trying every support set. Only
/// feasible for small ranks.
fn nnls_exact(h: &Array2<f64>, x: ArrayView1<f64>) -> Array1<f64> {
    let k = h.nrows();
    let mut best = Array1::zeros(k);
    let mut best_res = residual(x, best.view(), h);
    for mask in 1u32..(1 << k) {
        let support: Vec<usize> = (0..k).filter(|&j| mask & (1 << j) != 0).collect();
        let s = support.len();
        let hs = h.select(Axis(0), &support);
        let gram = hs.dot(&hs.t());
        let rhs = hs.dot(&x);
        let g = DMatrix::from_fn(s, s, |a, b| gram[[a, b]]);
        let b = DVector::from_iterator(s, rhs.iter().copied());
        let Some(sol) = g.lu().solve(&b) else { continue };
        if sol.iter().any(|v| !v.is_finite() || *v < 0.0) {
            continue;
        }
        let mut cand = Array1::zeros(k);
        for (&j, &v) in support.iter().zip(sol.iter()) {
            cand[j] = v;
        }
        let res = residual(x, cand.view(), h);
        if res < best_res {
            best_res = res;
            best = cand;
        }
    }
    best
}

/// Non-negative coordinates of `x` in the basis `h`: the multiplicative
/// w-update with `h` frozen, iterated until the largest change falls below
/// [`PROJECTION_TOLERANCE`] or for [`PROJECTION_MAX_ITERS`] rounds.
pub fn project_row(h: &Array2<f64>, x: ArrayView1<f64>) -> Result<Array1<f64>> {
    let (k, c) = h.dim();
    if x.len() != c {
        return Err(Error::Dimension {
            what: "projected row".into(),
            expected: c,
            actual: x.len(),
        });
    }
    if let Some(r) = h.rows().into_iter().position(|r| r.iter().all(|&v| v == 0.0)) {
        return Err(Error::invalid(format!("degenerate basis: component {r} is all zeros")));
    }
    if x.iter().any(|v| !v.is_finite() || *v < 0.0) {
        return Err(Error::invalid("projected row must be finite and non-negative"));
    }
    let mut w = if k <= EXACT_START_MAX_RANK {
        nnls_exact(h, x)
    } else {
        let total_h: f64 = h.sum();
        Array1::from_elem(k, x.sum() / total_h.max(f64::MIN_POSITIVE))
    };
    let hht = h.dot(&h.t());
    let num = h.dot(&x);
    for _ in 0..PROJECTION_MAX_ITERS {
        let den = w.dot(&hht);
        let mut change: f64 = 0.0;
        for j in 0..k {
            if den[j] > 0.0 {
                let next = w[j] * num[j] / den[j];
                change = change.max((next - w[j]).abs());
                w[j] = next;
            }
        }
        if change <= PROJECTION_TOLERANCE {
            break;
        }
    }
    Ok(w)
}

/// Projects a unit's salience vector onto a fitted basis.
pub fn nmf_project(model: &NmfModel, counts: &CountVector) -> Result<Array1<f64>> {
    let h = model.basis()?;
    let x = salience_row(counts, &model.categories)
        .ok_or_else(|| Error::UndefinedScore("projection of a unit with no statements".into()))?;
    project_row(&h, x.view())
}
