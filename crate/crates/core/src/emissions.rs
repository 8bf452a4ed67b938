//! Sources of emission scores.
//!
//! Three producers feed the CRF: a hashed-feature linear model that can be
//! trained here, score files written by an external encoder, and the
//! overlapping-window stitcher that turns per-window score matrices into one
//! document-level matrix.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use ndarray::{s, Array2};
use serde::{Deserialize, Serialize};

use crate::crf::EmissionMatrix;
use crate::error::{Error, Result};

/// Hashed feature extraction settings.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureConfig {
    pub hash_dim: usize,
    pub char_ngram_orders: Vec<usize>,
    pub word_unigrams: bool,
    pub lowercase: bool,
    pub seed: u64,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        Self {
            hash_dim: 1 << 20,
            char_ngram_orders: vec![1, 2, 3],
            word_unigrams: true,
            lowercase: true,
            seed: 0,
        }
    }
}

impl FeatureConfig {
    pub fn validate(&self) -> Result<()> {
        if !self.hash_dim.is_power_of_two() || self.hash_dim > 1 << 32 {
            return Err(Error::invalid(format!(
                "hash dimension {} is not a power of two up to 2^32",
                self.hash_dim
            )));
        }
        if self.char_ngram_orders.is_empty() && !self.word_unigrams {
            return Err(Error::invalid("no feature templates enabled"));
        }
        if self.char_ngram_orders.contains(&0) {
            return Err(Error::invalid("character n-gram order must be at least 1"));
        }
        Ok(())
    }
}

/// Context radius (in tokens) of the word features.
pub const CONTEXT: isize = 2;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

fn fnv1a(seed: u64, text: &str) -> u64 {
    let mut h = FNV_OFFSET;
    for b in seed.to_le_bytes().iter().chain(text.as_bytes()) {
        h ^= u64::from(*b);
        h = h.wrapping_mul(FNV_PRIME);
    }
    h
}

fn shape(token: &str) -> &'static str {
    let mut chars = token.chars();
    match chars.next() {
        None => "empty",
        Some(c) if c.is_ascii_punctuation() && token.chars().all(|c| c.is_ascii_punctuation()) => {
            match token {
                "." | "!" | "?" => "stop",
                _ => "punct",
            }
        }
        Some(c) if c.is_numeric() => "digit",
        Some(c) if c.is_uppercase() => "upper",
        Some(_) => "lower",
    }
}

/// Per-token hashed feature indices, sorted and deduplicated.
///
/// Token `t` sees word identities and shapes within [`CONTEXT`] positions on
/// either side plus character n-grams of itself; nothing further away.
pub fn featurize<S: AsRef<str>>(tokens: &[S], config: &FeatureConfig) -> Vec<Vec<u32>> {
    let mask = (config.hash_dim - 1) as u64;
    let norm: Vec<String> = tokens
        .iter()
        .map(|t| {
            if config.lowercase {
                t.as_ref().to_lowercase()
            } else {
                t.as_ref().to_string()
            }
        })
        .collect();
    let n = tokens.len() as isize;
    let word = |i: isize| -> &str {
        if i < 0 {
            "<s>"
        } else if i >= n {
            "</s>"
        } else {
            &norm[i as usize]
        }
    };
    let shape_at = |i: isize| -> &str {
        if i < 0 || i >= n {
            "pad"
        } else {
            shape(tokens[i as usize].as_ref())
        }
    };

    let mut out = Vec::with_capacity(tokens.len());
    let mut key = String::new();
    for t in 0..n {
        let mut feats = Vec::new();
        let mut add = |key: &str| feats.push((fnv1a(config.seed, key) & mask) as u32);
        add("bias");
        if t == 0 {
            add("first");
        }
        for off in -CONTEXT..=CONTEXT {
            key.clear();
            write!(key, "s{off}={}", shape_at(t + off)).unwrap();
            add(&key);
            if config.word_unigrams {
                key.clear();
                write!(key, "w{off}={}", word(t + off)).unwrap();
                add(&key);
            }
        }
        let padded: Vec<char> = std::iter::once('^')
            .chain(norm[t as usize].chars())
            .chain(std::iter::once('$'))
            .collect();
        for &order in &config.char_ngram_orders {
            for gram in padded.windows(order) {
                key.clear();
                write!(key, "c{order}=").unwrap();
                key.extend(gram);
                add(&key);
            }
        }
        feats.sort_unstable();
        feats.dedup();
        out.push(feats);
    }
    out
}

/// Linear emission model over hashed features. Weight rows are stored
/// sparsely; absent rows are zero.
#[derive(Debug, Clone, PartialEq)]
pub struct EmissionModel {
    pub config: FeatureConfig,
    n_tags: usize,
    weights: BTreeMap<u32, Vec<f64>>,
}

impl EmissionModel {
    pub fn new(config: FeatureConfig, n_tags: usize) -> Result<Self> {
        config.validate()?;
        if n_tags == 0 {
            return Err(Error::invalid("emission model needs at least one tag"));
        }
        Ok(Self {
            config,
            n_tags,
            weights: BTreeMap::new(),
        })
    }

    pub fn n_tags(&self) -> usize {
        self.n_tags
    }

    pub fn row(&self, feature: u32) -> Option<&[f64]> {
        self.weights.get(&feature).map(Vec::as_slice)
    }

    pub fn row_mut(&mut self, feature: u32) -> &mut [f64] {
        let k = self.n_tags;
        self.weights.entry(feature).or_insert_with(|| vec![0.0; k])
    }

    pub fn rows(&self) -> impl Iterator<Item = (u32, &[f64])> {
        self.weights.iter().map(|(&f, w)| (f, w.as_slice()))
    }

    pub fn n_active(&self) -> usize {
        self.weights.len()
    }

    pub fn insert_row(&mut self, feature: u32, row: Vec<f64>) -> Result<()> {
        if row.len() != self.n_tags {
            return Err(Error::Dimension {
                what: format!("weight row {feature}"),
                expected: self.n_tags,
                actual: row.len(),
            });
        }
        if feature as usize >= self.config.hash_dim {
            return Err(Error::invalid(format!("feature {feature} beyond hash dimension")));
        }
        self.weights.insert(feature, row);
        Ok(())
    }

    /// Emission scores for a whole document featurized in one pass.
    pub fn emissions<S: AsRef<str>>(&self, tokens: &[S]) -> Result<EmissionMatrix> {
        linear_emissions(&featurize(tokens, &self.config), self)
    }

    /// Emission scores computed window by window and stitched together.
    pub fn windowed_emissions<S: AsRef<str>>(
        &self,
        tokens: &[S],
        window_size: usize,
    ) -> Result<EmissionMatrix> {
        let plan = plan_windows(tokens.len(), window_size)?;
        let per_window = plan
            .windows
            .iter()
            .map(|w| {
                let feats = featurize(&tokens[w.start..w.end], &self.config);
                linear_emissions(&feats, self).map(EmissionMatrix::into_inner)
            })
            .collect::<Result<Vec<_>>>()?;
        stitch_windows(&per_window, &plan)
    }
}

pub fn linear_emissions(features: &[Vec<u32>], model: &EmissionModel) -> Result<EmissionMatrix> {
    let mut scores = Array2::zeros((features.len(), model.n_tags));
    for (t, feats) in features.iter().enumerate() {
        let mut row = scores.row_mut(t);
        for f in feats {
            if let Some(w) = model.weights.get(f) {
                row.iter_mut().zip(w).for_each(|(r, w)| *r += w);
            }
        }
    }
    EmissionMatrix::new(scores)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Window {
    pub start: usize,
    pub end: usize,
    /// Absolute token range whose scores this window supplies.
    pub select_start: usize,
    pub select_end: usize,
}

impl Window {
    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end == self.start
    }
}

/// Overlapping windows of size `W` starting every `W/2` tokens. Each window
/// contributes its central half `[W/4, 3W/4)`; the first window also
/// contributes its head and the last its tail, so the selections partition
/// the document.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WindowPlan {
    pub n_tokens: usize,
    pub window_size: usize,
    pub stride: usize,
    pub windows: Vec<Window>,
}

pub fn plan_windows(n_tokens: usize, window_size: usize) -> Result<WindowPlan> {
    if window_size < 2 || !window_size.is_multiple_of(2) {
        return Err(Error::invalid(format!(
            "window size must be even and at least 2, got {window_size}"
        )));
    }
    if n_tokens == 0 {
        return Err(Error::invalid("cannot plan windows for an empty document"));
    }
    let stride = window_size / 2;
    let quarter = window_size / 4;
    let mut windows = Vec::new();
    let mut start = 0;
    loop {
        let end = (start + window_size).min(n_tokens);
        let last = end == n_tokens;
        windows.push(Window {
            start,
            end,
            select_start: if start == 0 { 0 } else { start + quarter },
            select_end: if last { n_tokens } else { start + quarter + stride },
        });
        if last {
            break;
        }
        start += stride;
    }
    Ok(WindowPlan {
        n_tokens,
        window_size,
        stride,
        windows,
    })
}

impl WindowPlan {
    /// Index of the window whose selection contains token `t`.
    pub fn source_of(&self, t: usize) -> Option<usize> {
        self.windows
            .iter()
            .position(|w| w.select_start <= t && t < w.select_end)
    }

    /// Cuts a document-level matrix into the per-window matrices of this plan.
    pub fn split(&self, scores: &Array2<f64>) -> Result<Vec<Array2<f64>>> {
        if scores.nrows() != self.n_tokens {
            return Err(Error::Dimension {
                what: "document rows".into(),
                expected: self.n_tokens,
                actual: scores.nrows(),
            });
        }
        Ok(self
            .windows
            .iter()
            .map(|w| scores.slice(s![w.start..w.end, ..]).to_owned())
            .collect())
    }
}

pub fn stitch_windows(per_window: &[Array2<f64>], plan: &WindowPlan) -> Result<EmissionMatrix> {
    if per_window.len() != plan.windows.len() {
        return Err(Error::Dimension {
            what: "window count".into(),
            expected: plan.windows.len(),
            actual: per_window.len(),
        });
    }
    let k = per_window[0].ncols();
    let mut out = Array2::zeros((plan.n_tokens, k));
    for (i, (scores, w)) in per_window.iter().zip(&plan.windows).enumerate() {
        if scores.nrows() != w.len() {
            return Err(Error::Dimension {
                what: format!("window {i} rows"),
                expected: w.len(),
                actual: scores.nrows(),
            });
        }
        if scores.ncols() != k {
            return Err(Error::Dimension {
                what: format!("window {i} columns"),
                expected: k,
                actual: scores.ncols(),
            });
        }
        let local = s![w.select_start - w.start..w.select_end - w.start, ..];
        out.slice_mut(s![w.select_start..w.select_end, ..])
            .assign(&scores.slice(local));
    }
    EmissionMatrix::new(out)
}

/// Writes the `T K` header followed by `T` rows of `K` floats.
pub fn format_emissions(em: &EmissionMatrix) -> String {
    let mut out = String::new();
    writeln!(out, "{} {}", em.n_tokens(), em.n_tags()).unwrap();
    for row in em.scores().rows() {
        let mut first = true;
        for v in row {
            if !first {
                out.push(' ');
            }
            first = false;
            write!(out, "{v}").unwrap();
        }
        out.push('\n');
    }
    out
}

pub fn save_emissions(path: impl AsRef<Path>, em: &EmissionMatrix) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, format_emissions(em)).map_err(|e| Error::io(path, e))
}

/// Parses one or more consecutive emission blocks. `n_tags`, when given, is
/// the column count every block must have.
pub fn parse_emission_blocks(text: &str, n_tags: Option<usize>) -> Result<Vec<EmissionMatrix>> {
    let mut lines = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty());
    let mut blocks = Vec::new();
    while let Some((lineno, header)) = lines.next() {
        let parse_err = |message: String| Error::Parse {
            line: lineno + 1,
            message,
        };
        let dims: Vec<usize> = header
            .split_whitespace()
            .map(str::parse)
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| parse_err(format!("bad header `{header}`: {e}")))?;
        let [t, k] = dims[..] else {
            return Err(parse_err(format!("header must be `T K`, got `{header}`")));
        };
        if let Some(expected) = n_tags {
            if k != expected {
                return Err(Error::Dimension {
                    what: "emission columns".into(),
                    expected,
                    actual: k,
                });
            }
        }
        if t == 0 || k == 0 {
            return Err(parse_err("emission block must be non-empty".into()));
        }
        let mut scores = Array2::zeros((t, k));
        for row in 0..t {
            let (lineno, line) = lines.next().ok_or_else(|| Error::Dimension {
                what: "emission rows".into(),
                expected: t,
                actual: row,
            })?;
            let mut cols = 0;
            for (col, field) in line.split_whitespace().enumerate() {
                if col >= k {
                    cols = col + 1;
                    continue;
                }
                let v: f64 = field.parse().map_err(|e| Error::Parse {
                    line: lineno + 1,
                    message: format!("bad value `{field}`: {e}"),
                })?;
                if !v.is_finite() {
                    return Err(Error::NonFinite { row, col });
                }
                scores[[row, col]] = v;
                cols = col + 1;
            }
            if cols != k {
                return Err(Error::Dimension {
                    what: format!("columns on row {row}"),
                    expected: k,
                    actual: cols,
                });
            }
        }
        blocks.push(EmissionMatrix::new(scores)?);
    }
    Ok(blocks)
}

pub fn load_emissions(path: impl AsRef<Path>, n_tags: Option<usize>) -> Result<EmissionMatrix> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut blocks = parse_emission_blocks(&text, n_tags).map_err(|e| e.in_file(path))?;
    match blocks.len() {
        1 => Ok(blocks.pop().unwrap()),
        n => Err(Error::Format(format!(
            "{}: expected one emission block, found {n}",
            path.display()
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn toks(s: &str) -> Vec<String> {
        s.split_whitespace().map(String::from).collect()
    }

    fn small_config() -> FeatureConfig {
        FeatureConfig {
            hash_dim: 1 << 12,
            ..FeatureConfig::default()
        }
    }

    #[test]
    fn featurize_is_deterministic() {
        let tokens = toks("We want a fairer society .");
        let cfg = FeatureConfig::default();
        assert_eq!(featurize(&tokens, &cfg), featurize(&tokens, &cfg));
        let other_seed = FeatureConfig { seed: 1, ..cfg.clone() };
        assert_ne!(featurize(&tokens, &cfg), featurize(&tokens, &other_seed));
    }

    #[test]
    fn features_are_local() {
        let cfg = FeatureConfig::default();
        let a = toks("a b c d e f g h");
        let b = toks("a b c d e f h g");
        let fa = featurize(&a, &cfg);
        let fb = featurize(&b, &cfg);
        // token 3 sees positions 1..=5 only
        assert_eq!(fa[3], fb[3]);
        assert_ne!(fa[5], fb[5]);
    }

    #[test]
    fn empty_token_still_has_features() {
        let feats = featurize(&["", "x"], &FeatureConfig::default());
        assert!(feats[0].len() > 3);
    }

    #[test]
    fn config_validation() {
        let bad = FeatureConfig { hash_dim: 1000, ..FeatureConfig::default() };
        assert!(bad.validate().is_err());
        let bad = FeatureConfig {
            char_ngram_orders: vec![],
            word_unigrams: false,
            ..FeatureConfig::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn linear_emissions_are_linear() {
        let tokens = toks("one two three");
        let feats = featurize(&tokens, &small_config());
        let mut model = EmissionModel::new(small_config(), 3).unwrap();
        let zero = linear_emissions(&feats, &model).unwrap();
        assert!(zero.scores().iter().all(|&v| v == 0.0));

        for (i, f) in feats.iter().flatten().enumerate() {
            let row = model.row_mut(*f);
            row[i % 3] += 0.5 + i as f64 * 0.01;
        }
        let once = linear_emissions(&feats, &model).unwrap();
        let mut doubled = model.clone();
        let keys: Vec<u32> = doubled.rows().map(|(f, _)| f).collect();
        for f in keys {
            doubled.row_mut(f).iter_mut().for_each(|w| *w *= 2.0);
        }
        let twice = linear_emissions(&feats, &doubled).unwrap();
        assert_eq!(twice.scores(), &(once.scores() * 2.0));
    }

    #[test]
    fn single_feature_reads_off_row() {
        let mut model = EmissionModel::new(small_config(), 3).unwrap();
        model.insert_row(7, vec![1.0, -2.0, 0.5]).unwrap();
        let em = linear_emissions(&[vec![7]], &model).unwrap();
        assert_eq!(em.scores(), &array![[1.0, -2.0, 0.5]]);
        assert!(model.insert_row(8, vec![1.0]).is_err());
    }

    #[test]
    fn short_document_single_window() {
        let plan = plan_windows(10, 512).unwrap();
        assert_eq!(plan.windows.len(), 1);
        let w = plan.windows[0];
        assert_eq!((w.start, w.end, w.select_start, w.select_end), (0, 10, 0, 10));
    }

    #[test]
    fn two_window_plan() {
        let plan = plan_windows(768, 512).unwrap();
        let starts: Vec<usize> = plan.windows.iter().map(|w| w.start).collect();
        assert_eq!(starts, [0, 256]);
        assert_eq!(plan.source_of(400), Some(1));
        assert_eq!(plan.source_of(383), Some(0));
        assert_eq!(plan.source_of(384), Some(1));
        for t in 0..768 {
            let n = plan
                .windows
                .iter()
                .filter(|w| w.select_start <= t && t < w.select_end)
                .count();
            assert_eq!(n, 1);
        }
    }

    #[test]
    fn interior_tokens_sit_in_two_windows() {
        let plan = plan_windows(2000, 512).unwrap();
        for t in 256..(plan.windows.last().unwrap().start) {
            let n = plan.windows.iter().filter(|w| w.start <= t && t < w.end).count();
            assert_eq!(n, 2, "token {t}");
        }
        // interior windows contribute their central half
        for w in &plan.windows[1..plan.windows.len() - 1] {
            assert_eq!(w.select_start - w.start, 128);
            assert_eq!(w.select_end - w.start, 384);
        }
    }

    #[test]
    fn bad_window_sizes() {
        assert!(plan_windows(10, 3).is_err());
        assert!(plan_windows(10, 0).is_err());
        assert!(plan_windows(0, 4).is_err());
    }

    #[test]
    fn stitching_copies_designated_rows() {
        let scores = Array2::from_shape_fn((37, 3), |(t, k)| (t * 10 + k) as f64);
        let plan = plan_windows(37, 8).unwrap();
        let windows = plan.split(&scores).unwrap();
        let stitched = stitch_windows(&windows, &plan).unwrap();
        assert_eq!(stitched.scores(), &scores);

        let single = plan_windows(5, 8).unwrap();
        let m = Array2::from_elem((5, 2), 1.5);
        assert_eq!(stitch_windows(std::slice::from_ref(&m), &single).unwrap().scores(), &m);

        let bad = vec![Array2::zeros((3, 2))];
        assert!(matches!(
            stitch_windows(&bad, &single),
            Err(Error::Dimension { .. })
        ));
    }

    #[test]
    fn windowed_matches_whole_document_in_the_interior() {
        let tokens: Vec<String> = (0..100).map(|i| format!("w{}", i % 13)).collect();
        let mut model = EmissionModel::new(small_config(), 3).unwrap();
        for (i, f) in featurize(&tokens, &model.config).iter().flatten().enumerate() {
            model.row_mut(*f)[i % 3] = (i % 7) as f64 * 0.1;
        }
        let whole = model.emissions(&tokens).unwrap();
        let windowed = model.windowed_emissions(&tokens, 16).unwrap();
        // windows of 16 leave 4 tokens of context around each selection,
        // more than the feature radius, except for the "first" flag at
        // window starts which only matters outside the selections
        assert_eq!(whole.scores(), windowed.scores());
    }

    #[test]
    fn emission_file_round_trip() {
        let em = EmissionMatrix::new(array![[0.1, -2.5, 1e-17], [3.0, 0.30000000000000004, -0.0]])
            .unwrap();
        let text = format_emissions(&em);
        let back = parse_emission_blocks(&text, Some(3)).unwrap();
        assert_eq!(back, vec![em]);
    }

    #[test]
    fn emission_file_validation() {
        let wrong_k = parse_emission_blocks("1 2\n0 1\n", Some(3));
        assert!(matches!(
            wrong_k,
            Err(Error::Dimension { expected: 3, actual: 2, .. })
        ));
        let nan = parse_emission_blocks("2 2\n0 1\n1 NaN\n", None);
        assert!(matches!(nan, Err(Error::NonFinite { row: 1, col: 1 })));
        let short_row = parse_emission_blocks("1 2\n0\n", None);
        assert!(matches!(short_row, Err(Error::Dimension { .. })));
        let missing = load_emissions("/definitely/not/here.em", None);
        assert!(matches!(missing, Err(Error::Io { .. })));
    }
}
