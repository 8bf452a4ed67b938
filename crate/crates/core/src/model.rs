//! The trained segmenter (tag vocabulary, emission model, transitions), its
//! decoding entry points, and the versioned model file.

use std::fs;
use std::path::Path;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::crf::{constrained_viterbi, viterbi, BoundaryOracle, EmissionMatrix, Transitions};
use crate::emissions::{EmissionModel, FeatureConfig};
use crate::error::{Error, Result};
use crate::tagset::{
    expand_bio, legality_masks, tags_to_spans, Category, CategoryVocabulary, LabeledSpan,
    TagVocabulary,
};

pub const MODEL_MAGIC: &str = "polseg-crf-model";
pub const MODEL_VERSION: u32 = 1;

/// Window size used when computing emissions for whole documents.
pub const DEFAULT_WINDOW: usize = 512;

#[derive(Debug, Clone, PartialEq)]
pub struct CrfModel {
    pub tags: TagVocabulary,
    pub emission: EmissionModel,
    pub transitions: Transitions,
}

impl CrfModel {
    pub fn new(tags: TagVocabulary, features: FeatureConfig, transitions: Transitions) -> Result<Self> {
        if transitions.n_tags() != tags.len() {
            return Err(Error::Dimension {
                what: "transition matrix".into(),
                expected: tags.len(),
                actual: transitions.n_tags(),
            });
        }
        transitions.validate()?;
        let emission = EmissionModel::new(features, tags.len())?;
        Ok(Self {
            tags,
            emission,
            transitions,
        })
    }

    pub fn emissions<S: AsRef<str>>(&self, tokens: &[S]) -> Result<EmissionMatrix> {
        self.emission.windowed_emissions(tokens, DEFAULT_WINDOW)
    }

    pub fn predict<S: AsRef<str>>(&self, tokens: &[S], legality_mask: bool) -> Result<Vec<LabeledSpan>> {
        decode_spans(&self.tags, &self.transitions, &self.emissions(tokens)?, legality_mask)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text).map_err(|e| e.in_file(path))
    }

    pub fn to_json(&self) -> String {
        let file = ModelFile {
            magic: MODEL_MAGIC.to_string(),
            version: MODEL_VERSION,
            categories: self.tags.categories().categories().to_vec(),
            features: self.emission.config.clone(),
            transitions: self.transitions.scores.rows().into_iter().map(|r| r.to_vec()).collect(),
            start: self.transitions.start.to_vec(),
            end: self.transitions.end.to_vec(),
            weights: self.emission.rows().map(|(f, w)| (f, w.to_vec())).collect(),
        };
        let mut out = serde_json::to_string(&file).expect("model serializes");
        out.push('\n');
        out
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: ModelFile =
            serde_json::from_str(text).map_err(|e| Error::Format(format!("model file: {e}")))?;
        if file.magic != MODEL_MAGIC {
            return Err(Error::Format(format!("not a model file (magic `{}`)", file.magic)));
        }
        if file.version != MODEL_VERSION {
            return Err(Error::Format(format!(
                "model format version {} is not supported (expected {MODEL_VERSION})",
                file.version
            )));
        }
        let tags = expand_bio(CategoryVocabulary::new(file.categories)?)?;
        let k = tags.len();
        if file.transitions.len() != k {
            return Err(Error::Dimension {
                what: "transition rows".into(),
                expected: k,
                actual: file.transitions.len(),
            });
        }
        let flat: Vec<f64> = file.transitions.iter().flatten().copied().collect();
        let scores = Array2::from_shape_vec((k, k), flat).map_err(|_| Error::Dimension {
            what: "transition columns".into(),
            expected: k,
            actual: file.transitions.iter().map(Vec::len).find(|&l| l != k).unwrap_or(0),
        })?;
        for (what, v) in [("start scores", &file.start), ("end scores", &file.end)] {
            if v.len() != k {
                return Err(Error::Dimension {
                    what: what.into(),
                    expected: k,
                    actual: v.len(),
                });
            }
        }
        let transitions = Transitions {
            scores,
            start: Array1::from(file.start),
            end: Array1::from(file.end),
        };
        let mut model = CrfModel::new(tags, file.features, transitions)?;
        for (f, row) in file.weights {
            if row.iter().any(|v| !v.is_finite()) {
                return Err(Error::invalid(format!("non-finite weight for feature {f}")));
            }
            model.emission.insert_row(f, row)?;
        }
        Ok(model)
    }
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    magic: String,
    version: u32,
    categories: Vec<Category>,
    features: FeatureConfig,
    transitions: Vec<Vec<f64>>,
    start: Vec<f64>,
    end: Vec<f64>,
    weights: Vec<(u32, Vec<f64>)>,
}

/// Viterbi decoding to spans, optionally under the BIO legality mask.
/// Without the mask, structurally invalid output is repaired.
pub fn decode_spans(
    tags: &TagVocabulary,
    transitions: &Transitions,
    em: &EmissionMatrix,
    legality_mask: bool,
) -> Result<Vec<LabeledSpan>> {
    let mask = if legality_mask {
        Some(legality_masks(tags, em.n_tokens())?)
    } else {
        None
    };
    let (path, _) = viterbi(em, transitions, mask.as_ref())?;
    Ok(tags_to_spans(tags, &path))
}

/// Decoding with statement starts fixed to the gold boundaries.
pub fn decode_spans_with_oracle(
    tags: &TagVocabulary,
    transitions: &Transitions,
    em: &EmissionMatrix,
    oracle: &BoundaryOracle,
) -> Result<Vec<LabeledSpan>> {
    let (path, _) = constrained_viterbi(em, transitions, oracle, tags)?;
    Ok(tags_to_spans(tags, &path))
}
