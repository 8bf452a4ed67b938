//! End-to-end training of emission weights and transitions on CRF NLL,
//! with periodic dev-set evaluation and patience-based early stopping.

use std::collections::BTreeMap;

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::corpus::Document;
use crate::crf::{nll_gradients, EmissionMatrix, Transitions};
use crate::emissions::{featurize, linear_emissions, FeatureConfig};
use crate::error::{Error, Result};
use crate::evaluation::{prf, Prf};
use crate::model::CrfModel;
use crate::tagset::{spans_to_tags, TagVocabulary};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Optimizer {
    Sgd,
    Adam(AdamConfig),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    /// Documents are truncated to this many tokens during training.
    pub max_train_len: usize,
    /// Steps between dev-set evaluations.
    pub eval_interval: u64,
    /// Evaluations without improvement before stopping.
    pub patience: usize,
    pub optimizer: Optimizer,
    pub seed: u64,
    /// Transitions start uniform in `[-init_range, init_range]`.
    pub init_range: f64,
    /// Hard cap on optimisation steps.
    pub max_steps: Option<u64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 5e-6,
            batch_size: 1,
            max_train_len: 1024,
            eval_interval: 2000,
            patience: 20,
            optimizer: Optimizer::Adam(AdamConfig::default()),
            seed: 0,
            init_range: 0.1,
            max_steps: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::invalid("learning rate must be positive"));
        }
        if self.batch_size == 0 || self.max_train_len == 0 || self.eval_interval == 0 {
            return Err(Error::invalid(
                "batch size, training length and evaluation interval must be positive",
            ));
        }
        if self.patience == 0 {
            return Err(Error::invalid("patience must be at least 1"));
        }
        if !(self.init_range.is_finite() && self.init_range >= 0.0) {
            return Err(Error::invalid("initialisation range must be non-negative"));
        }
        if self.max_steps == Some(0) {
            return Err(Error::invalid("max steps must be positive"));
        }
        if let Optimizer::Adam(a) = self.optimizer {
            let in_unit = |b: f64| (0.0..1.0).contains(&b);
            if !in_unit(a.beta1) || !in_unit(a.beta2) || a.epsilon <= 0.0 {
                return Err(Error::invalid("adam betas must lie in [0, 1) and epsilon be positive"));
            }
        }
        Ok(())
    }
}

/// First and second moment estimates plus the step counter.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub step: u64,
    pub m: Vec<f64>,
    pub v: Vec<f64>,
}

impl AdamState {
    pub fn new(len: usize) -> Self {
        Self {
            step: 0,
            m: vec![0.0; len],
            v: vec![0.0; len],
        }
    }
}

fn check_finite(grads: &[f64], step: u64) -> Result<()> {
    match grads.iter().position(|g| !g.is_finite()) {
        Some(i) => Err(Error::NonFiniteGradient {
            step,
            detail: format!("coordinate {i} is {}", grads[i]),
        }),
        None => Ok(()),
    }
}

fn adam_step(
    params: &mut [f64],
    grads: &[f64],
    m: &mut [f64],
    v: &mut [f64],
    step: u64,
    lr: f64,
    hyper: &AdamConfig,
) {
    let bc1 = 1.0 - hyper.beta1.powf(step as f64);
    let bc2 = 1.0 - hyper.beta2.powf(step as f64);
    for i in 0..params.len() {
        let g = grads[i];
        m[i] = hyper.beta1 * m[i] + (1.0 - hyper.beta1) * g;
        v[i] = hyper.beta2 * v[i] + (1.0 - hyper.beta2) * g * g;
        let m_hat = m[i] / bc1;
        let v_hat = v[i] / bc2;
        params[i] -= lr * m_hat / (v_hat.sqrt() + hyper.epsilon);
    }
}

/// One bias-corrected Adam update of `params` in place.
pub fn adam_update(
    params: &mut [f64],
    grads: &[f64],
    state: &mut AdamState,
    lr: f64,
    hyper: &AdamConfig,
) -> Result<()> {
    if params.len() != grads.len() || state.m.len() != params.len() || state.v.len() != params.len() {
        return Err(Error::Dimension {
            what: "adam update".into(),
            expected: params.len(),
            actual: grads.len(),
        });
    }
    check_finite(grads, state.step + 1)?;
    state.step += 1;
    adam_step(params, grads, &mut state.m, &mut state.v, state.step, lr, hyper);
    Ok(())
}

/// A training document reduced to what the optimiser needs.
#[derive(Debug, Clone)]
pub struct Example {
    features: Vec<Vec<u32>>,
    gold: Vec<usize>,
}

impl Example {
    pub fn new(doc: &Document, tags: &TagVocabulary, config: &FeatureConfig, max_len: usize) -> Result<Self> {
        let spans = doc.gold()?;
        let mut gold = spans_to_tags(tags, doc.tokens.len(), spans)
            .map_err(|e| Error::invalid(format!("document `{}`: {e}", doc.id)))?;
        let n = doc.tokens.len().min(max_len);
        gold.truncate(n);
        Ok(Self {
            features: featurize(&doc.tokens[..n], config),
            gold,
        })
    }
}

/// Holds the model under training and the optimiser state.
#[derive(Debug, Clone)]
pub struct Trainer {
    model: CrfModel,
    config: TrainConfig,
    step: u64,
    transition_state: AdamState,
    // lazily created per feature row: (first moment, second moment)
    weight_state: BTreeMap<u32, (Vec<f64>, Vec<f64>)>,
}

impl Trainer {
    pub fn new(tags: TagVocabulary, features: FeatureConfig, config: TrainConfig) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let transitions = Transitions::random(tags.len(), config.init_range, &mut rng);
        let k = tags.len();
        let model = CrfModel::new(tags, features, transitions)?;
        Ok(Self {
            model,
            config,
            step: 0,
            transition_state: AdamState::new(k * k + 2 * k),
            weight_state: BTreeMap::new(),
        })
    }

    pub fn model(&self) -> &CrfModel {
        &self.model
    }

    pub fn into_model(self) -> CrfModel {
        self.model
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    /// NLL of an example under the current parameters.
    pub fn loss(&self, example: &Example) -> Result<f64> {
        let em = linear_emissions(&example.features, &self.model.emission)?;
        crate::crf::nll(&em, &self.model.transitions, &example.gold)
    }

    /// One optimiser step on the mean gradient of `batch`; returns the mean
    /// NLL before the update.
    pub fn step(&mut self, batch: &[&Example]) -> Result<f64> {
        if batch.is_empty() {
            return Err(Error::invalid("empty batch"));
        }
        let k = self.model.tags.len();
        let scale = 1.0 / batch.len() as f64;
        let mut loss = 0.0;
        let mut d_weights: BTreeMap<u32, Vec<f64>> = BTreeMap::new();
        let mut d_trans = vec![0.0; k * k + 2 * k];

        for ex in batch {
            let em: EmissionMatrix = linear_emissions(&ex.features, &self.model.emission)?;
            let (l, g) = nll_gradients(&em, &self.model.transitions, &ex.gold)?;
            loss += l * scale;
            for (t, feats) in ex.features.iter().enumerate() {
                let row = g.emissions.row(t);
                for &f in feats {
                    let acc = d_weights.entry(f).or_insert_with(|| vec![0.0; k]);
                    acc.iter_mut().zip(row).for_each(|(a, d)| *a += d * scale);
                }
            }
            let flat = g.transitions.iter().chain(&g.start).chain(&g.end);
            d_trans.iter_mut().zip(flat).for_each(|(a, d)| *a += d * scale);
        }

        let next = self.step + 1;
        check_finite(&d_trans, next)?;
        for grad in d_weights.values() {
            check_finite(grad, next)?;
        }
        self.step = next;

        let lr = self.config.learning_rate;
        let mut params = self.flat_transitions();
        match self.config.optimizer {
            Optimizer::Sgd => {
                params.iter_mut().zip(&d_trans).for_each(|(p, g)| *p -= lr * g);
                for (f, grad) in &d_weights {
                    let row = self.model.emission.row_mut(*f);
                    row.iter_mut().zip(grad).for_each(|(p, g)| *p -= lr * g);
                }
            }
            Optimizer::Adam(hyper) => {
                adam_update(&mut params, &d_trans, &mut self.transition_state, lr, &hyper)?;
                // sparse rows are updated lazily, only when they receive a gradient
                for (f, grad) in &d_weights {
                    let (m, v) = self
                        .weight_state
                        .entry(*f)
                        .or_insert_with(|| (vec![0.0; k], vec![0.0; k]));
                    let row = self.model.emission.row_mut(*f);
                    adam_step(row, grad, m, v, next, lr, &hyper);
                }
            }
        }
        self.set_flat_transitions(&params);
        Ok(loss)
    }

    fn flat_transitions(&self) -> Vec<f64> {
        let tr = &self.model.transitions;
        tr.scores.iter().chain(&tr.start).chain(&tr.end).copied().collect()
    }

    fn set_flat_transitions(&mut self, flat: &[f64]) {
        let k = self.model.tags.len();
        let tr = &mut self.model.transitions;
        tr.scores = Array2::from_shape_vec((k, k), flat[..k * k].to_vec()).unwrap();
        tr.start.assign(&ndarray::ArrayView1::from(&flat[k * k..k * k + k]));
        tr.end.assign(&ndarray::ArrayView1::from(&flat[k * k + k..]));
    }
}

/// Tracks the best evaluation score seen and when to give up.
#[derive(Debug, Clone)]
pub struct EarlyStopping<S> {
    patience: usize,
    best: Option<(f64, u64, S)>,
    since_improvement: usize,
    evaluations: usize,
}

impl<S> EarlyStopping<S> {
    pub fn new(patience: usize) -> Self {
        Self {
            patience,
            best: None,
            since_improvement: 0,
            evaluations: 0,
        }
    }

    /// Records an evaluation. Only a strict improvement replaces the kept
    /// snapshot. Returns `true` once patience is exhausted.
    pub fn observe(&mut self, step: u64, score: f64, snapshot: impl FnOnce() -> S) -> bool {
        self.evaluations += 1;
        let improved = match &self.best {
            None => true,
            Some((best, _, _)) => score > *best,
        };
        if improved {
            self.best = Some((score, step, snapshot()));
            self.since_improvement = 0;
        } else {
            self.since_improvement += 1;
        }
        self.since_improvement >= self.patience
    }

    pub fn evaluations(&self) -> usize {
        self.evaluations
    }

    pub fn best_score(&self) -> Option<f64> {
        self.best.as_ref().map(|b| b.0)
    }

    pub fn best_step(&self) -> Option<u64> {
        self.best.as_ref().map(|b| b.1)
    }

    pub fn into_best(self) -> Option<(f64, u64, S)> {
        self.best
    }
}

/// One line of the training log.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrainingRecord {
    pub step: u64,
    /// Mean training NLL over the steps since the previous evaluation.
    pub train_nll: f64,
    pub dev_precision: f64,
    pub dev_recall: f64,
    pub dev_f1: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Snapshot with the best dev F1 (earliest on ties).
    pub model: CrfModel,
    pub best_step: u64,
    pub best_f1: f64,
    pub steps: u64,
    pub log: Vec<TrainingRecord>,
}

/// Micro P/R/F1 of masked Viterbi predictions against the gold spans.
pub fn evaluate_model(model: &CrfModel, docs: &[Document]) -> Result<Prf> {
    let mut gold = Vec::with_capacity(docs.len());
    let mut pred = Vec::with_capacity(docs.len());
    for doc in docs {
        gold.push(doc.gold()?.to_vec());
        pred.push(model.predict(&doc.tokens, true)?);
    }
    Ok(prf(&gold, &pred)?.micro)
}

/// Trains on `corpus`, early-stopping on micro-F1 over `dev`.
pub fn train(
    corpus: &[Document],
    dev: &[Document],
    tags: &TagVocabulary,
    features: &FeatureConfig,
    config: &TrainConfig,
) -> Result<TrainOutcome> {
    if dev.is_empty() {
        return Err(Error::invalid("development set is empty"));
    }
    for doc in dev {
        let spans = doc.gold()?;
        if let Some(s) = spans.iter().find(|s| !tags.categories().contains(&s.category)) {
            return Err(Error::UnknownCategory(format!(
                "{} in development document `{}` is not in the training vocabulary",
                s.category, doc.id
            )));
        }
    }
    train_with_evaluator(corpus, tags, features, config, |m| evaluate_model(m, dev))
}

/// Training loop with a caller-supplied evaluation function.
pub fn train_with_evaluator<F>(
    corpus: &[Document],
    tags: &TagVocabulary,
    features: &FeatureConfig,
    config: &TrainConfig,
    mut evaluate: F,
) -> Result<TrainOutcome>
where
    F: FnMut(&CrfModel) -> Result<Prf>,
{
    if corpus.is_empty() {
        return Err(Error::invalid("training corpus is empty"));
    }
    let examples = corpus
        .iter()
        .map(|d| Example::new(d, tags, features, config.max_train_len))
        .collect::<Result<Vec<_>>>()?;
    let mut trainer = Trainer::new(tags.clone(), features.clone(), config.clone())?;
    // separate stream from the one that initialised the transitions
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x9e37_79b9_7f4a_7c15);
    let mut stopper = EarlyStopping::new(config.patience);
    let mut log = Vec::new();
    let mut nll_sum = 0.0;
    let mut nll_steps = 0u64;
    let mut order: Vec<usize> = (0..examples.len()).collect();

    let mut record = |trainer: &Trainer, nll_sum: f64, nll_steps: u64, log: &mut Vec<TrainingRecord>| {
        let dev = evaluate(trainer.model())?;
        log.push(TrainingRecord {
            step: trainer.steps(),
            train_nll: if nll_steps > 0 { nll_sum / nll_steps as f64 } else { f64::NAN },
            dev_precision: dev.precision,
            dev_recall: dev.recall,
            dev_f1: dev.f1,
        });
        Ok::<f64, Error>(dev.f1)
    };

    'outer: loop {
        order.shuffle(&mut rng);
        for batch in order.chunks(config.batch_size) {
            let batch: Vec<&Example> = batch.iter().map(|&i| &examples[i]).collect();
            nll_sum += trainer.step(&batch)?;
            nll_steps += 1;
            let at_cap = config.max_steps.is_some_and(|cap| trainer.steps() >= cap);
            if trainer.steps() % config.eval_interval == 0 || at_cap {
                let f1 = record(&trainer, nll_sum, nll_steps, &mut log)?;
                nll_sum = 0.0;
                nll_steps = 0;
                let stop = stopper.observe(trainer.steps(), f1, || trainer.model().clone());
                if stop || at_cap {
                    break 'outer;
                }
            }
        }
    }

    let steps = trainer.steps();
    let (best_f1, best_step, model) = stopper.into_best().expect("at least one evaluation");
    Ok(TrainOutcome {
        model,
        best_step,
        best_f1,
        steps,
        log,
    })
}
