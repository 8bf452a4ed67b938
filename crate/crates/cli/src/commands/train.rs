use std::path::PathBuf;

use clap::ValueEnum;
use polseg::corpus::check_categories;
use polseg::emissions::FeatureConfig;
use polseg::tagset::expand_bio;
use polseg::training::{self, AdamConfig, Optimizer, TrainConfig};

use crate::error::{config, CliError, CliResult};
use crate::io::{self, Output};
use crate::Global;

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum OptimizerKind {
    Adam,
    Sgd,
}

#[derive(Debug, clap::Args)]
pub struct Args {
    /// Training corpus with gold spans.
    #[arg(long, value_name = "JSONL")]
    train: PathBuf,

    /// Development corpus used for early stopping.
    #[arg(long, value_name = "JSONL")]
    dev: PathBuf,

    /// Where to write the best model.
    #[arg(long, value_name = "PATH")]
    out: PathBuf,

    /// Training log, one record per evaluation (stdout if absent).
    #[arg(long, value_name = "PATH")]
    log: Option<PathBuf>,

    #[arg(long, default_value_t = 5e-6)]
    lr: f64,

    #[arg(long, default_value_t = 1)]
    batch_size: usize,

    /// Training documents are truncated to this many tokens.
    #[arg(long, default_value_t = 1024)]
    max_train_len: usize,

    /// Optimisation steps between development evaluations.
    #[arg(long, default_value_t = 2000)]
    eval_interval: u64,

    /// Evaluations without improvement before stopping.
    #[arg(long, default_value_t = 20)]
    patience: usize,

    #[arg(long, value_enum, default_value = "adam")]
    optimizer: OptimizerKind,

    /// Stop after this many steps even without convergence.
    #[arg(long)]
    max_steps: Option<u64>,

    /// Feature hash space is 2^bits.
    #[arg(long, default_value_t = 20)]
    hash_bits: u32,

    /// Transition scores start uniform in [-r, r].
    #[arg(long, default_value_t = 0.1)]
    init_range: f64,
}

pub fn run(g: &Global, a: Args) -> CliResult {
    if a.hash_bits > 32 {
        return Err(CliError::usage("--hash-bits must be at most 32"));
    }
    let features = FeatureConfig {
        hash_dim: 1usize << a.hash_bits,
        seed: g.seed,
        ..FeatureConfig::default()
    };
    features.validate().map_err(config)?;
    let cfg = TrainConfig {
        learning_rate: a.lr,
        batch_size: a.batch_size,
        max_train_len: a.max_train_len,
        eval_interval: a.eval_interval,
        patience: a.patience,
        optimizer: match a.optimizer {
            OptimizerKind::Adam => Optimizer::Adam(AdamConfig::default()),
            OptimizerKind::Sgd => Optimizer::Sgd,
        },
        seed: g.seed,
        init_range: a.init_range,
        max_steps: a.max_steps,
    };
    cfg.validate().map_err(config)?;

    let train = io::corpus(&a.train)?;
    let dev = io::corpus(&a.dev)?;
    let vocab = io::vocabulary(g.vocab.as_deref(), &train)?;
    check_categories(&train, &vocab).map_err(|e| e.in_file(&a.train))?;
    let tags = expand_bio(vocab)?;
    g.log.info(format!(
        "training on {} documents ({} categories), {} dev documents",
        train.len(),
        tags.categories().len(),
        dev.len()
    ));

    let outcome = training::train(&train, &dev, &tags, &features, &cfg)?;
    outcome.model.save(&a.out)?;

    let mut log = Output::open(a.log.as_deref())?;
    for rec in &outcome.log {
        log.record(rec)?;
    }
    log.finish()?;
    g.log.info(format!(
        "best dev F1 {:.4} at step {} of {}; model written to {}",
        outcome.best_f1,
        outcome.best_step,
        outcome.steps,
        a.out.display()
    ));
    Ok(())
}
