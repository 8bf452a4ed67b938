//! Joint statement segmentation and category labelling.
//!
//! The core model is a linear-chain CRF over BIO tags whose emission scores
//! come from a pluggable source: a hashed-feature linear model, score files
//! written by an external encoder, or per-window scores stitched together.
//! Alongside it live a constrained generator that drives any next-token
//! scorer through a parrot-or-tag automaton, span-level evaluation, and the
//! scaling analytics built on top of labelled statements.

pub mod analytics;
pub mod corpus;
pub mod crf;
pub mod emissions;
pub mod error;
pub mod evaluation;
pub mod generation;
pub mod model;
pub mod seq2seq;
pub mod synthetic;
pub mod tagset;
pub mod tokenize;
pub mod training;

pub use error::{Error, Result};
