//! Emotional dialogue act annotation toolkit.
//!
//! This crate provides the pieces of an automated dialogue-act annotation
//! pipeline for conversational corpora:
//!
//! - [`corpus`] — the conversational data model, tag inventories, tokenization,
//!   a JSONL corpus format, and a deterministic synthetic-corpus generator.
//! - [`encoder`] — embedding providers and the shared numeric building blocks
//!   (gated recurrent encoding, additive attention, mean pooling, softmax).
//! - [`annotators`] — the five neural dialogue-act annotators, their training,
//!   evaluation, gradient checking, and checkpointing.
//! - [`ensemble`] — fusion of the five per-utterance predictions into a single
//!   label with an AM/CM/BM/NM provenance category.
//! - [`reliability`] — inter-annotator agreement metrics (Krippendorff's alpha,
//!   Fleiss' kappa, Spearman rank correlation).
//! - [`analysis`] — dialogue-act/emotion co-occurrence, label distributions,
//!   case extraction, and CSV/SVG emission.
//! - [`cli`] — the `eda` command-line entry point wiring the pipeline.
//!
//! Start with the runnable programs under `examples/`; each one demonstrates a
//! single capability end to end on a small synthetic corpus.

pub mod analysis;
pub mod annotators;
pub mod cli;
pub mod corpus;
pub mod encoder;
pub mod ensemble;
mod error;
pub mod reliability;
mod rng;

pub use error::{EdaError, Result};
