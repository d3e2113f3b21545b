//! Automatic score-label synthesis and evaluation for instruction-guided
//! image editing.
//!
//! The crate turns embedding files into training labels and measures scorers
//! against human judgments:
//!
//! - [`synthetic`] labels candidates produced by editing methods using
//!   directional and image similarity rules.
//! - [`multiturn`] labels images from multi-turn edit sequences.
//! - [`dataset`] renders question/answer training text and reward prompts.
//! - [`probe`] is a small MLP scorer trained on those labels.
//! - [`eval`] implements point-wise, pair-wise and leaderboard protocols.
//!
//! Embeddings are read from a compact binary [`store`] or fetched from an
//! `/embed` service through [`remote`].

pub mod cli;
pub mod dataset;
pub mod error;
pub mod eval;
pub mod jsonl;
pub mod metrics;
pub mod multiturn;
pub mod probe;
pub mod remote;
pub mod seed;
pub mod store;
pub mod synthetic;
pub mod types;

pub use error::{Error, Result};
pub use store::{read_store, write_store, EmbeddingStore, Embeddings};
pub use types::{
    EditSequence, EmbeddingVector, EvalReport, Method, RankedModel, Role, ScoredRecord, Source, SyntheticSample,
    Thresholds,
};
