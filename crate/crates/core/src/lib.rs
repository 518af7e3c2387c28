//! Evaluation harness for knowledge injection into language models.
//!
//! The pipeline ingests a text knowledge base ([`corpus`]), builds an exact
//! dot-product index over it ([`retrieval`]), assembles retrieval-augmented
//! multiple-choice prompts and picks answers by log-likelihood argmax
//! ([`evaluation`]), and aggregates knowledge scores and relative gains into
//! tables ([`report`]). Dataset generation for question sets and paraphrase
//! augmentation lives in [`datagen`]; fine-tuning data preparation in
//! [`ftprep`]. Model access goes through the service traits in [`modelio`].
//!
//! Numeric code is generic over [`Scalar`]; the aliases below fix the common
//! `f64` instantiations.

pub mod artifact;
pub mod corpus;
pub mod datagen;
pub mod error;
pub mod evaluation;
pub mod ftprep;
pub mod modelio;
pub mod report;
pub mod retrieval;
mod scalar;

pub use error::{Error, Result};
pub use retrieval::RetrievalResult;
pub use scalar::Scalar;

/// Embedding with double-precision components.
pub type Embedding = retrieval::Embedding<f64>;
/// Embedding with single-precision components.
pub type Embedding32 = retrieval::Embedding<f32>;
/// Vector index storing double-precision vectors.
pub type VectorIndex = retrieval::VectorIndex<f64>;
/// Vector index storing single-precision vectors.
pub type VectorIndex32 = retrieval::VectorIndex<f32>;
/// Column-mean relative gains in `f64`.
pub type GainSummary = report::GainSummary<f64>;
/// Accuracy-vs-paraphrase-count analysis in `f64`.
pub type ParaphraseCurve = report::ParaphraseCurve<f64>;

/// Version string stamped into every artifact header.
pub const HARNESS_VERSION: &str = concat!("injectbench ", env!("CARGO_PKG_VERSION"));
