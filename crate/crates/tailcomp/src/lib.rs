//! Training-free compositional knowledge transfer for long-tail
//! classification over fixed embedding spaces.
//!
//! The pipeline: train a cosine classifier head on imbalanced embeddings,
//! compute class prototypes, then recompose common-class classifier weights
//! into rare-class representations with a temperature-sharpened attention
//! mechanism. Hybrid classifiers built at different eligibility thresholds
//! are ensembled by averaging their softmax outputs, and the continual
//! variant extends a trained head to classes it never saw.

pub mod core;
pub mod data;
pub mod error;
pub mod eval;
pub mod experiment;
pub mod head;
pub mod prototypes;
pub mod sampling;
pub mod transfer;

pub use error::{Error, Result};
