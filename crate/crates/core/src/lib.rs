//! Consistency-aware adaptive optimal transport (CAOT) pseudo-labeling.
//!
//! The crate provides the transport solver with an adaptive cluster marginal
//! and a quadratic semantic-consistency term, the attention-based similarity
//! it consumes, the contrastive and attention losses used to train the heads,
//! a small end-to-end clustering pipeline, and the ACC/NMI metrics.

pub mod error;
pub mod labels;
pub mod linalg;
pub mod losses;
pub mod metrics;
pub mod pipeline;
pub mod similarity;
pub mod solver;

pub use error::{Error, Result};
pub use linalg::{Mat, RVec};
