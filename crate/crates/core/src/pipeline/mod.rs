//! Desk-scale training loop: synthetic or precomputed embeddings, k-means
//! warm-up, CAOT pseudo-labeling on every post-warm-up batch, and
//! gradient-descent updates of the three heads.

mod bench;
mod data;
mod kmeans;
mod train;

pub use bench::{class_subset, compare_labelers, pseudo_label_bench, BenchReport, Labeler, LabelerScore, SAMPLES_PER_CLASS};
pub use data::{synth_dataset, Dataset, SynthSpec};
pub use kmeans::{kmeans, kmeans_fit, KMeansFit};
pub use train::{
    forward_heads, predict, run_pota, semantic_similarity, train, BatchViews, CouplingSnapshot, EpochRecord, Forward,
    GradMode, Heads, LabelSource, RunConfig, RunReport,
};
