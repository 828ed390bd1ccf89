//! Hierarchy-aware metric learning.
//!
//! Trains L2-normalized embeddings with a contrastive loss whose negative-pair
//! margins depend on the class pair: a semantic part derived from how high in
//! a label taxonomy two classes meet, plus a visual part recomputed every
//! epoch from the current embeddings. Retrieval quality is measured with
//! Recall@k at every level of the taxonomy.
//!
//! Module map:
//!
//! - [`taxonomy`]: label tree, LCS and tree dissimilarity
//! - [`embedder`]: feed-forward network with normalized output, backprop, SGD
//! - [`margins`]: semantic, visual and combined per-class-pair margins
//! - [`pairloss`]: contrastive loss and embedding gradients
//! - [`sampler`]: structured mini-batch planning
//! - [`trainer`]: the epoch loop
//! - [`retrieval`]: exact kNN and per-level Recall@k
//! - [`dataset`], [`synth`], [`config`], [`checkpoint`]: file formats and data

pub mod checkpoint;
pub mod config;
pub mod dataset;
pub mod embedder;
pub mod error;
pub mod margins;
pub mod pairloss;
pub mod report;
pub mod retrieval;
pub mod sampler;
pub mod seed;
pub mod synth;
pub mod taxonomy;
pub mod trainer;

pub use checkpoint::Checkpoint;
pub use config::FlatConfig;
pub use dataset::{load_dataset, Dataset, Record};
pub use embedder::{backward, EmbedderParams, Embedding, ForwardCache, GradientAccumulator};
pub use error::{Error, Result};
pub use margins::{
    build_margin_table, semantic_margin, visual_similarity, MarginConfig, MarginMode, MarginTable,
};
pub use pairloss::{loss_and_grad, LossReport, NegativePair, PairSet};
pub use retrieval::{knn, recall_at_k, Gallery, RecallReport};
pub use sampler::{draw_batch, BatchPlan, SamplerConfig};
pub use synth::{generate_synthetic, SyntheticSpec};
pub use taxonomy::{NodeId, Taxonomy};
pub use trainer::{embed_all, train, train_with, StepRecord, TrainConfig, TrainObserver, TrainState};
