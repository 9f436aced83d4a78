//! Multiplex network embedding with layer-imbalance-aware under-sampling.
//!
//! A multiplex network has one node set and several edge layers. When one
//! layer (the *target*) is far sparser than the others, jointly trained
//! embeddings are dominated by the dense auxiliary layers. This crate
//! under-samples the auxiliary layers, keeping edges whose endpoints are
//! similar in the target layer's embedding space, and trains an
//! attention-fused embedding model on the rebalanced network.
//!
//! Modules, bottom-up:
//!
//! * [`graph`]: the network type, file formats and imbalance statistics;
//! * [`sampler`]: similarity-driven under-sampling of auxiliary layers;
//! * [`model`]: per-layer and common embeddings, attention fusion;
//! * [`trainer`]: losses, exact gradients and the training schedule;
//! * [`eval`]: link-prediction AUC and node-classification F1;
//! * [`synth`]: planted-partition multiplex generators;
//! * [`config`] and [`experiment`]: run configuration and end-to-end runs.
//!
//! The guide in `book/` walks through each piece with runnable examples.

pub mod config;
pub mod error;
pub mod eval;
pub mod experiment;
pub mod graph;
pub mod math;
pub mod model;
pub mod rng;
pub mod sampler;
pub mod synth;
pub mod trainer;

pub use error::{Error, Result};
pub use graph::{LayerStats, MultiplexNetwork};
pub use model::{ModelConfig, ModelParams};
pub use sampler::{SampleResult, SamplerConfig};
pub use trainer::{TrainConfig, TrainLog, Variant};

// The guide's code blocks run as doc-tests so they cannot drift.
#[cfg(doctest)]
mod guide {
    #[doc = include_str!("../../../book/src/introduction.md")]
    struct Introduction;
    #[doc = include_str!("../../../book/src/multiplex.md")]
    struct Multiplex;
    #[doc = include_str!("../../../book/src/sampling.md")]
    struct Sampling;
    #[doc = include_str!("../../../book/src/model.md")]
    struct Model;
    #[doc = include_str!("../../../book/src/training.md")]
    struct Training;
    #[doc = include_str!("../../../book/src/evaluation.md")]
    struct Evaluation;
    #[doc = include_str!("../../../book/src/synthetic.md")]
    struct Synthetic;
    #[doc = include_str!("../../../book/src/cli.md")]
    struct Cli;
}
