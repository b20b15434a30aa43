//! Attention-guided dynamic sparse training for unsupervised feature selection.
//!
//! A single-hidden-layer denoising autoencoder is trained with truly sparse
//! weights. While it trains, the importance of every input and output neuron
//! is accumulated from reconstruction sensitivity and connected weight
//! magnitude, and the sparse topology is rewired towards important neurons.
//! The `K` input neurons with the highest accumulated importance are the
//! selected features.
//!
//! ```no_run
//! use rand::SeedableRng;
//! use wast_core::{data, model, TrainConfig};
//!
//! let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0);
//! let mut ds = data::synth_informative(data::SynthParams::madelon_like(), &mut rng)?;
//! data::standardize(&mut ds, &mut [])?;
//! let trained = model::train(&TrainConfig::default(), &ds, &mut rng)?;
//! let top20 = trained.select(20)?;
//! # Ok::<(), wast_core::Error>(())
//! ```

pub mod config;
pub mod data;
pub mod error;
pub mod eval;
pub mod model;
pub mod report;
pub mod selection;
pub mod sparse;
pub mod topology;

pub use config::TrainConfig;
pub use data::{Dataset, SynthParams};
pub use error::{Error, Result};
pub use eval::{CostReport, ScoreBoard};
pub use model::{SparseAutoencoder, TrainedModel};
pub use report::RunReport;
pub use selection::FeatureRanking;
pub use sparse::{BatchActivations, Edge, SparseLayer};
pub use topology::{GrowRule, ImportanceState, Schedule, TopologyPolicy, Variant};
