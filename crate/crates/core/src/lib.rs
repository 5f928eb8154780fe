//! Dataset-similarity metric for cross-silo federated learning.
//!
//! The pipeline: train a probe network for a single federated round, extract
//! penultimate activations per client, then solve per-class entropic optimal
//! transport over a hybrid cost (pairwise cosine dissimilarity plus the
//! Hellinger distance between per-class activation Gaussians). The aggregate
//! is normalized into [0,1], where low values predict beneficial
//! collaboration and high values predict detrimental collaboration.
//!
//! Modules:
//! - [`datagen`] — synthetic client datasets and heterogeneity mechanisms
//! - [`probe`] — local/federated training and activation extraction
//! - [`metric`] — cost construction, Sinkhorn, aggregation
//! - [`privacy`] — simulated SMC dot products, zCDP noise, budget gate and
//!   the reconstruction-attack harness
//! - [`harness`] — experiment scenarios, reporting and the CLI surface

pub mod datagen;
pub mod error;
pub mod harness;
pub mod linalg;
pub mod metric;
pub mod privacy;
pub mod probe;
pub mod rng;

pub use error::{Error, Result};
