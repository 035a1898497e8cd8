//! Drift-adaptive online learning for data streams.
//!
//! Incremental Hoeffding trees, ADWIN and DDM drift detectors, online
//! ensembles (adaptive random forest, streaming random patches, leveraging
//! bagging), the performance-weighted probability averaging ensemble
//! ([`pwpae::PwpaeModel`]), k-means cluster sampling, and prequential
//! evaluation.

pub mod detectors;
pub mod ensembles;
pub mod error;
pub mod eval;
pub mod pwpae;
pub mod registry;
pub mod rng;
pub mod sampling;
pub mod streams;
pub mod trees;
pub mod types;

pub use error::{Error, Result};
pub use rng::{derive_seed, poisson_draw, SeededRng};
pub use types::{
    argmax_class, normalize, AdaptiveLearner, ClassDistribution, DriftSignal, Instance,
    LabeledInstance, StreamSchema,
};
