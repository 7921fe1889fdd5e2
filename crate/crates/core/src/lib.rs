//! Temporal-clustering transformations of irregular multivariate time
//! series.
//!
//! The crate covers the whole pipeline: the event-sequence data model
//! ([`sequence`]), deterministic coarsening ([`coarsen`], backed by exact
//! 1-D k-means in [`kmeans`]), stochastic merge augmentation
//! ([`augment`]), feature encoding ([`codec`]), a reference predictor and
//! the multi-resolution attention ensemble ([`model`]), metrics and
//! robustness probes ([`eval`]), a synthetic data generator ([`synth`]) and
//! the line-delimited record format used by the command-line tool
//! ([`records`]).

pub mod augment;
pub mod coarsen;
pub mod codec;
pub mod error;
pub mod eval;
pub mod kmeans;
pub mod model;
pub mod records;
pub mod sequence;
pub mod synth;

pub use error::{Error, Result};
