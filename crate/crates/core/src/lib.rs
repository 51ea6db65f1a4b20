//! Mining attribute-based access control policies from access logs.
//!
//! The crate covers the whole pipeline: the policy model and its decision
//! semantics, synthetic log generation, encoding and discretisation, k-modes
//! clustering, rule extraction, policy refinement and evaluation metrics.

pub mod cluster;
pub mod compiled;
pub mod enhance;
pub mod error;
pub mod io;
pub mod metrics;
pub mod mining;
pub mod model;
pub mod pipeline;
pub mod preprocess;
pub mod seed;
pub mod split;
pub mod synth;

pub use error::{Error, Result};
