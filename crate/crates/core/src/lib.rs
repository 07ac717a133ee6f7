//! Dirichlet process mixture models with exponential-family components,
//! fitted by coordinate-ascent variational inference and used to score
//! novelty on mixed-type tabular data.
//!
//! The pipeline is: parse a [`data::FeatureSchema`], load and encode rows
//! into a [`data::DatasetView`], [`dpmm::fit`] a model, then score rows with
//! [`dpmm::score_mc`] or [`dpmm::score_exact_gaussian`] and rank them with
//! the [`eval`] metrics.

pub mod cli;
pub mod data;
pub mod dpmm;
pub mod error;
pub mod eval;
pub mod expfam;
pub mod linalg;
pub mod rng;
pub mod special;
pub mod synth;

pub use error::{Error, Result};
