//! Benchmark framework for local, model-agnostic explanation approaches on
//! binary feature vectors.
//!
//! The crate is organised bottom-up:
//!
//! - [`dataset`]: binary labeled datasets, CSV ingestion, splits, planted-rule generators
//! - [`classifiers`]: random forest, k-nearest neighbours and MLP black boxes
//! - [`solvers`]: weighted lasso, weighted least squares, CART, EM mixture regression
//! - [`explain`]: LIME, Anchor, LORE, kernel SHAP and LEMNA interpreters
//! - [`metrics`]: dice similarity, stability, robustness, effectiveness, consistency
//! - [`harness`]: config-driven orchestration used by the `explainbench` binary

pub mod classifiers;
pub mod dataset;
pub mod error;
pub mod explain;
pub mod harness;
pub mod metrics;
pub mod solvers;
mod util;

pub use error::{Error, Result};
