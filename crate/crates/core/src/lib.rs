//! Stratified transfer learning for cross-position activity recognition.
//!
//! The crate covers the whole pipeline: windowed feature extraction from
//! raw sensor streams, kernel distances between domains, majority-vote
//! pseudo labeling, stratified source selection, the stratified activity
//! transfer solver, PCA/TCA baselines and an evaluation harness.

pub mod baselines;
pub mod benchmark;
pub mod classifier;
pub mod config;
pub mod data;
pub mod error;
pub mod experiment;
pub mod features;
pub mod kernel;
pub mod linalg;
pub mod metrics;
pub mod pseudo_label;
pub mod sat;
pub mod sds;

pub use data::{Domain, FeatureMatrix, Label, RESIDUAL};
pub use error::{Error, Result};
