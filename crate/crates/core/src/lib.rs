//! Degree-specific graph convolutional networks trained with self-supervised
//! soft labels.
//!
//! The crate is organised bottom-up: sparse matrices and graphs, a small
//! reverse-mode autodiff tape, GCN and degree-specific layers, the label
//! propagation annotator, the Bayesian teacher, the training pipeline, and
//! analysis tools.

pub mod analysis;
pub mod annotator;
pub mod autodiff;
pub mod checkpoint;
pub mod config;
pub mod error;
pub mod gradcheck;
pub mod graph;
pub mod layers;
pub mod optim;
pub mod params;
pub mod pipeline;
pub mod rng;
pub mod sparse;
pub mod stats;
pub mod teacher;

pub use error::{Error, Result};
