//! Neuron-level concept telemetry for training checkpoints.
//!
//! The pipeline per checkpoint: activation matrix → [`detectors`] (neuron ×
//! concept similarity, best concept per neuron) → [`embedding`] (neurons as
//! softmax-weighted concept mixtures, 2D layout) → [`diversity`] (anchor
//! distance and its gradient) → [`telemetry`] (snapshots, trajectories,
//! run comparisons) → [`report`] (JSON, CSV, SVG).

pub mod atomic;
pub mod detectors;
pub mod diversity;
pub mod embedding;
pub mod error;
pub mod linalg;
pub mod matrix;
pub mod report;
pub mod store;
pub mod synthetic;
pub mod telemetry;

pub use error::{Error, Result};
pub use matrix::{Matrix, MatrixF32, MatrixF64};
