//! On-disk formats: matrix files, concept/anchor word lists, run manifests.

pub mod concepts;
pub mod manifest;
pub mod matrix_file;

pub use concepts::{AnchorSet, Category, Concept, ConceptSpace};
pub use manifest::{
    validate_run, AnchorFiles, Check, CheckpointEntry, ConceptFiles, LayerEntry, Run, RunManifest, ValidationReport,
};
pub use matrix_file::{load_matrix, write_matrix};
