//! Per-checkpoint snapshots, cross-checkpoint neuron trajectories and
//! run-to-run comparisons.

mod compare;
mod snapshot;
mod trajectory;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::detectors::{assign_concepts, compute_similarity, ConceptAssignment, DetectorConfig, SimilarityMatrix};
use crate::embedding::{neuron_embeddings, EmbeddingConfig, NeuronEmbeddingSet};
use crate::error::{Error, Result};
use crate::matrix::MatrixF32;
use crate::store::{Category, ConceptSpace};

pub use compare::{compare_runs, ConceptDelta, CountDelta, RunComparison, SnapshotRef, ValueDelta};
pub use snapshot::{
    build_snapshot, build_snapshot_from, top_probes, AnchorRecord, AnchorSource, NeuronRecord, Snapshot,
    SnapshotInput, SnapshotOptions, DEFAULT_TOP_K,
};
pub use trajectory::{
    settle_epoch, track_neurons, track_neurons_from, TrackReport, Trajectory, TrajectoryPoint,
    DEFAULT_SETTLE_DELTA,
};

/// Interpretable-neuron counts per category; percentages are relative to
/// all neurons in the layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryStats {
    pub counts: BTreeMap<Category, usize>,
    pub percentages: BTreeMap<Category, f64>,
    pub neuron_count: usize,
    pub interpretable_count: usize,
    pub interpretable_percentage: f64,
}

pub fn category_stats(assignment: &ConceptAssignment) -> Result<CategoryStats> {
    if assignment.is_empty() {
        return Err(Error::InvalidInput("empty assignment".into()));
    }
    let total = assignment.len();
    let mut counts: BTreeMap<Category, usize> = Category::ALL.iter().map(|&c| (c, 0)).collect();
    for n in assignment.neurons.iter().filter(|n| n.interpretable) {
        *counts.get_mut(&n.category).unwrap() += 1;
    }
    let pct = |n: usize| 100.0 * n as f64 / total as f64;
    let percentages = counts.iter().map(|(&c, &n)| (c, pct(n))).collect();
    let interpretable_count = assignment.interpretable_count();
    Ok(CategoryStats {
        counts,
        percentages,
        neuron_count: total,
        interpretable_count,
        interpretable_percentage: pct(interpretable_count),
    })
}

/// Everything derived from one checkpoint's activations.
#[derive(Debug, Clone)]
pub(crate) struct CheckpointState {
    pub sims: SimilarityMatrix,
    pub assignment: ConceptAssignment,
    pub embeddings: NeuronEmbeddingSet,
}

pub(crate) fn analyze_checkpoint(
    activations: &MatrixF32,
    space: &ConceptSpace,
    detector: &DetectorConfig,
    embedding: &EmbeddingConfig,
) -> Result<CheckpointState> {
    let sims = compute_similarity(activations, space, detector)?;
    let assignment = assign_concepts(&sims, space, detector)?;
    let embeddings = neuron_embeddings(&sims, space, embedding)?;
    Ok(CheckpointState {
        sims,
        assignment,
        embeddings,
    })
}
