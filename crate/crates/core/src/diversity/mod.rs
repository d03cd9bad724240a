//! Concept-diversity metrics over neuron embeddings, the differentiable
//! regularizer, and a small training sandbox that exercises it.

mod grad;
mod sandbox;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::detectors::SimilarityMatrix;
use crate::embedding::{neuron_embeddings, EmbeddingConfig, NeuronEmbeddingSet};
use crate::error::{Error, Result};
use crate::linalg::distance;
use crate::matrix::MatrixF64;
use crate::store::{AnchorSet, ConceptSpace};

pub use grad::{anchor_distance_grad, RegularizerConfig};
pub use sandbox::{
    sandbox_train, sandbox_train_without_regularizer_gradient, OptimizerParams, SandboxProblem,
    SandboxSpec, TraceStep,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnchorMatch {
    /// Closest neuron (lowest index on ties).
    pub neuron: usize,
    pub distance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiversityReport {
    pub d_anchor: f64,
    pub nearest: Vec<AnchorMatch>,
    /// Mean pairwise distance among neuron embeddings; 0 for a single neuron.
    pub pairwise_diversity: f64,
}

/// Closest row of `points` to `target`.
fn nearest(points: &MatrixF64, target: &[f64]) -> AnchorMatch {
    let mut best = AnchorMatch {
        neuron: 0,
        distance: f64::INFINITY,
    };
    for (j, p) in points.row_iter().enumerate() {
        let d = distance(p, target);
        if d < best.distance {
            best = AnchorMatch {
                neuron: j,
                distance: d,
            };
        }
    }
    best
}

pub(crate) fn anchor_matches(embeddings: &MatrixF64, anchors: &MatrixF64) -> Result<Vec<AnchorMatch>> {
    if embeddings.rows() == 0 {
        return Err(Error::InvalidInput("no neuron embeddings".into()));
    }
    if anchors.rows() == 0 {
        return Err(Error::InvalidInput("anchor set is empty".into()));
    }
    if embeddings.cols() != anchors.cols() {
        return Err(Error::DimensionMismatch(format!(
            "neuron embeddings are {}-dimensional, anchors {}-dimensional",
            embeddings.cols(),
            anchors.cols()
        )));
    }
    Ok((0..anchors.rows())
        .into_par_iter()
        .map(|i| nearest(embeddings, anchors.row(i)))
        .collect())
}

fn mean_distance(matches: &[AnchorMatch]) -> f64 {
    matches.iter().map(|m| m.distance).sum::<f64>() / matches.len() as f64
}

/// Mean over anchors of the distance to the nearest neuron embedding.
pub fn anchor_distance(set: &NeuronEmbeddingSet, anchors: &AnchorSet) -> Result<DiversityReport> {
    let matches = anchor_matches(&set.embeddings, &anchors.embeddings().to_f64())?;
    let pairwise_diversity = if set.len() >= 2 {
        pairwise_mean(&set.embeddings)
    } else {
        0.0
    };
    Ok(DiversityReport {
        d_anchor: mean_distance(&matches),
        nearest: matches,
        pairwise_diversity,
    })
}

fn pairwise_mean(u: &MatrixF64) -> f64 {
    let n = u.rows();
    let partial: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|j| (j + 1..n).map(|k| distance(u.row(j), u.row(k))).sum())
        .collect();
    let pairs = (n * (n - 1) / 2) as f64;
    partial.iter().sum::<f64>() / pairs
}

/// Mean distance over all unordered pairs of neuron embeddings.
pub fn pairwise_diversity(set: &NeuronEmbeddingSet) -> Result<f64> {
    if set.len() < 2 {
        return Err(Error::InvalidInput(format!(
            "pairwise diversity needs at least 2 neurons, got {}",
            set.len()
        )));
    }
    Ok(pairwise_mean(&set.embeddings))
}

/// Anchor distance of the same similarities embedded at each temperature.
pub fn temperature_sweep(
    sims: &SimilarityMatrix,
    space: &ConceptSpace,
    anchors: &AnchorSet,
    temperatures: &[f64],
) -> Result<Vec<(f64, f64)>> {
    if temperatures.is_empty() {
        return Err(Error::InvalidInput("temperature list is empty".into()));
    }
    let anchor_emb = anchors.embeddings().to_f64();
    temperatures
        .iter()
        .map(|&t| {
            let set = neuron_embeddings(sims, space, &EmbeddingConfig::new(t)?)?;
            let matches = anchor_matches(&set.embeddings, &anchor_emb)?;
            Ok((t, mean_distance(&matches)))
        })
        .collect()
}
