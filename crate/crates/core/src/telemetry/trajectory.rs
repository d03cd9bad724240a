use serde::{Deserialize, Serialize};

use crate::detectors::DetectorConfig;
use crate::embedding::ProjectionBasis;
use crate::error::{Error, Result};
use crate::linalg::distance;
use crate::matrix::{MatrixF32, MatrixF64};
use crate::store::{AnchorSet, ConceptSpace, Run};
use crate::telemetry::snapshot::{fit_layout, stack_rows};
use crate::telemetry::{analyze_checkpoint, AnchorRecord, SnapshotOptions};

pub const DEFAULT_SETTLE_DELTA: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryPoint {
    pub epoch: u64,
    pub concept: String,
    pub concept_index: usize,
    pub similarity: f64,
    pub interpretable: bool,
    pub x: f64,
    pub y: f64,
    /// Distance from the neuron embedding to each tracked anchor, in anchor order.
    pub anchor_distances: Vec<f64>,
    pub embedding: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub neuron: usize,
    pub points: Vec<TrajectoryPoint>,
    pub settle_epoch: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackReport {
    pub run_id: String,
    pub layer: String,
    pub epochs: Vec<u64>,
    pub detector: DetectorConfig,
    pub temperature: f64,
    pub settle_delta: f64,
    /// Shared basis fitted over every checkpoint's embeddings plus anchors;
    /// absent when all those points coincide.
    pub basis: Option<ProjectionBasis>,
    pub anchors: Vec<AnchorRecord>,
    pub trajectories: Vec<Trajectory>,
}

/// Earliest epoch from which the neuron stays within `delta` of its final
/// embedding. `None` when only the final checkpoint itself qualifies.
pub fn settle_epoch(traj: &Trajectory, delta: f64) -> Option<u64> {
    let last = traj.points.last()?;
    let mut first_settled = traj.points.len() - 1;
    for (i, p) in traj.points.iter().enumerate().rev() {
        if distance(&p.embedding, &last.embedding) <= delta {
            first_settled = i;
        } else {
            break;
        }
    }
    (first_settled + 1 < traj.points.len()).then(|| traj.points[first_settled].epoch)
}

/// Tracks `neurons` across in-memory checkpoints given in epoch order.
#[allow(clippy::too_many_arguments)]
pub fn track_neurons_from(
    run_id: &str,
    layer: &str,
    checkpoints: &[(u64, MatrixF32)],
    space: &ConceptSpace,
    neurons: &[usize],
    opts: &SnapshotOptions,
    anchors: Option<&AnchorSet>,
    settle_delta: f64,
) -> Result<TrackReport> {
    if checkpoints.is_empty() {
        return Err(Error::InvalidInput("no checkpoints to track".into()));
    }
    if settle_delta.is_nan() || settle_delta <= 0.0 {
        return Err(Error::InvalidInput(format!(
            "settle delta must be positive, got {settle_delta}"
        )));
    }
    if checkpoints.windows(2).any(|w| w[0].0 >= w[1].0) {
        return Err(Error::InvalidInput("checkpoint epochs must be strictly increasing".into()));
    }
    let n_neurons = checkpoints[0].1.cols();
    if let Some(&bad) = neurons.iter().find(|&&n| n >= n_neurons) {
        return Err(Error::InvalidInput(format!(
            "invalid neuron index {bad}: layer {layer} has {n_neurons} neurons"
        )));
    }
    if let Some(a) = anchors {
        if a.dim() != space.dim() {
            return Err(Error::DimensionMismatch(format!(
                "embedding dimension mismatch: concepts d={}, anchors d={}",
                space.dim(),
                a.dim()
            )));
        }
    }
    let states = checkpoints
        .iter()
        .map(|(_, q)| analyze_checkpoint(q, space, &opts.detector, &opts.embedding))
        .collect::<Result<Vec<_>>>()?;

    let anchor_emb = anchors.map(|a| a.embeddings().to_f64());
    let mut blocks: Vec<&MatrixF64> = states.iter().map(|s| &s.embeddings.embeddings).collect();
    if let Some(a) = &anchor_emb {
        blocks.push(a);
    }
    let basis = fit_layout(&stack_rows(&blocks))?.map(|p| p.basis);
    let place = |v: &[f64]| basis.as_ref().map_or([0.0, 0.0], |b| b.project_point(v));

    let anchor_records = match (anchors, &anchor_emb) {
        (Some(a), Some(emb)) => a
            .words()
            .iter()
            .enumerate()
            .map(|(i, w)| {
                let [x, y] = place(emb.row(i));
                AnchorRecord { word: w.clone(), x, y }
            })
            .collect(),
        _ => Vec::new(),
    };

    let trajectories = neurons
        .iter()
        .map(|&n| {
            let points = checkpoints
                .iter()
                .zip(&states)
                .map(|((epoch, _), state)| {
                    let u = state.embeddings.embedding(n);
                    let a = state.assignment.neurons[n];
                    let [x, y] = place(u);
                    TrajectoryPoint {
                        epoch: *epoch,
                        concept: space.concept(a.concept).word.clone(),
                        concept_index: a.concept,
                        similarity: a.similarity,
                        interpretable: a.interpretable,
                        x,
                        y,
                        anchor_distances: anchor_emb
                            .as_ref()
                            .map(|e| e.row_iter().map(|r| distance(u, r)).collect())
                            .unwrap_or_default(),
                        embedding: u.to_vec(),
                    }
                })
                .collect();
            let mut t = Trajectory {
                neuron: n,
                points,
                settle_epoch: None,
            };
            t.settle_epoch = settle_epoch(&t, settle_delta);
            t
        })
        .collect();

    Ok(TrackReport {
        run_id: run_id.to_string(),
        layer: layer.to_string(),
        epochs: checkpoints.iter().map(|(e, _)| *e).collect(),
        detector: states[0].sims.detector,
        temperature: opts.embedding.temperature,
        settle_delta,
        basis,
        anchors: anchor_records,
        trajectories,
    })
}

/// Tracks `neurons` of `layer` over every checkpoint in the manifest.
pub fn track_neurons(
    run: &Run,
    layer: &str,
    neurons: &[usize],
    opts: &SnapshotOptions,
    anchors: Option<&AnchorSet>,
    settle_delta: f64,
) -> Result<TrackReport> {
    let entry = run.layer(layer)?;
    let checkpoints = entry
        .epochs()
        .into_iter()
        .map(|e| Ok((e, run.activations(layer, e)?)))
        .collect::<Result<Vec<_>>>()?;
    track_neurons_from(
        &run.manifest().run_id,
        layer,
        &checkpoints,
        run.concepts(),
        neurons,
        opts,
        anchors.or(run.anchors()),
        settle_delta,
    )
}
