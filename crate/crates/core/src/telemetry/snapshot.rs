use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::detectors::DetectorConfig;
use crate::diversity::anchor_distance;
use crate::embedding::{project_2d, EmbeddingConfig, Projection2D};
use crate::error::{Error, Result};
use crate::matrix::{MatrixF32, MatrixF64};
use crate::store::{AnchorSet, Category, ConceptSpace, Run};
use crate::telemetry::{analyze_checkpoint, category_stats};

pub const DEFAULT_TOP_K: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SnapshotOptions {
    pub detector: DetectorConfig,
    pub embedding: EmbeddingConfig,
    /// Number of most-activating probes reported per neuron.
    pub top_k: usize,
}

impl Default for SnapshotOptions {
    fn default() -> Self {
        Self {
            detector: DetectorConfig::default(),
            embedding: EmbeddingConfig::default(),
            top_k: DEFAULT_TOP_K,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeuronRecord {
    pub neuron: usize,
    pub concept: String,
    pub concept_index: usize,
    pub category: Category,
    pub similarity: f64,
    pub interpretable: bool,
    pub x: f64,
    pub y: f64,
    /// Probe indices by descending activation.
    pub top_probes: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub top_images: Option<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnchorRecord {
    pub word: String,
    pub x: f64,
    pub y: f64,
}

/// Which vocabulary `d_anchor` was measured against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnchorSource {
    /// An explicit anchor set.
    Anchors,
    /// No anchors given: the concept set doubles as the anchor set.
    Concepts,
}

/// The per-checkpoint report: 2D layout, per-neuron concepts with top
/// probes, category bars, and concept diversity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub run_id: String,
    pub layer: String,
    pub epoch: u64,
    pub detector: DetectorConfig,
    pub temperature: f64,
    pub top_k: usize,
    pub concept_space: String,
    pub concept_count: usize,
    pub neurons: Vec<NeuronRecord>,
    pub anchors: Vec<AnchorRecord>,
    pub anchor_source: AnchorSource,
    pub explained_variance: [f64; 2],
    pub d_anchor: f64,
    pub pairwise_diversity: f64,
    pub neuron_count: usize,
    pub interpretable_count: usize,
    pub interpretable_percentage: f64,
    pub category_counts: BTreeMap<Category, usize>,
    pub category_percentages: BTreeMap<Category, f64>,
}

impl Snapshot {
    pub fn id(&self) -> String {
        format!("{}:{}@{}", self.run_id, self.layer, self.epoch)
    }
}

/// Indices of the `k` largest entries of `col`, largest first; ties keep
/// the lower index first.
pub fn top_probes(col: &[f32], k: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..col.len()).collect();
    idx.sort_by(|&a, &b| col[b].total_cmp(&col[a]).then(a.cmp(&b)));
    idx.truncate(k);
    idx
}

/// In-memory inputs of a snapshot.
pub struct SnapshotInput<'a> {
    pub run_id: &'a str,
    pub layer: &'a str,
    pub epoch: u64,
    pub activations: &'a MatrixF32,
    pub space: &'a ConceptSpace,
    pub anchors: Option<&'a AnchorSet>,
    pub probe_images: Option<&'a [String]>,
}

pub(crate) fn stack_rows(blocks: &[&MatrixF64]) -> MatrixF64 {
    let cols = blocks.first().map_or(0, |b| b.cols());
    let rows = blocks.iter().map(|b| b.rows()).sum();
    let mut data = Vec::with_capacity(rows * cols);
    for b in blocks {
        data.extend_from_slice(b.as_slice());
    }
    MatrixF64::from_vec(rows, cols, data).unwrap()
}

/// 2D layout of `points`, or `None` when they have no spread: a single
/// point, or a dead layer with every neuron on one point and no anchors.
pub(crate) fn fit_layout(points: &MatrixF64) -> Result<Option<Projection2D>> {
    if points.rows() < 2 {
        return Ok(None);
    }
    match project_2d(points) {
        Ok(p) => Ok(Some(p)),
        Err(Error::ZeroVariance) => Ok(None),
        Err(e) => Err(e),
    }
}

pub fn build_snapshot_from(input: SnapshotInput<'_>, opts: &SnapshotOptions) -> Result<Snapshot> {
    let q = input.activations;
    let space = input.space;
    if opts.top_k == 0 || opts.top_k > q.rows() {
        return Err(Error::InvalidInput(format!(
            "top-k {} outside 1..={}",
            opts.top_k,
            q.rows()
        )));
    }
    if let Some(a) = input.anchors {
        if a.dim() != space.dim() {
            return Err(Error::DimensionMismatch(format!(
                "embedding dimension mismatch: concepts d={}, anchors d={}",
                space.dim(),
                a.dim()
            )));
        }
    }
    let state = analyze_checkpoint(q, space, &opts.detector, &opts.embedding)?;
    let stats = category_stats(&state.assignment)?;

    let concept_anchors;
    let (diversity_anchors, anchor_source) = match input.anchors {
        Some(a) => (a, AnchorSource::Anchors),
        None => {
            concept_anchors = space.as_anchor_set();
            (&concept_anchors, AnchorSource::Concepts)
        }
    };
    let diversity = anchor_distance(&state.embeddings, diversity_anchors)?;

    let display_anchors = input.anchors.map(|a| a.embeddings().to_f64());
    let mut blocks = vec![&state.embeddings.embeddings];
    if let Some(a) = &display_anchors {
        blocks.push(a);
    }
    let points = stack_rows(&blocks);
    let (coords, explained) = match fit_layout(&points)? {
        Some(p) => (p.coordinates, p.basis.explained_variance),
        None => (MatrixF64::zeros(points.rows(), 2), [0.0, 0.0]),
    };

    let n_neurons = q.cols();
    let neurons = state
        .assignment
        .neurons
        .iter()
        .enumerate()
        .map(|(n, a)| {
            let top = top_probes(&q.column(n), opts.top_k);
            let top_images = input
                .probe_images
                .map(|ids| top.iter().map(|&k| ids[k].clone()).collect());
            NeuronRecord {
                neuron: n,
                concept: space.concept(a.concept).word.clone(),
                concept_index: a.concept,
                category: a.category,
                similarity: a.similarity,
                interpretable: a.interpretable,
                x: coords.get(n, 0),
                y: coords.get(n, 1),
                top_probes: top,
                top_images,
            }
        })
        .collect();
    let anchors = input
        .anchors
        .map(|a| {
            a.words()
                .iter()
                .enumerate()
                .map(|(i, w)| AnchorRecord {
                    word: w.clone(),
                    x: coords.get(n_neurons + i, 0),
                    y: coords.get(n_neurons + i, 1),
                })
                .collect()
        })
        .unwrap_or_default();

    Ok(Snapshot {
        run_id: input.run_id.to_string(),
        layer: input.layer.to_string(),
        epoch: input.epoch,
        detector: state.sims.detector,
        temperature: opts.embedding.temperature,
        top_k: opts.top_k,
        concept_space: space.fingerprint(),
        concept_count: space.len(),
        neurons,
        anchors,
        anchor_source,
        explained_variance: explained,
        d_anchor: diversity.d_anchor,
        pairwise_diversity: diversity.pairwise_diversity,
        neuron_count: stats.neuron_count,
        interpretable_count: stats.interpretable_count,
        interpretable_percentage: stats.interpretable_percentage,
        category_counts: stats.counts,
        category_percentages: stats.percentages,
    })
}

/// Builds the snapshot of `layer` at `epoch`. `anchors` overrides the
/// manifest's anchor set.
pub fn build_snapshot(
    run: &Run,
    layer: &str,
    epoch: u64,
    opts: &SnapshotOptions,
    anchors: Option<&AnchorSet>,
) -> Result<Snapshot> {
    let activations = run.activations(layer, epoch)?;
    build_snapshot_from(
        SnapshotInput {
            run_id: &run.manifest().run_id,
            layer,
            epoch,
            activations: &activations,
            space: run.concepts(),
            anchors: anchors.or(run.anchors()),
            probe_images: run.probe_images(),
        },
        opts,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn top_probe_order() {
        assert_eq!(top_probes(&[9.0, 1.0, 1.0, 1.0, 1.0], 1), vec![0]);
        assert_eq!(top_probes(&[1.0, 3.0, 3.0, 2.0], 3), vec![1, 2, 3]);
    }
}
