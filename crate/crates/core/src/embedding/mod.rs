//! The unified embedding space: each neuron becomes a softmax-weighted
//! mixture of concept text embeddings.

mod projection;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::detectors::SimilarityMatrix;
use crate::error::{Error, Result};
use crate::linalg::matmul;
use crate::matrix::MatrixF64;
use crate::store::{AnchorSet, ConceptSpace};

pub use projection::{project_2d, PcaProjector, Projection2D, ProjectionBasis, Projector};

pub const DEFAULT_TEMPERATURE: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingConfig {
    pub temperature: f64,
}

impl Default for EmbeddingConfig {
    fn default() -> Self {
        Self {
            temperature: DEFAULT_TEMPERATURE,
        }
    }
}

impl EmbeddingConfig {
    pub fn new(temperature: f64) -> Result<Self> {
        check_temperature(temperature)?;
        Ok(Self { temperature })
    }
}

fn check_temperature(t: f64) -> Result<()> {
    if t > 0.0 && t.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!(
            "temperature must be positive and finite, got {t}"
        )))
    }
}

/// `softmax(sims / T)` with the maximum subtracted first.
pub fn softmax_weights(sims: &[f64], temperature: f64) -> Result<Vec<f64>> {
    if sims.is_empty() {
        return Err(Error::InvalidInput("empty similarity row".into()));
    }
    check_temperature(temperature)?;
    Ok(softmax_unchecked(sims, temperature))
}

pub(crate) fn softmax_unchecked(sims: &[f64], temperature: f64) -> Vec<f64> {
    let max = sims.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = sims.iter().map(|s| ((s - max) / temperature).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

/// Neuron embeddings `U` (one row per neuron) together with the softmax
/// weights `Λ` that produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct NeuronEmbeddingSet {
    pub embeddings: MatrixF64,
    pub weights: MatrixF64,
    pub checkpoint: Option<String>,
}

impl NeuronEmbeddingSet {
    pub fn len(&self) -> usize {
        self.embeddings.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.embeddings.rows() == 0
    }

    pub fn dim(&self) -> usize {
        self.embeddings.cols()
    }

    pub fn embedding(&self, neuron: usize) -> &[f64] {
        self.embeddings.row(neuron)
    }

    pub fn with_checkpoint(mut self, id: impl Into<String>) -> Self {
        self.checkpoint = Some(id.into());
        self
    }
}

pub fn neuron_embeddings(
    sims: &SimilarityMatrix,
    space: &ConceptSpace,
    cfg: &EmbeddingConfig,
) -> Result<NeuronEmbeddingSet> {
    check_temperature(cfg.temperature)?;
    if sims.n_concepts() != space.len() {
        return Err(Error::DimensionMismatch(format!(
            "similarity matrix has {} concept columns, concept space has {}",
            sims.n_concepts(),
            space.len()
        )));
    }
    let weight_rows: Vec<Vec<f64>> = (0..sims.n_neurons())
        .into_par_iter()
        .map(|n| softmax_unchecked(sims.row(n), cfg.temperature))
        .collect();
    let mut weights = MatrixF64::zeros(sims.n_neurons(), space.len());
    for (n, row) in weight_rows.iter().enumerate() {
        weights.row_mut(n).copy_from_slice(row);
    }
    let concepts = space.embeddings().to_f64();
    let embeddings = matmul(&weights, &concepts);
    Ok(NeuronEmbeddingSet {
        embeddings,
        weights,
        checkpoint: None,
    })
}

/// Embedding of an anchor word.
pub fn embed_anchor(word: &str, anchors: &AnchorSet) -> Result<Vec<f64>> {
    Ok(anchors.embed(word)?.iter().map(|&v| f64::from(v)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detectors::DetectorConfig;
    use crate::matrix::MatrixF32;
    use crate::store::{Category, Concept};

    fn space_2d() -> ConceptSpace {
        let concepts = ["a", "b"]
            .map(|w| Concept {
                word: w.into(),
                category: Category::Other,
            })
            .to_vec();
        ConceptSpace::new(
            concepts,
            MatrixF32::from_vec(2, 2, vec![1.0, 0.0, 0.0, 1.0]).unwrap(),
            None,
            None,
        )
        .unwrap()
    }

    fn sims(rows: &[Vec<f64>]) -> SimilarityMatrix {
        SimilarityMatrix {
            values: MatrixF64::from_rows(rows).unwrap(),
            detector: DetectorConfig::default(),
        }
    }

    #[test]
    fn softmax_of_two_and_one() {
        let w = softmax_weights(&[0.2, 0.1], 0.1).unwrap();
        // e/(1+e) and 1/(1+e)
        let e = std::f64::consts::E;
        assert!((w[0] - e / (1.0 + e)).abs() < 1e-12);
        assert!((w[1] - 1.0 / (1.0 + e)).abs() < 1e-12);
        assert!((w[0] - 0.73106).abs() < 1e-5);
    }

    #[test]
    fn singleton_and_hot_limits() {
        assert_eq!(softmax_weights(&[-3.0], 0.01).unwrap(), vec![1.0]);
        let w = softmax_weights(&[0.9, 0.5, 0.1], 1e6).unwrap();
        assert!(w.iter().all(|v| (v - 1.0 / 3.0).abs() < 1e-6));
    }

    #[test]
    fn softmax_errors() {
        assert!(softmax_weights(&[], 1.0).is_err());
        assert!(softmax_weights(&[1.0], 0.0).is_err());
        assert!(softmax_weights(&[1.0], -1.0).is_err());
    }

    #[test]
    fn small_temperature_does_not_overflow() {
        let w = softmax_weights(&[0.9, 0.85, -0.2], 0.001).unwrap();
        assert!(w.iter().all(|v| v.is_finite()));
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn embedding_is_linear_combination() {
        let set = neuron_embeddings(
            &sims(&[vec![0.2, 0.1]]),
            &space_2d(),
            &EmbeddingConfig::new(0.1).unwrap(),
        )
        .unwrap();
        let u = set.embedding(0);
        assert!((u[0] - 0.731_058_578_6).abs() < 1e-9);
        assert!((u[1] - 0.268_941_421_4).abs() < 1e-9);
    }

    #[test]
    fn cold_limit_selects_argmax_and_equal_sims_give_mean() {
        let set = neuron_embeddings(
            &sims(&[vec![0.1, 0.3], vec![0.5, 0.5]]),
            &space_2d(),
            &EmbeddingConfig::new(1e-6).unwrap(),
        )
        .unwrap();
        assert!((set.embedding(0)[0]).abs() < 1e-6);
        assert!((set.embedding(0)[1] - 1.0).abs() < 1e-6);
        assert_eq!(set.embedding(1), &[0.5, 0.5]);
    }

    #[test]
    fn dimension_mismatch() {
        assert!(neuron_embeddings(
            &sims(&[vec![0.1, 0.2, 0.3]]),
            &space_2d(),
            &EmbeddingConfig::default()
        )
        .is_err());
    }
}
