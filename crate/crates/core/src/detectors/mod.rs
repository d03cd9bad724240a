//! Neuron-concept similarity under pluggable detectors, and the per-neuron
//! concept assignment derived from it.

mod cos3;
mod iou;
mod wpmi;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{MatrixF32, MatrixF64};
use crate::store::{Category, ConceptSpace};

pub use cos3::{center_cube, cos_cubed_sim};
pub(crate) use cos3::cubed_unit_columns;
pub use iou::{activation_threshold, iou_sim};
pub use wpmi::{soft_wpmi_from_inclusion, soft_wpmi_sim};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DetectorKind {
    Cos3,
    SoftWpmi,
    Iou,
}

impl DetectorKind {
    pub fn as_str(self) -> &'static str {
        match self {
            DetectorKind::Cos3 => "cos3",
            DetectorKind::SoftWpmi => "soft_wpmi",
            DetectorKind::Iou => "iou",
        }
    }

    /// Interpretability threshold used when none is given.
    pub fn default_tau(self) -> f64 {
        match self {
            DetectorKind::Cos3 | DetectorKind::SoftWpmi => 0.1,
            DetectorKind::Iou => 0.04,
        }
    }
}

impl std::str::FromStr for DetectorKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "cos3" => Ok(DetectorKind::Cos3),
            "soft_wpmi" | "soft-wpmi" => Ok(DetectorKind::SoftWpmi),
            "iou" => Ok(DetectorKind::Iou),
            _ => Err(format!("unknown detector {s:?} (expected cos3, soft_wpmi or iou)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SoftWpmiParams {
    /// Weight of the concept-prior penalty.
    pub lambda: f64,
    /// Softmax sharpness over concepts.
    pub gamma: f64,
    /// Number of top activations defining the inclusion threshold;
    /// `None` means `min(100, N_probe / 10)`, at least 1.
    pub top_k: Option<usize>,
    /// Steepness of the soft inclusion step.
    pub steepness: f64,
}

impl Default for SoftWpmiParams {
    fn default() -> Self {
        Self {
            lambda: 1.0,
            gamma: 0.05,
            top_k: None,
            steepness: 10.0,
        }
    }
}

impl SoftWpmiParams {
    pub fn resolved_top_k(&self, n_probe: usize) -> usize {
        self.top_k.unwrap_or_else(|| (n_probe / 10).clamp(1, 100))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IouParams {
    /// Fraction of probes counted as "activated" per neuron.
    pub quantile: f64,
}

impl Default for IouParams {
    fn default() -> Self {
        Self { quantile: 0.05 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectorConfig {
    pub kind: DetectorKind,
    pub tau: f64,
    pub soft_wpmi: SoftWpmiParams,
    pub iou: IouParams,
}

impl DetectorConfig {
    pub fn new(kind: DetectorKind) -> Self {
        Self {
            kind,
            tau: kind.default_tau(),
            soft_wpmi: SoftWpmiParams::default(),
            iou: IouParams::default(),
        }
    }

    pub fn with_tau(mut self, tau: f64) -> Self {
        self.tau = tau;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidInput(m));
        if !self.tau.is_finite() {
            return bad(format!("tau must be finite, got {}", self.tau));
        }
        let w = &self.soft_wpmi;
        if !(w.lambda >= 0.0 && w.lambda.is_finite()) {
            return bad(format!("soft-WPMI lambda must be >= 0, got {}", w.lambda));
        }
        if !(w.gamma > 0.0 && w.gamma.is_finite()) {
            return bad(format!("soft-WPMI gamma must be > 0, got {}", w.gamma));
        }
        if !(w.steepness > 0.0 && w.steepness.is_finite()) {
            return bad(format!("soft-WPMI steepness must be > 0, got {}", w.steepness));
        }
        if w.top_k == Some(0) {
            return bad("soft-WPMI top-k must be >= 1".into());
        }
        if !(self.iou.quantile > 0.0 && self.iou.quantile < 1.0) {
            return bad(format!("IoU quantile must be in (0,1), got {}", self.iou.quantile));
        }
        Ok(())
    }
}

impl Default for DetectorConfig {
    fn default() -> Self {
        Self::new(DetectorKind::Cos3)
    }
}

/// `values[(n, i)]` scores how well concept `i` describes neuron `n`.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityMatrix {
    pub values: MatrixF64,
    pub detector: DetectorConfig,
}

impl SimilarityMatrix {
    pub fn n_neurons(&self) -> usize {
        self.values.rows()
    }

    pub fn n_concepts(&self) -> usize {
        self.values.cols()
    }

    pub fn row(&self, neuron: usize) -> &[f64] {
        self.values.row(neuron)
    }
}

fn need<'a>(m: Option<&'a MatrixF32>, what: &str, cfg: &DetectorConfig) -> Result<&'a MatrixF32> {
    m.ok_or_else(|| {
        Error::InvalidInput(format!(
            "detector {} needs {what}, which the concept space lacks",
            cfg.kind.as_str()
        ))
    })
}

/// Runs the configured detector on a checkpoint's activations.
pub fn compute_similarity(
    activations: &MatrixF32,
    space: &ConceptSpace,
    cfg: &DetectorConfig,
) -> Result<SimilarityMatrix> {
    cfg.validate()?;
    let mut sims = match cfg.kind {
        DetectorKind::Cos3 => cos_cubed_sim(activations, need(space.probe_sims(), "probe_sims", cfg)?)?,
        DetectorKind::SoftWpmi => {
            soft_wpmi_sim(activations, need(space.probe_sims(), "probe_sims", cfg)?, cfg)?
        }
        DetectorKind::Iou => iou_sim(activations, need(space.probe_labels(), "probe_labels", cfg)?, cfg)?,
    };
    sims.detector = *cfg;
    Ok(sims)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NeuronConcept {
    /// Index of the best concept.
    pub concept: usize,
    pub similarity: f64,
    pub interpretable: bool,
    pub category: Category,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConceptAssignment {
    pub neurons: Vec<NeuronConcept>,
    pub tau: f64,
}

impl ConceptAssignment {
    pub fn len(&self) -> usize {
        self.neurons.len()
    }

    pub fn is_empty(&self) -> bool {
        self.neurons.is_empty()
    }

    pub fn interpretable_count(&self) -> usize {
        self.neurons.iter().filter(|n| n.interpretable).count()
    }
}

/// Index and value of the maximum; ties go to the lowest index.
pub fn argmax(row: &[f64]) -> Option<(usize, f64)> {
    let mut best: Option<(usize, f64)> = None;
    for (i, &v) in row.iter().enumerate() {
        if best.is_none_or(|(_, b)| v > b) {
            best = Some((i, v));
        }
    }
    best
}

/// Picks each neuron's best concept and flags it interpretable when the
/// best similarity strictly exceeds `cfg.tau`.
pub fn assign_concepts(
    sims: &SimilarityMatrix,
    space: &ConceptSpace,
    cfg: &DetectorConfig,
) -> Result<ConceptAssignment> {
    if space.is_empty() {
        return Err(Error::InvalidInput("concept space is empty".into()));
    }
    if sims.n_concepts() != space.len() {
        return Err(Error::DimensionMismatch(format!(
            "similarity matrix has {} concept columns, concept space has {}",
            sims.n_concepts(),
            space.len()
        )));
    }
    let neurons = sims
        .values
        .row_iter()
        .map(|row| {
            let (concept, similarity) = argmax(row).expect("nonempty row");
            NeuronConcept {
                concept,
                similarity,
                interpretable: similarity > cfg.tau,
                category: space.concept(concept).category,
            }
        })
        .collect();
    Ok(ConceptAssignment {
        neurons,
        tau: cfg.tau,
    })
}

pub(crate) fn check_probe_rows(q_rows: usize, other_rows: usize, what: &str) -> Result<()> {
    if q_rows != other_rows {
        return Err(Error::DimensionMismatch(format!(
            "activations have {q_rows} probe rows, {what} has {other_rows}"
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::store::Concept;

    fn space(n: usize) -> ConceptSpace {
        let cats = [Category::Texture, Category::Color, Category::Scene];
        let concepts = (0..n)
            .map(|i| Concept {
                word: format!("c{i}"),
                category: cats[i % 3],
            })
            .collect();
        let mut emb = vec![0.0f32; n * n];
        for i in 0..n {
            emb[i * n + i] = 1.0;
        }
        ConceptSpace::new(concepts, MatrixF32::from_vec(n, n, emb).unwrap(), None, None).unwrap()
    }

    fn sims(rows: &[Vec<f64>]) -> SimilarityMatrix {
        SimilarityMatrix {
            values: MatrixF64::from_rows(rows).unwrap(),
            detector: DetectorConfig::default(),
        }
    }

    #[test]
    fn argmax_above_threshold() {
        let s = sims(&[vec![0.3, 0.1, 0.05]]);
        let cfg = DetectorConfig::default().with_tau(0.16);
        let a = assign_concepts(&s, &space(3), &cfg).unwrap();
        assert_eq!(a.neurons[0].concept, 0);
        assert!(a.neurons[0].interpretable);
        assert_eq!(a.neurons[0].category, Category::Texture);
    }

    #[test]
    fn tie_goes_to_lowest_index_and_threshold_is_strict() {
        let s = sims(&[vec![0.1, 0.1]]);
        let cfg = DetectorConfig::default().with_tau(0.16);
        let a = assign_concepts(&s, &space(2), &cfg).unwrap();
        assert_eq!(a.neurons[0].concept, 0);
        assert!(!a.neurons[0].interpretable);

        let at_tau = sims(&[vec![0.16, 0.0]]);
        let a = assign_concepts(&at_tau, &space(2), &cfg).unwrap();
        assert!(!a.neurons[0].interpretable);
    }

    #[test]
    fn column_count_must_match() {
        let s = sims(&[vec![0.1, 0.2]]);
        assert!(assign_concepts(&s, &space(3), &DetectorConfig::default()).is_err());
    }

    #[test]
    fn default_taus_and_top_k() {
        assert_eq!(DetectorConfig::new(DetectorKind::Cos3).tau, 0.1);
        assert_eq!(DetectorConfig::new(DetectorKind::SoftWpmi).tau, 0.1);
        assert_eq!(DetectorConfig::new(DetectorKind::Iou).tau, 0.04);
        let p = SoftWpmiParams::default();
        assert_eq!(p.resolved_top_k(10_000), 100);
        assert_eq!(p.resolved_top_k(200), 20);
        assert_eq!(p.resolved_top_k(5), 1);
    }

    #[test]
    fn config_validation() {
        let mut cfg = DetectorConfig::new(DetectorKind::Iou);
        cfg.iou.quantile = 1.0;
        assert!(cfg.validate().is_err());
        let mut cfg = DetectorConfig::new(DetectorKind::SoftWpmi);
        cfg.soft_wpmi.gamma = 0.0;
        assert!(cfg.validate().is_err());
        assert!(DetectorConfig::default().with_tau(f64::NAN).validate().is_err());
    }
}
