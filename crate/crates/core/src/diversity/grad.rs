//! Anchor distance as a differentiable function of raw activations.
//!
//! Forward: `Q → cos³ sims → softmax(sims/T) → U = Λ·V → mean_i min_j ‖u_j − a_i‖`.
//! Backward treats each anchor's nearest neuron as fixed (lowest index on
//! ties); a zero-distance term contributes no gradient.

use serde::{Deserialize, Serialize};

use crate::detectors::{center_cube, cos_cubed_sim, cubed_unit_columns};
use crate::diversity::anchor_matches;
use crate::embedding::{neuron_embeddings, EmbeddingConfig, DEFAULT_TEMPERATURE};
use crate::error::{Error, Result};
use crate::linalg::{matmul, matmul_tn};
use crate::matrix::MatrixF64;
use crate::store::{AnchorSet, ConceptSpace};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegularizerConfig {
    /// Weight of the anchor-distance term in the joint loss.
    pub beta: f64,
    pub temperature: f64,
}

impl Default for RegularizerConfig {
    fn default() -> Self {
        Self {
            beta: 1.0,
            temperature: DEFAULT_TEMPERATURE,
        }
    }
}

impl RegularizerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.beta >= 0.0 && self.beta.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "beta must be finite and >= 0, got {}",
                self.beta
            )));
        }
        EmbeddingConfig::new(self.temperature).map(|_| ())
    }
}

/// Returns `d_anchor` and `∂d_anchor/∂Q` for activations `q`
/// (`N_probe × N_neurons`) against the probe-concept matrix `p`.
pub fn anchor_distance_grad(
    q: &MatrixF64,
    p: &MatrixF64,
    space: &ConceptSpace,
    anchors: &AnchorSet,
    cfg: &RegularizerConfig,
) -> Result<(f64, MatrixF64)> {
    cfg.validate()?;
    let (n_probe, n_neurons) = q.shape();
    let sims = cos_cubed_sim(q, p)?;
    let emb_cfg = EmbeddingConfig::new(cfg.temperature)?;
    let set = neuron_embeddings(&sims, space, &emb_cfg)?;
    let anchor_emb = anchors.embeddings().to_f64();
    let matches = anchor_matches(&set.embeddings, &anchor_emb)?;
    let n_anchors = matches.len() as f64;
    let value = matches.iter().map(|m| m.distance).sum::<f64>() / n_anchors;

    // ∂/∂U
    let d = set.dim();
    let mut g_u = MatrixF64::zeros(n_neurons, d);
    for (i, m) in matches.iter().enumerate() {
        if m.distance == 0.0 {
            continue;
        }
        let u = set.embeddings.row(m.neuron);
        let a = anchor_emb.row(i);
        let scale = 1.0 / (m.distance * n_anchors);
        let dst = g_u.row_mut(m.neuron);
        for k in 0..d {
            dst[k] += (u[k] - a[k]) * scale;
        }
    }

    // ∂/∂Λ = ∂/∂U · Vᵀ, then through the softmax
    let concepts = space.embeddings().to_f64();
    let g_lambda = matmul(&g_u, &concepts.transpose());
    let n_concepts = space.len();
    let mut g_sims = MatrixF64::zeros(n_neurons, n_concepts);
    for n in 0..n_neurons {
        let lam = set.weights.row(n);
        let gl = g_lambda.row(n);
        let inner: f64 = lam.iter().zip(gl).map(|(l, g)| l * g).sum();
        for (c, dst) in g_sims.row_mut(n).iter_mut().enumerate() {
            *dst = lam[c] * (gl[c] - inner) / cfg.temperature;
        }
    }

    // through the cosine: ∂s/∂a = b̂/|a| − s·a/|a|²
    let p_unit = cubed_unit_columns(p);
    let projected = matmul(&p_unit, &g_sims.transpose()); // N_probe × N_neurons
    let mut grad = MatrixF64::zeros(n_probe, n_neurons);
    for n in 0..n_neurons {
        let col = q.column(n);
        let Some((z, a)) = center_cube(&col) else {
            continue;
        };
        let a_norm = a.iter().map(|v| v * v).sum::<f64>().sqrt();
        if a_norm == 0.0 {
            continue;
        }
        let gs_dot_s: f64 = g_sims
            .row(n)
            .iter()
            .zip(sims.row(n))
            .map(|(g, s)| g * s)
            .sum();
        // ∂/∂z_k = 3 z_k² ∂/∂a_k, then remove the mean for the centering
        let g_z: Vec<f64> = (0..n_probe)
            .map(|k| {
                let g_a = projected.get(k, n) / a_norm - gs_dot_s * a[k] / (a_norm * a_norm);
                3.0 * z[k] * z[k] * g_a
            })
            .collect();
        let mean = g_z.iter().sum::<f64>() / n_probe as f64;
        for (k, g) in g_z.iter().enumerate() {
            grad.set(k, n, g - mean);
        }
    }
    Ok((value, grad))
}

/// `Xᵀ · G`, the chain rule through `Q = X·W`.
pub(crate) fn weights_grad(x: &MatrixF64, g_q: &MatrixF64) -> MatrixF64 {
    matmul_tn(x, g_q)
}
