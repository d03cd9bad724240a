//! Soft weighted pointwise mutual information.
//!
//! With `p(t_i|x_k) = softmax_i(P[k,i] / γ)`, `p̄(t_i) = mean_k p(t_i|x_k)`
//! and a soft top-K inclusion weight `s_k = σ(a·(Q[k,n] − θ_n)/σ_n)`:
//!
//! ```text
//! sim[n,i] = Σ_k log(1 − s_k + s_k·p(t_i|x_k)) − λ·log p̄(t_i)
//! ```
//!
//! `θ_n` is the K-th largest activation of neuron `n` and `σ_n` its
//! population standard deviation (1 when zero). As `a → ∞` this reduces to
//! hard WPMI over the top-K probes.

use rayon::prelude::*;

use crate::detectors::{check_probe_rows, DetectorConfig, DetectorKind, SimilarityMatrix};
use crate::error::{Error, Result};
use crate::matrix::{Matrix, MatrixF64};

fn log_sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        -(-z).exp().ln_1p()
    } else {
        z - z.exp().ln_1p()
    }
}

fn log_add_exp(x: f64, y: f64) -> f64 {
    let (hi, lo) = if x >= y { (x, y) } else { (y, x) };
    if lo == f64::NEG_INFINITY {
        return hi;
    }
    hi + (lo - hi).exp().ln_1p()
}

/// Row-wise log-softmax of `P / γ` and the log of the per-concept mean.
fn log_concept_probs<T: Copy + Into<f64>>(p: &Matrix<T>, gamma: f64) -> (MatrixF64, Vec<f64>) {
    let (rows, cols) = p.shape();
    let mut logp = MatrixF64::zeros(rows, cols);
    for k in 0..rows {
        let scaled: Vec<f64> = p.row(k).iter().map(|&v| v.into() / gamma).collect();
        let max = scaled.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + scaled.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
        for (dst, v) in logp.row_mut(k).iter_mut().zip(&scaled) {
            *dst = v - lse;
        }
    }
    let log_n = (rows as f64).ln();
    let log_mean = (0..cols)
        .map(|i| {
            let col: Vec<f64> = (0..rows).map(|k| logp.get(k, i)).collect();
            let max = col.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            max + col.iter().map(|v| (v - max).exp()).sum::<f64>().ln() - log_n
        })
        .collect();
    (logp, log_mean)
}

/// Logit `z_k = a·(Q[k] − θ)/σ` of the soft inclusion weight for one neuron.
fn inclusion_logits(col: &[f64], top_k: usize, steepness: f64) -> Vec<f64> {
    let mut sorted = col.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let theta = sorted[top_k - 1];
    let n = col.len() as f64;
    let mean = col.iter().sum::<f64>() / n;
    let var = col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let sd = if var > 0.0 { var.sqrt() } else { 1.0 };
    col.iter().map(|v| steepness * (v - theta) / sd).collect()
}

/// Scores one neuron given explicit inclusion weights `s_k ∈ [0,1]`.
/// `log_p` is the `N_probe × |S|` matrix of `log p(t_i|x_k)` and
/// `log_prior` holds `log p̄(t_i)`.
pub fn soft_wpmi_from_inclusion(
    inclusion: &[f64],
    log_p: &MatrixF64,
    log_prior: &[f64],
    lambda: f64,
) -> Vec<f64> {
    let logits: Vec<f64> = inclusion
        .iter()
        .map(|&s| {
            // exact logit; saturated ends map to ±inf which log_sigmoid handles
            if s <= 0.0 {
                f64::NEG_INFINITY
            } else if s >= 1.0 {
                f64::INFINITY
            } else {
                (s / (1.0 - s)).ln()
            }
        })
        .collect();
    score(&logits, log_p, log_prior, lambda)
}

fn score(logits: &[f64], log_p: &MatrixF64, log_prior: &[f64], lambda: f64) -> Vec<f64> {
    let terms: Vec<(f64, f64)> = logits
        .iter()
        .map(|&z| {
            let (ls, l1s) = match z {
                f64::INFINITY => (0.0, f64::NEG_INFINITY),
                f64::NEG_INFINITY => (f64::NEG_INFINITY, 0.0),
                _ => (log_sigmoid(z), log_sigmoid(-z)),
            };
            (ls, l1s)
        })
        .collect();
    (0..log_p.cols())
        .map(|i| {
            let mut acc = 0.0;
            for (k, &(ls, l1s)) in terms.iter().enumerate() {
                acc += log_add_exp(l1s, ls + log_p.get(k, i));
            }
            acc - lambda * log_prior[i]
        })
        .collect()
}

pub fn soft_wpmi_sim<A, B>(q: &Matrix<A>, p: &Matrix<B>, cfg: &DetectorConfig) -> Result<SimilarityMatrix>
where
    A: Copy + Into<f64> + Sync,
    B: Copy + Into<f64>,
{
    check_probe_rows(q.rows(), p.rows(), "probe similarity matrix")?;
    let n_probe = q.rows();
    if n_probe < 2 {
        return Err(Error::InvalidInput(format!(
            "soft-WPMI needs at least 2 probes, got {n_probe}"
        )));
    }
    let params = cfg.soft_wpmi;
    let top_k = params.resolved_top_k(n_probe);
    if top_k == 0 || top_k > n_probe {
        return Err(Error::InvalidInput(format!(
            "top-k {top_k} outside 1..={n_probe}"
        )));
    }
    let (log_p, log_prior) = log_concept_probs(p, params.gamma);
    let rows: Vec<Vec<f64>> = (0..q.cols())
        .into_par_iter()
        .map(|n| {
            let col: Vec<f64> = (0..n_probe).map(|k| q.get(k, n).into()).collect();
            let logits = inclusion_logits(&col, top_k, params.steepness);
            score(&logits, &log_p, &log_prior, params.lambda)
        })
        .collect();
    let mut values = MatrixF64::zeros(q.cols(), p.cols());
    for (n, row) in rows.iter().enumerate() {
        values.row_mut(n).copy_from_slice(row);
    }
    let mut detector = *cfg;
    detector.kind = DetectorKind::SoftWpmi;
    Ok(SimilarityMatrix { values, detector })
}
