//! Image-level intersection-over-union between a neuron's most activating
//! probes and each concept's labelled probes.

use rayon::prelude::*;

use crate::detectors::{check_probe_rows, DetectorConfig, DetectorKind, SimilarityMatrix};
use crate::error::{Error, Result};
use crate::matrix::{Matrix, MatrixF32, MatrixF64};

/// Nearest-rank `(1 − q)`-quantile of `col`.
pub fn activation_threshold(col: &[f64], q: f64) -> f64 {
    let n = col.len();
    let mut sorted = col.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    // the epsilon keeps e.g. (1 - 0.05) * 100 from rounding up to rank 96
    let rank = (((1.0 - q) * n as f64) - 1e-9).ceil().clamp(1.0, n as f64) as usize;
    sorted[rank - 1]
}

pub fn iou_sim<A>(q: &Matrix<A>, labels: &MatrixF32, cfg: &DetectorConfig) -> Result<SimilarityMatrix>
where
    A: Copy + Into<f64> + Sync,
{
    check_probe_rows(q.rows(), labels.rows(), "probe label matrix")?;
    if let Some(i) = labels.as_slice().iter().position(|&v| v != 0.0 && v != 1.0) {
        return Err(Error::InvalidInput(format!(
            "probe labels must be binary; found {} at ({},{})",
            labels.as_slice()[i],
            i / labels.cols(),
            i % labels.cols()
        )));
    }
    let (n_probe, n_concepts) = labels.shape();
    if n_probe == 0 {
        return Err(Error::InvalidInput("no probes".into()));
    }
    // column-major label sets
    let label_sets: Vec<Vec<bool>> = (0..n_concepts)
        .map(|i| (0..n_probe).map(|k| labels.get(k, i) == 1.0).collect())
        .collect();
    let label_sizes: Vec<usize> = label_sets
        .iter()
        .map(|s| s.iter().filter(|&&b| b).count())
        .collect();
    let quantile = cfg.iou.quantile;
    let rows: Vec<Vec<f64>> = (0..q.cols())
        .into_par_iter()
        .map(|n| {
            let col: Vec<f64> = (0..n_probe).map(|k| q.get(k, n).into()).collect();
            let theta = activation_threshold(&col, quantile);
            let active: Vec<usize> = (0..n_probe).filter(|&k| col[k] > theta).collect();
            label_sets
                .iter()
                .zip(&label_sizes)
                .map(|(set, &size)| {
                    let inter = active.iter().filter(|&&k| set[k]).count();
                    let union = active.len() + size - inter;
                    if union == 0 {
                        0.0
                    } else {
                        inter as f64 / union as f64
                    }
                })
                .collect()
        })
        .collect();
    let mut values = MatrixF64::zeros(q.cols(), n_concepts);
    for (n, row) in rows.iter().enumerate() {
        values.row_mut(n).copy_from_slice(row);
    }
    let mut detector = *cfg;
    detector.kind = DetectorKind::Iou;
    Ok(SimilarityMatrix { values, detector })
}
