use crate::detectors::{check_probe_rows, DetectorConfig, DetectorKind, SimilarityMatrix};
use crate::error::{Error, Result};
use crate::linalg::matmul_tn;
use crate::matrix::{Matrix, MatrixF64};

/// Mean-centered column and its element-wise cube, or `None` when the column
/// is exactly constant.
pub fn center_cube(col: &[f64]) -> Option<(Vec<f64>, Vec<f64>)> {
    let first = *col.first()?;
    if col.iter().all(|&v| v == first) {
        return None;
    }
    let mean = col.iter().sum::<f64>() / col.len() as f64;
    let z: Vec<f64> = col.iter().map(|v| v - mean).collect();
    let cubed = z.iter().map(|v| v * v * v).collect();
    Some((z, cubed))
}

/// Per column: center, cube, scale to unit norm. Constant columns become
/// zero. Works in row sweeps so large row-major inputs stay cache friendly.
pub(crate) fn cubed_unit_columns<T: Copy + Into<f64>>(m: &Matrix<T>) -> MatrixF64 {
    let (rows, cols) = m.shape();
    let mut sum = vec![0.0f64; cols];
    let mut constant = vec![true; cols];
    for r in 0..rows {
        let row = m.row(r);
        for c in 0..cols {
            let v: f64 = row[c].into();
            sum[c] += v;
            if constant[c] && v != m.get(0, c).into() {
                constant[c] = false;
            }
        }
    }
    let mean: Vec<f64> = sum.iter().map(|s| s / rows as f64).collect();
    let mut out = MatrixF64::zeros(rows, cols);
    let mut sq = vec![0.0f64; cols];
    for r in 0..rows {
        let src = m.row(r);
        let dst = out.row_mut(r);
        for c in 0..cols {
            if constant[c] {
                continue;
            }
            let z = src[c].into() - mean[c];
            let cube = z * z * z;
            dst[c] = cube;
            sq[c] += cube * cube;
        }
    }
    let inv: Vec<f64> = sq
        .iter()
        .map(|&s| if s > 0.0 { 1.0 / s.sqrt() } else { 0.0 })
        .collect();
    for r in 0..rows {
        for (v, k) in out.row_mut(r).iter_mut().zip(&inv) {
            *v *= k;
        }
    }
    out
}

/// Cosine between the centered, cubed activation pattern of each neuron
/// (columns of `q`) and of each concept (columns of `p`).
pub fn cos_cubed_sim<A, B>(q: &Matrix<A>, p: &Matrix<B>) -> Result<SimilarityMatrix>
where
    A: Copy + Into<f64>,
    B: Copy + Into<f64>,
{
    check_probe_rows(q.rows(), p.rows(), "probe similarity matrix")?;
    if q.rows() < 2 {
        return Err(Error::InvalidInput(format!(
            "cos-cubed similarity needs at least 2 probes, got {}",
            q.rows()
        )));
    }
    let qn = cubed_unit_columns(q);
    let pn = cubed_unit_columns(p);
    let mut values = matmul_tn(&qn, &pn);
    for v in values.as_mut_slice() {
        *v = v.clamp(-1.0, 1.0);
    }
    Ok(SimilarityMatrix {
        values,
        detector: DetectorConfig::new(DetectorKind::Cos3),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::MatrixF64;
    use proptest::prelude::*;

    fn col(v: &[f64]) -> MatrixF64 {
        MatrixF64::from_vec(v.len(), 1, v.to_vec()).unwrap()
    }

    #[test]
    fn identical_pattern_is_one() {
        let s = cos_cubed_sim(&col(&[1.0, -1.0, 0.0]), &col(&[1.0, -1.0, 0.0])).unwrap();
        assert!((s.values.get(0, 0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn negated_pattern_is_minus_one() {
        let s = cos_cubed_sim(&col(&[1.0, -1.0, 0.0]), &col(&[-1.0, 1.0, 0.0])).unwrap();
        assert!((s.values.get(0, 0) + 1.0).abs() < 1e-15);
    }

    #[test]
    fn hand_evaluated_fixture() {
        // centered: (2,-1,-1) and (1/3,-2/3,1/3); cubed: (8,-1,-1), (1,-8,1)/27
        // cos = (8+8-1) / (sqrt(66) * sqrt(66)) = 15/66
        let s = cos_cubed_sim(&col(&[4.0, 1.0, 1.0]), &col(&[1.0, 0.0, 1.0])).unwrap();
        assert!((s.values.get(0, 0) - 15.0 / 66.0).abs() < 1e-14);
    }

    #[test]
    fn constant_columns_give_zero() {
        let s = cos_cubed_sim(&col(&[0.1, 0.1, 0.1]), &col(&[1.0, 0.0, 1.0])).unwrap();
        assert_eq!(s.values.get(0, 0), 0.0);
        let s = cos_cubed_sim(&col(&[1.0, 0.0, 1.0]), &col(&[0.3, 0.3, 0.3])).unwrap();
        assert_eq!(s.values.get(0, 0), 0.0);
    }

    #[test]
    fn errors() {
        assert!(cos_cubed_sim(&col(&[1.0]), &col(&[1.0])).is_err());
        assert!(cos_cubed_sim(&col(&[1.0, 2.0]), &col(&[1.0, 2.0, 3.0])).is_err());
    }

    fn matrix(rows: usize, cols: usize) -> impl Strategy<Value = MatrixF64> {
        proptest::collection::vec(-3.0f64..3.0, rows * cols)
            .prop_map(move |d| MatrixF64::from_vec(rows, cols, d).unwrap())
    }

    proptest! {
        #[test]
        fn positive_scaling_and_shift_invariance(
            q in matrix(9, 3),
            p in matrix(9, 4),
            scale in 0.01f64..100.0,
            shift in -5.0f64..5.0,
        ) {
            let base = cos_cubed_sim(&q, &p).unwrap();
            let scaled = cos_cubed_sim(&q.map(|v| v * scale), &p).unwrap();
            for (a, b) in base.values.as_slice().iter().zip(scaled.values.as_slice()) {
                prop_assert!((a - b).abs() < 1e-12);
            }
            let shifted = cos_cubed_sim(&q.map(|v| v + shift), &p).unwrap();
            for n in 0..3 {
                let a = crate::detectors::argmax(base.row(n)).unwrap();
                let b = crate::detectors::argmax(shifted.row(n)).unwrap();
                // shifting only perturbs rounding; assignment is stable unless
                // two concepts are within rounding distance
                let row = base.row(n);
                let runner_up = row.iter().enumerate().filter(|(i, _)| *i != a.0)
                    .map(|(_, v)| *v).fold(f64::NEG_INFINITY, f64::max);
                if a.1 - runner_up > 1e-9 {
                    prop_assert_eq!(a.0, b.0);
                }
            }
        }

        #[test]
        fn values_bounded(q in matrix(6, 2), p in matrix(6, 3)) {
            let s = cos_cubed_sim(&q, &p).unwrap();
            prop_assert!(s.values.as_slice().iter().all(|v| (-1.0..=1.0).contains(v)));
        }
    }
}
