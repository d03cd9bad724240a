//! Thin deterministic wrappers over `matrixmultiply`.
//!
//! Output rows are produced in fixed-size blocks that do not depend on the
//! number of worker threads, and each block runs a sequential kernel, so
//! results are bit-identical for any pool size.

use rayon::prelude::*;

use crate::matrix::MatrixF64;

const ROW_BLOCK: usize = 32;

/// `C = op(A) · B` where `op(A)` is `A` or `Aᵀ`.
fn gemm_blocked(a: &MatrixF64, transpose_a: bool, b: &MatrixF64) -> MatrixF64 {
    let a_cols = a.cols();
    let (m, k) = if transpose_a {
        (a.cols(), a.rows())
    } else {
        (a.rows(), a.cols())
    };
    let a = a.as_slice();
    assert_eq!(k, b.rows(), "inner dimensions differ");
    let n = b.cols();
    let mut c = vec![0.0; m * n];
    if m == 0 || n == 0 {
        return MatrixF64::from_vec(m, n, c).unwrap();
    }
    // element (i, l) of op(A): row stride / column stride
    let (rsa, csa) = if transpose_a {
        (1isize, a_cols as isize)
    } else {
        (a_cols as isize, 1isize)
    };
    c.par_chunks_mut(ROW_BLOCK * n)
        .enumerate()
        .for_each(|(blk, c_blk)| {
            let row0 = blk * ROW_BLOCK;
            let rows = c_blk.len() / n;
            let a_off = if transpose_a { row0 } else { row0 * a_cols };
            if k == 0 {
                return;
            }
            // SAFETY: the strides and dimensions describe sub-views that lie
            // entirely within `a`, `b` and `c_blk`.
            unsafe {
                matrixmultiply::dgemm(
                    rows,
                    k,
                    n,
                    1.0,
                    a.as_ptr().add(a_off),
                    rsa,
                    csa,
                    b.as_slice().as_ptr(),
                    n as isize,
                    1,
                    0.0,
                    c_blk.as_mut_ptr(),
                    n as isize,
                    1,
                );
            }
        });
    MatrixF64::from_vec(m, n, c).unwrap()
}

/// `A · B`.
pub fn matmul(a: &MatrixF64, b: &MatrixF64) -> MatrixF64 {
    gemm_blocked(a, false, b)
}

/// `Aᵀ · B`.
pub fn matmul_tn(a: &MatrixF64, b: &MatrixF64) -> MatrixF64 {
    gemm_blocked(a, true, b)
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive(a: &MatrixF64, b: &MatrixF64) -> MatrixF64 {
        let mut c = MatrixF64::zeros(a.rows(), b.cols());
        for i in 0..a.rows() {
            for j in 0..b.cols() {
                let mut s = 0.0;
                for l in 0..a.cols() {
                    s += a.get(i, l) * b.get(l, j);
                }
                c.set(i, j, s);
            }
        }
        c
    }

    fn fixture(rows: usize, cols: usize, seed: u64) -> MatrixF64 {
        let data = (0..rows * cols)
            .map(|i| ((i as u64 * 2654435761 + seed) % 1000) as f64 / 500.0 - 1.0)
            .collect();
        MatrixF64::from_vec(rows, cols, data).unwrap()
    }

    #[test]
    fn matches_naive_across_block_boundaries() {
        let a = fixture(70, 13, 1);
        let b = fixture(13, 9, 2);
        let c = matmul(&a, &b);
        let r = naive(&a, &b);
        for (x, y) in c.as_slice().iter().zip(r.as_slice()) {
            assert!((x - y).abs() < 1e-12);
        }
        let at = a.transpose();
        let c2 = matmul_tn(&at, &b);
        for (x, y) in c2.as_slice().iter().zip(r.as_slice()) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn empty_inner_dimension_gives_zeros() {
        let a = MatrixF64::zeros(3, 0);
        let b = MatrixF64::zeros(0, 2);
        assert_eq!(matmul(&a, &b), MatrixF64::zeros(3, 2));
    }
}
