//! Deterministic 2D layout by principal components.
//!
//! Each direction is oriented so that its component of largest magnitude is
//! positive (lowest index on ties), which pins the otherwise arbitrary sign
//! of an eigenvector.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{dot, matmul_tn};
use crate::matrix::MatrixF64;

/// A fitted 2D basis that can re-project further points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectionBasis {
    pub mean: Vec<f64>,
    pub directions: [Vec<f64>; 2],
    /// Fraction of total variance captured by each direction.
    pub explained_variance: [f64; 2],
}

impl ProjectionBasis {
    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn project_point(&self, point: &[f64]) -> [f64; 2] {
        let centered: Vec<f64> = point.iter().zip(&self.mean).map(|(p, m)| p - m).collect();
        [
            dot(&centered, &self.directions[0]),
            dot(&centered, &self.directions[1]),
        ]
    }

    pub fn project(&self, points: &MatrixF64) -> Result<MatrixF64> {
        if points.cols() != self.dim() {
            return Err(Error::DimensionMismatch(format!(
                "basis is {}-dimensional, points are {}-dimensional",
                self.dim(),
                points.cols()
            )));
        }
        let mut out = MatrixF64::zeros(points.rows(), 2);
        for (r, p) in points.row_iter().enumerate() {
            out.row_mut(r).copy_from_slice(&self.project_point(p));
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Projection2D {
    pub coordinates: MatrixF64,
    pub basis: ProjectionBasis,
}

/// Fits a 2D layout for a point cloud.
pub trait Projector {
    fn fit(&self, points: &MatrixF64) -> Result<Projection2D>;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct PcaProjector;

impl Projector for PcaProjector {
    fn fit(&self, points: &MatrixF64) -> Result<Projection2D> {
        project_2d(points)
    }
}

fn orient(v: &mut [f64]) {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > v[best].abs() {
            best = i;
        }
    }
    if v[best] < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

/// Projects `points` onto their top two principal directions.
pub fn project_2d(points: &MatrixF64) -> Result<Projection2D> {
    let (n, d) = points.shape();
    if n < 2 || d < 2 {
        return Err(Error::InvalidInput(format!(
            "projection needs at least 2 points of dimension >= 2, got {n} x {d}"
        )));
    }
    let mut mean = vec![0.0; d];
    for row in points.row_iter() {
        for (m, v) in mean.iter_mut().zip(row) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    let mut centered = points.clone();
    for r in 0..n {
        for (v, m) in centered.row_mut(r).iter_mut().zip(&mean) {
            *v -= m;
        }
    }
    let mut cov = matmul_tn(&centered, &centered);
    cov.as_mut_slice().iter_mut().for_each(|v| *v /= n as f64);
    let total: f64 = (0..d).map(|i| cov.get(i, i)).sum();
    if total <= 0.0 {
        return Err(Error::ZeroVariance);
    }

    let eig = SymmetricEigen::new(DMatrix::from_row_slice(d, d, cov.as_slice()));
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .total_cmp(&eig.eigenvalues[a])
            .then(a.cmp(&b))
    });
    let direction = |k: usize| {
        let mut v: Vec<f64> = eig.eigenvectors.column(order[k]).iter().copied().collect();
        let len = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        v.iter_mut().for_each(|x| *x /= len);
        orient(&mut v);
        v
    };
    let explained = |k: usize| (eig.eigenvalues[order[k]] / total).clamp(0.0, 1.0);
    let basis = ProjectionBasis {
        mean,
        directions: [direction(0), direction(1)],
        explained_variance: [explained(0), explained(1)],
    };
    let coordinates = basis.project(points)?;
    Ok(Projection2D { coordinates, basis })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::distance;

    /// Cyclic Jacobi eigendecomposition, independent of nalgebra.
    fn jacobi(mut a: Vec<Vec<f64>>) -> (Vec<f64>, Vec<Vec<f64>>) {
        let n = a.len();
        let mut v = vec![vec![0.0; n]; n];
        for (i, row) in v.iter_mut().enumerate() {
            row[i] = 1.0;
        }
        for _ in 0..100 {
            let off: f64 = (0..n)
                .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
                .map(|(i, j)| a[i][j] * a[i][j])
                .sum();
            if off < 1e-30 {
                break;
            }
            for p in 0..n {
                for q in p + 1..n {
                    if a[p][q].abs() < 1e-300 {
                        continue;
                    }
                    let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                    let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                    let t = if theta == 0.0 { 1.0 } else { t };
                    let c = 1.0 / (t * t + 1.0).sqrt();
                    let s = t * c;
                    for k in 0..n {
                        let (akp, akq) = (a[k][p], a[k][q]);
                        a[k][p] = c * akp - s * akq;
                        a[k][q] = s * akp + c * akq;
                    }
                    for k in 0..n {
                        let (apk, aqk) = (a[p][k], a[q][k]);
                        a[p][k] = c * apk - s * aqk;
                        a[q][k] = s * apk + c * aqk;
                    }
                    for row in v.iter_mut() {
                        let (vkp, vkq) = (row[p], row[q]);
                        row[p] = c * vkp - s * vkq;
                        row[q] = s * vkp + c * vkq;
                    }
                }
            }
        }
        let vals = (0..n).map(|i| a[i][i]).collect();
        let vecs = (0..n).map(|j| (0..n).map(|i| v[i][j]).collect()).collect();
        (vals, vecs)
    }

    #[test]
    fn matches_jacobi_oracle_on_four_points() {
        let pts = vec![
            vec![2.0, 0.0, 1.0],
            vec![-1.0, 1.0, 0.5],
            vec![0.5, -2.0, -1.0],
            vec![-1.5, 1.0, -0.5],
        ];
        let m = MatrixF64::from_rows(&pts).unwrap();
        let proj = project_2d(&m).unwrap();

        let mean: Vec<f64> = (0..3).map(|j| pts.iter().map(|p| p[j]).sum::<f64>() / 4.0).collect();
        let mut cov = vec![vec![0.0; 3]; 3];
        for p in &pts {
            for i in 0..3 {
                for j in 0..3 {
                    cov[i][j] += (p[i] - mean[i]) * (p[j] - mean[j]) / 4.0;
                }
            }
        }
        let (vals, vecs) = jacobi(cov);
        let mut order: Vec<usize> = (0..3).collect();
        order.sort_by(|&a, &b| vals[b].partial_cmp(&vals[a]).unwrap());
        for k in 0..2 {
            let mut dir = vecs[order[k]].clone();
            let big = (0..3)
                .max_by(|&a, &b| dir[a].abs().partial_cmp(&dir[b].abs()).unwrap())
                .unwrap();
            if dir[big] < 0.0 {
                dir.iter_mut().for_each(|x| *x = -*x);
            }
            for (r, p) in pts.iter().enumerate() {
                let want: f64 = (0..3).map(|j| (p[j] - mean[j]) * dir[j]).sum();
                assert!((proj.coordinates.get(r, k) - want).abs() < 1e-8);
            }
        }
        let [d0, d1] = &proj.basis.directions;
        assert!(dot(d0, d1).abs() < 1e-10);
        assert!((dot(d0, d0) - 1.0).abs() < 1e-10);
        assert!((dot(d1, d1) - 1.0).abs() < 1e-10);
    }

    #[test]
    fn planar_points_keep_distances() {
        let pts = MatrixF64::from_rows(&[
            vec![0.0, 0.0],
            vec![3.0, 1.0],
            vec![-1.0, 2.0],
            vec![0.5, -0.7],
        ])
        .unwrap();
        let proj = project_2d(&pts).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                let a = distance(pts.row(i), pts.row(j));
                let b = distance(proj.coordinates.row(i), proj.coordinates.row(j));
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn collinear_points_have_zero_second_coordinate() {
        let pts = MatrixF64::from_rows(&[
            vec![1.0, 2.0, 3.0],
            vec![2.0, 4.0, 6.0],
            vec![-1.0, -2.0, -3.0],
            vec![0.5, 1.0, 1.5],
        ])
        .unwrap();
        let proj = project_2d(&pts).unwrap();
        for r in 0..4 {
            assert!(proj.coordinates.get(r, 1).abs() < 1e-10);
        }
        assert!((proj.basis.explained_variance[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn identical_points_are_zero_variance() {
        let pts = MatrixF64::from_rows(&[vec![1.0, 1.0], vec![1.0, 1.0]]).unwrap();
        assert!(matches!(project_2d(&pts), Err(Error::ZeroVariance)));
    }

    #[test]
    fn deterministic_and_sign_convention() {
        let pts = MatrixF64::from_rows(&[
            vec![0.3, -1.2, 0.4, 2.0],
            vec![1.1, 0.2, -0.4, 0.1],
            vec![-0.9, 0.8, 0.0, -1.0],
        ])
        .unwrap();
        let a = project_2d(&pts).unwrap();
        let b = project_2d(&pts).unwrap();
        assert_eq!(a, b);
        for dir in &a.basis.directions {
            let big = dir.iter().fold(0.0f64, |m, x| if x.abs() > m.abs() { *x } else { m });
            assert!(big > 0.0);
        }
    }

    #[test]
    fn reprojection_matches_fit() {
        let pts = MatrixF64::from_rows(&[
            vec![0.3, -1.2, 0.4],
            vec![1.1, 0.2, -0.4],
            vec![-0.9, 0.8, 0.0],
        ])
        .unwrap();
        let p = project_2d(&pts).unwrap();
        assert_eq!(p.basis.project(&pts).unwrap(), p.coordinates);
    }
}
