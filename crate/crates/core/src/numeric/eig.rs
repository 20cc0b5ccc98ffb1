use nalgebra::DMatrix;
use serde::Serialize;

use super::SymmetricMatrix;
use crate::error::{Error, Result};

const MAX_SWEEPS: usize = 64;

/// Eigen-decomposition `A = V diag(eigenvalues) V^T` with ascending
/// eigenvalues and a partition of the indices into clusters.
#[derive(Debug, Clone)]
pub struct SpectralDecomposition {
    pub eigenvalues: Vec<f64>,
    /// Orthonormal eigenvectors, one per column, in eigenvalue order.
    pub eigenvectors: DMatrix<f64>,
    /// Index groups; members of a group lie within the clustering gap of the
    /// group's smallest member.
    pub clusters: Vec<Vec<usize>>,
}

/// One eigenvalue cluster summarized by its mean value and size.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EigenCluster {
    pub value: f64,
    pub multiplicity: usize,
}

impl SpectralDecomposition {
    pub fn cluster_summary(&self) -> Vec<EigenCluster> {
        self.clusters
            .iter()
            .map(|idx| EigenCluster {
                value: idx.iter().map(|&i| self.eigenvalues[i]).sum::<f64>() / idx.len() as f64,
                multiplicity: idx.len(),
            })
            .collect()
    }

    /// Orthonormal basis (as columns) of the eigenspace of cluster `c`.
    pub fn cluster_basis(&self, c: usize) -> DMatrix<f64> {
        let idx = &self.clusters[c];
        DMatrix::from_fn(self.eigenvectors.nrows(), idx.len(), |r, k| self.eigenvectors[(r, idx[k])])
    }

    pub fn reconstruct(&self) -> DMatrix<f64> {
        let d = DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(&self.eigenvalues));
        &self.eigenvectors * d * self.eigenvectors.transpose()
    }
}

/// Symmetric eigendecomposition by cyclic Jacobi rotations.
pub fn sym_eig(a: &SymmetricMatrix, cluster_gap: f64) -> Result<SpectralDecomposition> {
    if a.matrix().iter().any(|x| !x.is_finite()) {
        return Err(Error::invalid("non-finite matrix entries"));
    }
    Ok(eigh(a.matrix(), cluster_gap))
}

/// Unchecked variant for internally produced matrices; the symmetric part of
/// `m` is decomposed.
pub fn eigh(m: &DMatrix<f64>, cluster_gap: f64) -> SpectralDecomposition {
    let n = m.nrows();
    assert_eq!(n, m.ncols(), "eigh needs a square matrix");
    let mut a = (m + m.transpose()) * 0.5;
    let mut v = DMatrix::<f64>::identity(n, n);

    let scale = a.norm();
    if scale > 0.0 {
        let target = (f64::EPSILON * 0.5 * scale).powi(2);
        for _ in 0..MAX_SWEEPS {
            let mut off = 0.0;
            for q in 0..n {
                for p in 0..q {
                    off += a[(p, q)] * a[(p, q)];
                }
            }
            if off <= target {
                break;
            }
            for p in 0..n {
                for q in (p + 1)..n {
                    rotate(&mut a, &mut v, p, q);
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(i, i)].total_cmp(&a[(j, j)]));
    let eigenvalues: Vec<f64> = order.iter().map(|&i| a[(i, i)]).collect();
    let eigenvectors = DMatrix::from_fn(n, n, |r, c| v[(r, order[c])]);
    let clusters = cluster_sorted(&eigenvalues, cluster_gap);
    SpectralDecomposition { eigenvalues, eigenvectors, clusters }
}

fn rotate(a: &mut DMatrix<f64>, v: &mut DMatrix<f64>, p: usize, q: usize) {
    let apq = a[(p, q)];
    if apq == 0.0 {
        return;
    }
    let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
    let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
    let c = 1.0 / (t * t + 1.0).sqrt();
    let s = t * c;
    let n = a.nrows();
    for k in 0..n {
        let akp = a[(k, p)];
        let akq = a[(k, q)];
        a[(k, p)] = c * akp - s * akq;
        a[(k, q)] = s * akp + c * akq;
    }
    for k in 0..n {
        let apk = a[(p, k)];
        let aqk = a[(q, k)];
        a[(p, k)] = c * apk - s * aqk;
        a[(q, k)] = s * apk + c * aqk;
    }
    a[(p, q)] = 0.0;
    a[(q, p)] = 0.0;
    for k in 0..n {
        let vkp = v[(k, p)];
        let vkq = v[(k, q)];
        v[(k, p)] = c * vkp - s * vkq;
        v[(k, q)] = s * vkp + c * vkq;
    }
}

fn cluster_sorted(values: &[f64], gap: f64) -> Vec<Vec<usize>> {
    let mut clusters: Vec<Vec<usize>> = Vec::new();
    let mut anchor = f64::NEG_INFINITY;
    for (i, &x) in values.iter().enumerate() {
        match clusters.last_mut() {
            Some(cur) if x - anchor <= gap => cur.push(i),
            _ => {
                clusters.push(vec![i]);
                anchor = x;
            }
        }
    }
    clusters
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{gaussian_vector, probe_rng};
    use nalgebra::DVector;

    fn random_orthogonal(n: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = probe_rng(seed);
        let cols: Vec<DVector<f64>> = (0..n).map(|_| gaussian_vector(&mut rng, n)).collect();
        DMatrix::from_columns(&cols).qr().q()
    }

    #[test]
    fn veronese_point_spectrum() {
        let s = SymmetricMatrix::from_diagonal(&[0.75, -0.25, -0.25, -0.25]).unwrap();
        let d = sym_eig(&s, 1e-6).unwrap();
        assert_eq!(d.clusters.len(), 2);
        let summary = d.cluster_summary();
        assert!((summary[0].value + 0.25).abs() < 1e-15 && summary[0].multiplicity == 3);
        assert!((summary[1].value - 0.75).abs() < 1e-15 && summary[1].multiplicity == 1);
    }

    #[test]
    fn zero_matrix_single_cluster() {
        let z = SymmetricMatrix::new(DMatrix::zeros(4, 4)).unwrap();
        let d = sym_eig(&z, 1e-6).unwrap();
        assert!(d.eigenvalues.iter().all(|&x| x == 0.0));
        assert_eq!(d.clusters, vec![vec![0, 1, 2, 3]]);
    }

    #[test]
    fn planted_spectrum_is_recovered() {
        let q = random_orthogonal(5, 11);
        let lam = DMatrix::from_diagonal(&DVector::from_vec(vec![3.0, 1.0, 5.0, 2.0, 4.0]));
        let a = SymmetricMatrix::symmetrize(&(&q * lam * q.transpose()));
        let d = sym_eig(&a, 1e-6).unwrap();
        for (k, &x) in d.eigenvalues.iter().enumerate() {
            assert!((x - (k + 1) as f64).abs() < 1e-10, "{x}");
        }
        assert!((d.reconstruct() - a.matrix()).norm() <= 1e-9 * a.matrix().norm());
        let vtv = d.eigenvectors.transpose() * &d.eigenvectors;
        assert!((vtv - DMatrix::identity(5, 5)).norm() < 1e-12);
    }

    #[test]
    fn clusters_are_pairwise_within_gap() {
        let vals = [0.0, 0.4, 0.8, 1.2, 5.0];
        let c = cluster_sorted(&vals, 0.5);
        assert_eq!(c, vec![vec![0, 1], vec![2, 3], vec![4]]);
    }
}
