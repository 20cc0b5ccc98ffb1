use nalgebra::{DMatrix, DVector};

use super::eigh;
use crate::error::{Error, Result};

/// A linear subspace of `R^ambient_dim` held as an orthonormal column frame.
#[derive(Debug, Clone, PartialEq)]
pub struct Subspace {
    ambient_dim: usize,
    basis: DMatrix<f64>,
    tol: f64,
}

impl Subspace {
    pub fn zero(ambient_dim: usize, tol: f64) -> Self {
        Self { ambient_dim, basis: DMatrix::zeros(ambient_dim, 0), tol }
    }

    pub fn full(ambient_dim: usize, tol: f64) -> Self {
        Self { ambient_dim, basis: DMatrix::identity(ambient_dim, ambient_dim), tol }
    }

    /// Wraps a frame that is already orthonormal (checked to `1e-8`).
    pub fn from_orthonormal(basis: DMatrix<f64>, tol: f64) -> Result<Self> {
        let k = basis.ncols();
        let gram = basis.transpose() * &basis;
        let defect = (gram - DMatrix::<f64>::identity(k, k)).abs().max();
        if k > 0 && defect > 1e-8 {
            return Err(Error::invalid(format!("frame is not orthonormal (defect {defect:e})")));
        }
        Ok(Self { ambient_dim: basis.nrows(), basis, tol })
    }

    pub(crate) fn from_frame_unchecked(basis: DMatrix<f64>, tol: f64) -> Self {
        Self { ambient_dim: basis.nrows(), basis, tol }
    }

    pub fn dim(&self) -> usize {
        self.basis.ncols()
    }

    pub fn ambient_dim(&self) -> usize {
        self.ambient_dim
    }

    pub fn tol(&self) -> f64 {
        self.tol
    }

    pub fn basis(&self) -> &DMatrix<f64> {
        &self.basis
    }

    pub fn vector(&self, i: usize) -> DVector<f64> {
        self.basis.column(i).into_owned()
    }

    pub fn vectors(&self) -> Vec<DVector<f64>> {
        (0..self.dim()).map(|i| self.vector(i)).collect()
    }

    /// Frame coordinates `B^T v`.
    pub fn coordinates(&self, v: &DVector<f64>) -> DVector<f64> {
        self.basis.transpose() * v
    }

    /// `B c`.
    pub fn embed(&self, coords: &DVector<f64>) -> DVector<f64> {
        &self.basis * coords
    }

    pub fn project(&self, v: &DVector<f64>) -> Result<DVector<f64>> {
        if v.len() != self.ambient_dim {
            return Err(Error::invalid(format!(
                "vector of length {} projected onto subspace of R^{}",
                v.len(),
                self.ambient_dim
            )));
        }
        Ok(&self.basis * (self.basis.transpose() * v))
    }

    pub fn projector(&self) -> DMatrix<f64> {
        &self.basis * self.basis.transpose()
    }

    /// Norm of the component of `v` orthogonal to the subspace.
    pub fn residual(&self, v: &DVector<f64>) -> f64 {
        (v - &self.basis * (self.basis.transpose() * v)).norm()
    }

    pub fn contains(&self, v: &DVector<f64>) -> bool {
        self.residual(v) <= self.tol * v.norm().max(1.0)
    }

    pub fn complement(&self) -> Subspace {
        let p = DMatrix::<f64>::identity(self.ambient_dim, self.ambient_dim) - self.projector();
        let d = eigh(&p, 0.0);
        let cols: Vec<usize> = (0..self.ambient_dim).filter(|&i| d.eigenvalues[i] > 0.5).collect();
        let basis = DMatrix::from_fn(self.ambient_dim, cols.len(), |r, c| d.eigenvectors[(r, cols[c])]);
        Subspace { ambient_dim: self.ambient_dim, basis, tol: self.tol }
    }

    /// `self ∩ other`, computed inside `self`.
    pub fn intersection(&self, other: &Subspace) -> Subspace {
        let off = &self.basis - other.projector() * &self.basis;
        let kernel = null_space(&off, self.tol);
        Subspace::from_frame_unchecked(&self.basis * kernel.basis(), self.tol)
    }

    /// Cosines of the principal angles, descending.
    pub fn principal_cosines(&self, other: &Subspace) -> Vec<f64> {
        let m = self.basis.transpose() * &other.basis;
        let small = if m.nrows() <= m.ncols() { &m * m.transpose() } else { m.transpose() * &m };
        let mut c: Vec<f64> = eigh(&small, 0.0).eigenvalues.iter().map(|x| x.max(0.0).sqrt().min(1.0)).collect();
        c.reverse();
        c
    }

    /// Sine of the largest principal angle, taken as 1 when dimensions differ.
    pub fn distance(&self, other: &Subspace) -> f64 {
        if self.dim() != other.dim() {
            return 1.0;
        }
        if self.dim() == 0 {
            return 0.0;
        }
        // Largest singular value of the residual of this basis against the
        // other span; accurate for tiny angles where 1 - cos^2 is not.
        let residual = &self.basis - &other.basis * (other.basis.transpose() * &self.basis);
        let g = residual.transpose() * &residual;
        eigh(&g, 0.0).eigenvalues.iter().fold(0.0f64, |a, &x| a.max(x)).max(0.0).sqrt().min(1.0)
    }

    /// Direct sum (the spans are assumed independent); re-orthonormalized.
    pub fn sum(&self, other: &Subspace) -> Subspace {
        let mut vs = self.vectors();
        vs.extend(other.vectors());
        orthonormal_span(self.ambient_dim, &vs, self.tol).expect("matching ambient dimension")
    }
}

/// Gram–Schmidt span (two passes) of `vectors`. A vector contributes a new
/// direction iff its residual exceeds `tol * max(1, |v|)`.
pub fn orthonormal_span(ambient_dim: usize, vectors: &[DVector<f64>], tol: f64) -> Result<Subspace> {
    let mut frame: Vec<DVector<f64>> = Vec::new();
    for v in vectors {
        if v.len() != ambient_dim {
            return Err(Error::invalid(format!("vector of length {} in R^{ambient_dim}", v.len())));
        }
        if let Some(u) = new_direction(&frame, v, tol) {
            frame.push(u);
        }
    }
    let basis = if frame.is_empty() { DMatrix::zeros(ambient_dim, 0) } else { DMatrix::from_columns(&frame) };
    Ok(Subspace { ambient_dim, basis, tol })
}

pub(crate) fn new_direction(frame: &[DVector<f64>], v: &DVector<f64>, tol: f64) -> Option<DVector<f64>> {
    let mut r = v.clone();
    for _ in 0..2 {
        for b in frame {
            let c = b.dot(&r);
            r.axpy(-c, b, 1.0);
        }
    }
    let res = r.norm();
    if res > tol * v.norm().max(1.0) {
        Some(r / res)
    } else {
        None
    }
}

pub fn project_onto(v: &DVector<f64>, s: &Subspace) -> Result<DVector<f64>> {
    s.project(v)
}

/// Kernel of `m` (as a subspace of `R^{m.ncols()}`), from the eigenvectors of
/// `m^T m` whose eigenvalue is at most `rank_tol * (largest + 1)`.
pub fn null_space(m: &DMatrix<f64>, rank_tol: f64) -> Subspace {
    let split = thin_range(m, rank_tol);
    Subspace::from_frame_unchecked(split.kernel, rank_tol)
}

/// A thin singular decomposition of `m` obtained from the Gram operator.
#[derive(Debug, Clone)]
pub struct RangeSplit {
    /// Singular values above threshold, descending.
    pub singular: Vec<f64>,
    /// Right singular vectors matching `singular`.
    pub right: DMatrix<f64>,
    /// `m * right_j / singular_j`: an orthonormal frame of the range.
    pub left: DMatrix<f64>,
    /// Orthonormal frame of the kernel.
    pub kernel: DMatrix<f64>,
}

pub fn thin_range(m: &DMatrix<f64>, rank_tol: f64) -> RangeSplit {
    let cols = m.ncols();
    if cols == 0 {
        return RangeSplit {
            singular: vec![],
            right: DMatrix::zeros(0, 0),
            left: DMatrix::zeros(m.nrows(), 0),
            kernel: DMatrix::zeros(0, 0),
        };
    }
    let gram = m.transpose() * m;
    let d = eigh(&gram, 0.0);
    let top = d.eigenvalues.last().copied().unwrap_or(0.0).max(0.0);
    let threshold = rank_tol * (top + 1.0);
    let kernel_idx: Vec<usize> = (0..cols).filter(|&i| d.eigenvalues[i] <= threshold).collect();
    let range_idx: Vec<usize> = (0..cols).rev().filter(|&i| d.eigenvalues[i] > threshold).collect();
    let singular: Vec<f64> = range_idx.iter().map(|&i| d.eigenvalues[i].sqrt()).collect();
    let right = DMatrix::from_fn(cols, range_idx.len(), |r, c| d.eigenvectors[(r, range_idx[c])]);
    let mut left = m * &right;
    for (j, s) in singular.iter().enumerate() {
        left.column_mut(j).unscale_mut(*s);
    }
    let kernel = DMatrix::from_fn(cols, kernel_idx.len(), |r, c| d.eigenvectors[(r, kernel_idx[c])]);
    RangeSplit { singular, right, left, kernel }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{gaussian_vector, probe_rng};

    fn e(n: usize, i: usize) -> DVector<f64> {
        let mut v = DVector::zeros(n);
        v[i] = 1.0;
        v
    }

    #[test]
    fn dependent_copy_is_discarded() {
        let s = orthonormal_span(3, &[e(3, 0), e(3, 0) * 2.0, e(3, 1)], 1e-9).unwrap();
        assert_eq!(s.dim(), 2);
    }

    #[test]
    fn tiny_perturbation_is_below_tolerance() {
        let s = orthonormal_span(3, &[e(3, 0), e(3, 0) + e(3, 1) * 1e-14], 1e-9).unwrap();
        assert_eq!(s.dim(), 1);
    }

    #[test]
    fn traceless_symmetric_three_by_three_has_dimension_five() {
        // Six elementary symmetric matrices with their trace part removed.
        let mut vs = Vec::new();
        for i in 0..3 {
            for j in i..3 {
                let mut m = DMatrix::<f64>::zeros(3, 3);
                m[(i, j)] = 1.0;
                m[(j, i)] = 1.0;
                let tr = m.trace() / 3.0;
                m -= DMatrix::identity(3, 3) * tr;
                vs.push(crate::numeric::flatten(&m));
            }
        }
        assert_eq!(orthonormal_span(9, &vs, 1e-9).unwrap().dim(), 5);
    }

    #[test]
    fn empty_input_is_zero_subspace() {
        assert_eq!(orthonormal_span(4, &[], 1e-9).unwrap().dim(), 0);
    }

    #[test]
    fn projections() {
        let s1 = orthonormal_span(3, &[e(3, 0)], 1e-9).unwrap();
        assert_eq!(project_onto(&e(3, 0), &s1).unwrap(), e(3, 0));
        let s2 = orthonormal_span(3, &[e(3, 1)], 1e-9).unwrap();
        assert_eq!(project_onto(&e(3, 0), &s2).unwrap().norm(), 0.0);
        assert!(project_onto(&e(4, 0), &s2).is_err());
    }

    #[test]
    fn pythagoras_and_idempotence() {
        let mut rng = probe_rng(3);
        let vs: Vec<_> = (0..3).map(|_| gaussian_vector(&mut rng, 7)).collect();
        let s = orthonormal_span(7, &vs, 1e-9).unwrap();
        let v = gaussian_vector(&mut rng, 7);
        let pv = s.project(&v).unwrap();
        let lhs = (&v - &pv).norm_squared() + pv.norm_squared();
        assert!((lhs - v.norm_squared()).abs() < 1e-10);
        let ppv = s.project(&pv).unwrap();
        assert!((ppv - pv).norm() < 1e-12);
    }

    #[test]
    fn complement_and_intersection() {
        let s = orthonormal_span(4, &[e(4, 0), e(4, 1)], 1e-9).unwrap();
        let c = s.complement();
        assert_eq!(c.dim(), 2);
        assert!((s.basis().transpose() * c.basis()).norm() < 1e-12);
        let t = orthonormal_span(4, &[e(4, 1), e(4, 2)], 1e-9).unwrap();
        let i = s.intersection(&t);
        assert_eq!(i.dim(), 1);
        assert!((i.vector(0).abs() - e(4, 1)).norm() < 1e-10);
    }

    #[test]
    fn null_space_of_rank_one() {
        let m = DMatrix::from_row_slice(2, 3, &[1.0, 2.0, 3.0, 2.0, 4.0, 6.0]);
        let k = null_space(&m, 1e-8);
        assert_eq!(k.dim(), 2);
        assert!((&m * k.basis()).norm() < 1e-12);
    }

    #[test]
    fn distance_between_planes() {
        let a = orthonormal_span(3, &[e(3, 0), e(3, 1)], 1e-9).unwrap();
        let t = 0.3f64;
        let b = orthonormal_span(3, &[e(3, 0), e(3, 1) * t.cos() + e(3, 2) * t.sin()], 1e-9).unwrap();
        assert!((a.distance(&b) - t.sin()).abs() < 1e-12);
        assert!(a.distance(&a) < 1e-7);
    }
}
