//! The pair (Sl(r), SO(r)): `so(r)` acting by conjugation on traceless
//! symmetric matrices, and block products of such pairs.
//!
//! Carrier vectors are handled in coordinates of a fixed orthonormal frame of
//! `Sym0(r1) ⊕ ... ⊕ Sym0(rk)`, realized as block-diagonal matrices of size
//! `r1 + ... + rk`.

use std::fmt;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::lie::{bracket_closure, LieAlgebraSpan};
use crate::numeric::{commutator, null_space, Subspace};

#[derive(Debug, Clone)]
pub struct SymmetricPairRep {
    blocks: Vec<usize>,
    size: usize,
    /// Orthonormal frame of the carrier, as block-diagonal matrices.
    frame: Vec<DMatrix<f64>>,
    /// Orthonormal basis of the acting algebra, block-diagonal skew matrices.
    algebra: Vec<DMatrix<f64>>,
    /// `rho(X_k)` on carrier coordinates, one per algebra basis element.
    action: Vec<DMatrix<f64>>,
    rank_tol: f64,
}

impl fmt::Display for SymmetricPairRep {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.blocks.iter().map(|r| format!("sl-so:{r}")).collect();
        if parts.len() == 1 {
            write!(f, "{}", parts[0])
        } else {
            write!(f, "product:{}", parts.join(","))
        }
    }
}

fn block_frame(r: usize) -> Vec<DMatrix<f64>> {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let mut out = Vec::with_capacity(r * (r + 1) / 2 - 1);
    for i in 0..r {
        for j in i + 1..r {
            let mut m = DMatrix::zeros(r, r);
            m[(i, j)] = s;
            m[(j, i)] = s;
            out.push(m);
        }
    }
    // Traceless diagonal ladder: (E_00 + ... + E_{k-1,k-1} - k E_kk) / sqrt(k(k+1)).
    for k in 1..r {
        let mut m = DMatrix::zeros(r, r);
        let c = 1.0 / ((k * (k + 1)) as f64).sqrt();
        for i in 0..k {
            m[(i, i)] = c;
        }
        m[(k, k)] = -(k as f64) * c;
        out.push(m);
    }
    out
}

fn embed_block(m: &DMatrix<f64>, offset: usize, size: usize) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(size, size);
    out.view_mut((offset, offset), (m.nrows(), m.ncols())).copy_from(m);
    out
}

impl SymmetricPairRep {
    /// `so(r)` on `Sym0(r)`.
    pub fn sl_so(r: usize) -> Result<Self> {
        Self::product(&[r])
    }

    /// Block product of `sl_so(r_i)`.
    pub fn product(blocks: &[usize]) -> Result<Self> {
        if blocks.is_empty() {
            return Err(Error::invalid("a representation needs at least one block"));
        }
        if let Some(r) = blocks.iter().find(|&&r| r < 2) {
            return Err(Error::invalid(format!("block size {r} is below 2")));
        }
        let size: usize = blocks.iter().sum();
        let mut frame = Vec::new();
        let mut algebra = Vec::new();
        let mut offset = 0;
        for &r in blocks {
            frame.extend(block_frame(r).iter().map(|m| embed_block(m, offset, size)));
            for x in LieAlgebraSpan::so(r, 1e-8).basis() {
                algebra.push(embed_block(x, offset, size));
            }
            offset += r;
        }
        let action = algebra
            .iter()
            .map(|x| DMatrix::from_fn(frame.len(), frame.len(), |a, b| frame[a].dot(&commutator(x, &frame[b]))))
            .collect();
        Ok(Self { blocks: blocks.to_vec(), size, frame, algebra, action, rank_tol: 1e-8 })
    }

    pub fn with_rank_tol(mut self, tol: f64) -> Self {
        self.rank_tol = tol;
        self
    }

    pub fn rank_tol(&self) -> f64 {
        self.rank_tol
    }

    pub fn blocks(&self) -> &[usize] {
        &self.blocks
    }

    /// Side length of the block-diagonal matrices.
    pub fn matrix_size(&self) -> usize {
        self.size
    }

    pub fn carrier_dim(&self) -> usize {
        self.frame.len()
    }

    pub fn algebra_dim(&self) -> usize {
        self.algebra.len()
    }

    pub fn frame(&self) -> &[DMatrix<f64>] {
        &self.frame
    }

    pub fn algebra_basis(&self) -> &[DMatrix<f64>] {
        &self.algebra
    }

    /// `rho(X_k)` for the k-th algebra basis element.
    pub fn action_matrices(&self) -> &[DMatrix<f64>] {
        &self.action
    }

    /// `rho(X)` for an arbitrary block-diagonal skew `X`.
    pub fn action_matrix(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let c = self.algebra_coordinates(x);
        let mut out = DMatrix::zeros(self.carrier_dim(), self.carrier_dim());
        for (k, a) in self.action.iter().enumerate() {
            out += a * c[k];
        }
        out
    }

    pub fn algebra_coordinates(&self, x: &DMatrix<f64>) -> DVector<f64> {
        DVector::from_iterator(self.algebra.len(), self.algebra.iter().map(|b| b.dot(x)))
    }

    pub fn algebra_element(&self, coords: &DVector<f64>) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(self.size, self.size);
        for (k, b) in self.algebra.iter().enumerate() {
            out += b * coords[k];
        }
        out
    }

    /// Carrier coordinates of a matrix; the off-carrier part is discarded.
    pub fn coordinates(&self, m: &DMatrix<f64>) -> DVector<f64> {
        DVector::from_iterator(self.frame.len(), self.frame.iter().map(|f| f.dot(m)))
    }

    pub fn matrix(&self, coords: &DVector<f64>) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(self.size, self.size);
        for (k, f) in self.frame.iter().enumerate() {
            out += f * coords[k];
        }
        out
    }

    /// Coordinates of a matrix that must lie in the carrier: symmetric,
    /// block-diagonal and traceless per block, all to `tol * |m|`.
    pub fn checked_coordinates(&self, m: &DMatrix<f64>, tol: f64) -> Result<DVector<f64>> {
        if m.nrows() != self.size || m.ncols() != self.size {
            return Err(Error::invalid(format!(
                "point is {}x{}, representation {} needs {}x{}",
                m.nrows(),
                m.ncols(),
                self,
                self.size,
                self.size
            )));
        }
        if m.iter().any(|x| !x.is_finite()) {
            return Err(Error::invalid("point has non-finite entries"));
        }
        let c = self.coordinates(m);
        let defect = (self.matrix(&c) - m).norm();
        if defect > tol * m.norm().max(1e-300) {
            return Err(Error::invalid(format!(
                "point is not in the carrier {self} (off-carrier part {defect:e})"
            )));
        }
        Ok(c)
    }

    /// Lifts `Sym0(r_i)` matrices, one per block, into carrier coordinates.
    pub fn block_point(&self, parts: &[DMatrix<f64>]) -> Result<DVector<f64>> {
        if parts.len() != self.blocks.len() {
            return Err(Error::invalid(format!(
                "{} block points given for {} blocks",
                parts.len(),
                self.blocks.len()
            )));
        }
        let mut m = DMatrix::zeros(self.size, self.size);
        let mut offset = 0;
        for (p, &r) in parts.iter().zip(&self.blocks) {
            if p.nrows() != r || p.ncols() != r {
                return Err(Error::invalid(format!("block point must be {r}x{r}")));
            }
            m.view_mut((offset, offset), (r, r)).copy_from(p);
            offset += r;
        }
        self.checked_coordinates(&m, 1e-10)
    }

    /// `{rho(X_k) v}`, the generators of the tangent space of `K.v`.
    pub fn orbit_vectors(&self, v: &DVector<f64>) -> Vec<DVector<f64>> {
        self.action.iter().map(|a| a * v).collect()
    }

    /// The matrix whose columns are `rho(X_k) v`.
    pub fn orbit_map(&self, v: &DVector<f64>) -> DMatrix<f64> {
        DMatrix::from_columns(&self.orbit_vectors(v))
    }

    /// Kernel of `x -> [x, v]` on the carrier. A zero `v` yields the whole
    /// carrier with `degenerate` set.
    pub fn normal_space(&self, v: &DVector<f64>) -> NormalSpace {
        let n = self.carrier_dim();
        if v.norm() == 0.0 {
            return NormalSpace { space: Subspace::full(n, self.rank_tol), degenerate: true };
        }
        let vm = self.matrix(v);
        let s2 = self.size * self.size;
        let mut m = DMatrix::zeros(s2, n);
        for (a, f) in self.frame.iter().enumerate() {
            m.view_mut((0, a), (s2, 1)).copy_from_slice(commutator(f, &vm).as_slice());
        }
        NormalSpace { space: null_space(&m, self.rank_tol), degenerate: false }
    }

    /// `-[[A, B], C]`, the curvature tensor of the symmetric space.
    pub fn curvature(&self, a: &DVector<f64>, b: &DVector<f64>, c: &DVector<f64>) -> DVector<f64> {
        let (a, b, c) = (self.matrix(a), self.matrix(b), self.matrix(c));
        -self.coordinates(&commutator(&commutator(&a, &b), &c))
    }

    /// `<R_{A,B} C, D> = <[A, B], [C, D]>`.
    pub fn curvature_form(&self, a: &DVector<f64>, b: &DVector<f64>, c: &DVector<f64>, d: &DVector<f64>) -> f64 {
        let ab = commutator(&self.matrix(a), &self.matrix(b));
        let cd = commutator(&self.matrix(c), &self.matrix(d));
        ab.dot(&cd)
    }

    /// `k_v = {X : [X, v] = 0}` as a span of block-diagonal skew matrices.
    pub fn isotropy_algebra(&self, v: &DVector<f64>) -> Result<LieAlgebraSpan> {
        let kernel = null_space(&self.orbit_map(v), self.rank_tol);
        let gens: Vec<DMatrix<f64>> = kernel.vectors().iter().map(|c| self.algebra_element(c)).collect();
        let max = self.size * (self.size - 1) / 2;
        bracket_closure(self.size, &gens, max, self.rank_tol)
    }

    /// Image of the isotropy algebra of `v` acting on the subspace spanned by
    /// the columns of `frame` (carrier coordinates), in that frame's
    /// coordinates.
    pub fn slice_representation_in_frame(&self, v: &DVector<f64>, frame: &DMatrix<f64>) -> Result<LieAlgebraSpan> {
        let iso = self.isotropy_algebra(v)?;
        let gens: Vec<DMatrix<f64>> = iso
            .basis()
            .iter()
            .map(|x| frame.transpose() * self.action_matrix(x) * frame)
            .collect();
        let k = frame.ncols();
        bracket_closure(k, &gens, k * k.saturating_sub(1) / 2, self.rank_tol)
    }

    /// Slice representation on `nu_bar = nu_v ∩ v^⊥`, in a frame built here.
    pub fn slice_representation_image(&self, v: &DVector<f64>) -> Result<(Subspace, LieAlgebraSpan)> {
        if v.norm() == 0.0 {
            return Err(Error::invalid("slice representation at the origin"));
        }
        let nu = self.normal_space(v).space;
        let line = Subspace::from_orthonormal(DMatrix::from_columns(&[v / v.norm()]), self.rank_tol)?;
        let bar = nu.intersection(&line.complement());
        let image = self.slice_representation_in_frame(v, bar.basis())?;
        Ok((bar, image))
    }
}

#[derive(Debug, Clone)]
pub struct NormalSpace {
    pub space: Subspace,
    pub degenerate: bool,
}
