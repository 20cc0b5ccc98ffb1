//! Matrix Lie algebras given by spanning sets of skew matrices, and their
//! action on the underlying vector space.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::numeric::{commutator, eigh, flatten, new_direction, null_space, orthonormal_span, unflatten, Subspace};
use crate::rng::{gaussian_vector, ProbeRng};

/// A linear span of `size x size` skew matrices, stored as a basis that is
/// orthonormal for `trace(A^T B)`. The matrices act on `R^size`.
#[derive(Debug, Clone)]
pub struct LieAlgebraSpan {
    size: usize,
    basis: Vec<DMatrix<f64>>,
    closed: bool,
    tol: f64,
}

impl LieAlgebraSpan {
    /// The zero algebra acting on `R^size`.
    pub fn zero(size: usize, tol: f64) -> Self {
        Self { size, basis: Vec::new(), closed: true, tol }
    }

    /// Linear span only; no bracket closure is attempted.
    pub fn span(size: usize, generators: &[DMatrix<f64>], tol: f64) -> Result<Self> {
        let basis = orthonormal_matrices(size, generators, tol)?;
        Ok(Self { size, basis, closed: false, tol })
    }

    /// `so(size)` with the basis `(E_ij - E_ji)/sqrt(2)`, `i < j`.
    pub fn so(size: usize, tol: f64) -> Self {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let mut basis = Vec::new();
        for i in 0..size {
            for j in i + 1..size {
                let mut m = DMatrix::zeros(size, size);
                m[(i, j)] = s;
                m[(j, i)] = -s;
                basis.push(m);
            }
        }
        Self { size, basis, closed: true, tol }
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn basis(&self) -> &[DMatrix<f64>] {
        &self.basis
    }

    pub fn is_closed(&self) -> bool {
        self.closed
    }

    pub fn tol(&self) -> f64 {
        self.tol
    }

    /// The span as a subspace of `R^{size^2}` (column-major flattening).
    pub fn as_subspace(&self) -> Subspace {
        let cols: Vec<DVector<f64>> = self.basis.iter().map(flatten).collect();
        let frame = if cols.is_empty() {
            DMatrix::zeros(self.size * self.size, 0)
        } else {
            DMatrix::from_columns(&cols)
        };
        Subspace::from_frame_unchecked(frame, self.tol)
    }

    /// Norm of the component of `x` orthogonal to the span.
    pub fn residual(&self, x: &DMatrix<f64>) -> f64 {
        let mut r = x.clone();
        for b in &self.basis {
            let c = b.dot(&r);
            r -= b * c;
        }
        r.norm()
    }

    pub fn contains(&self, x: &DMatrix<f64>, tol: f64) -> bool {
        self.residual(x) <= tol * x.norm().max(1.0)
    }

    /// Sine of the largest principal angle between the two spans; 1 when
    /// the dimensions differ.
    pub fn distance(&self, other: &LieAlgebraSpan) -> f64 {
        if self.size != other.size {
            return 1.0;
        }
        self.as_subspace().distance(&other.as_subspace())
    }

    /// `{X v : X in basis}`.
    pub fn orbit_vectors(&self, v: &DVector<f64>) -> Vec<DVector<f64>> {
        self.basis.iter().map(|b| b * v).collect()
    }

    /// Largest `|[b_i, b_j]|` residual against the span.
    pub fn closure_defect(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.dim() {
            for j in i + 1..self.dim() {
                worst = worst.max(self.residual(&commutator(&self.basis[i], &self.basis[j])));
            }
        }
        worst
    }

    /// Restriction to an invariant subspace, in the coordinates of its frame.
    pub fn restrict(&self, frame: &DMatrix<f64>) -> Result<LieAlgebraSpan> {
        let gens: Vec<DMatrix<f64>> = self.basis.iter().map(|b| frame.transpose() * b * frame).collect();
        let mut out = LieAlgebraSpan::span(frame.ncols(), &gens, self.tol)?;
        out.closed = self.closed;
        Ok(out)
    }

    /// Conjugate every element by the orthogonal matrix `q`.
    pub fn conjugate(&self, q: &DMatrix<f64>) -> LieAlgebraSpan {
        let basis = self.basis.iter().map(|b| q * b * q.transpose()).collect();
        Self { size: self.size, basis, closed: self.closed, tol: self.tol }
    }
}

fn orthonormal_matrices(size: usize, mats: &[DMatrix<f64>], tol: f64) -> Result<Vec<DMatrix<f64>>> {
    for m in mats {
        if m.nrows() != size || m.ncols() != size {
            return Err(Error::invalid(format!(
                "generator is {}x{}, expected {size}x{size}",
                m.nrows(),
                m.ncols()
            )));
        }
    }
    let flat: Vec<DVector<f64>> = mats.iter().map(flatten).collect();
    let s = orthonormal_span(size * size, &flat, tol)?;
    Ok(s.vectors().iter().map(|v| unflatten(v, size, size)).collect())
}

/// Smallest bracket-closed span containing `generators`.
///
/// Every new basis element is bracketed against all earlier ones, so the
/// loop ends exactly when the span is closed.
pub fn bracket_closure(
    size: usize,
    generators: &[DMatrix<f64>],
    max_dim: usize,
    tol: f64,
) -> Result<LieAlgebraSpan> {
    for g in generators {
        let defect = (g + g.transpose()).abs().max();
        if defect > 1e-10 * g.norm().max(1.0) {
            return Err(Error::invalid("generator is not skew-symmetric"));
        }
    }
    let start = orthonormal_matrices(size, generators, tol)?;
    let mut frame: Vec<DVector<f64>> = start.iter().map(flatten).collect();
    if frame.len() > max_dim {
        return Err(Error::DimensionCapExceeded { dim: frame.len(), cap: max_dim });
    }
    let mut k = 0;
    while k < frame.len() {
        let bk = unflatten(&frame[k], size, size);
        for i in 0..k {
            let bi = unflatten(&frame[i], size, size);
            let c = flatten(&commutator(&bi, &bk));
            if let Some(u) = new_direction(&frame, &c, tol) {
                frame.push(u);
                if frame.len() > max_dim {
                    return Err(Error::DimensionCapExceeded { dim: frame.len(), cap: max_dim });
                }
            }
        }
        k += 1;
    }
    let basis = frame.iter().map(|v| unflatten(v, size, size)).collect();
    Ok(LieAlgebraSpan { size, basis, closed: true, tol })
}

/// Evidence attached to one invariant factor.
#[derive(Debug, Clone, Serialize)]
pub struct FactorEvidence {
    /// Dimensions of the cyclic closures of seeded probe vectors drawn inside
    /// the factor; all equal the factor dimension when the probes are generic.
    pub probe_closure_dims: Vec<usize>,
    /// Dimension of the symmetric part of the commutant on the factor;
    /// 1 certifies irreducibility.
    pub symmetric_commutant_dim: usize,
}

/// `R^size = fixed ⊕ factors[0] ⊕ factors[1] ⊕ ...`, pairwise orthogonal.
#[derive(Debug, Clone)]
pub struct RepDecomposition {
    pub fixed: Subspace,
    pub factors: Vec<Subspace>,
    pub evidence: Vec<FactorEvidence>,
}

impl RepDecomposition {
    pub fn factor_dims(&self) -> Vec<usize> {
        self.factors.iter().map(Subspace::dim).collect()
    }

    pub fn total_dim(&self) -> usize {
        self.fixed.dim() + self.factors.iter().map(Subspace::dim).sum::<usize>()
    }
}

/// Common kernel of the basis elements.
pub fn fixed_subspace(algebra: &LieAlgebraSpan) -> Subspace {
    let n = algebra.size();
    if algebra.dim() == 0 {
        return Subspace::full(n, algebra.tol());
    }
    let mut stacked = DMatrix::zeros(n * algebra.dim(), n);
    for (k, b) in algebra.basis().iter().enumerate() {
        stacked.view_mut((k * n, 0), (n, n)).copy_from(b);
    }
    null_space(&stacked, algebra.tol())
}

/// Smallest invariant subspace containing `seed`.
pub fn cyclic_closure(algebra: &LieAlgebraSpan, seed: &DVector<f64>) -> Subspace {
    let n = algebra.size();
    let tol = algebra.tol();
    let mut frame: Vec<DVector<f64>> = Vec::new();
    if let Some(u) = new_direction(&frame, seed, tol) {
        frame.push(u);
    }
    let mut k = 0;
    while k < frame.len() {
        let x = frame[k].clone();
        for b in algebra.basis() {
            if let Some(u) = new_direction(&frame, &(b * &x), tol) {
                frame.push(u);
            }
        }
        k += 1;
    }
    let basis = if frame.is_empty() { DMatrix::zeros(n, 0) } else { DMatrix::from_columns(&frame) };
    Subspace::from_frame_unchecked(basis, tol)
}

/// Basis of the symmetric matrices on `frame`'s coordinates that commute
/// with every restricted basis element.
fn symmetric_commutant(algebra: &LieAlgebraSpan, frame: &DMatrix<f64>) -> Vec<DMatrix<f64>> {
    let w = frame.ncols();
    let restricted: Vec<DMatrix<f64>> = algebra.basis().iter().map(|b| frame.transpose() * b * frame).collect();
    let mut sym_basis = Vec::with_capacity(w * (w + 1) / 2);
    for i in 0..w {
        for j in i..w {
            let mut e = DMatrix::zeros(w, w);
            if i == j {
                e[(i, i)] = 1.0;
            } else {
                e[(i, j)] = std::f64::consts::FRAC_1_SQRT_2;
                e[(j, i)] = std::f64::consts::FRAC_1_SQRT_2;
            }
            sym_basis.push(e);
        }
    }
    if restricted.is_empty() {
        return sym_basis;
    }
    let rows = restricted.len() * w * w;
    let mut m = DMatrix::zeros(rows, sym_basis.len());
    for (c, e) in sym_basis.iter().enumerate() {
        for (k, b) in restricted.iter().enumerate() {
            let img = commutator(b, e);
            m.view_mut((k * w * w, c), (w * w, 1)).copy_from_slice(img.as_slice());
        }
    }
    let kernel = null_space(&m, algebra.tol());
    kernel
        .vectors()
        .iter()
        .map(|coef| {
            let mut s = DMatrix::zeros(w, w);
            for (c, e) in sym_basis.iter().enumerate() {
                s += e * coef[c];
            }
            s
        })
        .collect()
}

/// Splits an invariant subspace (given by an orthonormal frame) into
/// irreducible pieces through eigenspaces of random symmetric commutant
/// elements.
fn split_invariant(
    algebra: &LieAlgebraSpan,
    frame: DMatrix<f64>,
    rng: &mut ProbeRng,
    out: &mut Vec<(DMatrix<f64>, usize)>,
) {
    let commutant = symmetric_commutant(algebra, &frame);
    if commutant.len() <= 1 {
        out.push((frame, commutant.len()));
        return;
    }
    let coef = gaussian_vector(rng, commutant.len());
    let mut s = DMatrix::zeros(frame.ncols(), frame.ncols());
    for (k, c) in commutant.iter().enumerate() {
        s += c * coef[k];
    }
    let scale = s.norm().max(1e-300);
    let d = eigh(&(s / scale), 1e-6);
    if d.clusters.len() == 1 {
        // A random commutant element with a single eigenvalue would mean the
        // symmetric commutant is scalar after all.
        out.push((frame, 1));
        return;
    }
    for c in 0..d.clusters.len() {
        let piece = &frame * d.cluster_basis(c);
        split_invariant(algebra, piece, rng, out);
    }
}

/// Decomposes `R^size` into the fixed set and irreducible invariant factors.
///
/// Probe vectors drawn from the complement of what has been found so far are
/// closed under the algebra; each closure is then split until its symmetric
/// commutant is one-dimensional. Factors are listed by decreasing dimension,
/// ties in discovery order.
pub fn invariant_decomposition(
    algebra: &LieAlgebraSpan,
    probes: usize,
    rng: &mut ProbeRng,
) -> Result<RepDecomposition> {
    if !algebra.is_closed() {
        return Err(Error::invalid("invariant decomposition needs a bracket-closed algebra"));
    }
    let n = algebra.size();
    let tol = algebra.tol();
    let fixed = fixed_subspace(algebra);
    let mut remaining = fixed.complement();
    let mut found: Vec<(DMatrix<f64>, usize)> = Vec::new();
    while remaining.dim() > 0 {
        let probe = remaining.embed(&gaussian_vector(rng, remaining.dim()));
        let closure = cyclic_closure(algebra, &probe);
        if closure.dim() == 0 {
            break;
        }
        let mut pieces = Vec::new();
        split_invariant(algebra, closure.basis().clone(), rng, &mut pieces);
        found.extend(pieces);
        remaining = remaining.intersection(&closure.complement());
    }
    let mut order: Vec<usize> = (0..found.len()).collect();
    order.sort_by(|&a, &b| found[b].0.ncols().cmp(&found[a].0.ncols()).then(a.cmp(&b)));
    let mut factors = Vec::new();
    let mut evidence = Vec::new();
    for i in order {
        let (frame, commutant_dim) = &found[i];
        let sub = Subspace::from_frame_unchecked(frame.clone(), tol);
        let dims = (0..probes.max(1))
            .map(|_| cyclic_closure(algebra, &sub.embed(&gaussian_vector(rng, sub.dim()))).dim())
            .collect();
        evidence.push(FactorEvidence { probe_closure_dims: dims, symmetric_commutant_dim: *commutant_dim });
        factors.push(sub);
    }
    debug_assert_eq!(fixed.dim() + factors.iter().map(Subspace::dim).sum::<usize>(), n);
    Ok(RepDecomposition { fixed, factors, evidence })
}

#[derive(Debug, Clone, Serialize)]
pub struct TransitivityEvidence {
    pub transitive: bool,
    pub space_dim: usize,
    /// `dim(algebra . xi)` for each probe unit vector.
    pub orbit_dims: Vec<usize>,
}

/// Tests whether the algebra acts transitively on the unit sphere of an
/// invariant subspace: every probe orbit must have dimension `dim - 1`.
pub fn is_transitive_on_sphere(
    algebra: &LieAlgebraSpan,
    space: &Subspace,
    probes: usize,
    rng: &mut ProbeRng,
) -> Result<TransitivityEvidence> {
    if space.dim() == 0 {
        return Err(Error::invalid("transitivity on the sphere of a zero-dimensional space"));
    }
    if space.ambient_dim() != algebra.size() {
        return Err(Error::invalid("space and algebra act on different dimensions"));
    }
    let mut orbit_dims = Vec::with_capacity(probes.max(1));
    for _ in 0..probes.max(1) {
        let mut xi = space.embed(&gaussian_vector(rng, space.dim()));
        xi /= xi.norm();
        let s = orthonormal_span(algebra.size(), &algebra.orbit_vectors(&xi), algebra.tol())?;
        orbit_dims.push(s.dim());
    }
    let transitive = orbit_dims.iter().all(|&d| d + 1 == space.dim());
    Ok(TransitivityEvidence { transitive, space_dim: space.dim(), orbit_dims })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::{matrix_exp, SkewMatrix};
    use crate::rng::probe_rng;

    fn e(n: usize, i: usize, j: usize) -> DMatrix<f64> {
        SkewMatrix::elementary(n, i, j).into_matrix()
    }

    /// so(3) acting on Sym(3) by conjugation, in an orthonormal frame.
    fn conjugation_on_sym3() -> LieAlgebraSpan {
        let mut frame = Vec::new();
        for i in 0..3 {
            for j in i..3 {
                let mut m = DMatrix::zeros(3, 3);
                if i == j {
                    m[(i, i)] = 1.0;
                } else {
                    m[(i, j)] = std::f64::consts::FRAC_1_SQRT_2;
                    m[(j, i)] = std::f64::consts::FRAC_1_SQRT_2;
                }
                frame.push(m);
            }
        }
        let gens: Vec<DMatrix<f64>> = [(0, 1), (0, 2), (1, 2)]
            .iter()
            .map(|&(i, j)| {
                let x = e(3, i, j);
                DMatrix::from_fn(6, 6, |a, b| frame[a].dot(&commutator(&x, &frame[b])))
            })
            .collect();
        bracket_closure(6, &gens, 15, 1e-8).unwrap()
    }

    #[test]
    fn single_generator_closes_to_itself() {
        assert_eq!(bracket_closure(3, &[e(3, 0, 1)], 3, 1e-8).unwrap().dim(), 1);
    }

    #[test]
    fn two_rotations_generate_so3() {
        let a = bracket_closure(3, &[e(3, 0, 1), e(3, 1, 2)], 3, 1e-8).unwrap();
        assert_eq!(a.dim(), 3);
        assert!(a.contains(&e(3, 0, 2), 1e-10));
    }

    #[test]
    fn so4_is_already_closed() {
        let so4 = LieAlgebraSpan::so(4, 1e-8);
        let closed = bracket_closure(4, so4.basis(), 6, 1e-8).unwrap();
        assert_eq!(closed.dim(), 6);
        assert!(closed.closure_defect() < 1e-12);
    }

    #[test]
    fn cap_is_enforced() {
        let err = bracket_closure(3, &[e(3, 0, 1), e(3, 1, 2)], 2, 1e-8).unwrap_err();
        assert!(matches!(err, Error::DimensionCapExceeded { .. }));
    }

    #[test]
    fn standard_so3_is_irreducible() {
        let mut rng = probe_rng(1);
        let d = invariant_decomposition(&LieAlgebraSpan::so(3, 1e-8), 8, &mut rng).unwrap();
        assert_eq!(d.fixed.dim(), 0);
        assert_eq!(d.factor_dims(), vec![3]);
    }

    #[test]
    fn conjugation_on_sym3_splits_off_the_identity() {
        let alg = conjugation_on_sym3();
        assert_eq!(alg.dim(), 3);
        let d = invariant_decomposition(&alg, 8, &mut probe_rng(2)).unwrap();
        assert_eq!(d.fixed.dim(), 1);
        assert_eq!(d.factor_dims(), vec![5]);
        // The fixed line is the identity (coordinates 1 on the diagonal slots).
        let id = DVector::from_vec(vec![1.0, 0.0, 0.0, 1.0, 0.0, 1.0]) / 3f64.sqrt();
        assert!(d.fixed.contains(&id));
        assert_eq!(d.evidence[0].symmetric_commutant_dim, 1);
    }

    #[test]
    fn block_algebra_gives_two_factors() {
        let mut gens = Vec::new();
        let mut a = DMatrix::zeros(5, 5);
        a.view_mut((0, 0), (2, 2)).copy_from(&e(2, 0, 1));
        gens.push(a);
        for (i, j) in [(0, 1), (1, 2)] {
            let mut b = DMatrix::zeros(5, 5);
            b.view_mut((2, 2), (3, 3)).copy_from(&e(3, i, j));
            gens.push(b);
        }
        let alg = bracket_closure(5, &gens, 10, 1e-8).unwrap();
        assert_eq!(alg.dim(), 4);
        let d = invariant_decomposition(&alg, 8, &mut probe_rng(3)).unwrap();
        assert_eq!(d.factor_dims(), vec![3, 2]);
        assert_eq!(d.total_dim(), 5);
    }

    #[test]
    fn isotypic_pair_is_split() {
        // so(3) acting diagonally on R^3 ⊕ R^3: a cyclic probe closure is all
        // of R^6, only the commutant separates the two copies.
        let gens: Vec<DMatrix<f64>> = [(0, 1), (1, 2)]
            .iter()
            .map(|&(i, j)| {
                let mut m = DMatrix::zeros(6, 6);
                m.view_mut((0, 0), (3, 3)).copy_from(&e(3, i, j));
                m.view_mut((3, 3), (3, 3)).copy_from(&e(3, i, j));
                m
            })
            .collect();
        let alg = bracket_closure(6, &gens, 15, 1e-8).unwrap();
        let d = invariant_decomposition(&alg, 8, &mut probe_rng(4)).unwrap();
        assert_eq!(d.factor_dims(), vec![3, 3]);
        for f in &d.factors {
            for b in alg.basis() {
                let img = b * f.basis();
                for c in 0..img.ncols() {
                    assert!(f.residual(&img.column(c).into_owned()) < 1e-9);
                }
            }
        }
    }

    #[test]
    fn transitivity_examples() {
        let mut rng = probe_rng(5);
        let so2 = LieAlgebraSpan::so(2, 1e-8);
        assert!(is_transitive_on_sphere(&so2, &Subspace::full(2, 1e-8), 4, &mut rng).unwrap().transitive);
        for n in 3..=5 {
            let so = LieAlgebraSpan::so(n, 1e-8);
            assert!(is_transitive_on_sphere(&so, &Subspace::full(n, 1e-8), 4, &mut rng).unwrap().transitive);
        }
        let alg = conjugation_on_sym3();
        let d = invariant_decomposition(&alg, 8, &mut rng).unwrap();
        let ev = is_transitive_on_sphere(&alg, &d.factors[0], 6, &mut rng).unwrap();
        assert!(!ev.transitive);
        assert!(ev.orbit_dims.iter().all(|&k| k <= 3));
        assert!(is_transitive_on_sphere(&so2, &Subspace::zero(2, 1e-8), 4, &mut rng).is_err());
    }

    #[test]
    fn decomposition_is_conjugation_invariant() {
        let alg = conjugation_on_sym3();
        let mut rng = probe_rng(6);
        let base = invariant_decomposition(&alg, 8, &mut rng).unwrap();
        for seed in 0..3 {
            let mut r = probe_rng(100 + seed);
            let x = DMatrix::from_fn(6, 6, |_, _| crate::rng::uniform(&mut r, -1.0, 1.0));
            let q = matrix_exp(&(&x - x.transpose()), 1.0).unwrap();
            let conj = alg.conjugate(&q);
            let d = invariant_decomposition(&conj, 8, &mut rng).unwrap();
            assert_eq!(d.factor_dims(), base.factor_dims());
            assert_eq!(d.fixed.dim(), base.fixed.dim());
        }
    }
}
