//! Extrinsic geometry of an orbit `M = K.v` inside the carrier.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::numeric::{eigh, matrix_exp, orthonormal_span, thin_range, Subspace};
use crate::pair::SymmetricPairRep;
use crate::rng::{unit_vector, ProbeRng};

/// `alpha[i][j][k] = <alpha(e_i, e_j), xi_k>` over the tangent frame `e` and
/// the normal frame `xi` of an orbit.
#[derive(Debug, Clone)]
pub struct SecondFundamentalForm {
    n: usize,
    codim: usize,
    data: Vec<f64>,
}

impl SecondFundamentalForm {
    fn zeros(n: usize, codim: usize) -> Self {
        Self { n, codim, data: vec![0.0; n * n * codim] }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn codim(&self) -> usize {
        self.codim
    }

    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        self.data[(i * self.n + j) * self.codim + k]
    }

    fn set(&mut self, i: usize, j: usize, k: usize, x: f64) {
        self.data[(i * self.n + j) * self.codim + k] = x;
    }

    /// `alpha(e_i, e_j)` in normal-frame coordinates.
    pub fn vector(&self, i: usize, j: usize) -> DVector<f64> {
        DVector::from_fn(self.codim, |k, _| self.get(i, j, k))
    }

    pub fn max_asymmetry(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.n {
            for j in 0..self.n {
                for k in 0..self.codim {
                    worst = worst.max((self.get(i, j, k) - self.get(j, i, k)).abs());
                }
            }
        }
        worst
    }

    pub fn max_difference(&self, other: &SecondFundamentalForm) -> f64 {
        self.data.iter().zip(&other.data).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }
}

/// The matrices `A_{xi_a}` on the tangent frame, one per normal frame vector.
#[derive(Debug, Clone)]
pub struct ShapeOperatorMap {
    ops: Vec<DMatrix<f64>>,
}

impl ShapeOperatorMap {
    pub fn len(&self) -> usize {
        self.ops.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ops.is_empty()
    }

    pub fn operators(&self) -> &[DMatrix<f64>] {
        &self.ops
    }

    pub fn get(&self, a: usize) -> &DMatrix<f64> {
        &self.ops[a]
    }

    /// `sum_a c_a A_{xi_a}`.
    pub fn apply(&self, coords: &DVector<f64>) -> DMatrix<f64> {
        let n = self.ops.first().map_or(0, |a| a.nrows());
        let mut out = DMatrix::zeros(n, n);
        for (a, op) in self.ops.iter().enumerate() {
            out += op * coords[a];
        }
        out
    }

    /// `A - (1/n) trace(A) Id` for every operator.
    pub fn traceless(&self) -> ShapeOperatorMap {
        let ops = self
            .ops
            .iter()
            .map(|a| {
                let n = a.nrows();
                a - DMatrix::identity(n, n) * (a.trace() / n as f64)
            })
            .collect();
        ShapeOperatorMap { ops }
    }

    /// Gram matrix `<A_a, A_b>` over the operators with indices in `range`.
    pub fn gram(&self, range: std::ops::Range<usize>) -> DMatrix<f64> {
        let idx: Vec<usize> = range.collect();
        DMatrix::from_fn(idx.len(), idx.len(), |a, b| self.ops[idx[a]].dot(&self.ops[idx[b]]))
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct MinimalityCheck {
    /// `|P_{nu_bar} H| / |H|`.
    pub ratio: f64,
    /// `<H, v>`, equal to `-n` for unit `v`.
    pub mean_dot_position: f64,
    pub minimal: bool,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct HomothecyTest {
    pub is_homothecy: bool,
    pub beta: f64,
    /// `|G - beta^2 Id|_F`.
    pub residual: f64,
    /// `residual / beta^2`, the quantity the verdict thresholds.
    pub relative_residual: f64,
}

/// An orbit `K.v` with its frames and second-order data.
///
/// The base point is normalized to unit norm. The tangent frame is
/// `e_j = rho(Xhat_j) v` where the `Xhat_j` span the complement `m` of the
/// isotropy algebra; the normal frame starts with `v` and continues with a
/// frame of `nu_bar = nu_v ∩ v^⊥`.
#[derive(Debug, Clone)]
pub struct OrbitSubmanifold {
    rep: SymmetricPairRep,
    v: DVector<f64>,
    input_norm: f64,
    tangent: Subspace,
    normal: Subspace,
    normal_bar: Subspace,
    m_reps: Vec<DMatrix<f64>>,
    m_action: Vec<DMatrix<f64>>,
    alpha: SecondFundamentalForm,
    shape: ShapeOperatorMap,
}

pub fn build_orbit(rep: &SymmetricPairRep, v: &DVector<f64>) -> Result<OrbitSubmanifold> {
    OrbitSubmanifold::new(rep, v)
}

impl OrbitSubmanifold {
    pub fn new(rep: &SymmetricPairRep, v: &DVector<f64>) -> Result<Self> {
        if v.len() != rep.carrier_dim() {
            return Err(Error::invalid(format!(
                "base point has {} coordinates, carrier {} has {}",
                v.len(),
                rep,
                rep.carrier_dim()
            )));
        }
        let input_norm = v.norm();
        if !input_norm.is_finite() || input_norm == 0.0 {
            return Err(Error::invalid("orbit base point must be a non-zero finite vector"));
        }
        let tol = rep.rank_tol();
        let v = v / input_norm;
        let big_n = rep.carrier_dim();

        let split = thin_range(&rep.orbit_map(&v), tol);
        let n = split.singular.len();
        let mut m_reps = Vec::with_capacity(n);
        let mut m_action = Vec::with_capacity(n);
        for j in 0..n {
            let coef = split.right.column(j) / split.singular[j];
            let coef = DVector::from_iterator(coef.len(), coef.iter().copied());
            m_reps.push(rep.algebra_element(&coef));
            let mut act = DMatrix::zeros(big_n, big_n);
            for (k, a) in rep.action_matrices().iter().enumerate() {
                act += a * coef[k];
            }
            m_action.push(act);
        }
        let tangent = Subspace::from_frame_unchecked(split.left.clone(), tol);

        let mut seed = vec![v.clone()];
        seed.extend(tangent.complement().vectors());
        let normal = orthonormal_span(big_n, &seed, tol)?;
        if normal.dim() + n != big_n {
            return Err(Error::invalid(format!(
                "tangent ({n}) and normal ({}) dimensions do not fill the carrier ({big_n})",
                normal.dim()
            )));
        }
        let normal_bar = Subspace::from_frame_unchecked(normal.basis().columns(1, normal.dim() - 1).into_owned(), tol);

        let codim = normal.dim();
        let mut alpha = SecondFundamentalForm::zeros(n, codim);
        for i in 0..n {
            for j in i..n {
                let w = (&m_action[i] * &m_action[j] * &v + &m_action[j] * &m_action[i] * &v) * 0.5;
                let c = normal.coordinates(&w);
                for k in 0..codim {
                    alpha.set(i, j, k, c[k]);
                    alpha.set(j, i, k, c[k]);
                }
            }
        }
        let ops = (0..codim).map(|k| DMatrix::from_fn(n, n, |i, j| alpha.get(i, j, k))).collect();

        Ok(Self {
            rep: rep.clone(),
            v,
            input_norm,
            tangent,
            normal,
            normal_bar,
            m_reps,
            m_action,
            alpha,
            shape: ShapeOperatorMap { ops },
        })
    }

    pub fn rep(&self) -> &SymmetricPairRep {
        &self.rep
    }

    /// Unit base point, carrier coordinates.
    pub fn point(&self) -> &DVector<f64> {
        &self.v
    }

    pub fn input_norm(&self) -> f64 {
        self.input_norm
    }

    pub fn dim(&self) -> usize {
        self.tangent.dim()
    }

    pub fn codim(&self) -> usize {
        self.normal.dim()
    }

    pub fn tangent(&self) -> &Subspace {
        &self.tangent
    }

    /// Normal frame; column 0 is the base point.
    pub fn normal(&self) -> &Subspace {
        &self.normal
    }

    pub fn normal_bar(&self) -> &Subspace {
        &self.normal_bar
    }

    /// `Xhat_j` with `Xhat_j . v = e_j`.
    pub fn m_representatives(&self) -> &[DMatrix<f64>] {
        &self.m_reps
    }

    /// `rho(Xhat_j)` on carrier coordinates.
    pub fn m_actions(&self) -> &[DMatrix<f64>] {
        &self.m_action
    }

    /// `rho(sum_j c_j Xhat_j)`: moves the base point with velocity
    /// `sum_j c_j e_j`.
    pub fn tangent_generator(&self, coords: &DVector<f64>) -> DMatrix<f64> {
        let k = self.rep.carrier_dim();
        let mut out = DMatrix::zeros(k, k);
        for (j, a) in self.m_action.iter().enumerate() {
            out += a * coords[j];
        }
        out
    }

    pub fn second_fundamental_form(&self) -> &SecondFundamentalForm {
        &self.alpha
    }

    /// Operators over the full normal frame (index 0 is `A_v`).
    pub fn shape_operators(&self) -> &ShapeOperatorMap {
        &self.shape
    }

    pub fn traceless_shape_operators(&self) -> ShapeOperatorMap {
        self.shape.traceless()
    }

    /// `A_xi` for a carrier vector `xi`; only its normal component matters.
    pub fn shape_operator(&self, xi: &DVector<f64>) -> DMatrix<f64> {
        self.shape.apply(&self.normal.coordinates(xi))
    }

    pub fn traceless_shape_operator(&self, xi: &DVector<f64>) -> DMatrix<f64> {
        let a = self.shape_operator(xi);
        let n = a.nrows();
        &a - DMatrix::identity(n, n) * (a.trace() / n as f64)
    }

    /// `alpha(x, y)` for carrier tangent vectors, returned in the carrier.
    pub fn alpha_ambient(&self, x: &DVector<f64>, y: &DVector<f64>) -> DVector<f64> {
        let cx = self.tangent.coordinates(x);
        let cy = self.tangent.coordinates(y);
        let n = self.dim();
        let mut coords = DVector::zeros(self.codim());
        for i in 0..n {
            for j in 0..n {
                let w = cx[i] * cy[j];
                if w != 0.0 {
                    coords += self.alpha.vector(i, j) * w;
                }
            }
        }
        self.normal.embed(&coords)
    }

    /// `H = sum_i alpha(e_i, e_i)` in normal-frame coordinates.
    pub fn mean_curvature_coords(&self) -> DVector<f64> {
        let mut h = DVector::zeros(self.codim());
        for i in 0..self.dim() {
            h += self.alpha.vector(i, i);
        }
        h
    }

    pub fn mean_curvature(&self) -> DVector<f64> {
        self.normal.embed(&self.mean_curvature_coords())
    }

    pub fn minimality(&self, tol: f64) -> MinimalityCheck {
        let h = self.mean_curvature_coords();
        let bar = h.rows(1, h.len() - 1).norm();
        let ratio = if h.norm() > 0.0 { bar / h.norm() } else { 0.0 };
        MinimalityCheck { ratio, mean_dot_position: h[0], minimal: ratio <= tol }
    }

    /// Gram matrix of `{A_xi}` over the `nu_bar` frame against `beta^2 Id`.
    pub fn homothecy_test(&self, tol: f64) -> Result<HomothecyTest> {
        let k = self.normal_bar.dim();
        if k == 0 {
            return Err(Error::invalid("homothecy test on a zero-dimensional nu_bar"));
        }
        let g = self.shape.gram(1..k + 1);
        let beta2 = g.trace() / k as f64;
        let residual = (&g - DMatrix::identity(k, k) * beta2).norm();
        let relative_residual = if beta2 > 0.0 { residual / beta2 } else { f64::INFINITY };
        Ok(HomothecyTest {
            is_homothecy: relative_residual <= tol,
            beta: beta2.max(0.0).sqrt(),
            residual,
            relative_residual,
        })
    }

    /// Spread `max - min` of `|alpha(X, X)|` over probe unit tangent vectors.
    pub fn isotropy_defect(&self, probes: usize, rng: &mut ProbeRng) -> f64 {
        if probes <= 1 || self.dim() == 0 {
            return 0.0;
        }
        let mut lo = f64::INFINITY;
        let mut hi = 0.0f64;
        for _ in 0..probes {
            let x = self.tangent.embed(&unit_vector(rng, self.dim()));
            let a = self.alpha_ambient(&x, &x).norm();
            lo = lo.min(a);
            hi = hi.max(a);
        }
        hi - lo
    }

    /// Dimension of the span of `alpha(e_i, e_j)`.
    pub fn first_normal_space_dim(&self, tol: f64) -> usize {
        let mut vs = Vec::new();
        for i in 0..self.dim() {
            for j in i..self.dim() {
                vs.push(self.alpha.vector(i, j));
            }
        }
        orthonormal_span(self.codim(), &vs, tol).map(|s| s.dim()).unwrap_or(0)
    }

    /// Smallest eigenvalue of the Gram matrix of `{A_xi}` over the full normal
    /// frame; positive iff the shape-operator map is injective.
    pub fn shape_map_min_gram_eigenvalue(&self) -> f64 {
        let g = self.shape.gram(0..self.codim());
        eigh(&g, 0.0).eigenvalues.first().copied().unwrap_or(0.0)
    }

    /// `alpha` recomputed from central second differences of the orbit
    /// curves `exp(t Xhat) v`, once Richardson-extrapolated. Mixed entries come
    /// from polarization.
    pub fn alpha_finite_difference(&self, h: f64) -> Result<SecondFundamentalForm> {
        let n = self.dim();
        let codim = self.codim();
        let accel = |gen: &DMatrix<f64>, step: f64| -> Result<DVector<f64>> {
            let plus = matrix_exp(gen, step)? * &self.v;
            let minus = matrix_exp(gen, -step)? * &self.v;
            Ok((plus - &self.v * 2.0 + minus) / (step * step))
        };
        let second = |gen: &DMatrix<f64>| -> Result<DVector<f64>> {
            let coarse = accel(gen, h)?;
            let fine = accel(gen, h / 2.0)?;
            Ok((fine * 4.0 - coarse) / 3.0)
        };
        let mut out = SecondFundamentalForm::zeros(n, codim);
        let diag: Vec<DVector<f64>> = self.m_action.iter().map(&second).collect::<Result<_>>()?;
        for i in 0..n {
            for j in i..n {
                let q = if i == j {
                    diag[i].clone()
                } else {
                    let sum = &self.m_action[i] + &self.m_action[j];
                    (second(&sum)? - &diag[i] - &diag[j]) * 0.5
                };
                let c = self.normal.coordinates(&q);
                for k in 0..codim {
                    out.set(i, j, k, c[k]);
                    out.set(j, i, k, c[k]);
                }
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{gaussian_vector, probe_rng};

    fn veronese_orbit(n: usize) -> OrbitSubmanifold {
        let rep = SymmetricPairRep::sl_so(n + 1).unwrap();
        let mut s = DMatrix::identity(n + 1, n + 1) * (-1.0 / (n + 1) as f64);
        s[(0, 0)] += 1.0;
        build_orbit(&rep, &rep.coordinates(&s)).unwrap()
    }

    fn diag_orbit(d: &[f64]) -> OrbitSubmanifold {
        let rep = SymmetricPairRep::sl_so(d.len()).unwrap();
        let m = DMatrix::from_diagonal(&DVector::from_column_slice(d));
        build_orbit(&rep, &rep.coordinates(&m)).unwrap()
    }

    #[test]
    fn dimensions() {
        let m = veronese_orbit(3);
        assert_eq!((m.dim(), m.codim(), m.rep().carrier_dim()), (3, 6, 9));
        let m = veronese_orbit(2);
        assert_eq!((m.dim(), m.codim()), (2, 3));
        let m = diag_orbit(&[0.7, -0.1, -0.6]);
        assert_eq!((m.dim(), m.codim()), (3, 2));
    }

    #[test]
    fn zero_point_is_rejected() {
        let rep = SymmetricPairRep::sl_so(3).unwrap();
        assert!(build_orbit(&rep, &DVector::zeros(5)).is_err());
        assert!(build_orbit(&rep, &DVector::zeros(4)).is_err());
    }

    #[test]
    fn frames_are_consistent() {
        let m = diag_orbit(&[0.5, 0.2, -0.1, -0.6]);
        assert!((m.tangent().basis().transpose() * m.normal().basis()).norm() < 1e-10);
        assert!((m.normal().vector(0) - m.point()).norm() < 1e-12);
        for (j, a) in m.m_actions().iter().enumerate() {
            assert!((a * m.point() - m.tangent().vector(j)).norm() < 1e-10);
        }
    }

    #[test]
    fn position_shape_operator_is_minus_identity() {
        for n in 2..=4 {
            let m = veronese_orbit(n);
            let av = m.shape_operators().get(0);
            assert!((av + DMatrix::identity(n, n)).norm() < 1e-12);
        }
        let m = diag_orbit(&[0.5, 0.2, -0.1, -0.6]);
        assert!((m.shape_operators().get(0) + DMatrix::identity(m.dim(), m.dim())).norm() < 1e-12);
    }

    #[test]
    fn gauss_pairing_and_symmetry() {
        let m = diag_orbit(&[0.9, 0.3, -0.4, -0.8]);
        assert!(m.second_fundamental_form().max_asymmetry() < 1e-12);
        for a in 0..m.codim() {
            let op = m.shape_operators().get(a);
            assert!((op - op.transpose()).norm() < 1e-9);
            for i in 0..m.dim() {
                for j in 0..m.dim() {
                    let lhs = (op * m.tangent().coordinates(&m.tangent().vector(i)))[j];
                    let rhs = m.alpha_ambient(&m.tangent().vector(i), &m.tangent().vector(j)).dot(&m.normal().vector(a));
                    assert!((lhs - rhs).abs() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn alpha_matches_finite_differences() {
        for m in [veronese_orbit(3), diag_orbit(&[0.6, 0.3, -0.2, -0.7])] {
            let fd = m.alpha_finite_difference(1e-3).unwrap();
            assert!(m.second_fundamental_form().max_difference(&fd) < 1e-6);
        }
    }

    #[test]
    fn first_normal_space_is_full_for_veronese() {
        let m = veronese_orbit(3);
        assert_eq!(m.first_normal_space_dim(1e-8), 6);
        assert!(m.shape_map_min_gram_eigenvalue() > 1e-6);
    }

    #[test]
    fn trace_compatibility() {
        let m = diag_orbit(&[0.6, 0.3, -0.2, -0.7]);
        let h = m.mean_curvature_coords();
        for a in 0..m.codim() {
            assert!((h[a] - m.shape_operators().get(a).trace()).abs() < 1e-8);
        }
    }

    #[test]
    fn veronese_is_minimal_in_the_sphere() {
        for n in 2..=5 {
            let m = veronese_orbit(n);
            let c = m.minimality(1e-8);
            assert!(c.minimal, "n = {n}: ratio {}", c.ratio);
            assert!((c.mean_dot_position + n as f64).abs() < 1e-8);
        }
        let m = diag_orbit(&[0.7, -0.1, -0.6]);
        assert!(!m.minimality(1e-8).minimal);
    }

    #[test]
    fn rescaling_leaves_verdicts_unchanged() {
        let rep = SymmetricPairRep::sl_so(4).unwrap();
        let mut s = DMatrix::identity(4, 4) * -0.25;
        s[(0, 0)] += 1.0;
        let a = build_orbit(&rep, &rep.coordinates(&s)).unwrap();
        let b = build_orbit(&rep, &(rep.coordinates(&s) * 2.0)).unwrap();
        assert_eq!(a.minimality(1e-8).minimal, b.minimality(1e-8).minimal);
        assert!((b.input_norm() - 2.0 * a.input_norm()).abs() < 1e-12);
        let (ha, hb) = (a.homothecy_test(1e-8).unwrap(), b.homothecy_test(1e-8).unwrap());
        assert!(ha.is_homothecy && hb.is_homothecy);
        // Base points are normalized, so beta is scale independent.
        assert!((ha.beta - hb.beta).abs() < 1e-10);
    }

    #[test]
    fn traceless_shape_operators() {
        let m = veronese_orbit(3);
        let t = m.traceless_shape_operators();
        for a in 0..m.codim() {
            assert!(t.get(a).trace().abs() < 1e-13);
        }
        for a in 1..m.codim() {
            assert!((t.get(a) - m.shape_operators().get(a)).norm() < 1e-8);
        }
        let mut rng = probe_rng(4);
        let x = m.normal().embed(&gaussian_vector(&mut rng, m.codim()));
        let y = m.normal().embed(&gaussian_vector(&mut rng, m.codim()));
        let lin = m.shape_operator(&(&x + &y)) - m.shape_operator(&x) - m.shape_operator(&y);
        assert!(lin.norm() < 1e-10);
    }

    #[test]
    fn homothecy() {
        for n in 2..=5 {
            let t = veronese_orbit(n).homothecy_test(1e-8).unwrap();
            assert!(t.is_homothecy, "n = {n}: {}", t.relative_residual);
        }
        // Two-eigenvalue point of type (2, 3) in Sym0(5).
        let t = diag_orbit(&[3.0, 3.0, -2.0, -2.0, -2.0]).homothecy_test(1e-8).unwrap();
        assert!(!t.is_homothecy);
    }

    #[test]
    fn isotropy_defect() {
        let mut rng = probe_rng(5);
        assert!(veronese_orbit(3).isotropy_defect(32, &mut rng) < 1e-6);
        assert_eq!(veronese_orbit(3).isotropy_defect(1, &mut rng), 0.0);
        let rep = SymmetricPairRep::product(&[3, 3]).unwrap();
        let mut s = DMatrix::identity(3, 3) * (-1.0 / 3.0);
        s[(0, 0)] += 1.0;
        let v = rep.block_point(&[s.clone(), s]).unwrap();
        let m = build_orbit(&rep, &v).unwrap();
        assert!(m.isotropy_defect(32, &mut rng) > 0.1);
    }

    #[test]
    fn equivariance() {
        let m = veronese_orbit(3);
        let rep = m.rep().clone();
        let mut rng = probe_rng(6);
        for _ in 0..3 {
            let x = rep.algebra_element(&gaussian_vector(&mut rng, rep.algebra_dim()));
            let g = matrix_exp(&rep.action_matrix(&x), 1.0).unwrap();
            let moved = build_orbit(&rep, &(&g * m.point())).unwrap();
            // Tangent and normal spaces are carried by g.
            let pt = &g * m.tangent().projector() * g.transpose();
            assert!((pt - moved.tangent().projector()).norm() < 1e-7);
            // Frame-independent shape data: the spectrum of A_{g xi} at g v.
            let xi = m.normal_bar().vector(0);
            let mut a = eigh(&m.shape_operator(&xi), 0.0).eigenvalues;
            let mut b = eigh(&moved.shape_operator(&(&g * &xi)), 0.0).eigenvalues;
            a.sort_by(f64::total_cmp);
            b.sort_by(f64::total_cmp);
            for (x, y) in a.iter().zip(&b) {
                assert!((x - y).abs() < 1e-7);
            }
        }
    }

    #[test]
    fn homothecy_rejects_hypersurface_bar_of_dimension_zero() {
        // A regular point of Sym0(2) has a one-dimensional normal space.
        let m = diag_orbit(&[0.5, -0.5]);
        assert_eq!(m.codim(), 1);
        assert!(m.homothecy_test(1e-8).is_err());
    }
}
