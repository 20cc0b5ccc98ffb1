//! Holonomy tubes over orbits: spectra by the tube formula and by a
//! finite-difference patch, Dupin and caustic checks, and the differential
//! of the normal exponential map.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::holonomy::holonomy_algebra;
use crate::numeric::{eigh, matrix_exp, thin_range, EigenCluster, SpectralDecomposition, Subspace};
use crate::orbit::{build_orbit, OrbitSubmanifold};
use crate::pair::SymmetricPairRep;
use crate::rng::{gaussian_vector, ProbeRng};
use crate::transport::{parallel_transport_normal, transport_exact, Bundle, CurveSegment, OrbitCurve};

/// Safety margin: tube directions keep every eigenvalue of `A_xi` within
/// `1 - a` of zero.
pub const TUBE_SAFETY: f64 = 0.2;

const FOCAL_GAP: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TubeParams {
    pub tangent_points: usize,
    pub fiber_points: usize,
    /// Half-width of every stencil.
    pub extent: f64,
    /// Step of the stepped transport used by the formula route.
    pub step: f64,
    pub cluster_gap: f64,
}

impl Default for TubeParams {
    fn default() -> Self {
        Self { tangent_points: 7, fiber_points: 5, extent: 0.02, step: 1e-3, cluster_gap: 1e-3 }
    }
}

impl TubeParams {
    pub fn validate(&self) -> Result<()> {
        for (name, pts) in [("tangent_points", self.tangent_points), ("fiber_points", self.fiber_points)] {
            if stencil(pts).is_none() {
                return Err(Error::Config(format!("{name} must be 3, 5 or 7, got {pts}")));
            }
        }
        if !(self.extent > 0.0 && self.step > 0.0 && self.cluster_gap > 0.0) {
            return Err(Error::Config("tube extent, step and cluster_gap must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct TubeDirection {
    /// Carrier coordinates of `xi`.
    pub xi: Vec<f64>,
    /// Scale applied to the target spectrum `{1/2, 1/2, -1/(n-2), ...}`.
    pub scale: f64,
    /// `|A_xi - target| / |target|` before rescaling.
    pub fit_residual: f64,
    /// Eigenvalues of `A_xi`, ascending.
    pub eigenvalues: Vec<f64>,
    pub clusters: Vec<EigenCluster>,
}

impl TubeDirection {
    pub fn vector(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.xi)
    }
}

/// A normal vector in `nu_bar` whose shape operator has the two-eigenvalue
/// pattern with multiplicities `(2, n - 2)`, scaled so that its largest
/// eigenvalue in absolute value is `1 - a`.
pub fn choose_tube_direction(orbit: &OrbitSubmanifold) -> Result<TubeDirection> {
    let n = orbit.dim();
    if n < 3 {
        return Err(Error::invalid(format!("tube directions need n >= 3, orbit has n = {n}")));
    }
    let k = orbit.codim();
    if k < 2 {
        return Err(Error::NotApplicable("orbit has no normal directions besides the position".into()));
    }
    let ops = orbit.shape_operators();
    let gram = ops.gram(1..k);
    if eigh(&gram, 0.0).eigenvalues[0] <= orbit.rep().rank_tol() {
        return Err(Error::NotApplicable("shape map is not injective on nu_bar".into()));
    }
    let small = 1.0 / (n as f64 - 2.0);
    let mut diag = vec![-small; n];
    diag[0] = 0.5;
    diag[1] = 0.5;
    let target = DMatrix::from_diagonal(&DVector::from_vec(diag));
    let rhs = DVector::from_iterator(k - 1, (1..k).map(|a| ops.get(a).dot(&target)));
    let chol = gram
        .clone()
        .cholesky()
        .ok_or_else(|| Error::NotApplicable("shape map Gram matrix is not positive definite".into()))?;
    let coef = chol.solve(&rhs);
    let mut full = DVector::zeros(k);
    full.rows_mut(1, k - 1).copy_from(&coef);
    let fitted = ops.apply(&full);
    let fit_residual = (&fitted - &target).norm() / target.norm();
    let top = eigh(&fitted, 0.0).eigenvalues.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if top == 0.0 {
        return Err(Error::NotApplicable("fitted shape operator vanishes".into()));
    }
    let scale = (1.0 - TUBE_SAFETY) / top;
    let xi = orbit.normal().embed(&(full * scale));
    let d = eigh(&(fitted * scale), 1e-6);
    Ok(TubeDirection {
        xi: xi.iter().copied().collect(),
        scale,
        fit_residual,
        clusters: d.cluster_summary(),
        eigenvalues: d.eigenvalues,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct TubeSpectrum {
    /// Horizontal clusters ordered by decreasing foot eigenvalue, so that
    /// entry 0 is `lambda_hat_1`; the last cluster is the vertical `-1`.
    pub clusters: Vec<EigenCluster>,
    /// Eigenvalues of the traceless shape operator at the foot, ascending.
    pub foot_eigenvalues: Vec<f64>,
    /// `<xi, H> / n` at the foot.
    pub mean_term: f64,
    pub vertical_multiplicity: usize,
    pub dim: usize,
}

impl TubeSpectrum {
    pub fn lambda_hat(&self, i: usize) -> Option<f64> {
        self.clusters.get(i).map(|c| c.value)
    }

    /// All eigenvalues with multiplicity, ascending.
    pub fn sorted_values(&self) -> Vec<f64> {
        let mut out: Vec<f64> =
            self.clusters.iter().flat_map(|c| std::iter::repeat_n(c.value, c.multiplicity)).collect();
        out.sort_by(f64::total_cmp);
        out
    }

    pub fn multiplicity_sum(&self) -> usize {
        self.clusters.iter().map(|c| c.multiplicity).sum()
    }

    /// Largest gap between the sorted multisets; infinite if sizes differ.
    pub fn max_gap(&self, other: &TubeSpectrum) -> f64 {
        let (a, b) = (self.sorted_values(), other.sorted_values());
        if a.len() != b.len() {
            return f64::INFINITY;
        }
        a.iter().zip(&b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
    }

    /// Value of the cluster closest to `target`.
    pub fn nearest(&self, target: f64) -> Option<&EigenCluster> {
        self.clusters.iter().min_by(|a, b| (a.value - target).abs().total_cmp(&(b.value - target).abs()))
    }
}

/// Foot point and normal vector at the end of a curve.
#[derive(Debug, Clone)]
pub struct TubeFoot {
    pub orbit: OrbitSubmanifold,
    pub xi: DVector<f64>,
}

/// Transports `xi` from the base point along `curve` with the stepped scheme.
pub fn stepped_foot(orbit: &OrbitSubmanifold, xi: &DVector<f64>, curve: &OrbitCurve, step: f64) -> Result<TubeFoot> {
    let frame = DMatrix::from_column_slice(xi.len(), 1, xi.as_slice());
    let res = parallel_transport_normal(orbit.rep(), curve, orbit.point(), &frame, step, 0)?;
    Ok(TubeFoot { orbit: build_orbit(orbit.rep(), &res.end_point)?, xi: res.end.column(0).into_owned() })
}

/// Transports `xi` from the base point along `curve` in closed form.
pub fn exact_foot(orbit: &OrbitSubmanifold, xi: &DVector<f64>, curve: &OrbitCurve) -> Result<TubeFoot> {
    let frame = DMatrix::from_column_slice(xi.len(), 1, xi.as_slice());
    let (w, f) = transport_exact(orbit.rep(), curve, orbit.point(), &frame, Bundle::Normal)?;
    Ok(TubeFoot { orbit: build_orbit(orbit.rep(), &w)?, xi: f.column(0).into_owned() })
}

/// Fiber generators `L'_k` (normal-frame coordinates) whose images
/// `L'_k c` are orthonormal, `c` the coordinates of `xi`.
fn fiber_generators(foot: &TubeFoot) -> Result<Vec<DMatrix<f64>>> {
    let alg = holonomy_algebra(&foot.orbit)?;
    let c = foot.orbit.normal().coordinates(&foot.xi);
    if alg.dim() == 0 {
        return Ok(vec![]);
    }
    let images = DMatrix::from_columns(&alg.basis().iter().map(|l| l * &c).collect::<Vec<_>>());
    let split = thin_range(&images, foot.orbit.rep().rank_tol());
    Ok((0..split.singular.len())
        .map(|j| {
            let mut l = DMatrix::zeros(c.len(), c.len());
            for (k, b) in alg.basis().iter().enumerate() {
                l += b * (split.right[(k, j)] / split.singular[j]);
            }
            l
        })
        .collect())
}

fn check_focal(eigs: &[f64]) -> Result<()> {
    for &l in eigs {
        if (1.0 - l).abs() < FOCAL_GAP {
            return Err(Error::FocalDegeneracy { eigenvalue: l, gap: (1.0 - l).abs() });
        }
    }
    Ok(())
}

/// Spectrum of the tube through `foot.point + foot.xi` from the eigenvalues of
/// `A_xi` at the foot.
pub fn tube_spectrum_at(foot: &TubeFoot, cluster_gap: f64) -> Result<TubeSpectrum> {
    let orbit = &foot.orbit;
    let n = orbit.dim();
    let a = orbit.shape_operator(&foot.xi);
    let trace = a.trace();
    let mean_term = trace / n as f64;
    let d = eigh(&a, cluster_gap);
    check_focal(&d.eigenvalues)?;
    let foot_eigenvalues = d.eigenvalues.iter().map(|l| l - mean_term).collect();
    let mut clusters: Vec<EigenCluster> = d
        .cluster_summary()
        .into_iter()
        .rev()
        .map(|c| EigenCluster { value: c.value / (1.0 - c.value), multiplicity: c.multiplicity })
        .collect();
    let vertical = fiber_generators(foot)?.len();
    if vertical > 0 {
        clusters.push(EigenCluster { value: -1.0, multiplicity: vertical });
    }
    Ok(TubeSpectrum { clusters, foot_eigenvalues, mean_term, vertical_multiplicity: vertical, dim: n + vertical })
}

/// Tube formula route: stepped transport of `xi` to the curve end, then the
/// rational map `lambda -> lambda / (1 - lambda)`.
pub fn tube_spectrum_via_formula(
    orbit: &OrbitSubmanifold,
    xi: &DVector<f64>,
    curve: &OrbitCurve,
    params: &TubeParams,
) -> Result<TubeSpectrum> {
    tube_spectrum_at(&stepped_foot(orbit, xi, curve, params.step)?, params.cluster_gap)
}

/// Offsets and first/second derivative weights of a centered stencil.
fn stencil(points: usize) -> Option<(Vec<f64>, Vec<f64>, Vec<f64>)> {
    match points {
        3 => Some((vec![-1.0, 0.0, 1.0], vec![-0.5, 0.0, 0.5], vec![1.0, -2.0, 1.0])),
        5 => Some((
            vec![-2.0, -1.0, 0.0, 1.0, 2.0],
            vec![1.0 / 12.0, -2.0 / 3.0, 0.0, 2.0 / 3.0, -1.0 / 12.0],
            vec![-1.0 / 12.0, 4.0 / 3.0, -2.5, 4.0 / 3.0, -1.0 / 12.0],
        )),
        7 => Some((
            vec![-3.0, -2.0, -1.0, 0.0, 1.0, 2.0, 3.0],
            vec![-1.0 / 60.0, 3.0 / 20.0, -0.75, 0.0, 0.75, -3.0 / 20.0, 1.0 / 60.0],
            vec![1.0 / 90.0, -3.0 / 20.0, 1.5, -49.0 / 18.0, 1.5, -3.0 / 20.0, 1.0 / 90.0],
        )),
        _ => None,
    }
}

struct Axis {
    delta: f64,
    offsets: Vec<f64>,
    first: Vec<f64>,
    second: Vec<f64>,
}

/// Local chart `q(s, u) = exp(sum s_j rho(Xhat_j)) (w + N exp(sum u_k L'_k) c)`
/// of the holonomy tube around `w + xi`.
pub struct TubePatch {
    foot: TubeFoot,
    fiber: Vec<DMatrix<f64>>,
    coords: DVector<f64>,
    axes: Vec<Axis>,
}

/// Value of the chart and of `xi_hat = q - pi(q)` at a parameter.
pub struct PatchPoint {
    pub foot: DVector<f64>,
    pub xi_hat: DVector<f64>,
    pub q: DVector<f64>,
}

impl TubePatch {
    pub fn new(foot: TubeFoot, params: &TubeParams) -> Result<Self> {
        params.validate()?;
        let fiber = fiber_generators(&foot)?;
        let coords = foot.orbit.normal().coordinates(&foot.xi);
        let n = foot.orbit.dim();
        let (to, tf, ts) = stencil(params.tangent_points).expect("validated");
        let (fo, ff, fs) = stencil(params.fiber_points).expect("validated");
        let t_half = (params.tangent_points / 2) as f64;
        let f_half = (params.fiber_points / 2) as f64;
        let mut axes = Vec::new();
        for _ in 0..n {
            axes.push(Axis { delta: params.extent / t_half, offsets: to.clone(), first: tf.clone(), second: ts.clone() });
        }
        for _ in 0..fiber.len() {
            axes.push(Axis { delta: params.extent / f_half, offsets: fo.clone(), first: ff.clone(), second: fs.clone() });
        }
        Ok(Self { foot, fiber, coords, axes })
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn base_dim(&self) -> usize {
        self.foot.orbit.dim()
    }

    pub fn vertical_dim(&self) -> usize {
        self.fiber.len()
    }

    pub fn foot(&self) -> &TubeFoot {
        &self.foot
    }

    pub fn eval(&self, p: &[f64]) -> Result<PatchPoint> {
        let orbit = &self.foot.orbit;
        let n = orbit.dim();
        let s = DVector::from_column_slice(&p[..n]);
        let g = matrix_exp(&orbit.tangent_generator(&s), 1.0)?;
        let mut u = DMatrix::zeros(self.coords.len(), self.coords.len());
        for (k, l) in self.fiber.iter().enumerate() {
            u += l * p[n + k];
        }
        let eta = orbit.normal().embed(&(matrix_exp(&u, 1.0)? * &self.coords));
        let foot = &g * orbit.point();
        let xi_hat = &g * eta;
        let q = &foot + &xi_hat;
        Ok(PatchPoint { foot, xi_hat, q })
    }

    fn sample<F: Fn(&PatchPoint) -> Result<DVector<f64>>>(&self, p: &[f64], f: &F) -> Result<DVector<f64>> {
        f(&self.eval(p)?)
    }

    /// First derivatives of `f` along each chart axis at the origin.
    pub fn jacobian_of<F: Fn(&PatchPoint) -> Result<DVector<f64>>>(&self, f: F) -> Result<DMatrix<f64>> {
        let d = self.dim();
        let mut cols = Vec::with_capacity(d);
        for (a, axis) in self.axes.iter().enumerate() {
            let mut acc: Option<DVector<f64>> = None;
            for (o, w) in axis.offsets.iter().zip(&axis.first) {
                if *w == 0.0 {
                    continue;
                }
                let mut p = vec![0.0; d];
                p[a] = o * axis.delta;
                let val = self.sample(&p, &f)? * (*w / axis.delta);
                acc = Some(match acc {
                    Some(x) => x + val,
                    None => val,
                });
            }
            cols.push(acc.expect("stencil has non-zero weights"));
        }
        Ok(DMatrix::from_columns(&cols))
    }

    /// `g = J^T J` and `h_ab = <d_a d_b q, xi_hat>` at the origin.
    pub fn fundamental_forms(&self) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
        let d = self.dim();
        let q = |pt: &PatchPoint| Ok(pt.q.clone());
        let j = self.jacobian_of(q)?;
        let xi_hat = self.foot.xi.clone();
        let mut h = DMatrix::zeros(d, d);
        for a in 0..d {
            let ax = &self.axes[a];
            let mut acc = 0.0;
            for (o, w) in ax.offsets.iter().zip(&ax.second) {
                let mut p = vec![0.0; d];
                p[a] = o * ax.delta;
                acc += w * self.eval(&p)?.q.dot(&xi_hat);
            }
            h[(a, a)] = acc / (ax.delta * ax.delta);
            for b in 0..a {
                let bx = &self.axes[b];
                let mut acc = 0.0;
                for (oa, wa) in ax.offsets.iter().zip(&ax.first) {
                    if *wa == 0.0 {
                        continue;
                    }
                    for (ob, wb) in bx.offsets.iter().zip(&bx.first) {
                        if *wb == 0.0 {
                            continue;
                        }
                        let mut p = vec![0.0; d];
                        p[a] = oa * ax.delta;
                        p[b] = ob * bx.delta;
                        acc += wa * wb * self.eval(&p)?.q.dot(&xi_hat);
                    }
                }
                h[(a, b)] = acc / (ax.delta * bx.delta);
                h[(b, a)] = h[(a, b)];
            }
        }
        Ok((j.transpose() * &j, h))
    }
}

/// Shape operator of the patch in the direction `xi_hat`, in coordinates
/// orthonormal for the induced metric.
pub struct PatchShape {
    /// Lower Cholesky factor of the induced metric `g = L L^T`.
    pub chol: DMatrix<f64>,
    pub decomposition: SpectralDecomposition,
}

pub fn patch_shape(patch: &TubePatch, cluster_gap: f64) -> Result<PatchShape> {
    let (g, h) = patch.fundamental_forms()?;
    let ge = eigh(&g, 0.0);
    let top = ge.eigenvalues.last().copied().unwrap_or(0.0);
    let min = ge.eigenvalues.first().copied().unwrap_or(0.0);
    if min <= 1e-10 * top.max(1.0) {
        return Err(Error::PatchDegenerate { min_eigenvalue: min });
    }
    let l = g.cholesky().ok_or(Error::PatchDegenerate { min_eigenvalue: min })?.l();
    let linv = l.clone().try_inverse().ok_or(Error::PatchDegenerate { min_eigenvalue: min })?;
    let s = &linv * h * linv.transpose();
    Ok(PatchShape { chol: l, decomposition: eigh(&s, cluster_gap) })
}

/// Direct route: finite-difference shape operator of a local tube patch
/// around the exactly transported foot.
pub fn tube_spectrum_direct(
    orbit: &OrbitSubmanifold,
    xi: &DVector<f64>,
    curve: &OrbitCurve,
    params: &TubeParams,
) -> Result<TubeSpectrum> {
    let foot = exact_foot(orbit, xi, curve)?;
    direct_spectrum_at(foot, params).map(|(s, _, _)| s)
}

fn direct_spectrum_at(foot: TubeFoot, params: &TubeParams) -> Result<(TubeSpectrum, TubePatch, PatchShape)> {
    let a = foot.orbit.shape_operator(&foot.xi);
    let n = foot.orbit.dim();
    let mean_term = a.trace() / n as f64;
    let ad = eigh(&a, params.cluster_gap);
    check_focal(&ad.eigenvalues)?;
    let patch = TubePatch::new(foot, params)?;
    let shape = patch_shape(&patch, params.cluster_gap)?;
    let mut clusters = shape.decomposition.cluster_summary();
    clusters.sort_by(|x, y| y.value.total_cmp(&x.value));
    // the vertical cluster goes last, as in the formula route
    if let Some(pos) = clusters.iter().position(|c| (c.value + 1.0).abs() < 1e-2) {
        let v = clusters.remove(pos);
        clusters.push(v);
    }
    let spectrum = TubeSpectrum {
        clusters,
        foot_eigenvalues: ad.eigenvalues.iter().map(|l| l - mean_term).collect(),
        mean_term,
        vertical_multiplicity: patch.vertical_dim(),
        dim: patch.dim(),
    };
    Ok((spectrum, patch, shape))
}

#[derive(Debug, Clone, Serialize)]
pub struct TubeComparison {
    pub formula: TubeSpectrum,
    pub direct: TubeSpectrum,
    pub max_gap: f64,
    /// `|direct vertical eigenvalue + 1|`.
    pub vertical_error: f64,
    pub multiplicities_consistent: bool,
}

pub fn compare_tube_spectra(
    orbit: &OrbitSubmanifold,
    xi: &DVector<f64>,
    curve: &OrbitCurve,
    params: &TubeParams,
) -> Result<TubeComparison> {
    let formula = tube_spectrum_via_formula(orbit, xi, curve, params)?;
    let direct = tube_spectrum_direct(orbit, xi, curve, params)?;
    let vertical_error = direct.nearest(-1.0).map(|c| (c.value + 1.0).abs()).unwrap_or(f64::INFINITY);
    let same_shape = formula.clusters.len() == direct.clusters.len()
        && formula.clusters.iter().zip(&direct.clusters).all(|(a, b)| a.multiplicity == b.multiplicity);
    let multiplicities_consistent = same_shape
        && formula.multiplicity_sum() == formula.dim
        && direct.multiplicity_sum() == direct.dim
        && formula.dim == orbit.dim() + formula.vertical_multiplicity;
    Ok(TubeComparison { max_gap: formula.max_gap(&direct), vertical_error, multiplicities_consistent, formula, direct })
}

#[derive(Debug, Clone, Serialize)]
pub struct DupinCheck {
    pub directions: usize,
    pub step: f64,
    pub max_derivative_lambda1: f64,
    pub max_derivative_lambda2: f64,
}

/// Moves the tube point along sampled horizontal directions of `E_1`
/// and differentiates the direct patch spectrum.
pub fn dupin_check(
    orbit: &OrbitSubmanifold,
    xi: &DVector<f64>,
    curve: &OrbitCurve,
    params: &TubeParams,
    directions: usize,
    rng: &mut ProbeRng,
) -> Result<DupinCheck> {
    let foot = exact_foot(orbit, xi, curve)?;
    let (base, _, _) = direct_spectrum_at(foot.clone(), params)?;
    let l1 = base.clusters[0];
    if l1.multiplicity < 2 {
        return Err(Error::NotApplicable(format!("lambda_hat_1 has multiplicity {}", l1.multiplicity)));
    }
    let l2 = base
        .clusters
        .get(1)
        .copied()
        .filter(|c| (c.value + 1.0).abs() > 1e-2)
        .ok_or_else(|| Error::NotApplicable("no second horizontal eigenvalue".into()))?;
    let a = foot.orbit.shape_operator(&foot.xi);
    let ad = eigh(&a, params.cluster_gap);
    let e1 = ad.cluster_basis(ad.clusters.len() - 1);
    let h = 0.01;
    let mut d1 = 0.0f64;
    let mut d2 = 0.0f64;
    for _ in 0..directions {
        let c = gaussian_vector(rng, e1.ncols());
        let dir = &e1 * (&c / c.norm());
        let gen = foot.orbit.tangent_generator(&dir);
        let mut vals = Vec::with_capacity(2);
        for t in [h, -h] {
            let moved = OrbitCurve::new(vec![CurveSegment { generator: gen.clone(), duration: t }]);
            let f = exact_foot(&foot.orbit, &foot.xi, &moved)?;
            let (s, _, _) = direct_spectrum_at(f, params)?;
            let v1 = s.nearest(l1.value).map(|c| c.value).unwrap_or(f64::NAN);
            let v2 = s.nearest(l2.value).map(|c| c.value).unwrap_or(f64::NAN);
            vals.push((v1, v2));
        }
        d1 = d1.max(((vals[0].0 - vals[1].0) / (2.0 * h)).abs());
        d2 = d2.max(((vals[0].1 - vals[1].1) / (2.0 * h)).abs());
    }
    Ok(DupinCheck { directions, step: h, max_derivative_lambda1: d1, max_derivative_lambda2: d2 })
}

#[derive(Debug, Clone, Serialize)]
pub struct CausticCheck {
    /// Constant `c` in the shifted normal field `xi_hat - c q`.
    pub shift: f64,
    /// Shifted eigenvalues `lambda_hat + c`, all positive after the shift.
    pub shifted_eigenvalues: Vec<f64>,
    pub kernel_dim: usize,
    /// Sine of the largest principal angle between `ker d rho` and `E_1`.
    pub kernel_angle_to_e1: f64,
    pub singular_values: Vec<f64>,
}

/// Differentiates the caustic map `q -> q + zeta(q) / mu_1(q)` of the
/// shifted tube normal `zeta = xi_hat - c q` on the patch.
pub fn caustic_rank_check(
    orbit: &OrbitSubmanifold,
    xi: &DVector<f64>,
    curve: &OrbitCurve,
    params: &TubeParams,
) -> Result<CausticCheck> {
    let foot = exact_foot(orbit, xi, curve)?;
    let (spec, patch, shape) = direct_spectrum_at(foot, params)?;
    let min = spec.clusters.iter().map(|c| c.value).fold(f64::INFINITY, f64::min);
    let shift = 1.0 + min.abs();
    let shifted_eigenvalues: Vec<f64> = spec.clusters.iter().map(|c| c.value + shift).collect();
    let mu1 = shifted_eigenvalues[0];
    if mu1.abs() < 1e-6 {
        return Err(Error::InvalidShift { eigenvalue: mu1 });
    }
    let rep = orbit.rep();
    let gap = params.cluster_gap;
    let rho = |pt: &PatchPoint| -> Result<DVector<f64>> {
        let f = TubeFoot { orbit: build_orbit(rep, &pt.foot)?, xi: pt.xi_hat.clone() };
        let a = f.orbit.shape_operator(&f.xi);
        let top = *eigh(&a, gap).eigenvalues.last().expect("non-empty");
        check_focal(&[top])?;
        let mu = top / (1.0 - top) + shift;
        if mu.abs() < 1e-6 {
            return Err(Error::InvalidShift { eigenvalue: mu });
        }
        let zeta = &pt.xi_hat - &pt.q * shift;
        Ok(&pt.q + zeta / mu)
    };
    let j = patch.jacobian_of(rho)?;
    let linv = shape.chol.clone().try_inverse().ok_or(Error::PatchDegenerate { min_eigenvalue: 0.0 })?;
    let jo = j * linv.transpose();
    let gd = eigh(&(jo.transpose() * &jo), 0.0);
    let singular: Vec<f64> = gd.eigenvalues.iter().rev().map(|x| x.max(0.0).sqrt()).collect();
    let top = singular[0];
    let kernel_idx: Vec<usize> = (0..gd.eigenvalues.len()).filter(|&i| gd.eigenvalues[i].max(0.0).sqrt() <= 1e-4 * top).collect();
    let kernel = DMatrix::from_fn(patch.dim(), kernel_idx.len(), |r, c| gd.eigenvectors[(r, kernel_idx[c])]);
    let kernel = Subspace::from_orthonormal(kernel, 1e-8)?;
    let d = &shape.decomposition;
    let idx = d
        .cluster_summary()
        .iter()
        .enumerate()
        .min_by(|a, b| (a.1.value - spec.clusters[0].value).abs().total_cmp(&(b.1.value - spec.clusters[0].value).abs()))
        .map(|(i, _)| i)
        .expect("non-empty spectrum");
    let e1 = Subspace::from_orthonormal(d.cluster_basis(idx), 1e-8)?;
    Ok(CausticCheck {
        shift,
        shifted_eigenvalues,
        kernel_dim: kernel.dim(),
        kernel_angle_to_e1: kernel.distance(&e1),
        singular_values: singular,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct NormalExpDifferential {
    /// `I - A_eta` on the tangent frame, row-major.
    pub matrix: Vec<Vec<f64>>,
    pub min_singular_value: f64,
    /// Largest column error against finite differences of `c(t) + eta(t)`.
    pub fd_error: f64,
}

/// Horizontal part of the differential of `exp^nu` at `eta`, checked against
/// moving the base point with `eta` parallel.
pub fn normal_exponential_differential(orbit: &OrbitSubmanifold, eta: &DVector<f64>) -> Result<NormalExpDifferential> {
    let n = orbit.dim();
    let m = DMatrix::identity(n, n) - orbit.shape_operator(eta);
    let sv = m.clone().svd(false, false).singular_values;
    let min_singular_value = sv.iter().copied().fold(f64::INFINITY, f64::min);
    let rep: &SymmetricPairRep = orbit.rep();
    let frame = DMatrix::from_column_slice(eta.len(), 1, eta.as_slice());
    let h = 1e-2;
    let mut fd_error = 0.0f64;
    for j in 0..n {
        let gen = orbit.m_actions()[j].clone();
        let mut acc = DVector::zeros(eta.len());
        for (o, w) in [(-2.0, 1.0 / 12.0), (-1.0, -2.0 / 3.0), (1.0, 2.0 / 3.0), (2.0, -1.0 / 12.0)] {
            let curve = OrbitCurve::new(vec![CurveSegment { generator: gen.clone(), duration: o * h }]);
            let (w_end, f) = transport_exact(rep, &curve, orbit.point(), &frame, Bundle::Normal)?;
            acc += (w_end + f.column(0)) * (w / h);
        }
        let want = orbit.tangent().embed(&m.column(j).into_owned());
        fd_error = fd_error.max((acc - want).norm());
    }
    Ok(NormalExpDifferential {
        matrix: (0..n).map(|i| m.row(i).iter().copied().collect()).collect(),
        min_singular_value,
        fd_error,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct EquivalenceCheck {
    pub points: usize,
    pub pairs: usize,
    pub violations: usize,
    pub spread_lambda1: f64,
    pub spread_lambda2: f64,
}

/// The biconditional `lambda_hat_1(q) = lambda_hat_1(q')` iff
/// `lambda_hat_2(q) = lambda_hat_2(q')` over tube points reached by the
/// given curves.
pub fn equivalence_check(
    orbit: &OrbitSubmanifold,
    xi: &DVector<f64>,
    curves: &[OrbitCurve],
    params: &TubeParams,
    tol: f64,
) -> Result<EquivalenceCheck> {
    let mut vals = Vec::with_capacity(curves.len());
    for c in curves {
        let s = tube_spectrum_via_formula(orbit, xi, c, params)?;
        let l1 = s.lambda_hat(0).unwrap_or(f64::NAN);
        let l2 = s.clusters.get(1).filter(|c| c.value != -1.0).map(|c| c.value).unwrap_or(f64::NAN);
        vals.push((l1, l2));
    }
    let mut pairs = 0;
    let mut violations = 0;
    let mut spread_lambda1 = 0.0f64;
    let mut spread_lambda2 = 0.0f64;
    for i in 0..vals.len() {
        for j in i + 1..vals.len() {
            pairs += 1;
            let e1 = (vals[i].0 - vals[j].0).abs();
            let e2 = (vals[i].1 - vals[j].1).abs();
            spread_lambda1 = spread_lambda1.max(e1);
            spread_lambda2 = spread_lambda2.max(e2);
            if (e1 <= tol) != (e2 <= tol) {
                violations += 1;
            }
        }
    }
    Ok(EquivalenceCheck { points: vals.len(), pairs, violations, spread_lambda1, spread_lambda2 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::probe_rng;

    fn veronese(n: usize) -> OrbitSubmanifold {
        let rep = SymmetricPairRep::sl_so(n + 1).unwrap();
        let mut s = DMatrix::identity(n + 1, n + 1) * (-1.0 / (n + 1) as f64);
        s[(0, 0)] += 1.0;
        build_orbit(&rep, &rep.coordinates(&s)).unwrap()
    }

    #[test]
    fn direction_has_the_two_eigenvalue_pattern() {
        let m = veronese(3);
        let d = choose_tube_direction(&m).unwrap();
        assert!(d.fit_residual < 1e-10);
        let want = [-0.8, 0.4, 0.4];
        for (a, b) in d.eigenvalues.iter().zip(want) {
            assert!((a - b).abs() < 1e-10, "{:?}", d.eigenvalues);
        }
        assert!(d.vector().dot(m.point()).abs() < 1e-10);
        let m4 = veronese(4);
        let d4 = choose_tube_direction(&m4).unwrap();
        let mult: Vec<usize> = d4.clusters.iter().map(|c| c.multiplicity).collect();
        assert_eq!(mult, vec![2, 2]);
        assert!(matches!(choose_tube_direction(&veronese(2)), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn formula_maps_half_to_one() {
        // lambda = 1/2 on a minimal orbit: 1/2 / (1 - 1/2) = 1
        let m = veronese(3);
        let d = choose_tube_direction(&m).unwrap();
        let focal = d.vector() * (1.0 / 0.4);
        assert!(matches!(
            tube_spectrum_at(&TubeFoot { orbit: m.clone(), xi: focal }, 1e-3),
            Err(Error::FocalDegeneracy { .. })
        ));
        let xi_half = d.vector() * (0.5 / 0.4);
        let s = tube_spectrum_at(&TubeFoot { orbit: m, xi: xi_half }, 1e-3).unwrap();
        assert!((s.lambda_hat(0).unwrap() - 1.0).abs() < 1e-10);
        assert!(s.mean_term.abs() < 1e-10);
    }

    #[test]
    fn zero_vector_gives_zero_spectrum() {
        let m = veronese(3);
        let xi = DVector::zeros(m.rep().carrier_dim());
        let s = tube_spectrum_at(&TubeFoot { orbit: m, xi }, 1e-3).unwrap();
        assert_eq!(s.clusters.len(), 1);
        assert!(s.clusters[0].value.abs() < 1e-14);
        assert_eq!(s.vertical_multiplicity, 0);
    }

    #[test]
    fn v3_formula_and_direct_agree() {
        let m = veronese(3);
        let xi = choose_tube_direction(&m).unwrap().vector();
        let cmp = compare_tube_spectra(&m, &xi, &OrbitCurve::empty(), &TubeParams::default()).unwrap();
        let mult: Vec<usize> = cmp.direct.clusters.iter().map(|c| c.multiplicity).collect();
        assert_eq!(mult, vec![2, 1, 2]);
        assert_eq!(cmp.direct.dim, 5);
        assert!(cmp.max_gap < 1e-4, "{cmp:?}");
        assert!(cmp.vertical_error < 1e-4);
        assert!(cmp.multiplicities_consistent);
        let want1 = 0.4 / 0.6;
        assert!((cmp.formula.lambda_hat(0).unwrap() - want1).abs() < 1e-9);
    }

    #[test]
    fn transported_tube_spectra_agree() {
        let m = veronese(3);
        let xi = choose_tube_direction(&m).unwrap().vector();
        let mut rng = probe_rng(4);
        let curve = OrbitCurve::random(m.rep(), 2, 0.3, &mut rng);
        let cmp = compare_tube_spectra(&m, &xi, &curve, &TubeParams::default()).unwrap();
        assert!(cmp.max_gap < 1e-4, "{cmp:?}");
    }

    #[test]
    fn dupin_and_caustic_on_v3() {
        let m = veronese(3);
        let xi = choose_tube_direction(&m).unwrap().vector();
        let mut rng = probe_rng(5);
        let p = TubeParams::default();
        let dup = dupin_check(&m, &xi, &OrbitCurve::empty(), &p, 3, &mut rng).unwrap();
        assert!(dup.max_derivative_lambda1 < 1e-4, "{dup:?}");
        assert!(dup.max_derivative_lambda2 < 1e-4, "{dup:?}");
        let c = caustic_rank_check(&m, &xi, &OrbitCurve::empty(), &p).unwrap();
        assert!(c.shifted_eigenvalues.iter().all(|x| *x > 0.0));
        assert_eq!(c.kernel_dim, 2, "{c:?}");
        assert!(c.kernel_angle_to_e1 < 1e-3, "{c:?}");
    }

    #[test]
    fn normal_exponential() {
        let m = veronese(3);
        let zero = normal_exponential_differential(&m, &DVector::zeros(m.rep().carrier_dim())).unwrap();
        assert!((zero.min_singular_value - 1.0).abs() < 1e-12);
        let pos = normal_exponential_differential(&m, &m.point().clone()).unwrap();
        for (i, row) in pos.matrix.iter().enumerate() {
            for (j, x) in row.iter().enumerate() {
                assert!((x - if i == j { 2.0 } else { 0.0 }).abs() < 1e-10);
            }
        }
        assert!(pos.fd_error < 1e-6, "{}", pos.fd_error);
        let xi = choose_tube_direction(&m).unwrap().vector();
        let d = normal_exponential_differential(&m, &xi).unwrap();
        assert!(d.min_singular_value >= TUBE_SAFETY - 1e-12);
        assert!(d.fd_error < 1e-6, "{}", d.fd_error);
    }

    #[test]
    fn equivalence_holds_on_sampled_points() {
        let m = veronese(3);
        let xi = choose_tube_direction(&m).unwrap().vector();
        let mut rng = probe_rng(6);
        let curves: Vec<OrbitCurve> = (0..3).map(|_| OrbitCurve::random(m.rep(), 1, 0.2, &mut rng)).collect();
        let e = equivalence_check(&m, &xi, &curves, &TubeParams::default(), 1e-6).unwrap();
        assert_eq!(e.pairs, 3);
        assert_eq!(e.violations, 0);
        assert!(e.spread_lambda1 < 1e-6);
    }
}
