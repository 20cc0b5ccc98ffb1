//! Veronese maps, Veronese-type orbits of `SO(n+1)` on `Sym0(n+1)` and
//! the checks of their basic facts.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::holonomy::{analyze, holonomy_algebra};
use crate::numeric::matrix_exp;
use crate::orbit::{build_orbit, OrbitSubmanifold};
use crate::pair::SymmetricPairRep;
use crate::rng::{gaussian_vector, unit_vector, ProbeRng};
use crate::transport::{transport_exact, Bundle, CurveSegment, OrbitCurve};

const UNIT_TOL: f64 = 1e-10;

fn check_unit(u: &DVector<f64>) -> Result<()> {
    if u.len() < 2 || (u.norm() - 1.0).abs() > UNIT_TOL {
        return Err(Error::invalid(format!("expected a unit vector of length >= 2, got norm {}", u.norm())));
    }
    Ok(())
}

/// `Q(u) = u u^T`.
pub fn veronese_map(u: &DVector<f64>) -> Result<DMatrix<f64>> {
    check_unit(u)?;
    Ok(u * u.transpose())
}

/// `Q(u) - Id / (n + 1)`, traceless.
pub fn rho_tilde(u: &DVector<f64>) -> Result<DMatrix<f64>> {
    let r = u.len();
    Ok(veronese_map(u)? - DMatrix::identity(r, r) / r as f64)
}

/// `scale (e_1 e_1^T - Id / r)`.
pub fn veronese_type_point(r: usize, scale: f64) -> Result<DMatrix<f64>> {
    if r < 3 {
        return Err(Error::invalid(format!("Veronese-type points need r >= 3, got {r}")));
    }
    if scale == 0.0 || !scale.is_finite() {
        return Err(Error::invalid("Veronese-type scale must be finite and non-zero"));
    }
    let mut s = DMatrix::identity(r, r) * (-1.0 / r as f64);
    s[(0, 0)] += 1.0;
    Ok(s * scale)
}

/// The Veronese-type point of unit norm under `trace(AB)`; `sign` selects
/// which of the two orbits in the unit sphere.
pub fn unit_veronese_type_point(r: usize, sign: f64) -> Result<DMatrix<f64>> {
    let s = veronese_type_point(r, 1.0)?;
    let norm = s.norm();
    Ok(s * (sign.signum() / norm))
}

#[derive(Debug, Clone)]
pub struct VeroneseOrbit {
    pub n: usize,
    pub base: DMatrix<f64>,
    pub orbit: OrbitSubmanifold,
}

impl VeroneseOrbit {
    pub fn new(n: usize) -> Result<Self> {
        let rep = SymmetricPairRep::sl_so(n + 1)?;
        let base = veronese_type_point(n + 1, 1.0)?;
        let orbit = build_orbit(&rep, &rep.coordinates(&base))?;
        Ok(Self { n, base, orbit })
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct ScanRow {
    pub k: usize,
    pub formula: usize,
    pub computed: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct DimensionScan {
    pub r: usize,
    pub rows: Vec<ScanRow>,
    pub all_match: bool,
    /// Values of `k` attaining the smallest computed dimension.
    pub minimizers: Vec<usize>,
}

/// Orbit dimensions at two-eigenvalue points with multiplicities
/// `(k, r - k)`, against `k (r - k)`.
pub fn minimal_dimension_scan(r: usize) -> Result<DimensionScan> {
    if r < 3 {
        return Err(Error::invalid(format!("scan needs r >= 3, got {r}")));
    }
    let rep = SymmetricPairRep::sl_so(r)?;
    let mut rows = Vec::with_capacity(r - 1);
    for k in 1..r {
        let diag: Vec<f64> = (0..r).map(|i| if i < k { (r - k) as f64 } else { -(k as f64) }).collect();
        let m = DMatrix::from_diagonal(&DVector::from_vec(diag));
        let computed = build_orbit(&rep, &rep.coordinates(&m))?.dim();
        rows.push(ScanRow { k, formula: k * (r - k), computed });
    }
    let all_match = rows.iter().all(|row| row.formula == row.computed);
    let min = rows.iter().map(|row| row.computed).min().unwrap_or(0);
    let minimizers = rows.iter().filter(|row| row.computed == min).map(|row| row.k).collect();
    Ok(DimensionScan { r, rows, all_match, minimizers })
}

#[derive(Debug, Clone, Serialize)]
pub struct FactOne {
    pub dim: usize,
    pub codim_in_sphere: usize,
    pub expected_codim: usize,
    pub minimality_ratio: f64,
    pub first_normal_space_dim: usize,
    pub holonomy_fixed_rank: usize,
    pub passed: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct FactThree {
    pub factor_dims: Vec<usize>,
    pub algebra_dim: usize,
    pub expected_factor_dim: usize,
    pub expected_algebra_dim: usize,
    pub transitive: bool,
    pub slice_distance: f64,
    pub beta: f64,
    pub homothecy_relative_residual: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct FactFour {
    pub curves: usize,
    /// Largest norm of the derivative of the coefficients of `alpha` in
    /// parallel tangent and normal frames.
    pub max_covariant_derivative: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct VeroneseFactReport {
    pub n: usize,
    pub fact_i: FactOne,
    pub fact_iii: FactThree,
    pub fact_iv: FactFour,
    pub failing: Vec<String>,
    pub passed: bool,
}

pub fn verify_veronese_facts(n: usize, probes: usize, rng: &mut ProbeRng) -> Result<VeroneseFactReport> {
    if !(2..=6).contains(&n) {
        return Err(Error::invalid(format!("fact verification is sized for 2 <= n <= 6, got {n}")));
    }
    let v = VeroneseOrbit::new(n)?;
    let orbit = &v.orbit;
    let tol = 1e-8;

    let verdict = analyze(orbit, probes, rng)?;
    let minimality = orbit.minimality(tol);
    let expected_codim = n * (n + 1) / 2;
    let first_normal = orbit.first_normal_space_dim(orbit.rep().rank_tol());
    let fact_i = FactOne {
        dim: orbit.dim(),
        codim_in_sphere: orbit.codim() - 1,
        expected_codim,
        minimality_ratio: minimality.ratio,
        first_normal_space_dim: first_normal,
        holonomy_fixed_rank: verdict.rank,
        passed: orbit.dim() == n
            && orbit.codim() == expected_codim
            && minimality.minimal
            && verdict.rank == 1
            && first_normal == orbit.codim(),
    };

    let homothecy = orbit.homothecy_test(tol)?;
    let slice = orbit.rep().slice_representation_in_frame(orbit.point(), orbit.normal().basis())?;
    let expected_factor_dim = expected_codim - 1;
    let expected_algebra_dim = n * (n - 1) / 2;
    let factor_dims = verdict.decomposition.factor_dims();
    let transitive = verdict.transitivity.first().map(|t| t.transitive).unwrap_or(false);
    let slice_distance = verdict.algebra.distance(&slice);
    let fact_iii = FactThree {
        passed: factor_dims == vec![expected_factor_dim]
            && verdict.algebra.dim() == expected_algebra_dim
            && transitive == (n == 2)
            && homothecy.is_homothecy
            && slice_distance <= 1e-7,
        factor_dims,
        algebra_dim: verdict.algebra.dim(),
        expected_factor_dim,
        expected_algebra_dim,
        transitive,
        slice_distance,
        beta: homothecy.beta,
        homothecy_relative_residual: homothecy.relative_residual,
    };

    let curves = 3;
    let max_covariant_derivative = parallel_alpha_defect(orbit, curves, rng)?;
    let fact_iv = FactFour { curves, max_covariant_derivative, passed: max_covariant_derivative <= 1e-4 };

    let mut failing = Vec::new();
    for (tag, ok) in [("i", fact_i.passed), ("iii", fact_iii.passed), ("iv", fact_iv.passed)] {
        if !ok {
            failing.push(tag.to_string());
        }
    }
    Ok(VeroneseFactReport { n, passed: failing.is_empty(), fact_i, fact_iii, fact_iv, failing })
}

/// Coefficients `<alpha(E_i, E_j), xi_k>` at the end of `curve` for frames
/// transported in closed form from the base point.
fn alpha_coefficients(orbit: &OrbitSubmanifold, curve: &OrbitCurve) -> Result<Vec<f64>> {
    let rep = orbit.rep();
    let (w, tangent) = transport_exact(rep, curve, orbit.point(), orbit.tangent().basis(), Bundle::Tangent)?;
    let (_, normal) = transport_exact(rep, curve, orbit.point(), orbit.normal().basis(), Bundle::Normal)?;
    let at = build_orbit(rep, &w)?;
    let n = tangent.ncols();
    let mut out = Vec::with_capacity(n * n * normal.ncols());
    for i in 0..n {
        for j in 0..n {
            let a = at.alpha_ambient(&tangent.column(i).into_owned(), &tangent.column(j).into_owned());
            for k in 0..normal.ncols() {
                out.push(a.dot(&normal.column(k)));
            }
        }
    }
    Ok(out)
}

/// Largest norm of `d/dt <alpha(E_i, E_j), xi_k>` along seeded orbit
/// curves `exp(t Z) v`, `Z` a unit tangent direction, at `t = 0` and
/// `t = 0.3`.
pub fn parallel_alpha_defect(orbit: &OrbitSubmanifold, curves: usize, rng: &mut ProbeRng) -> Result<f64> {
    let h = 1e-3;
    let mut worst = 0.0f64;
    for _ in 0..curves {
        let dir = unit_vector(rng, orbit.dim());
        let gen = orbit.tangent_generator(&dir);
        for t0 in [0.0, 0.3] {
            let seg = |t: f64| OrbitCurve::new(vec![CurveSegment { generator: gen.clone(), duration: t }]);
            let plus = alpha_coefficients(orbit, &seg(t0 + h))?;
            let minus = alpha_coefficients(orbit, &seg(t0 - h))?;
            let d: f64 = plus.iter().zip(&minus).map(|(p, m)| ((p - m) / (2.0 * h)).powi(2)).sum::<f64>().sqrt();
            worst = worst.max(d);
        }
    }
    Ok(worst)
}

/// Rotation in the plane of `e_1` and `u` taking `e_1` to the unit vector `u`.
pub fn rotation_to(u: &DVector<f64>) -> Result<DMatrix<f64>> {
    check_unit(u)?;
    let (x, theta) = rotation_generator(u);
    matrix_exp(&x, theta)
}

fn rotation_generator(u: &DVector<f64>) -> (DMatrix<f64>, f64) {
    let r = u.len();
    let mut e1 = DVector::zeros(r);
    e1[0] = 1.0;
    let perp = u - &e1 * u[0];
    let s = perp.norm();
    let theta = s.atan2(u[0]);
    if s < 1e-15 {
        return (DMatrix::zeros(r, r), 0.0);
    }
    let w = perp / s;
    (&w * e1.transpose() - &e1 * w.transpose(), theta)
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct VeroneseIdentities {
    /// `max |rho_tilde(g u) - g rho_tilde(u) g^T|`.
    pub equivariance_error: f64,
    /// `max |rho_tilde(u) - rho_tilde(-u)|`.
    pub antipodal_error: f64,
    /// `max |trace(rho_tilde(u)^2) - n / (n + 1)|`.
    pub norm_error: f64,
    pub trace_error: f64,
}

pub fn veronese_identities(n: usize, samples: usize, rng: &mut ProbeRng) -> Result<VeroneseIdentities> {
    let r = n + 1;
    let mut out = VeroneseIdentities { equivariance_error: 0.0, antipodal_error: 0.0, norm_error: 0.0, trace_error: 0.0 };
    for _ in 0..samples {
        let u = unit_vector(rng, r);
        let p = rho_tilde(&u)?;
        let a = gaussian_vector(rng, r * r);
        let x = DMatrix::from_column_slice(r, r, a.as_slice());
        let g = matrix_exp(&(&x - x.transpose()), 0.5)?;
        let gu = (&g * &u).normalize();
        out.equivariance_error = out.equivariance_error.max((rho_tilde(&gu)? - &g * &p * g.transpose()).amax());
        out.antipodal_error = out.antipodal_error.max((rho_tilde(&(-&u))? - &p).amax());
        out.norm_error = out.norm_error.max(((&p * &p).trace() - n as f64 / r as f64).abs());
        out.trace_error = out.trace_error.max(p.trace().abs());
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct IsometryCheck {
    /// `max |G - Id|` for the Gram matrix of `dQ` under `½ trace(AB)`.
    pub half_trace_error: f64,
    /// Mean `|dQ w|_trace / |w|` over sampled unit tangent vectors.
    pub trace_ratio: f64,
}

/// Differential of `Q` by finite differences along great circles.
pub fn isometry_check(n: usize, samples: usize, rng: &mut ProbeRng) -> Result<IsometryCheck> {
    let r = n + 1;
    let h = 1e-3;
    let mut half_trace_error = 0.0f64;
    let mut ratios = Vec::new();
    for _ in 0..samples {
        let u = unit_vector(rng, r);
        let mut frame = Vec::with_capacity(n);
        for _ in 0..n {
            let mut w = gaussian_vector(rng, r);
            w -= &u * u.dot(&w);
            for f in &frame {
                let f: &DVector<f64> = f;
                w -= f * f.dot(&w);
            }
            frame.push(w.normalize());
        }
        let mut d = Vec::with_capacity(n);
        for w in &frame {
            let at = |t: f64| veronese_map(&(&u * t.cos() + w * t.sin()));
            let diff = (at(-2.0 * h)? * (1.0 / 12.0) - at(-h)? * (2.0 / 3.0) + at(h)? * (2.0 / 3.0)
                - at(2.0 * h)? * (1.0 / 12.0))
                / h;
            d.push(diff);
        }
        for i in 0..n {
            ratios.push(d[i].norm());
            for j in 0..n {
                let g = 0.5 * (&d[i] * &d[j]).trace();
                half_trace_error = half_trace_error.max((g - if i == j { 1.0 } else { 0.0 }).abs());
            }
        }
    }
    let trace_ratio = ratios.iter().sum::<f64>() / ratios.len().max(1) as f64;
    Ok(IsometryCheck { half_trace_error, trace_ratio })
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct CongruenceCheck {
    pub samples: usize,
    /// `max |g_carrier . S - rho_tilde(g e_1)|` in carrier coordinates.
    pub max_distance: f64,
}

/// Moves the Veronese-type base point with the carrier action of the
/// rotation taking `e_1` to `u` and compares with `rho_tilde(u)`.
pub fn congruence_check(n: usize, samples: usize, rng: &mut ProbeRng) -> Result<CongruenceCheck> {
    let r = n + 1;
    let rep = SymmetricPairRep::sl_so(r)?;
    let base = rep.coordinates(&veronese_type_point(r, 1.0)?);
    let mut max_distance = 0.0f64;
    for _ in 0..samples {
        let u = unit_vector(rng, r);
        let (x, theta) = rotation_generator(&u);
        let moved = matrix_exp(&rep.action_matrix(&x), theta)? * &base;
        let want = rep.coordinates(&rho_tilde(&u)?);
        max_distance = max_distance.max((moved - want).norm());
    }
    Ok(CongruenceCheck { samples, max_distance })
}

/// Holonomy algebra dimension of `V^n`, for quick scans.
pub fn veronese_holonomy_dim(n: usize) -> Result<usize> {
    Ok(holonomy_algebra(&VeroneseOrbit::new(n)?.orbit)?.dim())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::probe_rng;

    #[test]
    fn rho_tilde_of_e1() {
        for n in 2..=6 {
            let mut e1 = DVector::zeros(n + 1);
            e1[0] = 1.0;
            let p = rho_tilde(&e1).unwrap();
            let k = (n + 1) as f64;
            for i in 0..=n {
                let want = if i == 0 { n as f64 / k } else { -1.0 / k };
                assert!((p[(i, i)] - want).abs() < 1e-15);
            }
            assert!((p - veronese_type_point(n + 1, 1.0).unwrap()).amax() < 1e-15);
        }
        assert!(rho_tilde(&DVector::from_vec(vec![1.0, 1.0, 0.0])).is_err());
        assert!(veronese_type_point(2, 1.0).is_err());
    }

    #[test]
    fn identities() {
        let mut rng = probe_rng(1);
        for n in 2..=6 {
            let id = veronese_identities(n, 5, &mut rng).unwrap();
            assert!(id.equivariance_error < 1e-10, "{id:?}");
            assert!(id.antipodal_error == 0.0);
            assert!(id.norm_error < 1e-14);
            assert!(id.trace_error < 1e-14);
        }
    }

    #[test]
    fn type_points() {
        let p = veronese_type_point(4, 1.0).unwrap();
        let m = VeroneseOrbit::new(3).unwrap();
        assert_eq!(m.orbit.codim(), 6);
        assert_eq!(m.orbit.normal_bar().dim(), 5);
        assert!((p - &m.base).amax() == 0.0);
        let neg = unit_veronese_type_point(4, -1.0).unwrap();
        assert!((neg.norm() - 1.0).abs() < 1e-15);
        assert!((neg[(0, 0)] + 0.75 / veronese_type_point(4, 1.0).unwrap().norm()).abs() < 1e-14);
    }

    #[test]
    fn scan_matches_formula() {
        let s = minimal_dimension_scan(4).unwrap();
        let dims: Vec<usize> = s.rows.iter().map(|r| r.computed).collect();
        assert_eq!(dims, vec![3, 4, 3]);
        assert_eq!(s.minimizers, vec![1, 3]);
        let s3 = minimal_dimension_scan(3).unwrap();
        assert_eq!(s3.rows.iter().map(|r| r.computed).collect::<Vec<_>>(), vec![2, 2]);
    }

    #[test]
    fn facts_for_small_n() {
        let mut rng = probe_rng(2);
        for n in 2..=4 {
            let rep = verify_veronese_facts(n, 8, &mut rng).unwrap();
            assert!(rep.passed, "{rep:?}");
            assert_eq!(rep.fact_iii.transitive, n == 2);
        }
        assert_eq!(verify_veronese_facts(4, 8, &mut rng).unwrap().fact_iii.factor_dims, vec![9]);
    }

    #[test]
    fn non_parallel_alpha_is_detected() {
        let rep = SymmetricPairRep::sl_so(3).unwrap();
        let m = DMatrix::from_diagonal(&DVector::from_vec(vec![0.7, -0.1, -0.6]));
        let orbit = build_orbit(&rep, &rep.coordinates(&m)).unwrap();
        assert!(parallel_alpha_defect(&orbit, 2, &mut probe_rng(3)).unwrap() > 1e-2);
    }

    #[test]
    fn isometry_and_congruence() {
        let mut rng = probe_rng(4);
        let iso = isometry_check(3, 4, &mut rng).unwrap();
        assert!(iso.half_trace_error < 1e-8, "{iso:?}");
        assert!((iso.trace_ratio - 2f64.sqrt()).abs() < 1e-8);
        let c = congruence_check(3, 20, &mut rng).unwrap();
        assert!(c.max_distance < 1e-7, "{c:?}");
        let q = rotation_to(&DVector::from_vec(vec![0.0, 1.0, 0.0])).unwrap();
        assert!((q[(1, 0)] - 1.0).abs() < 1e-14);
    }
}
