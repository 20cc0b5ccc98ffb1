//! Parallel transport in the normal (and tangent) bundle of an orbit along
//! piecewise one-parameter-group curves `c(t) = exp(t Z) w`.
//!
//! Two routes are provided. The closed form uses that along such a curve a
//! parallel normal field is `xi(t) = e^{t rho(Z)} e^{-t P rho(Z) P} xi_0`, with
//! `P` the normal projector at the segment start. The stepped scheme
//! integrates `xi' = [rho(Z), P(t)] xi` with a midpoint step, projects onto
//! the new normal space and renormalizes, so its drift can be audited.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::numeric::{eigh, matrix_exp};
use crate::orbit::{build_orbit, OrbitSubmanifold};
use crate::pair::SymmetricPairRep;
use crate::rng::{gaussian_vector, ProbeRng};

/// One piece `t -> exp(t rho(Z))` of a curve; `generator` is `rho(Z)` on
/// carrier coordinates.
#[derive(Debug, Clone)]
pub struct CurveSegment {
    pub generator: DMatrix<f64>,
    pub duration: f64,
}

#[derive(Debug, Clone)]
pub struct OrbitCurve {
    pub segments: Vec<CurveSegment>,
}

impl OrbitCurve {
    pub fn new(segments: Vec<CurveSegment>) -> Self {
        Self { segments }
    }

    pub fn empty() -> Self {
        Self { segments: Vec::new() }
    }

    /// From algebra elements `Z` (block-diagonal skew matrices).
    pub fn from_algebra(rep: &SymmetricPairRep, pieces: &[(DMatrix<f64>, f64)]) -> Self {
        let segments = pieces
            .iter()
            .map(|(z, t)| CurveSegment { generator: rep.action_matrix(z), duration: *t })
            .collect();
        Self { segments }
    }

    /// `count` segments along seeded unit algebra directions, each of length
    /// `duration`.
    pub fn random(rep: &SymmetricPairRep, count: usize, duration: f64, rng: &mut ProbeRng) -> Self {
        let segments = (0..count)
            .map(|_| {
                let c = gaussian_vector(rng, rep.algebra_dim());
                let z = rep.algebra_element(&(&c / c.norm()));
                CurveSegment { generator: rep.action_matrix(&z), duration }
            })
            .collect();
        Self { segments }
    }

    pub fn total_duration(&self) -> f64 {
        self.segments.iter().map(|s| s.duration.abs()).sum()
    }

    /// Endpoint of the curve started at `w`.
    pub fn end_point(&self, w: &DVector<f64>) -> Result<DVector<f64>> {
        let mut p = w.clone();
        for s in &self.segments {
            p = matrix_exp(&s.generator, s.duration)? * p;
        }
        Ok(p)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Bundle {
    Normal,
    Tangent,
}

/// Orthogonal projector onto `nu_w` (or `T_w`) in carrier coordinates.
pub fn bundle_projector(rep: &SymmetricPairRep, w: &DVector<f64>, bundle: Bundle) -> DMatrix<f64> {
    let p = rep.normal_space(w).space.projector();
    match bundle {
        Bundle::Normal => p,
        Bundle::Tangent => DMatrix::identity(p.nrows(), p.nrows()) - p,
    }
}

/// Closed-form transport of the columns of `frame` from `start` along the
/// curve. Returns the end point and the transported columns.
pub fn transport_exact(
    rep: &SymmetricPairRep,
    curve: &OrbitCurve,
    start: &DVector<f64>,
    frame: &DMatrix<f64>,
    bundle: Bundle,
) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let mut w = start.clone();
    let mut f = frame.clone();
    for s in &curve.segments {
        let p = bundle_projector(rep, &w, bundle);
        let inner = &p * &s.generator * &p;
        let g = matrix_exp(&s.generator, s.duration)?;
        f = &g * matrix_exp(&inner, -s.duration)? * f;
        w = &g * w;
    }
    Ok((w, f))
}

#[derive(Debug, Clone)]
pub struct TransportSample {
    pub t: f64,
    pub point: DVector<f64>,
    pub frame: DMatrix<f64>,
}

#[derive(Debug, Clone)]
pub struct TransportResult {
    pub samples: Vec<TransportSample>,
    pub end_point: DVector<f64>,
    pub end: DMatrix<f64>,
    /// Sum over steps of the relative distance the unconstrained midpoint
    /// step is moved by the projection and renormalization (largest column).
    pub drift: f64,
    /// Largest single-step contribution to `drift`.
    pub max_step_drift: f64,
    /// `|xi(t) - P(t) xi(t)| / |xi_0|` after the projection, maximized.
    pub normal_residual: f64,
    /// Largest relative deviation of a column norm after renormalization.
    pub norm_error: f64,
    pub steps: usize,
}

/// Stepped normal transport of the columns of `frame`, starting at `start`.
///
/// `samples_per_segment` interior sample times are recorded on each segment
/// besides the segment ends.
pub fn parallel_transport_normal(
    rep: &SymmetricPairRep,
    curve: &OrbitCurve,
    start: &DVector<f64>,
    frame: &DMatrix<f64>,
    step: f64,
    samples_per_segment: usize,
) -> Result<TransportResult> {
    if !(step > 0.0) {
        return Err(Error::invalid("transport step must be positive"));
    }
    let dim = rep.carrier_dim();
    if frame.nrows() != dim || start.len() != dim {
        return Err(Error::invalid("transport frame does not live in the carrier"));
    }
    let initial: Vec<f64> = frame.column_iter().map(|c| c.norm()).collect();
    let scale = initial.iter().copied().fold(0.0, f64::max).max(1e-300);
    let mut xi = frame.clone();
    let mut w = start.clone();
    let mut t_total = 0.0;
    let mut samples = vec![TransportSample { t: 0.0, point: w.clone(), frame: xi.clone() }];
    let (mut drift, mut max_step_drift, mut normal_residual, mut steps) = (0.0f64, 0.0f64, 0.0f64, 0usize);

    for seg in &curve.segments {
        if seg.duration == 0.0 {
            continue;
        }
        let count = (seg.duration.abs() / step).ceil().max(1.0) as usize;
        let h = seg.duration / count as f64;
        let p0 = bundle_projector(rep, &w, Bundle::Normal);
        let z = &seg.generator;
        let w0 = w.clone();
        // Group elements are recomputed from the exponential at every node
        // rather than accumulated, so P(t) stays idempotent to round-off.
        let mut p_now = p0.clone();
        let stride = (count / (samples_per_segment + 1)).max(1);
        for k in 0..count {
            let g_mid = matrix_exp(z, (k as f64 + 0.5) * h)?;
            let p_mid = &g_mid * &p0 * g_mid.transpose();
            let g_next = matrix_exp(z, (k + 1) as f64 * h)?;
            let p_next = &g_next * &p0 * g_next.transpose();
            let k1 = (z * &p_now - &p_now * z) * &xi;
            let mid = &xi + &k1 * (h / 2.0);
            let k2 = (z * &p_mid - &p_mid * z) * mid;
            let stepped = &xi + k2 * h;
            let projected = &p_next * &stepped;
            let mut worst = 0.0f64;
            for c in 0..xi.ncols() {
                if initial[c] == 0.0 {
                    continue;
                }
                let res = (stepped.column(c) - projected.column(c)).norm() / initial[c];
                normal_residual = normal_residual.max(res);
                let nrm = projected.column(c).norm();
                if nrm < 0.5 * initial[c] {
                    return Err(Error::TransportDiverged { t: t_total + (k + 1) as f64 * h.abs(), norm: nrm, initial: initial[c] });
                }
                let corrected = projected.column(c) * (initial[c] / nrm);
                worst = worst.max((stepped.column(c) - corrected).norm() / initial[c]);
            }
            drift += worst;
            max_step_drift = max_step_drift.max(worst);
            xi = projected;
            for c in 0..xi.ncols() {
                let nrm = xi.column(c).norm();
                if initial[c] > 0.0 && nrm > 0.0 {
                    xi.column_mut(c).scale_mut(initial[c] / nrm);
                }
            }
            p_now = p_next;
            steps += 1;
            if (k + 1) % stride == 0 && k + 1 < count {
                samples.push(TransportSample {
                    t: t_total + (k + 1) as f64 * h.abs(),
                    point: &g_next * &w0,
                    frame: xi.clone(),
                });
            }
        }
        w = matrix_exp(&seg.generator, seg.duration)? * w0;
        t_total += seg.duration.abs();
        samples.push(TransportSample { t: t_total, point: w.clone(), frame: xi.clone() });
    }
    let norm_error = xi
        .column_iter()
        .zip(&initial)
        .map(|(c, &n0)| if n0 > 0.0 { (c.norm() - n0).abs() / n0 } else { c.norm() / scale })
        .fold(0.0, f64::max);
    Ok(TransportResult { samples, end_point: w, end: xi, drift, max_step_drift, normal_residual, norm_error, steps })
}

/// Step-halving audit of the stepped scheme against itself and the closed
/// form.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct TransportAudit {
    pub step: f64,
    pub drift_h: f64,
    pub drift_half: f64,
    /// `|xi_h(end) - xi_{h/2}(end)|`.
    pub richardson_gap: f64,
    /// `|xi_{h/2}(end) - xi_exact(end)|`.
    pub exact_error: f64,
    pub norm_error: f64,
    pub halving_ok: bool,
}

pub fn transport_audit(
    rep: &SymmetricPairRep,
    curve: &OrbitCurve,
    start: &DVector<f64>,
    frame: &DMatrix<f64>,
    step: f64,
) -> Result<(TransportResult, TransportAudit)> {
    let coarse = parallel_transport_normal(rep, curve, start, frame, step, 0)?;
    let fine = parallel_transport_normal(rep, curve, start, frame, step / 2.0, 0)?;
    let (_, exact) = transport_exact(rep, curve, start, frame, Bundle::Normal)?;
    let audit = TransportAudit {
        step,
        drift_h: coarse.drift,
        drift_half: fine.drift,
        richardson_gap: (&coarse.end - &fine.end).norm(),
        exact_error: (&fine.end - exact).norm(),
        norm_error: coarse.norm_error.max(fine.norm_error),
        halving_ok: fine.drift <= 0.5 * coarse.drift + 1e-12,
    };
    Ok((coarse, audit))
}

#[derive(Debug, Clone, Serialize)]
pub struct SpectrumDrift {
    /// Largest deviation of any eigenvalue of `Ã_{xi(t)}` from its value at
    /// `t = 0`, over the samples.
    pub max_drift: f64,
    pub initial: Vec<f64>,
    pub sample_times: Vec<f64>,
}

fn sorted_eigenvalues(m: &DMatrix<f64>) -> Vec<f64> {
    let mut e = eigh(m, 0.0).eigenvalues;
    e.sort_by(f64::total_cmp);
    e
}

/// Transports `xi0` from the base point of `orbit` with the stepped scheme
/// and tracks the spectrum of the traceless shape operator of `xi(t)`.
pub fn transported_spectrum_drift(
    orbit: &OrbitSubmanifold,
    curve: &OrbitCurve,
    xi0: &DVector<f64>,
    step: f64,
    samples_per_segment: usize,
) -> Result<SpectrumDrift> {
    let rep = orbit.rep();
    let frame = DMatrix::from_columns(std::slice::from_ref(xi0));
    let res = parallel_transport_normal(rep, curve, orbit.point(), &frame, step, samples_per_segment)?;
    let initial = sorted_eigenvalues(&orbit.traceless_shape_operator(xi0));
    let mut max_drift = 0.0f64;
    let mut sample_times = Vec::new();
    for s in &res.samples {
        let here = build_orbit(rep, &s.point)?;
        let e = sorted_eigenvalues(&here.traceless_shape_operator(&s.frame.column(0).into_owned()));
        for (a, b) in e.iter().zip(&initial) {
            max_drift = max_drift.max((a - b).abs());
        }
        sample_times.push(s.t);
    }
    Ok(SpectrumDrift { max_drift, initial, sample_times })
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
    fn zero_length_curve_is_identity() {
        let m = veronese(3);
        let xi = DMatrix::from_columns(&[m.normal_bar().vector(0)]);
        let res = parallel_transport_normal(m.rep(), &OrbitCurve::empty(), m.point(), &xi, 1e-3, 0).unwrap();
        assert_eq!(res.end, xi);
        let (_, ex) = transport_exact(m.rep(), &OrbitCurve::empty(), m.point(), &xi, Bundle::Normal).unwrap();
        assert_eq!(ex, xi);
    }

    #[test]
    fn exact_transport_stays_normal_and_isometric() {
        let m = veronese(3);
        let rep = m.rep();
        let curve = OrbitCurve::random(rep, 3, 0.4, &mut probe_rng(1));
        let (end, f) = transport_exact(rep, &curve, m.point(), m.normal().basis(), Bundle::Normal).unwrap();
        let p = bundle_projector(rep, &end, Bundle::Normal);
        assert!((&p * &f - &f).norm() < 1e-9);
        let k = f.ncols();
        assert!((f.transpose() * &f - DMatrix::identity(k, k)).norm() < 1e-10);
        assert!((end - curve.end_point(m.point()).unwrap()).norm() < 1e-12);
    }

    #[test]
    fn exact_transport_is_a_parallel_field() {
        // d/dt xi(t) must be tangent: P(t) xi'(t) = 0, checked by central
        // differences of the closed form.
        let m = veronese(2);
        let rep = m.rep();
        let curve = OrbitCurve::random(rep, 1, 0.3, &mut probe_rng(2));
        let seg = &curve.segments[0];
        let xi = DMatrix::from_columns(&[m.normal_bar().vector(0)]);
        let at = |t: f64| {
            let c = OrbitCurve::new(vec![CurveSegment { generator: seg.generator.clone(), duration: t }]);
            transport_exact(rep, &c, m.point(), &xi, Bundle::Normal).unwrap()
        };
        let h = 1e-4;
        let (w, _) = at(0.2);
        let d = (at(0.2 + h).1 - at(0.2 - h).1) / (2.0 * h);
        let p = bundle_projector(rep, &w, Bundle::Normal);
        assert!((&p * d).norm() < 1e-6);
    }

    #[test]
    fn stepped_matches_exact_and_halving_halves_drift() {
        let m = veronese(3);
        let rep = m.rep();
        let curve = OrbitCurve::random(rep, 2, 0.5, &mut probe_rng(3));
        let xi = DMatrix::from_columns(&[m.normal_bar().vector(1) * 0.7]);
        let (res, audit) = transport_audit(rep, &curve, m.point(), &xi, 1e-3).unwrap();
        assert!(audit.halving_ok, "{audit:?}");
        assert!(audit.exact_error < 1e-6, "{audit:?}");
        assert!(res.norm_error < 1e-8);
        assert!(res.normal_residual < 1e-5);
    }

    #[test]
    fn traceless_spectrum_is_constant_along_curves() {
        let m = veronese(3);
        let mut rng = probe_rng(4);
        for _ in 0..3 {
            let curve = OrbitCurve::random(m.rep(), 2, 0.5, &mut rng);
            let xi = m.normal_bar().embed(&gaussian_vector(&mut rng, m.normal_bar().dim()));
            let d = transported_spectrum_drift(&m, &curve, &xi, 1e-3, 3).unwrap();
            assert!(d.max_drift < 1e-5, "{}", d.max_drift);
            assert!(d.sample_times.len() >= 3);
        }
    }

    #[test]
    fn tangent_transport_is_orthogonal() {
        let m = veronese(3);
        let curve = OrbitCurve::random(m.rep(), 2, 0.5, &mut probe_rng(5));
        let (end, f) = transport_exact(m.rep(), &curve, m.point(), m.tangent().basis(), Bundle::Tangent).unwrap();
        let p = bundle_projector(m.rep(), &end, Bundle::Tangent);
        assert!((&p * &f - &f).norm() < 1e-9);
        assert!((f.transpose() * &f - DMatrix::identity(3, 3)).norm() < 1e-10);
    }

    #[test]
    fn rejects_bad_step() {
        let m = veronese(2);
        let xi = DMatrix::from_columns(&[m.normal_bar().vector(0)]);
        assert!(parallel_transport_normal(m.rep(), &OrbitCurve::empty(), m.point(), &xi, 0.0, 0).is_err());
    }
}
