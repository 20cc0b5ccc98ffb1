//! Adapted normal curvature, the restricted normal holonomy algebra and the
//! verdicts drawn from it.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::lie::{
    bracket_closure, invariant_decomposition, is_transitive_on_sphere, LieAlgebraSpan, RepDecomposition,
    TransitivityEvidence,
};
use crate::numeric::{commutator, flatten, log_near_identity, matrix_exp, null_space, orthonormal_span, Subspace};
use crate::orbit::OrbitSubmanifold;
use crate::pair::SymmetricPairRep;
use crate::rng::{gaussian_vector, ProbeRng};
use crate::transport::{parallel_transport_normal, CurveSegment, OrbitCurve};

/// `T[a][b][c][d] = <R_{xi_a, xi_b} xi_c, xi_d> = <[A_a, A_b], [A_c, A_d]>`
/// over an orthonormal normal frame.
#[derive(Debug, Clone)]
pub struct AdaptedCurvature {
    dim: usize,
    data: Vec<f64>,
}

impl AdaptedCurvature {
    /// Over the full normal frame of the orbit (index 0 is the position).
    pub fn of_orbit(orbit: &OrbitSubmanifold) -> Self {
        Self::from_shape_operators(orbit.shape_operators().operators())
    }

    pub fn from_shape_operators(ops: &[DMatrix<f64>]) -> Self {
        let k = ops.len();
        let mut brackets = vec![None; k * k];
        for a in 0..k {
            for b in a + 1..k {
                brackets[a * k + b] = Some(commutator(&ops[a], &ops[b]));
            }
        }
        let br = |a: usize, b: usize| -> (f64, Option<&DMatrix<f64>>) {
            if a < b {
                (1.0, brackets[a * k + b].as_ref())
            } else if b < a {
                (-1.0, brackets[b * k + a].as_ref())
            } else {
                (0.0, None)
            }
        };
        let mut data = vec![0.0; k * k * k * k];
        for a in 0..k {
            for b in 0..k {
                let (sab, ab) = br(a, b);
                let Some(ab) = ab else { continue };
                for c in 0..k {
                    for d in 0..k {
                        let (scd, cd) = br(c, d);
                        if let Some(cd) = cd {
                            data[((a * k + b) * k + c) * k + d] = sab * scd * ab.dot(cd);
                        }
                    }
                }
            }
        }
        Self { dim: k, data }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, a: usize, b: usize, c: usize, d: usize) -> f64 {
        let k = self.dim;
        self.data[((a * k + b) * k + c) * k + d]
    }

    pub fn norm(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    /// `R_{xi_a, xi_b}` as a matrix acting on frame coordinates.
    pub fn endomorphism(&self, a: usize, b: usize) -> DMatrix<f64> {
        DMatrix::from_fn(self.dim, self.dim, |d, c| self.get(a, b, c, d))
    }

    /// The tensor on the sub-frame `first..dim`.
    pub fn restricted(&self, first: usize) -> AdaptedCurvature {
        let k = self.dim - first;
        let mut data = vec![0.0; k * k * k * k];
        for a in 0..k {
            for b in 0..k {
                for c in 0..k {
                    for d in 0..k {
                        data[((a * k + b) * k + c) * k + d] = self.get(a + first, b + first, c + first, d + first);
                    }
                }
            }
        }
        AdaptedCurvature { dim: k, data }
    }

    /// `(h.T)[a,b,c,d] = T(h^T e_a, h^T e_b, h^T e_c, h^T e_d)`.
    pub fn transformed(&self, h: &DMatrix<f64>) -> AdaptedCurvature {
        let k = self.dim;
        let mut stage = self.data.clone();
        for slot in 0..4 {
            let mut next = vec![0.0; stage.len()];
            for idx in 0..stage.len() {
                let mut digits = [0usize; 4];
                let mut r = idx;
                for p in (0..4).rev() {
                    digits[p] = r % k;
                    r /= k;
                }
                let mut acc = 0.0;
                for m in 0..k {
                    let mut dd = digits;
                    dd[slot] = m;
                    let j = ((dd[0] * k + dd[1]) * k + dd[2]) * k + dd[3];
                    acc += h[(digits[slot], m)] * stage[j];
                }
                next[idx] = acc;
            }
            stage = next;
        }
        AdaptedCurvature { dim: k, data: stage }
    }

    pub fn max_difference(&self, other: &AdaptedCurvature) -> f64 {
        self.data.iter().zip(&other.data).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }

    /// Largest violation among the antisymmetries, the pair symmetry and
    /// the first Bianchi identity.
    pub fn symmetry_defect(&self) -> f64 {
        let k = self.dim;
        let mut worst = 0.0f64;
        for a in 0..k {
            for b in 0..k {
                for c in 0..k {
                    for d in 0..k {
                        let t = self.get(a, b, c, d);
                        worst = worst
                            .max((t + self.get(b, a, c, d)).abs())
                            .max((t + self.get(a, b, d, c)).abs())
                            .max((t - self.get(c, d, a, b)).abs())
                            .max((t + self.get(b, c, a, d) + self.get(c, a, b, d)).abs());
                    }
                }
            }
        }
        worst
    }

    /// `{xi : R_{eta, xi} = 0 for all eta}` in frame coordinates.
    pub fn nullity(&self, tol: f64) -> Subspace {
        let k = self.dim;
        let mut m = DMatrix::zeros(k * k * k, k);
        for x in 0..k {
            for a in 0..k {
                for c in 0..k {
                    for d in 0..k {
                        m[((a * k + c) * k + d, x)] = self.get(a, x, c, d);
                    }
                }
            }
        }
        null_space(&m, tol)
    }
}

/// Bracket closure of `{R_{xi_a, xi_b}}` acting on normal-frame coordinates.
pub fn holonomy_algebra(orbit: &OrbitSubmanifold) -> Result<LieAlgebraSpan> {
    holonomy_algebra_of(&AdaptedCurvature::of_orbit(orbit), orbit.rep().rank_tol())
}

pub fn holonomy_algebra_of(curv: &AdaptedCurvature, tol: f64) -> Result<LieAlgebraSpan> {
    let k = curv.dim();
    let mut gens = Vec::new();
    for a in 0..k {
        for b in a + 1..k {
            gens.push(curv.endomorphism(a, b));
        }
    }
    bracket_closure(k, &gens, k * k.saturating_sub(1) / 2, tol)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ConjectureClass {
    Transitive,
    SOrbitCompatible,
    ViolationCandidate,
}

#[derive(Debug, Clone)]
pub struct HolonomyVerdict {
    pub algebra: LieAlgebraSpan,
    pub decomposition: RepDecomposition,
    pub transitivity: Vec<TransitivityEvidence>,
    /// Number of non-trivial irreducible factors.
    pub factor_count: usize,
    /// Holonomy-fixed rank: dimension of the fixed set in `nu_v`.
    pub rank: usize,
    pub orbit_dim: usize,
    /// `floor(n / 2)`.
    pub bound: usize,
    pub bound_satisfied: bool,
    pub conjecture_class: ConjectureClass,
}

/// Serializable digest of a [`HolonomyVerdict`].
#[derive(Debug, Clone, Serialize)]
pub struct VerdictSummary {
    pub algebra_dim: usize,
    pub fixed_dim: usize,
    pub factor_dims: Vec<usize>,
    pub factor_transitive: Vec<bool>,
    pub factor_evidence: Vec<crate::lie::FactorEvidence>,
    pub transitivity_orbit_dims: Vec<Vec<usize>>,
    pub factor_count: usize,
    pub holonomy_fixed_rank: usize,
    pub orbit_dim: usize,
    pub bound: usize,
    pub bound_satisfied: bool,
    pub conjecture_class: ConjectureClass,
    pub irreducibility: &'static str,
}

impl HolonomyVerdict {
    pub fn summary(&self) -> VerdictSummary {
        VerdictSummary {
            algebra_dim: self.algebra.dim(),
            fixed_dim: self.decomposition.fixed.dim(),
            factor_dims: self.decomposition.factor_dims(),
            factor_transitive: self.transitivity.iter().map(|t| t.transitive).collect(),
            factor_evidence: self.decomposition.evidence.clone(),
            transitivity_orbit_dims: self.transitivity.iter().map(|t| t.orbit_dims.clone()).collect(),
            factor_count: self.factor_count,
            holonomy_fixed_rank: self.rank,
            orbit_dim: self.orbit_dim,
            bound: self.bound,
            bound_satisfied: self.bound_satisfied,
            conjecture_class: self.conjecture_class,
            irreducibility: "irreducible-by-probe",
        }
    }
}

pub fn analyze(orbit: &OrbitSubmanifold, probes: usize, rng: &mut ProbeRng) -> Result<HolonomyVerdict> {
    let algebra = holonomy_algebra(orbit)?;
    analyze_algebra(orbit, algebra, probes, rng)
}

pub fn analyze_algebra(
    orbit: &OrbitSubmanifold,
    algebra: LieAlgebraSpan,
    probes: usize,
    rng: &mut ProbeRng,
) -> Result<HolonomyVerdict> {
    let decomposition = invariant_decomposition(&algebra, probes, rng)?;
    let transitivity = decomposition
        .factors
        .iter()
        .map(|f| is_transitive_on_sphere(&algebra, f, probes, rng))
        .collect::<Result<Vec<_>>>()?;
    let n = orbit.dim();
    let factor_count = decomposition.factors.len();
    let rank = decomposition.fixed.dim();
    let bound = n / 2;
    let bar = orbit.normal_bar().dim();
    let covering_transitive = decomposition
        .factors
        .iter()
        .zip(&transitivity)
        .any(|(f, t)| f.dim() == bar && t.transitive);
    let sl_signature = factor_count == 1
        && !transitivity[0].transitive
        && decomposition.factors[0].dim() + 1 == n * (n + 1) / 2
        && algebra.dim() == n * n.saturating_sub(1) / 2;
    let conjecture_class = if covering_transitive {
        ConjectureClass::Transitive
    } else if rank >= 2 || (rank == 1 && sl_signature) {
        ConjectureClass::SOrbitCompatible
    } else {
        ConjectureClass::ViolationCandidate
    };
    Ok(HolonomyVerdict {
        algebra,
        decomposition,
        transitivity,
        factor_count,
        rank,
        orbit_dim: n,
        bound,
        bound_satisfied: factor_count <= bound,
        conjecture_class,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct CertificatePair {
    pub factor: usize,
    /// Normal-frame coordinates of the two vectors.
    pub xi: Vec<f64>,
    pub xi_prime: Vec<f64>,
    pub commutator_norm: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct CommutingCertificate {
    pub pairs: Vec<CertificatePair>,
    /// Factors on which every commutator vanished.
    pub flat_factors: Vec<usize>,
    pub independent: bool,
    pub max_pairwise_commutator: f64,
}

impl CommutingCertificate {
    pub fn certified(&self, tol: f64) -> bool {
        self.flat_factors.is_empty() && self.independent && self.max_pairwise_commutator <= tol
    }
}

/// One pair `xi, xi'` per factor with `[A_xi, A_xi'] != 0`, chosen to
/// maximize the commutator among frame pairs, together with independence
/// and commutation checks of the resulting commutators.
pub fn commuting_certificate(orbit: &OrbitSubmanifold, verdict: &HolonomyVerdict, tol: f64) -> Result<CommutingCertificate> {
    let shape = orbit.shape_operators();
    let mut pairs = Vec::new();
    let mut flat_factors = Vec::new();
    let mut commutators = Vec::new();
    for (fi, factor) in verdict.decomposition.factors.iter().enumerate() {
        let vs = factor.vectors();
        let mut best: Option<(usize, usize, DMatrix<f64>)> = None;
        for i in 0..vs.len() {
            for j in i + 1..vs.len() {
                let c = commutator(&shape.apply(&vs[i]), &shape.apply(&vs[j]));
                if best.as_ref().is_none_or(|b| c.norm() > b.2.norm()) {
                    best = Some((i, j, c));
                }
            }
        }
        match best {
            Some((i, j, c)) if c.norm() > tol => {
                pairs.push(CertificatePair {
                    factor: fi,
                    xi: vs[i].iter().copied().collect(),
                    xi_prime: vs[j].iter().copied().collect(),
                    commutator_norm: c.norm(),
                });
                commutators.push(c);
            }
            _ => flat_factors.push(fi),
        }
    }
    let flat: Vec<DVector<f64>> = commutators.iter().map(flatten).collect();
    let n = orbit.dim();
    let independent = orthonormal_span(n * n, &flat, 1e-8)?.dim() == commutators.len();
    let mut max_pairwise_commutator = 0.0f64;
    for i in 0..commutators.len() {
        for j in i + 1..commutators.len() {
            max_pairwise_commutator = max_pairwise_commutator.max(commutator(&commutators[i], &commutators[j]).norm());
        }
    }
    Ok(CommutingCertificate { pairs, flat_factors, independent, max_pairwise_commutator })
}

#[derive(Debug, Clone)]
pub struct LoopProbe {
    /// Closure of the normalized loop logarithms, on normal-frame coordinates.
    pub span: LieAlgebraSpan,
    /// `log` of each loop holonomy, in normal-frame coordinates.
    pub logs: Vec<DMatrix<f64>>,
    /// Largest `dist(log, holonomy algebra) / |log|` over non-trivial loops.
    pub max_containment: f64,
}

/// Transport of the normal frame around the closed loop with legs
/// `(X, s), (Ad_{exp(sX)} Y, t), (X, -s), (Y, -t)`, returned as an
/// orthogonal matrix in normal-frame coordinates.
pub fn loop_holonomy(
    orbit: &OrbitSubmanifold,
    x: &DMatrix<f64>,
    y: &DMatrix<f64>,
    s: f64,
    t: f64,
    step: f64,
) -> Result<DMatrix<f64>> {
    let rep = orbit.rep();
    let rx = rep.action_matrix(x);
    let ry = rep.action_matrix(y);
    let g1 = matrix_exp(&rx, s)?;
    let ry_moved = &g1 * &ry * g1.transpose();
    let curve = OrbitCurve::new(vec![
        CurveSegment { generator: rx.clone(), duration: s },
        CurveSegment { generator: ry_moved, duration: t },
        CurveSegment { generator: rx, duration: -s },
        CurveSegment { generator: ry, duration: -t },
    ]);
    let frame = orbit.normal().basis();
    let res = parallel_transport_normal(rep, &curve, orbit.point(), frame, step, 0)?;
    Ok(frame.transpose() * res.end)
}

/// Spans the logarithms of small-loop holonomies and compares them with the
/// curvature-generated algebra.
pub fn loop_holonomy_probe(
    orbit: &OrbitSubmanifold,
    algebra: &LieAlgebraSpan,
    radius: f64,
    count: usize,
    step: f64,
    rng: &mut ProbeRng,
) -> Result<LoopProbe> {
    let n = orbit.dim();
    let mut logs = Vec::with_capacity(count);
    let mut normalized = Vec::new();
    let mut max_containment = 0.0f64;
    for _ in 0..count {
        let cx = gaussian_vector(rng, n);
        let cy = gaussian_vector(rng, n);
        let x = combine(orbit.m_representatives(), &(&cx / cx.norm()));
        let y = combine(orbit.m_representatives(), &(&cy / cy.norm()));
        let o = loop_holonomy(orbit, &x, &y, radius, radius, step)?;
        let l = log_near_identity(&o)?;
        let l = (&l - l.transpose()) * 0.5;
        let size = l.norm();
        if size > 1e-12 {
            max_containment = max_containment.max(algebra.residual(&l) / size);
            normalized.push(&l / size);
        }
        logs.push(l);
    }
    let k = orbit.codim();
    let span = bracket_closure(k, &normalized, k * k.saturating_sub(1) / 2, 1e-4)?;
    Ok(LoopProbe { span, logs, max_containment })
}

fn combine(mats: &[DMatrix<f64>], coef: &DVector<f64>) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(mats[0].nrows(), mats[0].ncols());
    for (m, c) in mats.iter().zip(coef.iter()) {
        out += m * *c;
    }
    out
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct BridgeCheck {
    pub beta: f64,
    /// `max |T - beta^4 R(F)| / max |T|` over all index 4-tuples on `nu_bar`.
    pub max_relative_error: f64,
}

/// Compares the adapted curvature on `nu_bar` with the symmetric-space
/// curvature of `Sym0(n)` evaluated on `F_a = Ã_{xi_a} / beta`.
pub fn bridge_check(orbit: &OrbitSubmanifold) -> Result<BridgeCheck> {
    let n = orbit.dim();
    if n < 2 || orbit.normal_bar().dim() == 0 {
        return Err(Error::NotApplicable("bridge check needs n >= 2 and a non-trivial nu_bar".into()));
    }
    let homothecy = orbit.homothecy_test(f64::INFINITY)?;
    let beta = homothecy.beta;
    let t = AdaptedCurvature::of_orbit(orbit).restricted(1);
    let sym = SymmetricPairRep::sl_so(n)?;
    let traceless = orbit.traceless_shape_operators();
    let f: Vec<DVector<f64>> = (1..orbit.codim()).map(|a| sym.coordinates(&(traceless.get(a) / beta))).collect();
    let k = f.len();
    let beta4 = beta.powi(4);
    let mut worst = 0.0f64;
    let mut scale = 0.0f64;
    for a in 0..k {
        for b in 0..k {
            for c in 0..k {
                for d in 0..k {
                    let lhs = t.get(a, b, c, d);
                    let rhs = beta4 * sym.curvature_form(&f[a], &f[b], &f[c], &f[d]);
                    worst = worst.max((lhs - rhs).abs());
                    scale = scale.max(lhs.abs());
                }
            }
        }
    }
    Ok(BridgeCheck { beta, max_relative_error: if scale > 0.0 { worst / scale } else { worst } })
}
