//! Curvature normals and the reflection group of flat (isoparametric) orbits.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::holonomy::AdaptedCurvature;
use crate::numeric::{commutator, eigh};
use crate::orbit::{build_orbit, OrbitSubmanifold};
use crate::rng::{gaussian_vector, ProbeRng};

const SPLIT_GAP: f64 = 1e-6;

#[derive(Debug, Clone, Serialize)]
pub struct CurvatureNormalSet {
    /// Normal-frame coordinates of each `eta_i` (index 0 is the position).
    pub normals: Vec<Vec<f64>>,
    /// Multiplicities `m_i = dim E_i`.
    pub multiplicities: Vec<usize>,
    /// Largest `|A_a|E_i - <xi_a, eta_i> Id|` over frame vectors and blocks.
    pub residual: f64,
    /// Largest `|[A_a, A_b]|` over the frame.
    pub flatness: f64,
    #[serde(skip)]
    pub eigenspaces: Vec<DMatrix<f64>>,
}

impl CurvatureNormalSet {
    pub fn len(&self) -> usize {
        self.normals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.normals.is_empty()
    }

    pub fn normal(&self, i: usize) -> DVector<f64> {
        DVector::from_column_slice(&self.normals[i])
    }

    /// Largest `|cos|` of the angle between two distinct normals.
    pub fn max_pairwise_cosine(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.len() {
            for j in i + 1..self.len() {
                let (a, b) = (self.normal(i), self.normal(j));
                worst = worst.max((a.dot(&b) / (a.norm() * b.norm())).abs());
            }
        }
        worst
    }
}

/// Simultaneous eigendecomposition of the commuting shape operators.
pub fn curvature_normals(orbit: &OrbitSubmanifold, rng: &mut ProbeRng) -> Result<CurvatureNormalSet> {
    let ops = orbit.shape_operators().operators();
    let k = ops.len();
    let n = orbit.dim();
    let tol = orbit.rep().rank_tol();
    let mut flatness = 0.0f64;
    for a in 0..k {
        for b in a + 1..k {
            flatness = flatness.max(commutator(&ops[a], &ops[b]).norm());
        }
    }
    let curvature_norm = AdaptedCurvature::from_shape_operators(ops).norm();
    if flatness > tol.sqrt() || curvature_norm > tol {
        return Err(Error::NotIsoparametric { curvature_norm });
    }

    let coef = gaussian_vector(rng, k);
    let mut generic = DMatrix::zeros(n, n);
    for (op, c) in ops.iter().zip(coef.iter()) {
        generic += op * *c;
    }
    let d = eigh(&generic, SPLIT_GAP);
    let mut blocks: Vec<DMatrix<f64>> = (0..d.clusters.len()).map(|c| d.cluster_basis(c)).collect();
    for op in ops {
        let mut next = Vec::with_capacity(blocks.len());
        for b in blocks {
            let restricted = b.transpose() * op * &b;
            let rd = eigh(&restricted, SPLIT_GAP);
            for c in 0..rd.clusters.len() {
                next.push(&b * rd.cluster_basis(c));
            }
        }
        blocks = next;
    }

    let mut normals: Vec<DVector<f64>> = Vec::new();
    let mut spaces: Vec<DMatrix<f64>> = Vec::new();
    for b in blocks {
        let eta = DVector::from_iterator(k, ops.iter().map(|op| (b.transpose() * op * &b).trace() / b.ncols() as f64));
        if let Some(i) = normals.iter().position(|e| (e - &eta).norm() <= SPLIT_GAP * (1.0 + eta.norm())) {
            let merged = DMatrix::from_columns(
                &spaces[i].column_iter().chain(b.column_iter()).map(|c| c.into_owned()).collect::<Vec<_>>(),
            );
            spaces[i] = merged;
        } else {
            normals.push(eta);
            spaces.push(b);
        }
    }

    let mut residual = 0.0f64;
    for (eta, b) in normals.iter().zip(&spaces) {
        let m = b.ncols();
        for (a, op) in ops.iter().enumerate() {
            let r = b.transpose() * op * b - DMatrix::identity(m, m) * eta[a];
            residual = residual.max(r.norm());
        }
    }
    if residual > tol.sqrt() {
        return Err(Error::DegenerateSpectrum(format!("shape operators are not scalar on a block (residual {residual:e})")));
    }
    let multiplicities: Vec<usize> = spaces.iter().map(|b| b.ncols()).collect();
    if multiplicities.iter().sum::<usize>() != n {
        return Err(Error::DegenerateSpectrum("eigendistributions do not fill the tangent space".into()));
    }
    Ok(CurvatureNormalSet {
        normals: normals.iter().map(|e| e.iter().copied().collect()).collect(),
        multiplicities,
        residual,
        flatness,
        eigenspaces: spaces,
    })
}

/// `I - 2 eta eta^T / |eta|^2`.
pub fn reflection(eta: &DVector<f64>) -> DMatrix<f64> {
    let k = eta.len();
    DMatrix::identity(k, k) - eta * eta.transpose() * (2.0 / eta.norm_squared())
}

#[derive(Debug, Clone, Serialize)]
pub struct ReflectionGroup {
    #[serde(skip)]
    pub generators: Vec<DMatrix<f64>>,
    #[serde(skip)]
    pub elements: Vec<DMatrix<f64>>,
    pub order: usize,
    pub finite: bool,
    /// Largest `|g^T g - I|` over elements.
    pub orthogonality_defect: f64,
    /// Every pairwise product matches a listed element within `1e-8`;
    /// `None` when the group is too large for the quadratic check.
    pub closure_verified: Option<bool>,
}

pub const DEFAULT_GROUP_CAP: usize = 10_000;
const DEDUP_TOL: f64 = 1e-8;

fn find(elements: &[DMatrix<f64>], g: &DMatrix<f64>) -> Option<usize> {
    elements.iter().position(|e| (e - g).amax() <= DEDUP_TOL)
}

/// Breadth-first closure of the reflections across `eta_i^⊥` in the
/// normal space.
pub fn reflection_group(normals: &CurvatureNormalSet, cap: usize) -> Result<ReflectionGroup> {
    if normals.is_empty() {
        return Err(Error::invalid("reflection group needs at least one curvature normal"));
    }
    let generators: Vec<DMatrix<f64>> = (0..normals.len()).map(|i| reflection(&normals.normal(i))).collect();
    closure_of(generators, cap)
}

pub fn closure_of(generators: Vec<DMatrix<f64>>, cap: usize) -> Result<ReflectionGroup> {
    let k = generators[0].nrows();
    let mut elements = vec![DMatrix::identity(k, k)];
    let mut frontier = 0;
    while frontier < elements.len() {
        let g = elements[frontier].clone();
        frontier += 1;
        for s in &generators {
            let h = s * &g;
            if find(&elements, &h).is_none() {
                if elements.len() >= cap {
                    return Err(Error::ClosureCapReached { cap });
                }
                elements.push(h);
            }
        }
    }
    let orthogonality_defect = elements
        .iter()
        .map(|g| (g.transpose() * g - DMatrix::identity(k, k)).amax())
        .fold(0.0, f64::max);
    let closure_verified = (elements.len() <= 2000)
        .then(|| elements.iter().all(|a| elements.iter().all(|b| find(&elements, &(a * b)).is_some())));
    Ok(ReflectionGroup { order: elements.len(), finite: true, orthogonality_defect, closure_verified, generators, elements })
}

/// True iff `g` maps the set of lines `R eta_i` onto itself, each image
/// within angle `tol` of some line.
pub fn hyperplane_permutation_check(g: &DMatrix<f64>, normals: &CurvatureNormalSet, tol: f64) -> bool {
    let lines: Vec<DVector<f64>> = (0..normals.len()).map(|i| normals.normal(i).normalize()).collect();
    let mut hit = vec![false; lines.len()];
    for l in &lines {
        let img = g * l;
        let norm = img.norm();
        if norm == 0.0 {
            return false;
        }
        let img = img / norm;
        let best = lines
            .iter()
            .enumerate()
            .map(|(j, m)| (j, (1.0 - img.dot(m).powi(2)).max(0.0).sqrt()))
            .min_by(|a, b| a.1.total_cmp(&b.1));
        match best {
            Some((j, sine)) if sine <= tol && !hit[j] => hit[j] = true,
            _ => return false,
        }
    }
    true
}

#[derive(Debug, Clone, Serialize)]
pub struct SingularPointTest {
    pub normal_index: usize,
    pub orbit_dim: usize,
    pub singular_dim: usize,
    pub dropped: bool,
}

/// Moves the base point to sampled points of the hyperplanes `eta_i^⊥`
/// inside the normal space and rebuilds the orbit there.
pub fn hyperplane_point_tests(
    orbit: &OrbitSubmanifold,
    normals: &CurvatureNormalSet,
    samples: usize,
    rng: &mut ProbeRng,
) -> Result<Vec<SingularPointTest>> {
    let k = orbit.codim();
    let mut out = Vec::with_capacity(samples);
    for s in 0..samples {
        let i = s % normals.len();
        let eta = normals.normal(i);
        let mut z = gaussian_vector(rng, k);
        z[0] += 2.0;
        z -= &eta * (z.dot(&eta) / eta.norm_squared());
        let point = orbit.normal().embed(&z);
        let singular = build_orbit(orbit.rep(), &point)?;
        out.push(SingularPointTest {
            normal_index: i,
            orbit_dim: orbit.dim(),
            singular_dim: singular.dim(),
            dropped: singular.dim() < orbit.dim(),
        });
    }
    Ok(out)
}
