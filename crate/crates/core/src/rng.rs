//! Seeded random streams. Every probe vector in the crate is drawn from here.

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub type ProbeRng = ChaCha8Rng;

pub fn probe_rng(seed: u64) -> ProbeRng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian_vector(rng: &mut ProbeRng, dim: usize) -> DVector<f64> {
    DVector::from_fn(dim, |_, _| rng.sample::<f64, _>(StandardNormal))
}

/// Uniform direction on the unit sphere of `R^dim`.
pub fn unit_vector(rng: &mut ProbeRng, dim: usize) -> DVector<f64> {
    loop {
        let v = gaussian_vector(rng, dim);
        let n = v.norm();
        if n > 1e-6 {
            return v / n;
        }
    }
}

pub fn uniform(rng: &mut ProbeRng, lo: f64, hi: f64) -> f64 {
    rng.random_range(lo..hi)
}
