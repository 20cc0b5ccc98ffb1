use serde::{Deserialize, Serialize};

/// Numerical thresholds shared by every analysis.
///
/// All comparisons against these values are made after base points have been
/// normalized to unit carrier norm, so absolute thresholds are meaningful.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    /// Symmetry check `|a_ij - a_ji| <= sym * |A|`.
    pub sym: f64,
    /// Eigen-residual bound relative to `|A|`.
    pub eig: f64,
    /// Rank/kernel threshold (relative, see [`crate::numeric::null_space`]).
    pub rank: f64,
    /// Eigenvalue clustering gap for exact-arithmetic contexts.
    pub cluster_gap: f64,
    /// Eigenvalue clustering gap for finite-difference tube spectra.
    pub tube_cluster_gap: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            sym: 1e-10,
            eig: 1e-9,
            rank: 1e-8,
            cluster_gap: 1e-6,
            tube_cluster_gap: 1e-3,
        }
    }
}
