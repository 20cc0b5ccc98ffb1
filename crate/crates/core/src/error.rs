use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// Bracket closure grew past the declared cap, which almost always means
    /// the rank tolerance is too tight for the data.
    #[error("algebra dimension {dim} exceeds cap {cap}")]
    DimensionCapExceeded { dim: usize, cap: usize },

    #[error("normal transport diverged at t = {t}: norm {norm} fell below half of {initial}")]
    TransportDiverged { t: f64, norm: f64, initial: f64 },

    #[error("focal degeneracy: eigenvalue {eigenvalue} is within {gap} of 1")]
    FocalDegeneracy { eigenvalue: f64, gap: f64 },

    #[error("tube patch is degenerate: smallest metric eigenvalue {min_eigenvalue}")]
    PatchDegenerate { min_eigenvalue: f64 },

    #[error("not applicable: {0}")]
    NotApplicable(String),

    #[error("caustic shift leaves eigenvalue {eigenvalue} too close to zero")]
    InvalidShift { eigenvalue: f64 },

    #[error("normal bundle is not flat: |R| = {curvature_norm}")]
    NotIsoparametric { curvature_norm: f64 },

    #[error("degenerate spectrum: {0}")]
    DegenerateSpectrum(String),

    #[error("reflection group closure reached the cap of {cap} elements")]
    ClosureCapReached { cap: usize },

    #[error("configuration error: {0}")]
    Config(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}
