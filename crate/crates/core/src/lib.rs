//! Orbit submanifolds of the s-representation of `SO(r)` on traceless
//! symmetric matrices: second fundamental forms, normal holonomy, holonomy
//! tubes, curvature normals and the Veronese embeddings.
//!
//! Everything is dense `f64` linear algebra on small matrices. Randomized
//! probes take an explicit seeded [`ProbeRng`].

pub mod error;
pub mod numeric;
pub mod rng;
pub mod tol;
pub mod lie;
pub mod pair;
pub mod orbit;
pub mod transport;
pub mod holonomy;
pub mod tubes;
pub mod coxeter;
pub mod veronese;
pub mod scenario;

pub use error::{Error, Result};
pub use holonomy::{analyze, holonomy_algebra, AdaptedCurvature, ConjectureClass, HolonomyVerdict};
pub use lie::{LieAlgebraSpan, RepDecomposition};
pub use numeric::{eigh, matrix_exp, EigenCluster, SpectralDecomposition, Subspace};
pub use orbit::{build_orbit, OrbitSubmanifold, SecondFundamentalForm};
pub use pair::SymmetricPairRep;
pub use rng::{probe_rng, ProbeRng};
pub use scenario::{run_scenario, Analysis, Report, ScenarioConfig};
pub use tol::Tolerances;
pub use transport::OrbitCurve;
pub use tubes::{TubeParams, TubeSpectrum};
pub use veronese::VeroneseOrbit;
