//! Exact finite-volume computations.
//!
//! Configurations of at most 63 sites are packed into a `u64` with bit `i`
//! holding the occupation of site index `i` (1 = occupied).

mod absorbing;
mod generator;
mod spectral;
mod variational;

pub use absorbing::{hitting_cdf, hitting_cdf_many};
pub use generator::{build_generator, GeneratorKind, GeneratorRecord, DEFAULT_STATE_CAP};
pub use spectral::{
    dense_symmetric_eigenvalues, relaxation_time, spectral_gap, spectral_gap_with, LanczosOptions,
    SpectralMethod, SpectralResult, DENSE_LIMIT,
};
pub use variational::{
    current_ju, dirichlet_split, gap_sandwich, max_fa_functional, sums_s0_s1, variational_objective,
    DirichletSplit, FaMaximum, Mode, ObjectiveReport, S0S1Report, TestFunction, EXACT_SITE_CAP,
};
