//! Free dynamics of continuous-time recurrent networks `ẋ = σ(Ax)` with a
//! skew-symmetric state matrix `A`.
//!
//! The crate covers matrix construction and spectra ([`matrix`]), component-wise
//! activations ([`activation`]), forward Euler and RK4 integration
//! ([`dynamics`]), conserved quantities and linear stability ([`invariants`]),
//! amplitude spectra and STFTs ([`spectral`]) and a reproducible experiment
//! runner ([`experiment`]).

pub mod activation;
pub mod dynamics;
pub mod error;
pub mod experiment;
pub mod invariants;
mod linalg;
pub mod matrix;
pub mod rng;
pub mod spectral;
pub mod table;

pub use activation::ActivationKind;
pub use dynamics::{simulate, Integrator, SimulationConfig, Termination, Trajectory};
pub use error::{Error, Result};
pub use invariants::{
    classify_stability, invariant_trace, trace_level_set, InvariantSpec, InvariantTrace,
    StabilityClass, StabilityReport,
};
pub use matrix::{EigenFrequencies, Eigenvalue, MatrixOrigin, SkewMatrix};
pub use spectral::{amplitude_spectrum, stft, SpectrumReport, StftReport};

/// Version string recorded in run manifests.
pub const TOOL_VERSION: &str = concat!(env!("CARGO_PKG_NAME"), " ", env!("CARGO_PKG_VERSION"));
