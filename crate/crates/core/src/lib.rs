//! Coherent information and nonadditivity for finite-dimensional quantum channels.
//!
//! The crate is organized bottom-up:
//!
//! - [`linalg`]: dense complex matrices and a Jacobi Hermitian eigensolver.
//! - [`states`]: density matrices, entropy, partial trace, purification,
//!   fidelity and the ρ(u), ρ(w, v), ρ(r₁, r₂, r₃) input families.
//! - [`channels`]: Kraus and isometric channels, complementary channels,
//!   tensor products, Choi matrices and the platypus / amplitude-damping /
//!   erasure / depolarizing constructors.
//! - [`capacity`]: coherent information, its maximization, log-singularity
//!   rates and the nonadditivity gap Δ.
//! - [`tomography`]: simulated state and process tomography with
//!   maximum-likelihood reconstruction and Monte Carlo error bars.
//!
//! Entropies are measured in bits throughout.

pub mod capacity;
pub mod channels;
pub mod error;
pub mod linalg;
pub mod optim;
pub mod states;
pub mod tomography;

pub use capacity::{
    coherent_information, coherent_information_via_purification, delta_nonadditivity,
    optimize_ci_family, optimize_ci_general, scan_delta, singularity_rate_regression,
    singularity_rate_spectral, CurvePoint, DeltaScan, OptimizationResult, Side,
    SingularityEstimate, SingularityMethod, StateFamily,
};
pub use channels::{
    amplitude_damping, choi, depolarizing, erasure, identity_channel, platypus, process_fidelity,
    tensor, Channel, ChannelSpec, ChoiMatrix, IsometryChannel, KrausChannel,
};
pub use error::{Error, Result};
pub use linalg::{hermitian_eig, ComplexMatrix, EigenDecomposition, C64};
pub use states::{
    family_rho_r, family_rho_u, family_rho_wv, fidelity, partial_trace, purify,
    von_neumann_entropy, DensityMatrix, PureState,
};
pub use tomography::{
    ic_projectors, mle_reconstruct, monte_carlo_errors, process_tomography, simulate_counts,
    CountRecord, MleOptions, ProjectorSet, ReconstructionResult, ShotModel,
};

/// Crate version recorded in result envelopes.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
