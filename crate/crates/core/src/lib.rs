//! Spectral estimation for Hilbertian time series observed with noise.
//!
//! Observations `ζ_t = ξ_t + ε_t` live in a separable Hilbert space that is
//! discretized on a grid with quadrature weights. Because measurement noise is
//! uncorrelated across time, lagged autocovariance operators ignore it: the
//! operator `S = R₁R₁*` (or a sum over lags `1..=p`) has the same range as the
//! covariance of the signal, and its leading eigenvectors recover the latent
//! subspace.
//!
//! Modules, bottom-up:
//! - [`hilbert`]: quadratures, vectors, panels and kernel operators.
//! - [`covariance`]: lagged autocovariances, `Ŝ` on the grid and through the dual Gram matrices.
//! - [`spectral`]: eigensystems, sign alignment, dimension selection, scores.
//! - [`subspace`]: projectors and the projector distance between subspaces.
//! - [`simulate`]: finite-rank generators with known spectra and the Monte Carlo rate harness.

pub mod covariance;
pub mod error;
pub mod hilbert;
mod linalg;
pub mod simulate;
pub mod spectral;
pub mod subspace;

pub use covariance::{gram_matrices, lag_autocov, s_hat_dual, s_hat_grid, GramPair, LagSpec, Normalizer};
pub use error::{Error, Result};
pub use hilbert::{
    apply_operator, center_panel, hs_norm, inner_product, norm, CurvePanel, HVector, OperatorRep, Quadrature,
    QuadratureMode,
};
pub use spectral::{
    compute_scores, eigendecompose, estimate_dimension, reconstruct, sign_align, DimensionEstimate, DimensionMethod,
    EigenSystem, ScoreMatrix, SignAlignment,
};
pub use subspace::{project, projector, projector_distance, subspace_metric, SubspaceBasis};
