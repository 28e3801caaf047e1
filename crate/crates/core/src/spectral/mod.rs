//! Truncated Fourier representation of mean-zero periodic fields.
//!
//! A [`ModeSet`] retains the wavevectors `k` with `0 < |k|_inf <= M` in one
//! or two dimensions, enumerated lexicographically on `(|k|^2, k1, k2)`.
//! A [`SpectralState`] stores one complex coefficient per retained mode and
//! field component. Norms follow the weighted family
//! `||x||_r^2 = sum_k |k|^{2r} |x(k)|^2`, so `r = 0` is the plain energy norm
//! and `r = 1` the gradient norm.

mod basis;
mod modes;
pub(crate) mod nonlinear;
mod state;

pub use basis::{BasisKind, Coordinate, RealBasis};
pub use modes::{eigenvalue_level_in, ModeSet, Spectrum, Wavevector};
pub use nonlinear::{
    calibrate_cd, calibrate_cd_from_samples, convective_term, lagrangian_mode_drift,
    lagrangian_nonlinearity, ns_bilinear, ns_nonlinearity, ns_trilinear, random_divergence_free,
    TriadKernel, CD_FLOOR, CD_SAFETY,
};
pub use state::{SobolevWeight, SpectralState, StateRecord};

/// Absolute tolerance for the reality and incompressibility checks.
pub const CONSTRAINT_TOL: f64 = 1e-12;
