//! Simulation and moment-based inference for the mixed fractional
//! Black-Scholes model with random effects.
//!
//! Subjects follow `dX_t = phi_i X_t dt + X_t dM_t` where `M = sigma B + gamma B^H`
//! is a mixed fractional Brownian motion. On the log scale the increments are
//! `theta_i h + sigma dB + gamma dB^H` with `theta_i = phi_i - sigma^2 / 2`.
//!
//! - [`noise`]: fractional Gaussian noise covariances and exact synthesis
//! - [`model`]: model parameters, random-effect laws, panel simulation and I/O
//! - [`moments`]: per-subject quadratic statistics and their limits
//! - [`estimate`]: moment estimators of `(H, gamma^2, sigma^2)` and of the effects
//! - [`cdf`]: Chebyshev-Lagrange and kernel estimators of the effects CDF
//! - [`experiments`]: Monte Carlo harness and reports

pub mod cdf;
pub mod error;
pub mod estimate;
pub mod experiments;
pub mod model;
pub mod moments;
pub mod noise;
pub mod seed;
pub mod stats;

pub use error::{DegeneracyReport, Error, Result};
pub use estimate::{GlobalEstimate, SubjectEstimate};
pub use model::{EffectsDistribution, ModelParams, Panel};
pub use moments::MomentSummary;
