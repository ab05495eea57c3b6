//! Bayesian inversion of the non-Abelian X-ray transform on the unit disk.
//!
//! The forward problem maps a skew-symmetric matrix field `Φ` on the disk to
//! its scattering data `C_Φ`: the end-to-start propagator of the linear ODE
//! `u' + Φu = 0` along each chord. This crate provides
//!
//! * chord geometry and quadrature on the influx boundary ([`geometry`]),
//! * Zernike polynomial bases and the fan-beam boundary basis ([`zernike`]),
//! * `so(m)`-valued polynomial fields ([`lie`]),
//! * transport ODE solvers, scattering data and its Gateaux derivatives
//!   ([`transport`]),
//! * the Gaussian-prior regression model and its posterior ([`stats`]),
//! * a log-concave surrogate posterior ([`surrogate`]),
//! * an unadjusted Langevin sampler with Wasserstein diagnostics
//!   ([`sampler`]),
//! * singular-value stability scans of the linearised transform
//!   ([`spectral`]),
//! * binary artifact containers for datasets, chains and checkpoints
//!   ([`io`]).

pub mod error;
pub mod geometry;
pub mod io;
pub mod lie;
pub mod numerics;
pub mod rng;
pub mod sampler;
pub mod spectral;
pub mod stats;
pub mod surrogate;
pub mod transport;
pub mod zernike;

pub use error::{Error, Result};
