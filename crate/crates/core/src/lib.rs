//! Stability analysis for warped product compactifications on flat internal
//! tori.
//!
//! The crate discretizes the two coupled shape functions of a warped product
//! metric (the warp factor `u` and the conformal factor `v`) on a periodic
//! grid, evaluates the dimensionally reduced potential and its stationarity
//! conditions spectrally, and provides solvers and diagnostics built on that
//! discretization:
//!
//! * [`manifold`]: grids, scalar fields, Fourier calculus, quadrature, field
//!   serialization.
//! * [`model`]: the effective potential, the two Euler-Lagrange residuals,
//!   the volume-mode mass, and the non-perturbative correction profile.
//! * [`solvers`]: a monotone sub/supersolution iteration for the reduced
//!   conformal equation, a decoupling solver for the linearized system,
//!   a damped Newton method for the full coupled system, parameter
//!   continuation, and the inverse problem that reads sources off a
//!   prescribed configuration.
//! * [`analysis`]: stability reports, integral identity checks, the
//!   instability certificate, volume lower bounds, and operator norm
//!   diagnostics.
//! * [`config`] and [`runner`]: experiment descriptions, scenario presets,
//!   and the batch entry points used by the command line interface.

pub mod analysis;
pub mod config;
mod error;
pub mod manifold;
pub mod model;
pub mod runner;
pub mod solvers;
pub mod tolerances;

pub use error::{Error, Result};
