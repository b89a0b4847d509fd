//! Solvers for the coupled equations of motion and their linearizations.
//!
//! Four routes to a solution, each matched to a structural regime:
//!
//! * [`solve_sub_super`]: monotone iteration between constant sub- and
//!   supersolutions for the reduced conformal-factor equation (warp factor
//!   frozen at one).
//! * [`linearized_solve`]: the decoupled elimination solve for the
//!   linearized system around a reduced solution.
//! * [`newton_solve`]: damped Newton iteration on the full coupled system
//!   with the exact discrete Jacobian, assembled densely on small grids and
//!   applied matrix-free through a preconditioned Krylov solve otherwise.
//! * [`continuation`]: linear homotopy in the model data, re-solving with
//!   Newton at each step and recording the branch.
//!
//! [`inverse_data_solve`] runs the reverse direction: given a configuration,
//! it produces source combinations that make it an exact solution.

mod continuation;
mod inverse;
mod linear;
mod linearized;
mod monotone;
mod newton;

pub use continuation::{continuation, BranchPoint, ContinuationResult};
pub use inverse::{inverse_data_solve, source_map_residuals, InverseDataResult};
pub use linear::{conjugate_gradient, gmres, spectral_helmholtz_solve, IterStats};
pub use linearized::{forward_p, forward_q, linearized_solve};
pub use monotone::{solve_sub_super, SubSuperResult};
pub use newton::{newton_solve, newton_solve_detailed, NewtonOutcome};

use crate::error::{Error, Result};
use crate::tolerances::{MAX_ITER_DEFAULT, SOLVER_TOL_DEFAULT};

/// Options shared by the nonlinear solvers.
///
/// `mean_u` and `mean_v` are the kernel parameters: when the linearization
/// at the initial iterate annihilates constant shifts (the balanced case),
/// the Newton updates are restricted to mean-zero fields and the total
/// update means are pinned to these values, selecting one member of the
/// solution family.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveOptions {
    /// Max-norm residual target.
    pub tol: f64,
    /// Iteration cap for the nonlinear loop.
    pub max_iter: usize,
    /// Initial Newton step scale in (0, 1].
    pub damping: f64,
    /// Prescribed mean of the total warp-factor update in the kernel case.
    pub mean_u: f64,
    /// Prescribed mean of the total conformal-factor update in the kernel case.
    pub mean_v: f64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            tol: SOLVER_TOL_DEFAULT,
            max_iter: MAX_ITER_DEFAULT,
            damping: 1.0,
            mean_u: 0.0,
            mean_v: 0.0,
        }
    }
}

impl SolveOptions {
    pub fn validate(&self) -> Result<()> {
        if !self.tol.is_finite() || self.tol <= 0.0 {
            return Err(Error::InvalidOptions(format!(
                "tol must be positive, got {}",
                self.tol
            )));
        }
        if self.max_iter < 1 {
            return Err(Error::InvalidOptions("max_iter must be at least 1".into()));
        }
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return Err(Error::InvalidOptions(format!(
                "damping must lie in (0, 1], got {}",
                self.damping
            )));
        }
        if !self.mean_u.is_finite() || !self.mean_v.is_finite() {
            return Err(Error::InvalidOptions(
                "kernel means must be finite".into(),
            ));
        }
        Ok(())
    }
}
