//! Damped Newton iteration on the coupled equations of motion.
//!
//! The Jacobian action is the exact term-by-term linearization of the
//! residual, so quadratic convergence is available whenever the iterate is
//! close enough. Small grids assemble the Jacobian densely and solve it
//! directly, which doubles as an oracle for the matrix-free path; larger
//! grids apply it matrix-free inside GMRES with a per-Fourier-mode 2x2
//! block preconditioner built from mean-frozen coefficients.
//!
//! At the balanced point the linearization annihilates constant shifts of
//! both fields (harmonic functions on the torus are constant, so the kernel
//! is the two-parameter constant family). This case is detected at the
//! initial iterate; the solve then runs on the mean-zero complement and the
//! means of the total update are pinned to the prescribed kernel
//! parameters.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::manifold::{field_from_raw, forward_spectrum, inverse_to_values, ScalarField};
use crate::model::{eom_linearization, eom_residual, Configuration, ModelData, ResidualPair};
use crate::solvers::linear::gmres;
use crate::solvers::SolveOptions;
use crate::tolerances::KERNEL_DETECTION_TOL;

/// Above this node count the Jacobian is applied matrix-free instead of
/// being assembled.
const DENSE_NODE_LIMIT: usize = 64;

/// Step halvings allowed to restore positivity. Generous: positivity along
/// the segment is monotone in the scale, so this only limits how degenerate
/// a direction may be.
const POSITIVITY_HALVINGS: usize = 60;

/// Step halvings allowed to restore residual decrease before giving up.
const DECREASE_HALVINGS: usize = 8;

/// Accepted relative defect of a dense Jacobian solve; anything worse means
/// the assembled matrix was effectively singular.
const DENSE_SOLVE_CHECK: f64 = 1e-6;

const GMRES_RESTART: usize = 50;
const GMRES_MAX_RESTARTS: usize = 40;
/// Forcing term of the inexact Newton step: the Krylov solve stops at this
/// relative reduction, which keeps the outer iteration superlinear.
const GMRES_TOL_REL: f64 = 1e-6;

/// Converged Newton output with diagnostics.
#[derive(Debug, Clone)]
pub struct NewtonOutcome {
    /// The solution.
    pub cfg: Configuration,
    /// Newton steps taken (0 when the initial iterate already met `tol`).
    pub iterations: usize,
    /// Final max-norm residual.
    pub residual_norm: f64,
    /// Max-norm residual before each step and at the end.
    pub history: Vec<f64>,
    /// Whether the constant-kernel pinning was active.
    pub pinned: bool,
}

/// Newton solve returning only the solution.
pub fn newton_solve(
    data: &ModelData,
    initial: &Configuration,
    opts: &SolveOptions,
) -> Result<Configuration> {
    newton_solve_detailed(data, initial, opts).map(|outcome| outcome.cfg)
}

/// Newton solve returning the solution plus iteration diagnostics.
pub fn newton_solve_detailed(
    data: &ModelData,
    initial: &Configuration,
    opts: &SolveOptions,
) -> Result<NewtonOutcome> {
    opts.validate()?;
    let grid = data.grid().clone();
    if initial.grid() != &grid {
        return Err(Error::GridMismatch(
            "initial configuration is on a different grid than the data".into(),
        ));
    }

    let pinned = constant_kernel_present(data, initial)?;
    let mut cfg = if pinned && (opts.mean_u != 0.0 || opts.mean_v != 0.0) {
        // The kernel parameters fix the means of the total update; realize
        // them as a constant shift up front, after which every Newton update
        // is mean-zero.
        let u = initial.u().map(|x| x + opts.mean_u);
        let v = initial.v().map(|x| x + opts.mean_v);
        Configuration::new(u, v).map_err(|_| {
            Error::PositivityLost(format!(
                "kernel mean shift ({}, {}) left the positive cone",
                opts.mean_u, opts.mean_v
            ))
        })?
    } else {
        initial.clone()
    };

    let mut history = Vec::new();
    for iteration in 0..=opts.max_iter {
        let residual = eom_residual(data, &cfg)?;
        let rnorm = residual.max_norm();
        history.push(rnorm);
        if rnorm <= opts.tol {
            return Ok(NewtonOutcome {
                cfg,
                iterations: iteration,
                residual_norm: rnorm,
                history,
                pinned,
            });
        }
        if iteration == opts.max_iter {
            break;
        }

        let (du, dv) = newton_direction(data, &cfg, &residual, pinned)?;

        // Halve the step until both fields stay strictly positive. Positivity
        // at scale s implies positivity at every smaller scale (convexity of
        // the segment), so later decrease halvings cannot lose it again.
        let mut scale = opts.damping;
        let mut positive = false;
        for _ in 0..=POSITIVITY_HALVINGS {
            let u_ok = cfg.u().zip_map(&du, |x, d| x + scale * d).is_strictly_positive();
            let v_ok = cfg.v().zip_map(&dv, |x, d| x + scale * d).is_strictly_positive();
            if u_ok && v_ok {
                positive = true;
                break;
            }
            scale *= 0.5;
        }
        if !positive {
            return Err(Error::PositivityLost(format!(
                "newton step at iteration {iteration} cannot be damped into the \
                 positive cone (residual {rnorm:.3e})"
            )));
        }

        // Require plain residual decrease, halving a few more times if the
        // full (or positivity-damped) step overshoots.
        let mut halvings = 0;
        loop {
            let u_new = cfg.u().zip_map(&du, |x, d| x + scale * d);
            let v_new = cfg.v().zip_map(&dv, |x, d| x + scale * d);
            let candidate = Configuration::new(u_new, v_new)?;
            let rtry = eom_residual(data, &candidate)?.max_norm();
            if rtry < rnorm || rtry <= opts.tol {
                cfg = candidate;
                break;
            }
            halvings += 1;
            if halvings > DECREASE_HALVINGS {
                history.push(rtry);
                return Err(Error::SolverStagnated {
                    residual: rnorm,
                    history,
                });
            }
            scale *= 0.5;
        }
    }
    Err(Error::SolverDiverged {
        iterations: opts.max_iter,
        history,
    })
}

/// True when the linearization at `cfg` annihilates both constant shift
/// directions, relative to the scale of its principal (Laplacian) part.
fn constant_kernel_present(data: &ModelData, cfg: &Configuration) -> Result<bool> {
    let grid = cfg.grid();
    let ones = ScalarField::constant(grid, 1.0);
    let zeros = ScalarField::zeros(grid);
    let on_u = eom_linearization(data, cfg, &ones, &zeros)?;
    let on_v = eom_linearization(data, cfg, &zeros, &ones)?;
    let (u, v) = (cfg.u(), cfg.v());
    let principal = 6.0 * (v * v).max_abs() + 20.0 * (u * v).max_abs() + 10.0 * (u * u).max_abs();
    let worst = on_u.max_norm().max(on_v.max_norm());
    Ok(worst <= KERNEL_DETECTION_TOL * principal.max(1.0))
}

/// Solves the Newton correction system `J (du, dv) = -residual`, on the
/// mean-zero complement when `pinned`.
fn newton_direction(
    data: &ModelData,
    cfg: &Configuration,
    residual: &ResidualPair,
    pinned: bool,
) -> Result<(ScalarField, ScalarField)> {
    let n = cfg.grid().node_count();
    let (mut du, mut dv) = if n <= DENSE_NODE_LIMIT {
        dense_direction(data, cfg, residual, pinned)?
    } else {
        krylov_direction(data, cfg, residual, pinned)?
    };
    if pinned {
        let (mu, mv) = (du.mean(), dv.mean());
        du = du.map(|x| x - mu);
        dv = dv.map(|x| x - mv);
    }
    Ok((du, dv))
}

/// Assembles the Jacobian densely and solves it directly. When pinned, the
/// system is bordered with the two constant columns and two mean-constraint
/// rows, the standard regularization of a saddle with known kernel.
fn dense_direction(
    data: &ModelData,
    cfg: &Configuration,
    residual: &ResidualPair,
    pinned: bool,
) -> Result<(ScalarField, ScalarField)> {
    let grid = cfg.grid().clone();
    let n = grid.node_count();
    let size = if pinned { 2 * n + 2 } else { 2 * n };
    let mut matrix = DMatrix::<f64>::zeros(size, size);

    for j in 0..2 * n {
        let mut du = vec![0.0; n];
        let mut dv = vec![0.0; n];
        if j < n {
            du[j] = 1.0;
        } else {
            dv[j - n] = 1.0;
        }
        let action = eom_linearization(
            data,
            cfg,
            &field_from_raw(&grid, du),
            &field_from_raw(&grid, dv),
        )?;
        for i in 0..n {
            matrix[(i, j)] = action.first.values()[i];
            matrix[(n + i, j)] = action.second.values()[i];
        }
    }
    if pinned {
        for i in 0..n {
            // Constant columns span the kernel; constraint rows pin the
            // update means to zero.
            matrix[(i, 2 * n)] = 1.0;
            matrix[(n + i, 2 * n + 1)] = 1.0;
            matrix[(2 * n, i)] = 1.0;
            matrix[(2 * n + 1, n + i)] = 1.0;
        }
    }

    let mut rhs = DVector::<f64>::zeros(size);
    for i in 0..n {
        rhs[i] = -residual.first.values()[i];
        rhs[n + i] = -residual.second.values()[i];
    }

    let solution = matrix
        .full_piv_lu()
        .solve(&rhs)
        .ok_or_else(|| Error::LinearSolve("singular Jacobian".into()))?;
    let du = field_from_raw(&grid, solution.as_slice()[..n].to_vec());
    let dv = field_from_raw(&grid, solution.as_slice()[n..2 * n].to_vec());

    // A rank-deficient matrix can slip past LU with a roundoff-size pivot
    // and return a garbage direction; verify the solve against the exact
    // Jacobian action. In the pinned case the bordered multipliers absorb a
    // constant, so compare mean-zero parts.
    let action = eom_linearization(data, cfg, &du, &dv)?;
    let defect_u = &action.first + &residual.first;
    let defect_v = &action.second + &residual.second;
    let defect = if pinned {
        let (mu, mv) = (defect_u.mean(), defect_v.mean());
        defect_u
            .map(|x| x - mu)
            .max_abs()
            .max(defect_v.map(|x| x - mv).max_abs())
    } else {
        defect_u.max_abs().max(defect_v.max_abs())
    };
    if defect > DENSE_SOLVE_CHECK * residual.max_norm() {
        return Err(Error::LinearSolve(format!(
            "singular Jacobian: direct solve defect {defect:.3e} against \
             residual {:.3e}",
            residual.max_norm()
        )));
    }
    Ok((du, dv))
}

/// Matrix-free GMRES on the stacked (du, dv) vector with a per-mode 2x2
/// block preconditioner.
fn krylov_direction(
    data: &ModelData,
    cfg: &Configuration,
    residual: &ResidualPair,
    pinned: bool,
) -> Result<(ScalarField, ScalarField)> {
    let grid = cfg.grid().clone();
    let n = grid.node_count();
    let precond = ModePreconditioner::new(data, cfg)?;

    let project = move |x: &mut [f64]| {
        let mean_u: f64 = x[..n].iter().sum::<f64>() / n as f64;
        let mean_v: f64 = x[n..].iter().sum::<f64>() / n as f64;
        for value in &mut x[..n] {
            *value -= mean_u;
        }
        for value in &mut x[n..] {
            *value -= mean_v;
        }
    };

    let apply_grid = grid.clone();
    let apply = |x: &[f64]| -> Vec<f64> {
        let mut x = x.to_vec();
        if pinned {
            project(&mut x);
        }
        let du = field_from_raw(&apply_grid, x[..n].to_vec());
        let dv = field_from_raw(&apply_grid, x[n..].to_vec());
        // The iterate and direction fields are finite and the grid matches
        // by construction, so the linearization cannot fail here.
        let action = eom_linearization(data, cfg, &du, &dv).expect("jacobian action");
        let mut out = Vec::with_capacity(2 * n);
        out.extend_from_slice(action.first.values());
        out.extend_from_slice(action.second.values());
        if pinned {
            project(&mut out);
        }
        out
    };
    let apply_precond = |x: &[f64]| -> Vec<f64> {
        let mut out = precond.apply(x);
        if pinned {
            project(&mut out);
        }
        out
    };

    let mut rhs = Vec::with_capacity(2 * n);
    rhs.extend(residual.first.values().iter().map(|x| -x));
    rhs.extend(residual.second.values().iter().map(|x| -x));
    if pinned {
        project(&mut rhs);
    }

    let (solution, _) = gmres(
        apply,
        apply_precond,
        &rhs,
        GMRES_RESTART,
        GMRES_MAX_RESTARTS,
        GMRES_TOL_REL,
    )?;
    let du = field_from_raw(&grid, solution[..n].to_vec());
    let dv = field_from_raw(&grid, solution[n..].to_vec());
    Ok((du, dv))
}

/// Fourier-diagonal approximate inverse of the Jacobian: for each mode the
/// exact 2x2 block of the constant-coefficient problem obtained by freezing
/// all data fields and the configuration at their means.
struct ModePreconditioner {
    grid: crate::manifold::Grid,
    laplacian_symbol: Vec<f64>,
    diffusion: [f64; 4],
    zero_order: [f64; 4],
}

impl ModePreconditioner {
    fn new(data: &ModelData, cfg: &Configuration) -> Result<Self> {
        let grid = cfg.grid().clone();
        let (ubar, vbar) = (cfg.u().mean(), cfg.v().mean());
        let frozen = data.mean_frozen();
        let mean_cfg = Configuration::constant(&grid, ubar, vbar)?;
        let ones = ScalarField::constant(&grid, 1.0);
        let zeros = ScalarField::zeros(&grid);
        // At constant data and a constant configuration the linearization of
        // a constant direction is a constant field: its value is the
        // zero-order coefficient of the frozen problem.
        let on_u = eom_linearization(&frozen, &mean_cfg, &ones, &zeros)?;
        let on_v = eom_linearization(&frozen, &mean_cfg, &zeros, &ones)?;
        Ok(ModePreconditioner {
            laplacian_symbol: grid.laplacian_symbol(),
            grid,
            diffusion: [
                6.0 * vbar * vbar,
                10.0 * ubar * vbar,
                10.0 * ubar * vbar,
                10.0 * ubar * ubar,
            ],
            zero_order: [
                on_u.first.values()[0],
                on_v.first.values()[0],
                on_u.second.values()[0],
                on_v.second.values()[0],
            ],
        })
    }

    fn apply(&self, x: &[f64]) -> Vec<f64> {
        let n = self.grid.node_count();
        let r1 = field_from_raw(&self.grid, x[..n].to_vec());
        let r2 = field_from_raw(&self.grid, x[n..].to_vec());
        let mut s1 = forward_spectrum(&r1);
        let mut s2 = forward_spectrum(&r2);
        for (slot, &ksq) in self.laplacian_symbol.iter().enumerate() {
            let a = -self.diffusion[0] * ksq + self.zero_order[0];
            let b = -self.diffusion[1] * ksq + self.zero_order[1];
            let c = -self.diffusion[2] * ksq + self.zero_order[2];
            let d = -self.diffusion[3] * ksq + self.zero_order[3];
            let det = a * d - b * c;
            let scale = (a.abs() + b.abs()).max(c.abs() + d.abs());
            if det.abs() <= 1e-14 * scale * scale.max(1.0) {
                // Near-singular block (the constant mode of a balanced
                // problem): leave the component untouched.
                continue;
            }
            let (y1, y2) = (s1[slot], s2[slot]);
            s1[slot] = (y1 * d - y2 * b) / det;
            s2[slot] = (y2 * a - y1 * c) / det;
        }
        let mut out = inverse_to_values(s1, &self.grid);
        out.extend(inverse_to_values(s2, &self.grid));
        out
    }
}
