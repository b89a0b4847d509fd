//! Linear homotopy in the model data with Newton re-solves at each step.
//!
//! The homotopy `data(lambda) = (1 - lambda) data0 + lambda data1` is linear
//! in every constant and field. Each step restarts Newton from the previous
//! solution, so a branch traces how far a known solution deforms before the
//! solver loses it; the failure parameter is an empirical radius for
//! "sufficiently close" hypotheses. No fold-tracing: a failed step ends the
//! branch and is reported, not circumvented.

use crate::error::{Error, Result};
use crate::model::{eom_residual, mass_squared, Configuration, ModelData};
use crate::solvers::newton::newton_solve_detailed;
use crate::solvers::SolveOptions;

/// One converged point on a continuation branch.
#[derive(Debug, Clone)]
pub struct BranchPoint {
    /// Homotopy parameter in [0, 1].
    pub lambda: f64,
    /// Converged configuration at this parameter.
    pub cfg: Configuration,
    /// Volume-mode mass at this point.
    pub mass: f64,
    /// Final Newton residual.
    pub residual_norm: f64,
    /// Newton steps this point took.
    pub iterations: usize,
}

/// A branch, possibly cut short by a solver failure.
#[derive(Debug, Clone)]
pub struct ContinuationResult {
    /// Converged points in increasing lambda order, starting at 0.
    pub points: Vec<BranchPoint>,
    /// Lambda of the first failed step, if any.
    pub failed_at: Option<f64>,
    /// Failure description from the solver, if any.
    pub failure: Option<String>,
}

impl ContinuationResult {
    /// True when the branch reached lambda = 1.
    pub fn complete(&self) -> bool {
        self.failed_at.is_none()
    }
}

/// Traces the homotopy from `data0` to `data1` in `steps` equal increments.
///
/// `initial` must already solve `data0` to `opts.tol`; it is recorded as the
/// lambda = 0 point. Kernel mean parameters apply to how `initial` was
/// produced, not to the steps, so the per-step solves run with zero means:
/// each update is anchored to the previous point.
pub fn continuation(
    data0: &ModelData,
    data1: &ModelData,
    steps: usize,
    opts: &SolveOptions,
    initial: &Configuration,
) -> Result<ContinuationResult> {
    opts.validate()?;
    if steps < 1 {
        return Err(Error::InvalidOptions(
            "continuation needs at least one step".into(),
        ));
    }
    let start_residual = eom_residual(data0, initial)?.max_norm();
    if start_residual > opts.tol {
        return Err(Error::InvalidConfiguration(format!(
            "initial configuration does not solve the starting data: residual \
             {start_residual:.3e} exceeds tol {:.1e}",
            opts.tol
        )));
    }

    let step_opts = SolveOptions {
        mean_u: 0.0,
        mean_v: 0.0,
        ..*opts
    };
    let mut points = vec![BranchPoint {
        lambda: 0.0,
        cfg: initial.clone(),
        mass: mass_squared(data0, initial)?,
        residual_norm: start_residual,
        iterations: 0,
    }];

    for step in 1..=steps {
        let lambda = step as f64 / steps as f64;
        let data = data0.interpolate(data1, lambda)?;
        let previous = &points.last().expect("branch is never empty").cfg;
        match newton_solve_detailed(&data, previous, &step_opts) {
            Ok(outcome) => points.push(BranchPoint {
                lambda,
                mass: mass_squared(&data, &outcome.cfg)?,
                cfg: outcome.cfg,
                residual_norm: outcome.residual_norm,
                iterations: outcome.iterations,
            }),
            Err(err) => {
                return Ok(ContinuationResult {
                    points,
                    failed_at: Some(lambda),
                    failure: Some(err.to_string()),
                })
            }
        }
    }
    Ok(ContinuationResult {
        points,
        failed_at: None,
        failure: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manifold::{mode_field, Grid, ScalarField};
    use crate::model::NonPerturbative;
    use std::collections::BTreeMap;

    fn grid() -> Grid {
        Grid::new(1, vec![64], vec![2.0 * std::f64::consts::PI], 1.0).unwrap()
    }

    fn q7_data(grid: &Grid, bump: f64) -> ModelData {
        let mut flux = BTreeMap::from([(1, ScalarField::constant(grid, 4.0))]);
        if bump != 0.0 {
            flux.insert(
                3,
                ScalarField::constant(grid, bump)
                    + mode_field(grid, &[1], bump, -std::f64::consts::FRAC_PI_2).unwrap(),
            );
        }
        ModelData::new(
            7,
            1.0,
            -2.0 / 3.0,
            flux,
            ScalarField::constant(grid, 0.5),
            ScalarField::constant(grid, 0.5),
            NonPerturbative::default(),
        )
        .unwrap()
    }

    #[test]
    fn identical_endpoints_give_identical_points() {
        let g = grid();
        let data = q7_data(&g, 0.0);
        let initial = Configuration::constant(&g, 1.0, 1.0).unwrap();
        let result =
            continuation(&data, &data, 4, &SolveOptions::default(), &initial).unwrap();
        assert!(result.complete());
        assert_eq!(result.points.len(), 5);
        for point in &result.points {
            assert_eq!(point.cfg.u().values(), initial.u().values());
            assert_eq!(point.cfg.v().values(), initial.v().values());
            assert_eq!(point.iterations, 0);
        }
    }

    #[test]
    fn branch_tracks_growing_perturbation() {
        let g = grid();
        let data0 = q7_data(&g, 0.0);
        let data1 = q7_data(&g, 0.05);
        let initial = Configuration::constant(&g, 1.0, 1.0).unwrap();
        let result =
            continuation(&data0, &data1, 5, &SolveOptions::default(), &initial).unwrap();
        assert!(result.complete(), "failure: {:?}", result.failure);
        assert_eq!(result.points.len(), 6);
        for window in result.points.windows(2) {
            assert!(window[1].lambda > window[0].lambda);
            assert!(window[1].residual_norm < 1e-10);
        }
    }

    #[test]
    fn non_solution_initial_is_rejected() {
        let g = grid();
        let data = q7_data(&g, 0.0);
        let off = Configuration::constant(&g, 1.0, 1.3).unwrap();
        let err =
            continuation(&data, &data, 2, &SolveOptions::default(), &off).unwrap_err();
        assert!(matches!(err, Error::InvalidConfiguration(_)));
    }

    #[test]
    fn failed_step_returns_partial_branch() {
        let g = grid();
        let data0 = q7_data(&g, 0.0);
        let data1 = q7_data(&g, 0.05);
        let initial = Configuration::constant(&g, 1.0, 1.0).unwrap();
        // A one-iteration budget cannot absorb the data jump mid-branch.
        let opts = SolveOptions {
            max_iter: 1,
            tol: 1e-14,
            ..SolveOptions::default()
        };
        let result = continuation(&data0, &data1, 3, &opts, &initial).unwrap();
        assert!(!result.complete());
        let failed_at = result.failed_at.unwrap();
        assert!(failed_at > 0.0 && failed_at <= 1.0);
        assert!(result.failure.is_some());
        assert!(result.points.len() < 4);
    }
}
