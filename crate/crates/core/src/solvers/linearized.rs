//! Elimination solver for the system obtained by linearizing the coupled
//! equations around a reduced solution `(u, v) = (1, v_star)`.
//!
//! The two linearized equations share their `chi_1` part, so their
//! difference decouples: `4 v Δchi_2 + 8 grad v . grad chi_2 - 4 alpha v^2
//! chi_2 = psi_2 - psi_1`. Multiplying by `v` puts it in divergence form,
//! `4 div(v^2 grad chi_2) - 4 alpha v^3 chi_2 = v (psi_2 - psi_1)`, which is
//! symmetric negative definite; `chi_1` then solves `10 Δchi_1 + (h - 4
//! alpha v) chi_1 = psi_1 - (chi_2 terms)`, negative definite precisely
//! under the pointwise solvability condition `h - 4 alpha v < 0`.

use crate::error::{Error, Result};
use crate::manifold::{divergence_form, grad_inner, laplacian, ScalarField};
use crate::solvers::linear::{conjugate_gradient, spectral_helmholtz_solve};
use crate::tolerances::SOLVER_TOL_DEFAULT;

const CG_MAX_ITER: usize = 5000;

/// First linearized operator:
/// `10 Δchi_1 + 6 v Δchi_2 + (h - 4 alpha v) chi_1 + 12 grad v . grad chi_2
///  + 2 alpha v^2 chi_2`.
pub fn forward_p(
    v_star: &ScalarField,
    alpha: f64,
    h: &ScalarField,
    chi1: &ScalarField,
    chi2: &ScalarField,
) -> ScalarField {
    let coeff = coefficient(v_star, alpha, h);
    let mut out = laplacian(chi1) * 10.0;
    out.add_scaled(6.0, &(v_star * laplacian(chi2)));
    out += &(&coeff * chi1);
    out.add_scaled(12.0, &grad_inner(v_star, chi2));
    out.add_scaled(2.0 * alpha, &(v_star * v_star * chi2));
    out
}

/// Second linearized operator:
/// `10 Δchi_1 + 10 v Δchi_2 + (h - 4 alpha v) chi_1 + 20 grad v . grad chi_2
///  - 2 alpha v^2 chi_2`.
pub fn forward_q(
    v_star: &ScalarField,
    alpha: f64,
    h: &ScalarField,
    chi1: &ScalarField,
    chi2: &ScalarField,
) -> ScalarField {
    let coeff = coefficient(v_star, alpha, h);
    let mut out = laplacian(chi1) * 10.0;
    out.add_scaled(10.0, &(v_star * laplacian(chi2)));
    out += &(&coeff * chi1);
    out.add_scaled(20.0, &grad_inner(v_star, chi2));
    out.add_scaled(-2.0 * alpha, &(v_star * v_star * chi2));
    out
}

fn coefficient(v_star: &ScalarField, alpha: f64, h: &ScalarField) -> ScalarField {
    h.zip_map(v_star, |hv, vv| hv - 4.0 * alpha * vv)
}

/// Solves the linearized pair `P(chi_1, chi_2) = psi_1`,
/// `Q(chi_1, chi_2) = psi_2` by the decoupling elimination, with conjugate
/// gradients on the two symmetrized scalar operators.
pub fn linearized_solve(
    v_star: &ScalarField,
    alpha: f64,
    h: &ScalarField,
    psi1: &ScalarField,
    psi2: &ScalarField,
) -> Result<(ScalarField, ScalarField)> {
    let grid = v_star.grid().clone();
    for (name, f) in [("h", h), ("psi1", psi1), ("psi2", psi2)] {
        if f.grid() != &grid {
            return Err(Error::GridMismatch(format!(
                "{name} is on a different grid than v_star"
            )));
        }
    }
    if alpha <= 0.0 || alpha.is_nan() {
        return Err(Error::NotSolvable(format!(
            "elimination requires alpha > 0, got {alpha}"
        )));
    }
    if !v_star.is_strictly_positive() {
        return Err(Error::NotSolvable("v_star must be positive pointwise".into()));
    }
    let coeff = coefficient(v_star, alpha, h);
    let (node, worst) = coeff
        .values()
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, &x)| (i, x))
        .unwrap_or((0, f64::NAN));
    if worst >= 0.0 || worst.is_nan() {
        return Err(Error::NotSolvable(format!(
            "solvability condition h - 4 alpha v_star < 0 fails at node {node}: \
             value {worst:.6e}"
        )));
    }

    let tol = SOLVER_TOL_DEFAULT;
    let v_min = v_star.min_value();
    let v_bar = v_star.mean();

    // chi_2 from the symmetrized decoupled equation. Negating puts it in
    // SPD form: (-4 div(v^2 grad .) + 4 alpha v^3 .) chi_2 = -v (psi_2 - psi_1).
    let v_sq = v_star * v_star;
    let v_cubed_alpha = v_star.pow(3.0) * (4.0 * alpha);
    let apply2 = |x: &ScalarField| -(divergence_form(&v_sq, x) * 4.0) + &v_cubed_alpha * x;
    let precond2 =
        |r: &ScalarField| spectral_helmholtz_solve(4.0 * v_bar * v_bar, 4.0 * alpha * v_bar.powi(3), r);
    let rhs2 = -(v_star * &(psi2 - psi1));
    let inner_tol = 1e-3 * tol * v_min.min(1.0);
    let (chi2, _) = conjugate_gradient(apply2, precond2, &rhs2, inner_tol, CG_MAX_ITER)?;

    // chi_1 from the first equation with the chi_2 terms moved to the right.
    let mut rhs1 = psi1.clone();
    rhs1.add_scaled(-6.0, &(v_star * laplacian(&chi2)));
    rhs1.add_scaled(-12.0, &grad_inner(v_star, &chi2));
    rhs1.add_scaled(-2.0 * alpha, &(&v_sq * &chi2));
    // Negate 10 lap + coeff (coeff < 0) into SPD form.
    let neg_coeff = -&coeff;
    let apply1 = |x: &ScalarField| -(laplacian(x) * 10.0) + &neg_coeff * x;
    let shift = neg_coeff.mean();
    let precond1 = |r: &ScalarField| spectral_helmholtz_solve(10.0, shift, r);
    let (chi1, _) = conjugate_gradient(apply1, precond1, &(-&rhs1), 1e-3 * tol, CG_MAX_ITER)?;

    // Verify both original equations; the elimination and the CG tolerances
    // must reproduce the right-hand sides.
    let res_p = (forward_p(v_star, alpha, h, &chi1, &chi2) - psi1).max_abs();
    let res_q = (forward_q(v_star, alpha, h, &chi1, &chi2) - psi2).max_abs();
    if res_p > tol || res_q > tol {
        return Err(Error::LinearSolve(format!(
            "linearized solve verification failed: residuals ({res_p:.3e}, {res_q:.3e}) \
             exceed {tol:.1e}"
        )));
    }
    Ok((chi1, chi2))
}
