//! Generic linear solvers on grid fields and raw vectors.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::manifold::{field_from_raw, forward_spectrum, inverse_to_values, ScalarField};

/// Iteration count and final (preconditioned, for GMRES) residual of a
/// linear solve.
#[derive(Debug, Clone, Copy)]
pub struct IterStats {
    pub iterations: usize,
    pub residual: f64,
}

/// Direct spectral solve of `(reaction - diffusion * lap) x = rhs` with
/// constant coefficients, `diffusion >= 0` and `reaction > 0`. The operator
/// is diagonal in Fourier space with symbol `reaction + diffusion |k|^2`.
pub fn spectral_helmholtz_solve(diffusion: f64, reaction: f64, rhs: &ScalarField) -> ScalarField {
    assert!(
        diffusion >= 0.0 && reaction > 0.0,
        "helmholtz solve needs diffusion >= 0 and reaction > 0"
    );
    let grid = rhs.grid().clone();
    let symbol = grid.laplacian_symbol();
    let mut spec = forward_spectrum(rhs);
    for (slot, ksq) in spec.iter_mut().zip(&symbol) {
        *slot /= Complex64::new(reaction + diffusion * ksq, 0.0);
    }
    field_from_raw(&grid, inverse_to_values(spec, &grid))
}

/// Preconditioned conjugate gradients for a symmetric positive definite
/// operator on fields. Stops when the max-norm of the residual drops below
/// `tol_abs`. `precond` must apply an SPD approximate inverse.
pub fn conjugate_gradient(
    apply: impl Fn(&ScalarField) -> ScalarField,
    precond: impl Fn(&ScalarField) -> ScalarField,
    b: &ScalarField,
    tol_abs: f64,
    max_iter: usize,
) -> Result<(ScalarField, IterStats)> {
    let mut x = ScalarField::zeros(b.grid());
    let mut r = b.clone();
    if r.max_abs() <= tol_abs {
        return Ok((
            x,
            IterStats {
                iterations: 0,
                residual: r.max_abs(),
            },
        ));
    }
    let mut z = precond(&r);
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    for iteration in 1..=max_iter {
        let ap = apply(&p);
        let pap = dot(&p, &ap);
        if pap <= 0.0 || pap.is_nan() {
            return Err(Error::LinearSolve(format!(
                "conjugate gradient curvature p.Ap = {pap:.3e} is not positive; \
                 operator is not positive definite"
            )));
        }
        let step = rz / pap;
        x.add_scaled(step, &p);
        r.add_scaled(-step, &ap);
        let rnorm = r.max_abs();
        if rnorm <= tol_abs {
            return Ok((
                x,
                IterStats {
                    iterations: iteration,
                    residual: rnorm,
                },
            ));
        }
        z = precond(&r);
        let rz_next = dot(&r, &z);
        let ratio = rz_next / rz;
        rz = rz_next;
        let mut p_next = z.clone();
        p_next.add_scaled(ratio, &p);
        p = p_next;
    }
    Err(Error::LinearSolve(format!(
        "conjugate gradient stalled at residual {:.3e} after {max_iter} iterations",
        r.max_abs()
    )))
}

fn dot(a: &ScalarField, b: &ScalarField) -> f64 {
    a.values()
        .iter()
        .zip(b.values())
        .fold(0.0, |acc, (x, y)| acc + x * y)
}

fn vdot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |acc, (x, y)| acc + x * y)
}

fn vnorm(a: &[f64]) -> f64 {
    vdot(a, a).sqrt()
}

/// Restarted GMRES with left preconditioning for a general square operator
/// on raw vectors. Solves `M^-1 A x = M^-1 b`; convergence is measured in
/// the preconditioned 2-norm relative to `M^-1 b`.
pub fn gmres(
    apply: impl Fn(&[f64]) -> Vec<f64>,
    precond: impl Fn(&[f64]) -> Vec<f64>,
    b: &[f64],
    restart: usize,
    max_restarts: usize,
    tol_rel: f64,
) -> Result<(Vec<f64>, IterStats)> {
    let n = b.len();
    let mut x = vec![0.0; n];
    let pb = precond(b);
    let target = tol_rel * vnorm(&pb).max(f64::MIN_POSITIVE);
    let mut total_iterations = 0;

    for _ in 0..max_restarts {
        // r = M^-1 (b - A x)
        let ax = apply(&x);
        let raw: Vec<f64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
        let r = precond(&raw);
        let beta = vnorm(&r);
        if beta <= target {
            return Ok((
                x,
                IterStats {
                    iterations: total_iterations,
                    residual: beta,
                },
            ));
        }
        if !beta.is_finite() {
            return Err(Error::LinearSolve(
                "gmres residual became non-finite".into(),
            ));
        }

        let mut basis: Vec<Vec<f64>> = vec![r.iter().map(|v| v / beta).collect()];
        let mut h = vec![vec![0.0f64; restart]; restart + 1];
        let mut cs = vec![0.0f64; restart];
        let mut sn = vec![0.0f64; restart];
        let mut g = vec![0.0f64; restart + 1];
        g[0] = beta;
        let mut inner = 0;

        for j in 0..restart {
            inner = j + 1;
            total_iterations += 1;
            let mut w = precond(&apply(&basis[j]));
            // Modified Gram-Schmidt.
            for (i, q) in basis.iter().enumerate() {
                let hij = vdot(&w, q);
                h[i][j] = hij;
                for (wk, qk) in w.iter_mut().zip(q) {
                    *wk -= hij * qk;
                }
            }
            let hnext = vnorm(&w);
            h[j + 1][j] = hnext;
            // Apply accumulated Givens rotations to the new column.
            for i in 0..j {
                let t = cs[i] * h[i][j] + sn[i] * h[i + 1][j];
                h[i + 1][j] = -sn[i] * h[i][j] + cs[i] * h[i + 1][j];
                h[i][j] = t;
            }
            let denom = (h[j][j] * h[j][j] + hnext * hnext).sqrt();
            if denom == 0.0 {
                return Err(Error::LinearSolve("gmres breakdown: zero column".into()));
            }
            cs[j] = h[j][j] / denom;
            sn[j] = hnext / denom;
            h[j][j] = denom;
            h[j + 1][j] = 0.0;
            g[j + 1] = -sn[j] * g[j];
            g[j] *= cs[j];

            let converged = g[j + 1].abs() <= target;
            if !converged && hnext > 0.0 {
                basis.push(w.iter().map(|v| v / hnext).collect());
            }
            if converged || hnext == 0.0 {
                break;
            }
        }

        // Back-substitute the least-squares solution and update x.
        let mut y = vec![0.0f64; inner];
        for i in (0..inner).rev() {
            let mut sum = g[i];
            for (k, yk) in y.iter().enumerate().skip(i + 1) {
                sum -= h[i][k] * yk;
            }
            y[i] = sum / h[i][i];
        }
        for (i, yi) in y.iter().enumerate() {
            for (xk, qk) in x.iter_mut().zip(&basis[i]) {
                *xk += yi * qk;
            }
        }
        if g[inner].abs() <= target {
            return Ok((
                x,
                IterStats {
                    iterations: total_iterations,
                    residual: g[inner].abs(),
                },
            ));
        }
    }
    Err(Error::LinearSolve(format!(
        "gmres did not reach relative tolerance {tol_rel:.1e} within {max_restarts} restarts"
    )))
}
