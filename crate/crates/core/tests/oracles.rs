//! Independent numerical oracles for the spectral calculus, the potential,
//! the equations of motion, and the linear solvers.
//!
//! Every oracle here recomputes its target along a different route than the
//! implementation: finite differences on grid samples, compensated refined
//! rectangle sums of closed-form integrands, per-node symbolic expansion of
//! trigonometric data, dense LU factorization, and power iteration. Expected
//! values frozen as literals pin the numbers against silent regressions.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use wcstab_core::manifold::{derivative, integrate, laplacian, mode_field, Grid, ScalarField};
use wcstab_core::model::{
    effective_potential, eom_linearization, eom_residual, mass_squared, Configuration, ModelData,
    NonPerturbative,
};
use wcstab_core::solvers::{
    forward_p, forward_q, inverse_data_solve, linearized_solve, source_map_residuals,
    spectral_helmholtz_solve,
};

const TAU: f64 = 2.0 * std::f64::consts::PI;

fn grid_1d(n: usize) -> Grid {
    Grid::new(1, vec![n], vec![TAU], 1.0).unwrap()
}

/// Compensated (Kahan) sum; the refined oracles add 2^14 terms and plain
/// accumulation would cost three digits.
fn kahan_sum(terms: impl Iterator<Item = f64>) -> f64 {
    let mut sum = 0.0;
    let mut carry = 0.0;
    for term in terms {
        let y = term - carry;
        let t = sum + y;
        carry = (t - sum) - y;
        sum = t;
    }
    sum
}

#[test]
fn spectral_calculus_matches_difference_quotients_at_second_order() {
    // exp(sin x) is analytic, so the spectral derivatives are exact to
    // rounding at these sizes; the difference against second-order finite
    // differences must therefore shrink like h^2.
    let errors: Vec<(f64, f64)> = [32usize, 64]
        .iter()
        .map(|&n| {
            let grid = grid_1d(n);
            let f = ScalarField::from_fn(&grid, |x| x[0].sin().exp());
            let lap = laplacian(&f);
            let der = derivative(&f, 0);
            let h = TAU / n as f64;
            let vals = f.values();
            let mut e_lap = 0.0f64;
            let mut e_der = 0.0f64;
            for i in 0..n {
                let (prev, next) = (vals[(i + n - 1) % n], vals[(i + 1) % n]);
                let fd_lap = (next - 2.0 * vals[i] + prev) / (h * h);
                let fd_der = (next - prev) / (2.0 * h);
                e_lap = e_lap.max((fd_lap - lap.values()[i]).abs());
                e_der = e_der.max((fd_der - der.values()[i]).abs());
            }
            (e_lap, e_der)
        })
        .collect();
    let rate_lap = (errors[0].0 / errors[1].0).log2();
    let rate_der = (errors[0].1 / errors[1].1).log2();
    assert!(
        (1.8..2.2).contains(&rate_lap),
        "laplacian rate {rate_lap}, errors {errors:?}"
    );
    assert!(
        (1.8..2.2).contains(&rate_der),
        "derivative rate {rate_der}, errors {errors:?}"
    );
}

#[test]
fn quadrature_matches_refined_rectangle_sums() {
    let grid = grid_1d(64);
    let f = ScalarField::from_fn(&grid, |x| x[0].sin().exp());
    let coarse = integrate(&f);

    let refined = 1 << 14;
    let h = TAU / refined as f64;
    let fine = h * kahan_sum((0..refined).map(|i| (i as f64 * h).sin().exp()));

    assert!(
        (coarse - fine).abs() < 2e-13,
        "coarse {coarse:.17e} vs refined {fine:.17e}"
    );
    // The integral is 2 pi I_0(1) in terms of the modified Bessel function.
    assert!((coarse - 7.954926521012846).abs() < 1e-12);
}

// Concrete smooth q = 3 data used by the potential, residual, and mass
// oracles below. Every field is a low-degree trigonometric polynomial, so
// closed-form derivatives are available and the products stay far below the
// Nyquist mode of the 64-point grid.
fn u_fn(x: f64) -> f64 {
    1.0 + 0.1 * (x + 0.2).cos()
}
fn v_fn(x: f64) -> f64 {
    1.2 + 0.15 * (2.0 * x + 0.8).cos()
}
fn r_fn(x: f64) -> f64 {
    0.3 + 0.05 * x.cos()
}
fn f1_fn(x: f64) -> f64 {
    0.2 + 0.1 * (x + 1.0).cos()
}
fn f3_fn(x: f64) -> f64 {
    1.0 + 0.3 * (2.0 * x).cos()
}
fn t_fn(x: f64) -> f64 {
    0.4 + 0.1 * (x + 0.5).cos()
}
const F5: f64 = 0.05;
const ALPHA: f64 = 0.7;
const BETA: f64 = -0.3;

fn oracle_data(grid: &Grid) -> ModelData {
    ModelData::new(
        3,
        ALPHA,
        BETA,
        BTreeMap::from([
            (1, ScalarField::from_fn(grid, |x| f1_fn(x[0]))),
            (3, ScalarField::from_fn(grid, |x| f3_fn(x[0]))),
            (5, ScalarField::constant(grid, F5)),
        ]),
        ScalarField::from_fn(grid, |x| r_fn(x[0])),
        ScalarField::from_fn(grid, |x| t_fn(x[0])),
        NonPerturbative::default(),
    )
    .unwrap()
}

fn oracle_cfg(grid: &Grid) -> Configuration {
    Configuration::new(
        ScalarField::from_fn(grid, |x| u_fn(x[0])),
        ScalarField::from_fn(grid, |x| v_fn(x[0])),
    )
    .unwrap()
}

#[test]
fn potential_matches_refined_closed_form_quadrature() {
    let grid = grid_1d(64);
    let data = oracle_data(&grid);
    let cfg = oracle_cfg(&grid);

    let refined = 1 << 14;
    let h = TAU / refined as f64;
    let density = |x: f64| {
        let (u, v) = (u_fn(x), v_fn(x));
        let up = -0.1 * (x + 0.2).sin();
        let vp = -0.3 * (2.0 * x + 0.8).sin();
        -u * u * v * v * r_fn(x)
            - 5.0 * vp * (2.0 * u * up * v + u * u * vp)
            - 3.0 * v * v * up * up
            + 0.5 * u * u * (f1_fn(x) * v * v + f3_fn(x) + F5 / (v * v))
            - u * u * t_fn(x)
    };
    let pot = h * kahan_sum((0..refined).map(|i| density(i as f64 * h)));
    let uv3 = h * kahan_sum((0..refined).map(|i| {
        let x = i as f64 * h;
        u_fn(x) * v_fn(x).powi(3)
    }));
    let v3 = h * kahan_sum((0..refined).map(|i| v_fn(i as f64 * h).powi(3)));
    let oracle = 0.5 * pot + ALPHA * (1.0 - uv3) + BETA * (1.0 - v3);

    let value = effective_potential(&data, &cfg, 1.0, 1.0).unwrap();
    assert!(
        (value - oracle).abs() < 1e-11,
        "potential {value:.17e} vs oracle {oracle:.17e}"
    );
    assert!((value - -5.421957612735324).abs() < 1e-12);
}

#[test]
fn residuals_match_symbolic_expansion_per_node() {
    let grid = grid_1d(64);
    let data = oracle_data(&grid);
    let cfg = oracle_cfg(&grid);
    let res = eom_residual(&data, &cfg).unwrap();

    let h = TAU / 64.0;
    let mut worst_first = 0.0f64;
    let mut worst_second = 0.0f64;
    for i in 0..64 {
        let x = i as f64 * h;
        let (u, v) = (u_fn(x), v_fn(x));
        let up = -0.1 * (x + 0.2).sin();
        let upp = -0.1 * (x + 0.2).cos();
        let vp = -0.3 * (2.0 * x + 0.8).sin();
        let vpp = -0.6 * (2.0 * x + 0.8).cos();
        let (r, f1, f3, t) = (r_fn(x), f1_fn(x), f3_fn(x), t_fn(x));

        let first = 10.0 * u * v * vpp
            + 6.0 * v * v * upp
            + 12.0 * v * vp * up
            - 2.0 * u * v * v * r
            + u * (f1 * v * v + f3 + F5 / (v * v))
            - 2.0 * u * t
            - 2.0 * ALPHA * v.powi(3);
        // (u^2 v)'' expanded by the product rule.
        let u2v_pp = 2.0 * up * up * v + 2.0 * u * upp * v + 4.0 * u * up * vp + u * u * vpp;
        let second = 5.0 * u2v_pp + 5.0 * u * u * vpp
            - 2.0 * u * u * v * r
            - 6.0 * v * up * up
            + 0.5 * u * u * (2.0 * f1 * v - 2.0 * F5 / v.powi(3))
            - 6.0 * (ALPHA * u * v * v + BETA * v * v);

        worst_first = worst_first.max((res.first.values()[i] - first).abs());
        worst_second = worst_second.max((res.second.values()[i] - second).abs());
    }
    assert!(worst_first < 1e-11, "first equation deviates by {worst_first:.3e}");
    assert!(worst_second < 1e-11, "second equation deviates by {worst_second:.3e}");
    assert!((res.first.values()[5] - -1.4122057979352494).abs() < 1e-12);
    assert!((res.second.values()[5] - -3.4977656849981886).abs() < 1e-12);
}

#[test]
fn mass_matches_second_difference_quotient_of_the_potential() {
    let grid = grid_1d(64);
    let data = oracle_data(&grid);
    let cfg = oracle_cfg(&grid);
    let mass = mass_squared(&data, &cfg).unwrap();

    let eps = 1e-4;
    let shifted = |s: f64| {
        let v = cfg.v().map(|val| val + s);
        let shifted_cfg = Configuration::new(cfg.u().clone(), v).unwrap();
        effective_potential(&data, &shifted_cfg, 1.0, 1.0).unwrap()
    };
    let fd = (shifted(eps) - 2.0 * shifted(0.0) + shifted(-eps)) / (eps * eps);

    assert!(
        ((mass - fd) / mass).abs() < 1e-6,
        "mass {mass:.12e} vs quotient {fd:.12e}"
    );
    assert!((mass - -19.214930053354717).abs() < 1e-10);
}

#[test]
fn jacobian_action_matches_difference_quotients() {
    let grid = grid_1d(64);
    let data = oracle_data(&grid);
    let cfg = oracle_cfg(&grid);
    let du = mode_field(&grid, &[1], 0.02, 0.4).unwrap();
    let dv = mode_field(&grid, &[2], 0.03, 1.3).unwrap();

    let action = eom_linearization(&data, &cfg, &du, &dv).unwrap();

    let eps = 1e-5;
    let shifted = |sign: f64| {
        let mut u = cfg.u().clone();
        let mut v = cfg.v().clone();
        u.add_scaled(sign * eps, &du);
        v.add_scaled(sign * eps, &dv);
        eom_residual(&data, &Configuration::new(u, v).unwrap()).unwrap()
    };
    let (plus, minus) = (shifted(1.0), shifted(-1.0));
    let fd_first = (&plus.first - &minus.first).scaled(0.5 / eps);
    let fd_second = (&plus.second - &minus.second).scaled(0.5 / eps);

    let scale_first = action.first.max_abs().max(1.0);
    let scale_second = action.second.max_abs().max(1.0);
    assert!((&fd_first - &action.first).max_abs() / scale_first < 1e-6);
    assert!((&fd_second - &action.second).max_abs() / scale_second < 1e-6);
}

#[test]
fn nonperturbative_curvature_matches_difference_quotients() {
    let np = NonPerturbative::new(0.3, 1.2, 2.0).unwrap();
    for v0 in [0.8, 1.0, 1.3] {
        let (value, second) = np.value_and_second_derivative(v0);
        let eps = 1e-4;
        let at = |v: f64| np.value_and_second_derivative(v).0;
        let fd = (at(v0 + eps) - 2.0 * at(v0) + at(v0 - eps)) / (eps * eps);
        assert!(
            ((second - fd) / second).abs() < 1e-6,
            "v0 {v0}: curvature {second:.12e} vs quotient {fd:.12e}"
        );
        assert!(value > 0.0);
    }
    // B exp(-2 a) at v0 = 1 with B = 0.3, a = 1.2.
    let (value, _) = np.value_and_second_derivative(1.0);
    assert!((value - 0.3 * (-2.4f64).exp()).abs() < 1e-16);
}

#[test]
fn linearized_solve_matches_dense_direct_solve() {
    let n = 16;
    let grid = grid_1d(n);
    let v_star = ScalarField::from_fn(&grid, |x| 1.0 + 0.05 * (x[0] + 0.3).cos());
    let h = ScalarField::from_fn(&grid, |x| 2.0 + 0.2 * x[0].sin());
    let alpha = 1.0;
    let psi1 = mode_field(&grid, &[1], 0.7, 0.4).unwrap();
    let psi2 = mode_field(&grid, &[2], 0.4, 1.2).unwrap() + ScalarField::constant(&grid, 0.5);

    // Dense assembly of the coupled operator from unit-vector probes.
    let mut matrix = DMatrix::<f64>::zeros(2 * n, 2 * n);
    for j in 0..2 * n {
        let mut e = vec![0.0; n];
        if j < n {
            e[j] = 1.0;
        }
        let chi1 = ScalarField::from_values(&grid, e.clone()).unwrap();
        let mut e = vec![0.0; n];
        if j >= n {
            e[j - n] = 1.0;
        }
        let chi2 = ScalarField::from_values(&grid, e).unwrap();
        let p = forward_p(&v_star, alpha, &h, &chi1, &chi2);
        let q = forward_q(&v_star, alpha, &h, &chi1, &chi2);
        for i in 0..n {
            matrix[(i, j)] = p.values()[i];
            matrix[(i + n, j)] = q.values()[i];
        }
    }
    let mut rhs = DVector::<f64>::zeros(2 * n);
    for i in 0..n {
        rhs[i] = psi1.values()[i];
        rhs[i + n] = psi2.values()[i];
    }
    let dense = matrix.lu().solve(&rhs).expect("dense system is regular");

    let (chi1, chi2) = linearized_solve(&v_star, alpha, &h, &psi1, &psi2).unwrap();
    let mut worst = 0.0f64;
    for i in 0..n {
        worst = worst.max((chi1.values()[i] - dense[i]).abs());
        worst = worst.max((chi2.values()[i] - dense[i + n]).abs());
    }
    assert!(worst < 1e-10, "elimination deviates from LU by {worst:.3e}");
}

#[test]
fn constant_coefficient_linearized_solve_returns_minus_ones() {
    let grid = grid_1d(16);
    let v_star = ScalarField::constant(&grid, 1.0);
    let h = ScalarField::constant(&grid, 2.0);
    let psi1 = ScalarField::zeros(&grid);
    let psi2 = ScalarField::constant(&grid, 4.0);
    let (chi1, chi2) = linearized_solve(&v_star, 1.0, &h, &psi1, &psi2).unwrap();
    assert!((chi1.mean() + 1.0).abs() < 1e-10);
    assert!((chi2.mean() + 1.0).abs() < 1e-10);
    assert!((&chi1 - &chi2).max_abs() < 1e-10);
}

#[test]
fn mode_maximization_diagnostics_match_power_iteration() {
    use wcstab_core::analysis::operator_norm_diagnostics;

    // Power-iterate A = (1 - lap)^{-1} (-lap) on mean-zero fields; its
    // largest eigenvalue is the k1 proxy. The start mixes every mode family
    // including the Nyquist one so no eigenspace is missed.
    let power_iterate = |start: ScalarField, sweeps: usize| -> f64 {
        let mut f = start;
        for _ in 0..sweeps {
            let af = spectral_helmholtz_solve(1.0, 1.0, &-laplacian(&f));
            f = af.scaled(1.0 / af.max_abs());
        }
        let af = spectral_helmholtz_solve(1.0, 1.0, &-laplacian(&f));
        integrate(&(&f * &af)) / integrate(&(&f * &f))
    };

    let g1 = grid_1d(8);
    let start1 = ScalarField::from_fn(&g1, |x| {
        (1..=4).map(|k| (k as f64 * x[0] + 0.1 * k as f64).cos()).sum()
    });
    let rayleigh1 = power_iterate(start1, 600);
    let diag1 = operator_norm_diagnostics(&g1, 3).unwrap();
    assert!((rayleigh1 - diag1.k1_proxy).abs() < 1e-12);
    // Nyquist mode k = 4: quotient 16/17 exactly.
    assert_eq!(diag1.k1_proxy, 16.0 / 17.0);

    let g2 = Grid::new(2, vec![4, 4], vec![TAU, TAU], 1.0).unwrap();
    let start2 = ScalarField::from_fn(&g2, |x| {
        (2.0 * x[0]).cos() * (2.0 * x[1]).cos()
            + x[0].cos()
            + x[1].cos()
            + (x[0] + x[1]).cos()
            + (2.0 * x[0]).cos()
    });
    let rayleigh2 = power_iterate(start2, 800);
    let diag2 = operator_norm_diagnostics(&g2, 3).unwrap();
    assert!((rayleigh2 - diag2.k1_proxy).abs() < 1e-12);
    // Corner mode k = (2, 2): quotient 8/9 exactly.
    assert_eq!(diag2.k1_proxy, 8.0 / 9.0);

    // The embedding proxy from an independent mode scan: axis frequencies
    // run through -n/2+1 ..= n/2 per axis.
    let scan_k2 = |points: &[usize], lengths: &[f64], s: f64| -> f64 {
        let mut best = 1.0f64; // constant probe
        let mut stack = vec![(0usize, 0.0f64)];
        while let Some((axis, ksq)) = stack.pop() {
            if axis == points.len() {
                if ksq > 0.0 {
                    let ratio =
                        (1.0 + ksq.sqrt()) * 2.0f64.sqrt() / (1.0 + ksq).powf(s / 2.0);
                    best = best.max(ratio);
                }
                continue;
            }
            let n = points[axis] as i64;
            for m in (-n / 2 + 1)..=(n / 2) {
                let k = TAU * m as f64 / lengths[axis];
                stack.push((axis + 1, ksq + k * k));
            }
        }
        best
    };
    assert_eq!(diag1.k2_proxy, scan_k2(&[8], &[TAU], 3.0));
    assert_eq!(diag2.k2_proxy, scan_k2(&[4, 4], &[TAU, TAU], 3.0));
}

#[test]
fn inverse_sources_match_per_node_affine_algebra() {
    let grid = grid_1d(64);
    let cfg = Configuration::new(
        ScalarField::from_fn(&grid, |x| 1.0 + 0.01 * x[0].sin()),
        ScalarField::from_fn(&grid, |x| 1.0 + 0.02 * x[0].cos()),
    )
    .unwrap();
    let alpha = 0.3;
    let beta = -0.8;
    let flux5 = ScalarField::from_fn(&grid, |x| 0.1 + 0.05 * (x[0] + 0.1).cos());

    // The source-map residuals are affine in (a, b) node by node; probing
    // with (0,0), (1,0), (0,1) recovers the per-node 2x2 system, which a
    // direct solve inverts independently of the implementation.
    let zero = ScalarField::zeros(&grid);
    let one = ScalarField::constant(&grid, 1.0);
    let probe = |a: &ScalarField, b: &ScalarField| {
        source_map_residuals(alpha, beta, &flux5, &cfg, a, b).unwrap()
    };
    let base = probe(&zero, &zero);
    let col_a = probe(&one, &zero);
    let col_b = probe(&zero, &one);

    let inv = inverse_data_solve(alpha, beta, &flux5, &cfg).unwrap();
    let n = grid.node_count();
    let mut worst = 0.0f64;
    for i in 0..n {
        let (x0, y0) = (base.first.values()[i], base.second.values()[i]);
        let xa = col_a.first.values()[i] - x0;
        let xb = col_b.first.values()[i] - x0;
        let ya = col_a.second.values()[i] - y0;
        let yb = col_b.second.values()[i] - y0;
        let det = xa * yb - xb * ya;
        assert!(det.abs() > 1e-8, "degenerate node {i}");
        let a = (-x0 * yb + xb * y0) / det;
        let b = (-xa * y0 + x0 * ya) / det;
        worst = worst.max((inv.a.values()[i] - a).abs());
        worst = worst.max((inv.b.values()[i] - b).abs());
    }
    assert!(worst < 1e-10, "per-node algebra deviates by {worst:.3e}");

    let res = probe(&inv.a, &inv.b);
    assert!(res.first.max_abs() < 1e-10);
    assert!(res.second.max_abs() < 1e-10);
}
