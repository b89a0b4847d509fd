//! Stability classification and the integral identities a solution must
//! satisfy: the volume-mode mass with its term breakdown, the instability
//! certificate for reduced solutions, the source-multiplier balance, the
//! volume lower bound with its pointwise sufficient certificates, and
//! discrete operator-norm diagnostics.
//!
//! Identity checks are gated: they refuse configurations that do not solve
//! the equations of motion, because the identities only hold on-shell and a
//! "defect" computed off-shell would be meaningless.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::manifold::{grad_inner, integrate, laplacian, Grid, ScalarField};
use crate::model::{
    eom_residual, mass_terms, nonperturbative, Configuration, MassTerms, ModelData,
};
use crate::tolerances::{
    EXACT_POINT_TOL, IDENTITY_TOL, NP_DOMINANCE_RATIO, ON_SHELL_TOL, OPERATOR_RATIO_LIMIT,
    SOBOLEV_PROXY_DEFAULT, SUB_SUPER_RATIO_LIMIT,
};

/// Full stability classification of a configuration against model data.
///
/// Serialized keys are stable; all values are finite doubles. Identity
/// residuals that only make sense on-shell appear in the map only when the
/// configuration solves the equations of motion to the on-shell tolerance.
#[derive(Debug, Clone, Serialize)]
pub struct StabilityReport {
    /// Volume-mode mass (second derivative of the potential along constant
    /// conformal shifts); positive means stable.
    pub mass: f64,
    /// Term-by-term breakdown of `mass`.
    pub mass_terms: MassTerms,
    /// Four-dimensional Newton constant, the reciprocal of the warped
    /// volume integral.
    #[serde(rename = "newton_G")]
    pub newton_g: f64,
    /// Conformal volume of the internal space.
    pub volume: f64,
    /// |second derivative of the non-perturbative term at the mean volume|
    /// divided by |mass|. Zero when the term vanishes; the largest finite
    /// double when the term is present but the mass is exactly zero.
    pub np_ratio: f64,
    /// `mass > 0`.
    pub stable: bool,
    /// Whether the equations of motion hold to the on-shell tolerance.
    pub on_shell: bool,
    /// Named identity defects; on-shell-only identities appear only when
    /// `on_shell` is true.
    pub identity_residuals: BTreeMap<String, f64>,
    /// Named boolean diagnostics of the solvability and stability hypotheses.
    pub flags: BTreeMap<String, bool>,
}

/// Which pointwise condition certified the volume inequality, if any.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum VolumeCertificate {
    /// No pointwise sufficient condition applies.
    None,
    /// q = 3, no zero-form flux, and the three-form intensity dominates the
    /// string tension pointwise.
    ThreeFormDominatesTension,
    /// q = 7 and no zero-form flux.
    NoZeroFormFlux,
}

/// Outcome of [`volume_bound_check`].
#[derive(Debug, Clone, Copy, Serialize)]
pub struct VolumeBoundReport {
    /// Conformal volume of the internal space.
    pub volume: f64,
    /// Lower bound `2 alpha / (3 G_N |beta|)`; zero when alpha = 0 and
    /// infinite when beta = 0 with alpha > 0.
    pub bound: f64,
    /// Whether `volume >= bound`, with identity-tolerance slack so that the
    /// exact-equality case reports true.
    pub holds: bool,
    /// The pointwise condition that certified the inequality, if any.
    pub certificate: VolumeCertificate,
}

/// Discrete stand-ins for the operator norms in the contraction hypothesis.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct DiagnosticsReport {
    /// Sobolev exponent of the probe norm.
    pub s_proxy: u32,
    /// Norm of the Laplacian from the discrete H^s to H^(s-2) on mean-zero
    /// fields: the largest mode quotient |k|^2 / (1 + |k|^2).
    pub k1_proxy: f64,
    /// Largest C^1-seminorm to H^s-norm ratio over unit cosine probes.
    pub k2_proxy: f64,
    /// `k2_proxy / k1_proxy`.
    pub ratio: f64,
    /// Whether the ratio stays below the contraction limit of 26.
    pub ratio_within_limit: bool,
}

/// Assembles the full stability report for a configuration.
pub fn stability_report(data: &ModelData, cfg: &Configuration) -> Result<StabilityReport> {
    let terms = mass_terms(data, cfg)?;
    let mass = terms.total();
    let inverse_g = cfg.inverse_newton_g();
    let volume = cfg.volume();

    let (_, np_second) = nonperturbative(data, cfg.v().mean())?;
    let np_ratio = if np_second == 0.0 {
        0.0
    } else if mass == 0.0 {
        f64::MAX
    } else {
        (np_second / mass).abs()
    };

    let residual_norm = eom_residual(data, cfg)?.max_norm();
    let on_shell = residual_norm <= ON_SHELL_TOL;

    let mut identity_residuals = BTreeMap::new();
    identity_residuals.insert("eom_residual".to_string(), residual_norm);
    if on_shell {
        identity_residuals.insert(
            "source_multiplier_balance".to_string(),
            source_balance_defect(data, cfg),
        );
        if data.q() == 3 {
            if let Ok(rhs) = crate::model::mass_identity_rhs(data, cfg) {
                identity_residuals.insert("mass_gradient_identity".to_string(), mass - rhs);
            }
        }
    }

    let h = data.reduced_source();
    let coefficient = h.zip_map(cfg.v(), |hx, vx| hx - 4.0 * data.alpha() * vx);
    let bracket_ok = data.alpha() > 0.0
        && h.min_value() > 0.0
        && h.max_value() / h.min_value() < SUB_SUPER_RATIO_LIMIT;
    let volume_lhs = 4.0 * data.alpha() * inverse_g + 6.0 * data.beta() * volume;
    let volume_scale = (4.0 * data.alpha() * inverse_g).abs() + (6.0 * data.beta() * volume).abs();
    let diagnostics = operator_norm_diagnostics(data.grid(), SOBOLEV_PROXY_DEFAULT)?;

    let mut flags = BTreeMap::new();
    flags.insert(
        "linearized_solvable".to_string(),
        coefficient.max_value() < 0.0,
    );
    flags.insert("bracket_ratio_below_two".to_string(), bracket_ok);
    flags.insert(
        "operator_ratio_within_limit".to_string(),
        diagnostics.ratio_within_limit,
    );
    flags.insert(
        "volume_inequality_nonpositive".to_string(),
        volume_lhs <= EXACT_POINT_TOL * volume_scale.max(1.0),
    );
    flags.insert(
        "nonperturbative_negligible".to_string(),
        np_ratio <= NP_DOMINANCE_RATIO,
    );

    Ok(StabilityReport {
        mass,
        mass_terms: terms,
        newton_g: 1.0 / inverse_g,
        volume,
        np_ratio,
        stable: mass > 0.0,
        on_shell,
        identity_residuals,
        flags,
    })
}

/// The two expressions whose agreement and sign certify instability of an
/// embedded reduced solution: the source integral `int (h - 2 alpha v_*)`
/// and the integrated-by-parts form `-10 int |grad v_*|^2 / v_*^2`.
///
/// Both vanish iff `v_star` is constant and are strictly negative otherwise.
/// `v_star` must solve the reduced equation `10 lap v + h v - 2 alpha v^2 = 0`
/// to the on-shell tolerance; the certificate is meaningless off-shell.
pub fn instability_certificate(
    v_star: &ScalarField,
    alpha: f64,
    h: &ScalarField,
) -> Result<(f64, f64)> {
    if v_star.grid() != h.grid() {
        return Err(Error::GridMismatch(
            "source profile and solution are on different grids".into(),
        ));
    }
    if !v_star.is_strictly_positive() {
        return Err(Error::InvalidConfiguration(
            "certificate requires a strictly positive v_star".into(),
        ));
    }
    let mut residual = laplacian(v_star) * 10.0;
    residual += &(h * v_star);
    residual.add_scaled(-2.0 * alpha, &(v_star * v_star));
    let defect = residual.max_abs();
    if defect > ON_SHELL_TOL {
        return Err(Error::InvalidConfiguration(format!(
            "certificate requires v_star to solve the reduced equation: \
             residual {defect:.3e} exceeds {ON_SHELL_TOL:.1e}"
        )));
    }

    let source = integrate(&h.zip_map(v_star, |hx, vx| hx - 2.0 * alpha * vx));
    let gradient =
        -10.0 * integrate(&grad_inner(v_star, v_star).zip_map(v_star, |g, vx| g / (vx * vx)));
    Ok((source, gradient))
}

/// Defect of the on-shell balance between source terms and multipliers:
/// `int ((u^2/2) sum_p (1-p) v^(3-p) |F_p|^2 + ((7-q)/2) u^2 v^((q-3)/2) T)`
/// minus `4 alpha / G_N + 6 beta Vol`.
pub fn source_balance_check(data: &ModelData, cfg: &Configuration) -> Result<f64> {
    let residual = eom_residual(data, cfg)?.max_norm();
    if residual > ON_SHELL_TOL {
        return Err(Error::InvalidConfiguration(format!(
            "identity holds only on-shell: residual {residual:.3e} exceeds \
             {ON_SHELL_TOL:.1e}"
        )));
    }
    Ok(source_balance_defect(data, cfg))
}

fn source_balance_defect(data: &ModelData, cfg: &Configuration) -> f64 {
    let (u, v) = (cfg.u(), cfg.v());
    let u_sq = u * u;
    let mut lhs_field = ScalarField::zeros(cfg.grid());
    for (&p, intensity) in data.flux_sq() {
        let weight = 1.0 - p as f64;
        if weight == 0.0 {
            continue;
        }
        lhs_field.add_scaled(
            0.5 * weight,
            &(&u_sq * v.pow(3.0 - p as f64) * intensity),
        );
    }
    let q = data.q() as f64;
    if q != 7.0 {
        lhs_field.add_scaled(
            0.5 * (7.0 - q),
            &(&u_sq * v.pow((q - 3.0) / 2.0) * data.string_tension()),
        );
    }
    let rhs = 4.0 * data.alpha() * cfg.inverse_newton_g() + 6.0 * data.beta() * cfg.volume();
    integrate(&lhs_field) - rhs
}

/// Checks the volume lower bound `Vol >= 2 alpha / (3 G_N |beta|)` and
/// reports which pointwise condition, if any, certifies it.
///
/// Certified data with `beta = 0` and `alpha > 0` is contradictory (the
/// certified inequality forces beta < 0), which is reported as inconsistent
/// data before anything else.
pub fn volume_bound_check(data: &ModelData, cfg: &Configuration) -> Result<VolumeBoundReport> {
    let zero_form_free = data
        .flux(0)
        .map(|intensity| intensity.max_abs() == 0.0)
        .unwrap_or(true);
    let certificate = if !zero_form_free {
        VolumeCertificate::None
    } else if data.q() == 3 {
        let dominated = match data.flux(3) {
            Some(flux3) => {
                (data.string_tension().scaled(2.0) - flux3).max_value() <= 0.0
            }
            None => data.string_tension().max_value() <= 0.0,
        };
        if dominated {
            VolumeCertificate::ThreeFormDominatesTension
        } else {
            VolumeCertificate::None
        }
    } else if data.q() == 7 {
        VolumeCertificate::NoZeroFormFlux
    } else {
        VolumeCertificate::None
    };

    if certificate != VolumeCertificate::None && data.beta() == 0.0 && data.alpha() > 0.0 {
        return Err(Error::InconsistentData(format!(
            "the certified balance 4 alpha/G_N + 6 beta Vol <= 0 cannot hold \
             with beta = 0 and alpha = {} > 0; beta must be negative",
            data.alpha()
        )));
    }

    let residual = eom_residual(data, cfg)?.max_norm();
    if residual > ON_SHELL_TOL {
        return Err(Error::InvalidConfiguration(format!(
            "volume bound holds only on-shell: residual {residual:.3e} exceeds \
             {ON_SHELL_TOL:.1e}"
        )));
    }

    let volume = cfg.volume();
    let bound = if data.alpha() == 0.0 {
        0.0
    } else if data.beta() == 0.0 {
        f64::INFINITY
    } else {
        2.0 * data.alpha() * cfg.inverse_newton_g() / (3.0 * data.beta().abs())
    };
    let holds = volume + IDENTITY_TOL * bound.abs().max(1.0) >= bound;
    Ok(VolumeBoundReport {
        volume,
        bound,
        holds,
        certificate,
    })
}

/// Distinct Laplacian-symbol values with multiplicities, ascending.
fn distinct_mode_squares(grid: &Grid) -> Vec<(f64, usize)> {
    let mut counts: BTreeMap<u64, usize> = BTreeMap::new();
    for ksq in grid.laplacian_symbol() {
        *counts.entry(ksq.to_bits()).or_insert(0) += 1;
    }
    counts
        .into_iter()
        .map(|(bits, count)| (f64::from_bits(bits), count))
        .collect()
}

/// Discrete proxies for the contraction constants: the Laplacian's
/// H^s -> H^(s-2) norm over mean-zero fields and the best C^1-to-Sobolev
/// embedding ratio over unit cosine probes, both exact maxima over the
/// grid's mode set.
pub fn operator_norm_diagnostics(grid: &Grid, s_proxy: u32) -> Result<DiagnosticsReport> {
    if s_proxy < 2 {
        return Err(Error::InvalidOptions(format!(
            "the Sobolev proxy exponent must be at least 2, got {s_proxy}"
        )));
    }
    let modes = distinct_mode_squares(grid);
    let k1_proxy = modes
        .iter()
        .filter(|(ksq, _)| *ksq > 0.0)
        .map(|(ksq, _)| ksq / (1.0 + ksq))
        .fold(0.0f64, f64::max);

    // A unit cosine probe of wavevector k has sup |f| = 1, sup |grad f| = |k|
    // and squared discrete Sobolev norm (1 + |k|^2)^s * mean(f^2), with
    // mean(f^2) = 1/2 for k != 0 and 1 for the constant probe.
    let k2_proxy = modes
        .iter()
        .map(|(ksq, _)| {
            if *ksq == 0.0 {
                1.0
            } else {
                (1.0 + ksq.sqrt()) * 2.0f64.sqrt() / (1.0 + ksq).powf(s_proxy as f64 / 2.0)
            }
        })
        .fold(0.0f64, f64::max);

    let ratio = k2_proxy / k1_proxy;
    Ok(DiagnosticsReport {
        s_proxy,
        k1_proxy,
        k2_proxy,
        ratio,
        ratio_within_limit: ratio < OPERATOR_RATIO_LIMIT,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{mass_squared, NonPerturbative};
    use crate::solvers::solve_sub_super;
    use approx::assert_relative_eq;
    use std::collections::BTreeMap as Map;

    fn grid(n: usize) -> Grid {
        Grid::new(1, vec![n], vec![2.0 * std::f64::consts::PI], 1.0).unwrap()
    }

    fn balance_data(grid: &Grid) -> ModelData {
        ModelData::new(
            3,
            0.0,
            0.0,
            Map::from([(3, ScalarField::constant(grid, 1.0))]),
            ScalarField::zeros(grid),
            ScalarField::constant(grid, 0.5),
            NonPerturbative::default(),
        )
        .unwrap()
    }

    fn beta_negative_data(grid: &Grid, alpha: f64, beta: f64) -> ModelData {
        // Ties |F3|^2 - 2T = 2R - |F1|^2 = -6 beta with F1 = 1, T = 0.5.
        ModelData::new(
            3,
            alpha,
            beta,
            Map::from([
                (1, ScalarField::constant(grid, 1.0)),
                (3, ScalarField::constant(grid, 1.0 - 6.0 * beta)),
            ]),
            ScalarField::constant(grid, (1.0 - 6.0 * beta) / 2.0),
            ScalarField::constant(grid, 0.5),
            NonPerturbative::default(),
        )
        .unwrap()
    }

    #[test]
    fn balance_point_report_is_marginal() {
        let g = grid(32);
        let data = balance_data(&g);
        let cfg = Configuration::constant(&g, 1.0, 1.0).unwrap();
        let report = stability_report(&data, &cfg).unwrap();
        assert!(report.mass.abs() < 1e-12);
        assert!(!report.stable);
        assert!(report.on_shell);
        assert!(report.identity_residuals["source_multiplier_balance"].abs() < 1e-12);
        assert!(report.identity_residuals["mass_gradient_identity"].abs() < 1e-12);
        assert!(report.flags["volume_inequality_nonpositive"]);
        assert!(report.flags["nonperturbative_negligible"]);
        assert_eq!(report.np_ratio, 0.0);
        assert_relative_eq!(report.newton_g, 1.0 / g.total_volume(), epsilon = 1e-12);
    }

    #[test]
    fn negative_beta_solution_is_stable() {
        let g = grid(32);
        let data = beta_negative_data(&g, 0.0, -0.1);
        let cfg = Configuration::constant(&g, 1.0, 1.0).unwrap();
        let report = stability_report(&data, &cfg).unwrap();
        assert!(report.on_shell);
        assert!(report.stable);
        assert_relative_eq!(report.mass, 0.3 * g.total_volume(), epsilon = 1e-10);
        assert!(report.identity_residuals["mass_gradient_identity"].abs() < 1e-10);
        assert!(report.flags["volume_inequality_nonpositive"]);
    }

    fn sinusoidal_q7(grid: &Grid) -> (ModelData, ScalarField) {
        // h = 2 + 0.2 sin x through the curvature.
        let curvature = ScalarField::from_fn(grid, |x| 0.5 - 0.1 * x[0].sin());
        let data = ModelData::new(
            7,
            1.0,
            -2.0 / 3.0,
            Map::from([(1, ScalarField::constant(grid, 4.0))]),
            curvature,
            ScalarField::constant(grid, 0.5),
            NonPerturbative::default(),
        )
        .unwrap();
        let h = data.reduced_source();
        (data, h)
    }

    #[test]
    fn reduced_solution_certificate_agrees_and_is_negative() {
        let g = grid(64);
        let (data, h) = sinusoidal_q7(&g);
        let v_star = solve_sub_super(&data).unwrap().v_star;
        let (source, gradient) = instability_certificate(&v_star, 1.0, &h).unwrap();
        assert!(source < 0.0 && gradient < 0.0);
        assert_relative_eq!(source, gradient, max_relative = 1e-8);

        // Embedded as a configuration, the mass matches the certificate
        // through mass = source/2 - alpha * int v_star.
        let cfg = Configuration::new(ScalarField::constant(&g, 1.0), v_star.clone()).unwrap();
        let mass = mass_squared(&data, &cfg).unwrap();
        let expected = 0.5 * source - integrate(&v_star);
        assert_relative_eq!(mass, expected, max_relative = 1e-10);
        assert!(mass < 0.0);

        let report = stability_report(&data, &cfg).unwrap();
        assert!(!report.stable);
        assert!(report.on_shell);
    }

    #[test]
    fn certificate_vanishes_for_constant_solutions() {
        let g = grid(32);
        let h = ScalarField::constant(&g, 2.0);
        let v_star = ScalarField::constant(&g, 1.0);
        let (source, gradient) = instability_certificate(&v_star, 1.0, &h).unwrap();
        assert_eq!(source, 0.0);
        assert_eq!(gradient, 0.0);
    }

    #[test]
    fn certificate_rejects_off_shell_input() {
        let g = grid(32);
        let h = ScalarField::constant(&g, 2.0);
        let v_star = ScalarField::constant(&g, 1.3);
        assert!(matches!(
            instability_certificate(&v_star, 1.0, &h),
            Err(Error::InvalidConfiguration(_))
        ));
    }

    #[test]
    fn source_balance_vanishes_at_closed_form_points() {
        let g = grid(32);
        let balance = balance_data(&g);
        let unit = Configuration::constant(&g, 1.0, 1.0).unwrap();
        assert!(source_balance_check(&balance, &unit).unwrap().abs() < 1e-12);

        let (q7, _) = sinusoidal_q7(&g);
        let constant_q7 = ModelData::new(
            7,
            1.0,
            -2.0 / 3.0,
            Map::from([(1, ScalarField::constant(&g, 4.0))]),
            ScalarField::constant(&g, 0.5),
            ScalarField::constant(&g, 0.5),
            NonPerturbative::default(),
        )
        .unwrap();
        assert!(source_balance_check(&constant_q7, &unit).unwrap().abs() < 1e-12);
        // Off-shell rejection uses the sinusoidal data at the wrong config.
        assert!(matches!(
            source_balance_check(&q7, &Configuration::constant(&g, 1.0, 1.4).unwrap()),
            Err(Error::InvalidConfiguration(_))
        ));
    }

    #[test]
    fn volume_bound_fires_certificates() {
        let g = grid(32);
        let balance = balance_data(&g);
        let unit = Configuration::constant(&g, 1.0, 1.0).unwrap();
        let report = volume_bound_check(&balance, &unit).unwrap();
        assert_eq!(report.bound, 0.0);
        assert!(report.holds);
        assert_eq!(
            report.certificate,
            VolumeCertificate::ThreeFormDominatesTension
        );

        let constant_q7 = ModelData::new(
            7,
            1.0,
            -2.0 / 3.0,
            Map::from([(1, ScalarField::constant(&g, 4.0))]),
            ScalarField::constant(&g, 0.5),
            ScalarField::constant(&g, 0.5),
            NonPerturbative::default(),
        )
        .unwrap();
        let report = volume_bound_check(&constant_q7, &unit).unwrap();
        assert_eq!(report.certificate, VolumeCertificate::NoZeroFormFlux);
        assert!(report.holds);
        assert!((report.volume - report.bound).abs() < 1e-10);
    }

    #[test]
    fn certified_positive_alpha_with_zero_beta_is_inconsistent() {
        let g = grid(32);
        let data = ModelData::new(
            3,
            1e-3,
            0.0,
            Map::from([(3, ScalarField::constant(&g, 0.4))]),
            ScalarField::zeros(&g),
            ScalarField::constant(&g, 0.1),
            NonPerturbative::default(),
        )
        .unwrap();
        let cfg = Configuration::constant(&g, 1.0, 1.0).unwrap();
        assert!(matches!(
            volume_bound_check(&data, &cfg),
            Err(Error::InconsistentData(_))
        ));
    }

    #[test]
    fn zero_form_flux_blocks_the_certificates() {
        let g = grid(32);
        let data = ModelData::new(
            7,
            0.0,
            -2.0 / 3.0,
            Map::from([
                (0, ScalarField::constant(&g, 0.2)),
                (1, ScalarField::constant(&g, 3.0)),
            ]),
            ScalarField::constant(&g, 0.5),
            ScalarField::constant(&g, 0.5),
            NonPerturbative::default(),
        )
        .unwrap();
        // Not on-shell; but the certificate logic runs on the data alone, so
        // probe it through the inconsistency path: alpha > 0 and beta = 0
        // would error only if certified, and a zero-form blocks that.
        let with_alpha = data.with_multipliers(1e-3, 0.0).unwrap();
        let cfg = Configuration::constant(&g, 1.0, 1.0).unwrap();
        // No InconsistentData: the error is the off-shell rejection instead.
        assert!(matches!(
            volume_bound_check(&with_alpha, &cfg),
            Err(Error::InvalidConfiguration(_))
        ));
    }

    #[test]
    fn diagnostics_match_closed_forms() {
        let g = grid(16);
        let report = operator_norm_diagnostics(&g, 3).unwrap();
        // Largest mode quotient on a 16-point 2 pi grid: |k| = 8.
        assert_eq!(report.k1_proxy, 64.0 / 65.0);
        // The |k| = 1 cosine probe realizes the C^1/Sobolev maximum at s = 3,
        // tying the constant probe's ratio of exactly 1.
        assert_relative_eq!(report.k2_proxy, 1.0, epsilon = 1e-12);
        assert!(report.ratio_within_limit);
        assert!(operator_norm_diagnostics(&g, 1).is_err());
    }

    #[test]
    fn refining_the_grid_grows_the_probe_maximum() {
        let coarse = operator_norm_diagnostics(&grid(16), 2).unwrap();
        let fine = operator_norm_diagnostics(&grid(32), 2).unwrap();
        assert!(fine.k2_proxy >= coarse.k2_proxy);
        assert!(fine.k1_proxy >= coarse.k1_proxy);
    }

    #[test]
    fn report_serializes_with_stable_keys() {
        let g = grid(16);
        let data = balance_data(&g);
        let cfg = Configuration::constant(&g, 1.0, 1.0).unwrap();
        let report = stability_report(&data, &cfg).unwrap();
        let json = serde_json::to_string(&report).unwrap();
        for key in [
            "\"mass\"",
            "\"mass_terms\"",
            "\"newton_G\"",
            "\"volume\"",
            "\"np_ratio\"",
            "\"stable\"",
            "\"on_shell\"",
            "\"identity_residuals\"",
            "\"flags\"",
        ] {
            assert!(json.contains(key), "missing {key} in {json}");
        }
    }
}
