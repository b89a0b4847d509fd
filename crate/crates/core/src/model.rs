//! Physical input data and the dimensionally reduced energy functional.
//!
//! A compactification is described by source data (curvature, flux
//! intensities, a smeared string source, two Lagrange multipliers) together
//! with the dynamical pair of shape functions: the warp factor `u` and the
//! conformal factor `v`, both pointwise positive. This module evaluates the
//! effective potential, the two Euler-Lagrange residuals, their exact
//! directional linearization, the volume-mode mass, and the closed-form
//! non-perturbative correction.
//!
//! Conventions: `q` is the odd brane dimension parameter entering the
//! conformal-factor exponents, fractional powers of `v` are evaluated as
//! `exp(e ln v)` and therefore require positivity, and flux data enter only
//! through the squared intensities, one non-negative field per form degree.

use serde::Serialize;
use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::manifold::{grad_inner, integrate, laplacian, Grid, ScalarField};

/// Largest form degree carried by the flux map.
pub const MAX_FLUX_DEGREE: u32 = 6;

/// Constants of the non-perturbative correction `B exp(-2 a v^4) v^-s`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct NonPerturbative {
    pub amplitude: f64,
    pub rate: f64,
    pub power: f64,
}

impl NonPerturbative {
    pub fn new(amplitude: f64, rate: f64, power: f64) -> Result<Self> {
        for (name, value) in [("amplitude", amplitude), ("rate", rate), ("power", power)] {
            if !value.is_finite() || value < 0.0 {
                return Err(Error::InvalidModel(format!(
                    "non-perturbative {name} must be finite and >= 0, got {value}"
                )));
            }
        }
        Ok(NonPerturbative {
            amplitude,
            rate,
            power,
        })
    }

    /// Value and second derivative of `B exp(-2 a v^4) v^-s` at `v0`.
    pub fn value_and_second_derivative(&self, v0: f64) -> (f64, f64) {
        let (b, a, s) = (self.amplitude, self.rate, self.power);
        let value = b * (-2.0 * a * v0.powi(4)).exp() * v0.powf(-s);
        // With w(v) = d(ln V)/dv = -8 a v^3 - s/v, the second derivative is
        // V (w^2 + w').
        let w = -8.0 * a * v0.powi(3) - s / v0;
        let wp = -24.0 * a * v0.powi(2) + s / (v0 * v0);
        (value, value * (w * w + wp))
    }
}

/// Non-dynamical inputs of the equations of motion.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelData {
    grid: Grid,
    q: u32,
    alpha: f64,
    beta: f64,
    flux_sq: BTreeMap<u32, ScalarField>,
    curvature: ScalarField,
    string_tension: ScalarField,
    np: NonPerturbative,
}

impl ModelData {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        q: u32,
        alpha: f64,
        beta: f64,
        flux_sq: BTreeMap<u32, ScalarField>,
        curvature: ScalarField,
        string_tension: ScalarField,
        np: NonPerturbative,
    ) -> Result<Self> {
        if !matches!(q, 3 | 5 | 7) {
            return Err(Error::InvalidModel(format!(
                "q must be one of 3, 5, 7, got {q}"
            )));
        }
        if !alpha.is_finite() || !beta.is_finite() {
            return Err(Error::InvalidModel(format!(
                "alpha and beta must be finite, got ({alpha}, {beta})"
            )));
        }
        let grid = curvature.grid().clone();
        if string_tension.grid() != &grid {
            return Err(Error::GridMismatch(
                "string tension field is on a different grid than the curvature".into(),
            ));
        }
        for (&p, intensity) in &flux_sq {
            if p > MAX_FLUX_DEGREE {
                return Err(Error::InvalidModel(format!(
                    "flux degree {p} exceeds the cap {MAX_FLUX_DEGREE}"
                )));
            }
            if intensity.grid() != &grid {
                return Err(Error::GridMismatch(format!(
                    "flux intensity p={p} is on a different grid"
                )));
            }
            if intensity.min_value() < 0.0 {
                return Err(Error::InvalidModel(format!(
                    "flux intensity p={p} must be >= 0 pointwise (it is a squared norm), \
                     min value {}",
                    intensity.min_value()
                )));
            }
        }
        Ok(ModelData {
            grid,
            q,
            alpha,
            beta,
            flux_sq,
            curvature,
            string_tension,
            np,
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn q(&self) -> u32 {
        self.q
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn flux_sq(&self) -> &BTreeMap<u32, ScalarField> {
        &self.flux_sq
    }

    /// Flux intensity of degree `p`; absent entries mean zero.
    pub fn flux(&self, p: u32) -> Option<&ScalarField> {
        self.flux_sq.get(&p)
    }

    pub fn curvature(&self) -> &ScalarField {
        &self.curvature
    }

    pub fn string_tension(&self) -> &ScalarField {
        &self.string_tension
    }

    pub fn np(&self) -> &NonPerturbative {
        &self.np
    }

    /// Form degrees whose intensity is not identically zero.
    pub fn flux_support(&self) -> Vec<u32> {
        self.flux_sq
            .iter()
            .filter(|(_, f)| f.max_abs() > 0.0)
            .map(|(&p, _)| p)
            .collect()
    }

    /// Returns a copy of the data with `alpha` and `beta` replaced.
    pub fn with_multipliers(&self, alpha: f64, beta: f64) -> Result<Self> {
        ModelData::new(
            self.q,
            alpha,
            beta,
            self.flux_sq.clone(),
            self.curvature.clone(),
            self.string_tension.clone(),
            self.np,
        )
    }

    /// Data with every field frozen to its mean. Used to build
    /// constant-coefficient preconditioners.
    pub fn mean_frozen(&self) -> Self {
        let freeze = |f: &ScalarField| ScalarField::constant(&self.grid, f.mean());
        ModelData {
            grid: self.grid.clone(),
            q: self.q,
            alpha: self.alpha,
            beta: self.beta,
            flux_sq: self
                .flux_sq
                .iter()
                .map(|(&p, f)| (p, freeze(f)))
                .collect(),
            curvature: freeze(&self.curvature),
            string_tension: freeze(&self.string_tension),
            np: self.np,
        }
    }

    /// Linear interpolation `(1 - lambda) self + lambda other` of all
    /// constants and fields. Both data sets must share grid and `q`.
    pub fn interpolate(&self, other: &ModelData, lambda: f64) -> Result<Self> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch(
                "cannot interpolate data on different grids".into(),
            ));
        }
        if self.q != other.q {
            return Err(Error::InvalidModel(format!(
                "cannot interpolate between q={} and q={}",
                self.q, other.q
            )));
        }
        let lerp = |x: f64, y: f64| (1.0 - lambda) * x + lambda * y;
        let lerp_field = |x: &ScalarField, y: &ScalarField| {
            x.zip_map(y, |a, b| (1.0 - lambda) * a + lambda * b)
        };
        let zero = ScalarField::zeros(&self.grid);
        let degrees: std::collections::BTreeSet<u32> = self
            .flux_sq
            .keys()
            .chain(other.flux_sq.keys())
            .copied()
            .collect();
        let flux_sq = degrees
            .into_iter()
            .map(|p| {
                let x = self.flux_sq.get(&p).unwrap_or(&zero);
                let y = other.flux_sq.get(&p).unwrap_or(&zero);
                (p, lerp_field(x, y))
            })
            .collect();
        ModelData::new(
            self.q,
            lerp(self.alpha, other.alpha),
            lerp(self.beta, other.beta),
            flux_sq,
            lerp_field(&self.curvature, &other.curvature),
            lerp_field(&self.string_tension, &other.string_tension),
            NonPerturbative::new(
                lerp(self.np.amplitude, other.np.amplitude),
                lerp(self.np.rate, other.np.rate),
                lerp(self.np.power, other.np.power),
            )?,
        )
    }

    /// Source profile `|F_1|^2 - 2R - 2T` of the reduced conformal-factor
    /// equation, using only the degree-1 flux.
    pub fn reduced_source(&self) -> ScalarField {
        let zero = ScalarField::zeros(&self.grid);
        let f1 = self.flux_sq.get(&1).unwrap_or(&zero);
        f1 - &(self.curvature.scaled(2.0)) - &(self.string_tension.scaled(2.0))
    }

    fn check_cfg(&self, cfg: &Configuration) -> Result<()> {
        if cfg.grid() != &self.grid {
            return Err(Error::GridMismatch(
                "configuration and model data live on different grids".into(),
            ));
        }
        Ok(())
    }
}

/// The dynamical pair: warp factor `u` and conformal factor `v`.
#[derive(Debug, Clone, PartialEq)]
pub struct Configuration {
    u: ScalarField,
    v: ScalarField,
}

impl Configuration {
    pub fn new(u: ScalarField, v: ScalarField) -> Result<Self> {
        if u.grid() != v.grid() {
            return Err(Error::GridMismatch(
                "warp and conformal factors are on different grids".into(),
            ));
        }
        for (name, f) in [("u", &u), ("v", &v)] {
            if !f.is_strictly_positive() {
                let (node, value) = f
                    .values()
                    .iter()
                    .enumerate()
                    .min_by(|a, b| a.1.total_cmp(b.1))
                    .map(|(i, &x)| (i, x))
                    .unwrap_or((0, f64::NAN));
                return Err(Error::InvalidConfiguration(format!(
                    "{name} must be positive pointwise; min value {value} at node {node}"
                )));
            }
        }
        Ok(Configuration { u, v })
    }

    /// Constant configuration `(u0, v0)`.
    pub fn constant(grid: &Grid, u0: f64, v0: f64) -> Result<Self> {
        Configuration::new(
            ScalarField::constant(grid, u0),
            ScalarField::constant(grid, v0),
        )
    }

    pub fn u(&self) -> &ScalarField {
        &self.u
    }

    pub fn v(&self) -> &ScalarField {
        &self.v
    }

    pub fn grid(&self) -> &Grid {
        self.u.grid()
    }

    /// Derived inverse Newton constant `1/G_N = integral of u v^3`.
    pub fn inverse_newton_g(&self) -> f64 {
        integrate(&(&self.u * &self.v.pow(3.0)))
    }

    /// Derived internal volume `integral of v^3`.
    pub fn volume(&self) -> f64 {
        integrate(&self.v.pow(3.0))
    }
}

/// Residuals of the two equations of motion; zero fields mean a solution.
#[derive(Debug, Clone)]
pub struct ResidualPair {
    pub first: ScalarField,
    pub second: ScalarField,
}

impl ResidualPair {
    /// Max-norm over both residual fields.
    pub fn max_norm(&self) -> f64 {
        self.first.max_abs().max(self.second.max_abs())
    }
}

/// Term-by-term breakdown of the volume-mode mass.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct MassTerms {
    pub curvature: f64,
    pub gradient_u: f64,
    pub flux: f64,
    pub string: f64,
    pub alpha: f64,
    pub beta: f64,
}

impl MassTerms {
    pub fn total(&self) -> f64 {
        self.curvature + self.gradient_u + self.flux + self.string + self.alpha + self.beta
    }
}

/// Sum over flux degrees of `weight(p) * v^(base - p) * |F_p|^2`, skipping
/// degrees whose weight vanishes.
fn flux_sum(data: &ModelData, v: &ScalarField, base: f64, weight: impl Fn(f64) -> f64) -> ScalarField {
    let mut acc = ScalarField::zeros(data.grid());
    for (&p, intensity) in data.flux_sq() {
        let w = weight(p as f64);
        if w == 0.0 {
            continue;
        }
        acc += &((v.pow(base - p as f64) * intensity) * w);
    }
    acc
}

/// Effective potential of the configuration.
///
/// The gradient and source terms are integrated directly; the two Lagrange
/// terms compare the derived quantities against the prescribed `newton_g`
/// and `target_vol` and vanish identically when those are taken as derived.
pub fn effective_potential(
    data: &ModelData,
    cfg: &Configuration,
    newton_g: f64,
    target_vol: f64,
) -> Result<f64> {
    data.check_cfg(cfg)?;
    if !newton_g.is_finite() || newton_g <= 0.0 {
        return Err(Error::InvalidModel(format!(
            "newton_g must be positive and finite, got {newton_g}"
        )));
    }
    if !target_vol.is_finite() || target_vol <= 0.0 {
        return Err(Error::InvalidModel(format!(
            "target_vol must be positive and finite, got {target_vol}"
        )));
    }
    let (u, v) = (cfg.u(), cfg.v());
    let kappa = (data.q() as f64 - 3.0) / 2.0;
    let u_sq = u * u;
    let u_sq_v = &u_sq * v;

    let mut density = -(&u_sq * v * v * data.curvature());
    density.add_scaled(-5.0, &grad_inner(v, &u_sq_v));
    density.add_scaled(-3.0, &(v * v * grad_inner(u, u)));
    density.add_scaled(0.5, &(&u_sq * flux_sum(data, v, 3.0, |_| 1.0)));
    density.add_scaled(-1.0, &(&u_sq * v.pow(kappa) * data.string_tension()));

    Ok(0.5 * integrate(&density)
        + data.alpha() * (1.0 / newton_g - cfg.inverse_newton_g())
        + data.beta() * (target_vol - cfg.volume()))
}

/// Residuals of the two equations of motion.
///
/// First equation:
/// `10 u v lap(v) + 6 v^2 lap(u) + 12 v grad(v).grad(u) - 2 u v^2 R
///  + u sum_p v^(3-p) |F_p|^2 - 2 u v^((q-3)/2) T - 2 alpha v^3`.
///
/// Second equation:
/// `5 lap(u^2 v) + 5 u^2 lap(v) - 2 u^2 v R - 6 v |grad u|^2
///  + (u^2/2) sum_p (3-p) v^(2-p) |F_p|^2 - ((q-3)/2) u^2 v^((q-5)/2) T
///  - 6 (alpha u v^2 + beta v^2)`,
/// where `lap(u^2 v)` applies the Laplacian to the assembled product field.
pub fn eom_residual(data: &ModelData, cfg: &Configuration) -> Result<ResidualPair> {
    data.check_cfg(cfg)?;
    let (u, v) = (cfg.u(), cfg.v());
    let q = data.q() as f64;
    let kappa = (q - 3.0) / 2.0;
    let mu = (q - 5.0) / 2.0;

    let lap_u = laplacian(u);
    let lap_v = laplacian(v);

    let mut first = (u * v * &lap_v) * 10.0;
    first.add_scaled(6.0, &(v * v * &lap_u));
    first.add_scaled(12.0, &(v * grad_inner(v, u)));
    first.add_scaled(-2.0, &(u * v * v * data.curvature()));
    first += &(u * flux_sum(data, v, 3.0, |_| 1.0));
    first.add_scaled(-2.0, &(u * v.pow(kappa) * data.string_tension()));
    first.add_scaled(-2.0 * data.alpha(), &v.pow(3.0));

    let u_sq = u * u;
    let mut second = laplacian(&(&u_sq * v)) * 5.0;
    second.add_scaled(5.0, &(&u_sq * &lap_v));
    second.add_scaled(-2.0, &(&u_sq * v * data.curvature()));
    second.add_scaled(-6.0, &(v * grad_inner(u, u)));
    second.add_scaled(0.5, &(&u_sq * flux_sum(data, v, 2.0, |p| 3.0 - p)));
    if kappa != 0.0 {
        second.add_scaled(-kappa, &(&u_sq * v.pow(mu) * data.string_tension()));
    }
    second.add_scaled(-6.0 * data.alpha(), &(u * v * v));
    second.add_scaled(-6.0 * data.beta(), &(v * v));

    Ok(ResidualPair { first, second })
}

/// Exact directional derivative of [`eom_residual`] at `cfg` along
/// `(du, dv)`: the discrete Jacobian action, obtained by differentiating the
/// residual formulas term by term. Finite-difference quotients of
/// `eom_residual` converge to this at second order.
pub fn eom_linearization(
    data: &ModelData,
    cfg: &Configuration,
    du: &ScalarField,
    dv: &ScalarField,
) -> Result<ResidualPair> {
    data.check_cfg(cfg)?;
    if du.grid() != cfg.grid() || dv.grid() != cfg.grid() {
        return Err(Error::GridMismatch(
            "direction fields are on a different grid".into(),
        ));
    }
    let (u, v) = (cfg.u(), cfg.v());
    let q = data.q() as f64;
    let kappa = (q - 3.0) / 2.0;
    let mu = (q - 5.0) / 2.0;
    let alpha = data.alpha();
    let beta = data.beta();
    let r = data.curvature();
    let t = data.string_tension();

    let lap_u = laplacian(u);
    let lap_v = laplacian(v);
    let lap_du = laplacian(du);
    let lap_dv = laplacian(dv);

    let sum0 = flux_sum(data, v, 3.0, |_| 1.0);
    let sum1 = flux_sum(data, v, 2.0, |p| 3.0 - p);
    let sum2 = flux_sum(data, v, 1.0, |p| (3.0 - p) * (2.0 - p));

    let mut first = (du * v * &lap_v) * 10.0;
    first.add_scaled(10.0, &(u * dv * &lap_v));
    first.add_scaled(10.0, &(u * v * &lap_dv));
    first.add_scaled(12.0, &(v * dv * &lap_u));
    first.add_scaled(6.0, &(v * v * &lap_du));
    first.add_scaled(12.0, &(dv * grad_inner(v, u)));
    first.add_scaled(12.0, &(v * grad_inner(dv, u)));
    first.add_scaled(12.0, &(v * grad_inner(v, du)));
    first.add_scaled(-2.0, &(du * v * v * r));
    first.add_scaled(-4.0, &(u * v * dv * r));
    first += &(du * &sum0);
    first += &(u * dv * &sum1);
    first.add_scaled(-2.0, &(du * v.pow(kappa) * t));
    if kappa != 0.0 {
        first.add_scaled(-2.0 * kappa, &(u * v.pow(kappa - 1.0) * dv * t));
    }
    first.add_scaled(-6.0 * alpha, &(v * v * dv));

    let u_sq = u * u;
    let u_du = u * du;
    let mut second = laplacian(&(&(&u_du * v) * 2.0 + &u_sq * dv)) * 5.0;
    second.add_scaled(10.0, &(&u_du * &lap_v));
    second.add_scaled(5.0, &(&u_sq * &lap_dv));
    second.add_scaled(-4.0, &(&u_du * v * r));
    second.add_scaled(-2.0, &(&u_sq * dv * r));
    second.add_scaled(-6.0, &(dv * grad_inner(u, u)));
    second.add_scaled(-12.0, &(v * grad_inner(u, du)));
    second += &(&u_du * &sum1);
    second.add_scaled(0.5, &(&u_sq * dv * &sum2));
    if kappa != 0.0 {
        second.add_scaled(-2.0 * kappa, &(&u_du * v.pow(mu) * t));
        if mu != 0.0 {
            second.add_scaled(-kappa * mu, &(&u_sq * v.pow(mu - 1.0) * dv * t));
        }
    }
    second.add_scaled(-6.0 * alpha, &(du * v * v));
    second.add_scaled(-12.0 * alpha, &(u * v * dv));
    second.add_scaled(-12.0 * beta, &(v * dv));

    Ok(ResidualPair { first, second })
}

/// Term-by-term contributions to the volume-mode mass.
pub fn mass_terms(data: &ModelData, cfg: &Configuration) -> Result<MassTerms> {
    data.check_cfg(cfg)?;
    let (u, v) = (cfg.u(), cfg.v());
    let q = data.q() as f64;
    let u_sq = u * u;
    let string_coeff = (q - 3.0) * (q - 5.0) / 8.0;
    let string = if string_coeff == 0.0 {
        0.0
    } else {
        -string_coeff * integrate(&(&u_sq * v.pow((q - 7.0) / 2.0) * data.string_tension()))
    };
    Ok(MassTerms {
        curvature: -integrate(&(&u_sq * data.curvature())),
        gradient_u: -3.0 * integrate(&grad_inner(u, u)),
        flux: 0.25 * integrate(&(&u_sq * flux_sum(data, v, 1.0, |p| (3.0 - p) * (2.0 - p)))),
        string,
        alpha: -6.0 * data.alpha() * integrate(&(u * v)),
        beta: -6.0 * data.beta() * integrate(v),
    })
}

/// Mass of the uniform conformal-factor mode: the exact second derivative of
/// the discrete effective potential along `v -> v + eps`, valid for any
/// positive configuration (not only solutions). Positive mass classifies a
/// solution as stable.
pub fn mass_squared(data: &ModelData, cfg: &Configuration) -> Result<f64> {
    Ok(mass_terms(data, cfg)?.total())
}

/// Alternative on-shell expression for the mass, obtained by dividing the
/// second equation of motion by `v` and integrating. Only meaningful for
/// `q = 3` with flux support in degrees {1, 3, 5}; equals [`mass_squared`]
/// exactly on solutions.
pub fn mass_identity_rhs(data: &ModelData, cfg: &Configuration) -> Result<f64> {
    data.check_cfg(cfg)?;
    if data.q() != 3 {
        return Err(Error::Unsupported(format!(
            "the mass identity holds for q = 3, data has q = {}",
            data.q()
        )));
    }
    let support = data.flux_support();
    if let Some(&p) = support.iter().find(|p| !matches!(p, 1 | 3 | 5)) {
        return Err(Error::Unsupported(format!(
            "the mass identity requires flux support in {{1, 3, 5}}, found degree {p}"
        )));
    }
    let (u, v) = (cfg.u(), cfg.v());
    let u_sq = u * u;
    let mut rhs = -10.0 * integrate(&(&u_sq * grad_inner(v, v) * v.pow(-2.0)));
    rhs += integrate(&(&u_sq * data.curvature()));
    rhs += 3.0 * integrate(&grad_inner(u, u));
    if let Some(f1) = data.flux(1) {
        rhs -= 0.5 * integrate(&(&u_sq * f1));
    }
    if let Some(f5) = data.flux(5) {
        rhs += 2.5 * integrate(&(&u_sq * v.pow(-4.0) * f5));
    }
    Ok(rhs)
}

/// Value and second derivative of the non-perturbative correction at the
/// volume-modulus value `v0`.
pub fn nonperturbative(data: &ModelData, v0: f64) -> Result<(f64, f64)> {
    if !v0.is_finite() || v0 <= 0.0 {
        return Err(Error::InvalidModel(format!(
            "non-perturbative evaluation needs v0 > 0, got {v0}"
        )));
    }
    Ok(data.np().value_and_second_derivative(v0))
}
