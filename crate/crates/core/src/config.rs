//! JSON experiment configuration.
//!
//! A config names a grid, a band-limited synthesis recipe for every model
//! field (a constant plus cosine modes), the multipliers, solver options, and
//! a scenario tag. Scenario presets pre-fill the algebraic ties between
//! fields that each study family assumes, so a single small config selects a
//! whole hypothesis bundle; `custom` leaves the fields exactly as written.
//!
//! Parsing then re-serializing a config is idempotent, and all maps are
//! ordered, so configs and everything derived from them are byte-stable.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::manifold::{mode_field, Grid, ScalarField};
use crate::model::{Configuration, ModelData, NonPerturbative, MAX_FLUX_DEGREE};
use crate::solvers::SolveOptions;
use crate::tolerances::{MAX_ITER_DEFAULT, SOLVER_TOL_DEFAULT};

/// Periodic grid geometry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub dim: usize,
    pub points_per_axis: Vec<usize>,
    pub lengths: Vec<f64>,
    #[serde(default = "default_extra_volume")]
    pub extra_volume: f64,
}

fn default_extra_volume() -> f64 {
    1.0
}

/// One cosine mode `amplitude * cos(k . x + phase)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModeSpec {
    pub wavevector: Vec<i64>,
    pub amplitude: f64,
    #[serde(default)]
    pub phase: f64,
}

/// Synthesis recipe for a scalar field: a constant plus cosine modes.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldSpec {
    #[serde(default)]
    pub constant: f64,
    #[serde(default)]
    pub modes: Vec<ModeSpec>,
}

impl FieldSpec {
    /// Constant-only recipe.
    pub fn constant(value: f64) -> Self {
        FieldSpec {
            constant: value,
            modes: Vec::new(),
        }
    }

    /// Realizes the recipe on a grid.
    pub fn synthesize(&self, grid: &Grid) -> Result<ScalarField> {
        let mut field = ScalarField::constant(grid, self.constant);
        for mode in &self.modes {
            field += &mode_field(grid, &mode.wavevector, mode.amplitude, mode.phase)?;
        }
        Ok(field)
    }
}

/// Constants of the non-perturbative volume term `B exp(-2 a v^4) v^-s`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NonPerturbativeSpec {
    #[serde(default)]
    pub amplitude: f64,
    #[serde(default)]
    pub rate: f64,
    #[serde(default)]
    pub power: f64,
}

/// Model data before synthesis: multipliers and field recipes. Flux keys are
/// decimal form degrees, e.g. `"1"`, `"3"`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub q: u32,
    #[serde(default)]
    pub alpha: f64,
    #[serde(default)]
    pub beta: f64,
    #[serde(default)]
    pub flux: BTreeMap<String, FieldSpec>,
    #[serde(default)]
    pub curvature: FieldSpec,
    #[serde(default)]
    pub string_tension: FieldSpec,
    #[serde(default)]
    pub nonperturbative: NonPerturbativeSpec,
}

/// Newton solver options; `l1`/`l2` prescribe the update means on the
/// constant kernel when one is present.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSpec {
    pub tol: f64,
    pub max_iter: usize,
    pub damping: f64,
    pub l1: f64,
    pub l2: f64,
}

impl Default for SolverSpec {
    fn default() -> Self {
        SolverSpec {
            tol: SOLVER_TOL_DEFAULT,
            max_iter: MAX_ITER_DEFAULT,
            damping: 1.0,
            l1: 0.0,
            l2: 0.0,
        }
    }
}

impl SolverSpec {
    pub fn options(&self) -> SolveOptions {
        SolveOptions {
            tol: self.tol,
            max_iter: self.max_iter,
            damping: self.damping,
            mean_u: self.l1,
            mean_v: self.l2,
        }
    }
}

/// Warp and conformal factor recipes for an initial or prescribed
/// configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigurationSpec {
    pub u: FieldSpec,
    pub v: FieldSpec,
}

/// Which hypothesis bundle the config selects.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    /// q = 7 with the marginal tie beta = -2 alpha / 3.
    Q7Unstable,
    /// q = 3 with the balance tie |F_3|^2 = 2 T.
    Q3Balance,
    /// q = 3 with |F_3|^2 - 2T = 2R - |F_1|^2 = -6 beta.
    Q3BetaNegative,
    /// Recover source data from a prescribed configuration.
    InverseData,
    /// Fields taken exactly as written.
    #[default]
    Custom,
}

/// A full experiment description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub scenario: Scenario,
    pub grid: GridSpec,
    pub model: ModelSpec,
    #[serde(default)]
    pub solver: SolverSpec,
    #[serde(default)]
    pub initial: Option<ConfigurationSpec>,
}

impl ExperimentConfig {
    /// Parses a config from a JSON string.
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))
    }

    /// Reads and parses a config file.
    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_json(&text)
    }

    /// Canonical JSON form; parsing it back yields an equal config.
    pub fn to_json(&self) -> String {
        let mut text = serde_json::to_string_pretty(self).expect("config serialization");
        text.push('\n');
        text
    }

    /// Builds the grid.
    pub fn grid(&self) -> Result<Grid> {
        Grid::new(
            self.grid.dim,
            self.grid.points_per_axis.clone(),
            self.grid.lengths.clone(),
            self.grid.extra_volume,
        )
    }

    /// Solver options with validation.
    pub fn solve_options(&self) -> Result<SolveOptions> {
        let opts = self.solver.options();
        opts.validate()?;
        Ok(opts)
    }

    /// The configured initial (or prescribed) configuration; defaults to the
    /// unit constants when absent.
    pub fn initial_configuration(&self, grid: &Grid) -> Result<Configuration> {
        match &self.initial {
            Some(spec) => Configuration::new(spec.u.synthesize(grid)?, spec.v.synthesize(grid)?),
            None => Configuration::constant(grid, 1.0, 1.0),
        }
    }

    /// Synthesizes the model data on a grid, applying the scenario ties.
    ///
    /// `q3_balance` overwrites the degree-3 flux with `2 T`; `q3_beta_negative`
    /// overwrites it with `2T - 6 beta` and the curvature with
    /// `(|F_1|^2 - 6 beta) / 2`; `q7_unstable` overwrites beta with
    /// `-2 alpha / 3`. Everything else is taken as written, and the synthesized
    /// fields must satisfy the model invariants (flux intensities nonnegative).
    pub fn model_data(&self, grid: &Grid) -> Result<ModelData> {
        let m = &self.model;
        let mut flux = BTreeMap::new();
        for (key, spec) in &m.flux {
            let degree: u32 = key.parse().map_err(|_| {
                Error::InvalidConfig(format!(
                    "flux key '{key}' is not a degree in 0..={MAX_FLUX_DEGREE}"
                ))
            })?;
            flux.insert(degree, spec.synthesize(grid)?);
        }
        let mut curvature = m.curvature.synthesize(grid)?;
        let tension = m.string_tension.synthesize(grid)?;
        let mut beta = m.beta;

        match self.scenario {
            Scenario::Q3Balance => {
                self.require_q(3)?;
                flux.insert(3, tension.scaled(2.0));
            }
            Scenario::Q3BetaNegative => {
                self.require_q(3)?;
                let flux1 = flux
                    .get(&1)
                    .cloned()
                    .unwrap_or_else(|| ScalarField::zeros(grid));
                flux.insert(3, tension.map(|t| 2.0 * t - 6.0 * beta));
                curvature = flux1.map(|f| (f - 6.0 * beta) / 2.0);
            }
            Scenario::Q7Unstable => {
                self.require_q(7)?;
                beta = -2.0 * m.alpha / 3.0;
            }
            Scenario::InverseData | Scenario::Custom => {}
        }

        let np = NonPerturbative::new(
            m.nonperturbative.amplitude,
            m.nonperturbative.rate,
            m.nonperturbative.power,
        )?;
        ModelData::new(m.q, m.alpha, beta, flux, curvature, tension, np)
    }

    fn require_q(&self, q: u32) -> Result<()> {
        if self.model.q != q {
            return Err(Error::InvalidConfig(format!(
                "scenario {:?} requires q = {q}, config has q = {}",
                self.scenario, self.model.q
            )));
        }
        Ok(())
    }
}
