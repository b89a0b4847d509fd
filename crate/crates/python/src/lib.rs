//! Python bindings for the warped-vacuum stability toolkit.
//!
//! Thin wrappers around the core types plus the headline operations:
//! potential and residual evaluation, the Newton and monotone solvers, the
//! inverse-data construction, and the report generators. Reports cross the
//! boundary as JSON strings so the Python side can `json.loads` them without
//! a schema duplicated in two languages.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use wcstab_core::analysis;
use wcstab_core::config::ExperimentConfig;
use wcstab_core::manifold::{self, mode_field};
use wcstab_core::model;
use wcstab_core::runner;
use wcstab_core::solvers::{self, SolveOptions};

fn py_err(err: wcstab_core::Error) -> PyErr {
    PyValueError::new_err(err.to_string())
}

/// Periodic uniform grid on a flat torus.
#[pyclass(frozen, skip_from_py_object)]
#[derive(Clone)]
struct Grid {
    inner: manifold::Grid,
}

#[pymethods]
impl Grid {
    #[new]
    #[pyo3(signature = (dim, points_per_axis, lengths, extra_volume = 1.0))]
    fn new(
        dim: usize,
        points_per_axis: Vec<usize>,
        lengths: Vec<f64>,
        extra_volume: f64,
    ) -> PyResult<Self> {
        let inner =
            manifold::Grid::new(dim, points_per_axis, lengths, extra_volume).map_err(py_err)?;
        Ok(Grid { inner })
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    #[getter]
    fn points_per_axis(&self) -> Vec<usize> {
        self.inner.points_per_axis().to_vec()
    }

    #[getter]
    fn lengths(&self) -> Vec<f64> {
        self.inner.lengths().to_vec()
    }

    #[getter]
    fn node_count(&self) -> usize {
        self.inner.node_count()
    }

    #[getter]
    fn total_volume(&self) -> f64 {
        self.inner.total_volume()
    }

    fn __repr__(&self) -> String {
        format!(
            "Grid(dim={}, points_per_axis={:?}, lengths={:?})",
            self.inner.dim(),
            self.inner.points_per_axis(),
            self.inner.lengths(),
        )
    }
}

/// Real scalar field sampled on the grid nodes.
#[pyclass(skip_from_py_object)]
#[derive(Clone)]
struct ScalarField {
    inner: manifold::ScalarField,
}

#[pymethods]
impl ScalarField {
    /// Constant field.
    #[staticmethod]
    fn constant(grid: &Grid, value: f64) -> ScalarField {
        ScalarField {
            inner: manifold::ScalarField::constant(&grid.inner, value),
        }
    }

    /// Field from a flat value vector in row-major node order.
    #[staticmethod]
    fn from_values(grid: &Grid, values: Vec<f64>) -> PyResult<ScalarField> {
        let inner = manifold::ScalarField::from_values(&grid.inner, values).map_err(py_err)?;
        Ok(ScalarField { inner })
    }

    /// Single cosine mode `amplitude * cos(k . x + phase)`.
    #[staticmethod]
    #[pyo3(signature = (grid, wavevector, amplitude, phase = 0.0))]
    fn mode(grid: &Grid, wavevector: Vec<i64>, amplitude: f64, phase: f64) -> PyResult<ScalarField> {
        let inner = mode_field(&grid.inner, &wavevector, amplitude, phase).map_err(py_err)?;
        Ok(ScalarField { inner })
    }

    fn values(&self) -> Vec<f64> {
        self.inner.values().to_vec()
    }

    fn mean(&self) -> f64 {
        self.inner.mean()
    }

    fn min(&self) -> f64 {
        self.inner.min_value()
    }

    fn max(&self) -> f64 {
        self.inner.max_value()
    }

    fn max_abs(&self) -> f64 {
        self.inner.max_abs()
    }

    /// Quadrature integral over the internal space.
    fn integrate(&self) -> f64 {
        manifold::integrate(&self.inner)
    }

    /// Spectral Laplacian.
    fn laplacian(&self) -> ScalarField {
        ScalarField {
            inner: manifold::laplacian(&self.inner),
        }
    }

    fn scaled(&self, factor: f64) -> ScalarField {
        ScalarField {
            inner: self.inner.scaled(factor),
        }
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn __add__(&self, other: &ScalarField) -> PyResult<ScalarField> {
        self.binop(other, |a, b| a + b)
    }

    fn __sub__(&self, other: &ScalarField) -> PyResult<ScalarField> {
        self.binop(other, |a, b| a - b)
    }

    fn __mul__(&self, other: &ScalarField) -> PyResult<ScalarField> {
        self.binop(other, |a, b| a * b)
    }

    fn __repr__(&self) -> String {
        format!(
            "ScalarField({} nodes, mean={:.6e})",
            self.inner.len(),
            self.inner.mean(),
        )
    }
}

impl ScalarField {
    fn binop(&self, other: &ScalarField, f: impl Fn(f64, f64) -> f64) -> PyResult<ScalarField> {
        if self.inner.grid() != other.inner.grid() {
            return Err(PyValueError::new_err("fields live on different grids"));
        }
        Ok(ScalarField {
            inner: self.inner.zip_map(&other.inner, f),
        })
    }
}

/// A positive pair (warp factor, conformal factor).
#[pyclass(skip_from_py_object)]
#[derive(Clone)]
struct Configuration {
    inner: model::Configuration,
}

#[pymethods]
impl Configuration {
    #[new]
    fn new(u: &ScalarField, v: &ScalarField) -> PyResult<Self> {
        let inner =
            model::Configuration::new(u.inner.clone(), v.inner.clone()).map_err(py_err)?;
        Ok(Configuration { inner })
    }

    /// Constant configuration on a grid.
    #[staticmethod]
    fn constants(grid: &Grid, u0: f64, v0: f64) -> PyResult<Configuration> {
        let inner = model::Configuration::constant(&grid.inner, u0, v0).map_err(py_err)?;
        Ok(Configuration { inner })
    }

    #[getter]
    fn u(&self) -> ScalarField {
        ScalarField {
            inner: self.inner.u().clone(),
        }
    }

    #[getter]
    fn v(&self) -> ScalarField {
        ScalarField {
            inner: self.inner.v().clone(),
        }
    }

    /// Conformal volume of the internal space.
    fn volume(&self) -> f64 {
        self.inner.volume()
    }

    /// The warped constraint integral, i.e. the inverse Newton constant.
    fn inverse_newton_g(&self) -> f64 {
        self.inner.inverse_newton_g()
    }

    fn __repr__(&self) -> String {
        format!(
            "Configuration(u mean={:.6}, v mean={:.6})",
            self.inner.u().mean(),
            self.inner.v().mean(),
        )
    }
}

/// Model data: dimensions, multipliers, and source fields.
#[pyclass(skip_from_py_object)]
#[derive(Clone)]
struct Model {
    inner: model::ModelData,
}

#[pymethods]
impl Model {
    /// Builds the model from an experiment config JSON string, applying the
    /// scenario preset ties.
    #[staticmethod]
    fn from_config(text: &str) -> PyResult<Model> {
        let config = ExperimentConfig::from_json(text).map_err(py_err)?;
        let grid = config.grid().map_err(py_err)?;
        let inner = config.model_data(&grid).map_err(py_err)?;
        Ok(Model { inner })
    }

    #[getter]
    fn q(&self) -> u32 {
        self.inner.q()
    }

    #[getter]
    fn alpha(&self) -> f64 {
        self.inner.alpha()
    }

    #[getter]
    fn beta(&self) -> f64 {
        self.inner.beta()
    }

    #[getter]
    fn grid(&self) -> Grid {
        Grid {
            inner: self.inner.grid().clone(),
        }
    }

    /// Same sources with new Lagrange multipliers.
    fn with_multipliers(&self, alpha: f64, beta: f64) -> PyResult<Model> {
        let inner = self.inner.with_multipliers(alpha, beta).map_err(py_err)?;
        Ok(Model { inner })
    }

    /// Source profile of the reduced conformal equation.
    fn reduced_source(&self) -> ScalarField {
        ScalarField {
            inner: self.inner.reduced_source(),
        }
    }

    fn __repr__(&self) -> String {
        format!(
            "Model(q={}, alpha={:.6e}, beta={:.6e})",
            self.inner.q(),
            self.inner.alpha(),
            self.inner.beta(),
        )
    }
}

/// Output of the monotone sub/supersolution iteration.
#[pyclass(skip_from_py_object)]
struct SubSuperSolution {
    #[pyo3(get)]
    v_minus: f64,
    #[pyo3(get)]
    v_plus: f64,
    #[pyo3(get)]
    ratio: f64,
    #[pyo3(get)]
    iterations: usize,
    #[pyo3(get)]
    residual: f64,
    v_star: manifold::ScalarField,
}

#[pymethods]
impl SubSuperSolution {
    #[getter]
    fn v_star(&self) -> ScalarField {
        ScalarField {
            inner: self.v_star.clone(),
        }
    }

    fn __repr__(&self) -> String {
        format!(
            "SubSuperSolution(bracket=[{:.6}, {:.6}], residual={:.3e})",
            self.v_minus, self.v_plus, self.residual,
        )
    }
}

/// Effective potential of a configuration under the model data.
#[pyfunction]
#[pyo3(signature = (model, cfg, newton_g = 1.0, target_volume = 1.0))]
fn effective_potential(
    model: &Model,
    cfg: &Configuration,
    newton_g: f64,
    target_volume: f64,
) -> PyResult<f64> {
    model::effective_potential(&model.inner, &cfg.inner, newton_g, target_volume).map_err(py_err)
}

/// The two equation-of-motion residual fields (first, second).
#[pyfunction]
fn eom_residual(model: &Model, cfg: &Configuration) -> PyResult<(ScalarField, ScalarField)> {
    let pair = model::eom_residual(&model.inner, &cfg.inner).map_err(py_err)?;
    Ok((
        ScalarField { inner: pair.first },
        ScalarField { inner: pair.second },
    ))
}

/// Volume-mode mass of the configuration.
#[pyfunction]
fn mass_squared(model: &Model, cfg: &Configuration) -> PyResult<f64> {
    model::mass_squared(&model.inner, &cfg.inner).map_err(py_err)
}

/// Damped Newton solve of the coupled system from the given initial point.
#[pyfunction]
#[pyo3(signature = (model, initial, tol = None, max_iter = None, damping = None))]
fn newton_solve(
    model: &Model,
    initial: &Configuration,
    tol: Option<f64>,
    max_iter: Option<usize>,
    damping: Option<f64>,
) -> PyResult<Configuration> {
    let defaults = SolveOptions::default();
    let opts = SolveOptions {
        tol: tol.unwrap_or(defaults.tol),
        max_iter: max_iter.unwrap_or(defaults.max_iter),
        damping: damping.unwrap_or(defaults.damping),
        ..defaults
    };
    let inner = solvers::newton_solve(&model.inner, &initial.inner, &opts).map_err(py_err)?;
    Ok(Configuration { inner })
}

/// Monotone iteration for the reduced conformal equation (q = 7).
#[pyfunction]
fn solve_sub_super(model: &Model) -> PyResult<SubSuperSolution> {
    let result = solvers::solve_sub_super(&model.inner).map_err(py_err)?;
    Ok(SubSuperSolution {
        v_minus: result.v_minus,
        v_plus: result.v_plus,
        ratio: result.ratio,
        iterations: result.iterations,
        residual: result.residual,
        v_star: result.v_star,
    })
}

/// Source combinations (a, b) realizing the configuration as a solution.
#[pyfunction]
fn inverse_data_solve(
    alpha: f64,
    beta: f64,
    flux5_sq: &ScalarField,
    cfg: &Configuration,
) -> PyResult<(ScalarField, ScalarField)> {
    let result =
        solvers::inverse_data_solve(alpha, beta, &flux5_sq.inner, &cfg.inner).map_err(py_err)?;
    Ok((
        ScalarField { inner: result.a },
        ScalarField { inner: result.b },
    ))
}

/// Full stability report as a JSON string.
#[pyfunction]
fn stability_report(model: &Model, cfg: &Configuration) -> PyResult<String> {
    let report = analysis::stability_report(&model.inner, &cfg.inner).map_err(py_err)?;
    serde_json::to_string(&report).map_err(|e| PyValueError::new_err(e.to_string()))
}

/// Discrete operator-norm diagnostics as a JSON string.
#[pyfunction]
#[pyo3(signature = (grid, s_proxy = 3))]
fn operator_diagnostics(grid: &Grid, s_proxy: u32) -> PyResult<String> {
    let report = analysis::operator_norm_diagnostics(&grid.inner, s_proxy).map_err(py_err)?;
    serde_json::to_string(&report).map_err(|e| PyValueError::new_err(e.to_string()))
}

/// Runs the identity suite on a config JSON string; returns the row table
/// as a JSON string.
#[pyfunction]
fn verify_config(text: &str) -> PyResult<String> {
    let config = ExperimentConfig::from_json(text).map_err(py_err)?;
    let report = runner::run_verify(&config).map_err(py_err)?;
    serde_json::to_string(&report).map_err(|e| PyValueError::new_err(e.to_string()))
}

#[pymodule]
fn wcstab(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Grid>()?;
    m.add_class::<ScalarField>()?;
    m.add_class::<Configuration>()?;
    m.add_class::<Model>()?;
    m.add_class::<SubSuperSolution>()?;
    m.add_function(wrap_pyfunction!(effective_potential, m)?)?;
    m.add_function(wrap_pyfunction!(eom_residual, m)?)?;
    m.add_function(wrap_pyfunction!(mass_squared, m)?)?;
    m.add_function(wrap_pyfunction!(newton_solve, m)?)?;
    m.add_function(wrap_pyfunction!(solve_sub_super, m)?)?;
    m.add_function(wrap_pyfunction!(inverse_data_solve, m)?)?;
    m.add_function(wrap_pyfunction!(stability_report, m)?)?;
    m.add_function(wrap_pyfunction!(operator_diagnostics, m)?)?;
    m.add_function(wrap_pyfunction!(verify_config, m)?)?;
    Ok(())
}
