use std::path::PathBuf;

pub type Result<T> = std::result::Result<T, Error>;

/// Error type shared by every public operation in the crate.
///
/// Variants split into three groups that the command line maps to distinct
/// exit codes: invalid input data or configuration, solver failures, and
/// identity checks that a computed solution fails to satisfy.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid field: {0}")]
    InvalidField(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("invalid model data: {0}")]
    InvalidModel(String),

    #[error("invalid configuration: {0}")]
    InvalidConfiguration(String),

    #[error("invalid solver options: {0}")]
    InvalidOptions(String),

    #[error("invalid experiment config: {0}")]
    InvalidConfig(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed field dump: {0}")]
    MalformedDump(String),

    #[error("operation requires {0}")]
    Unsupported(String),

    #[error("linearized system not solvable: {0}")]
    NotSolvable(String),

    #[error("linear solver failed: {0}")]
    LinearSolve(String),

    #[error("solver diverged after {iterations} iterations (residual history {history:?})")]
    SolverDiverged { iterations: usize, history: Vec<f64> },

    #[error("solver stagnated at residual {residual:.3e} (history {history:?})")]
    SolverStagnated { residual: f64, history: Vec<f64> },

    #[error("iterate left the positive cone: {0}")]
    PositivityLost(String),

    #[error("continuation failed at lambda = {lambda}: {source}")]
    ContinuationFailed {
        lambda: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("identity check failed: {name} deviates by {deviation:.3e} (tolerance {tolerance:.3e})")]
    IdentityFailed {
        name: String,
        deviation: f64,
        tolerance: f64,
    },

    #[error("inconsistent data: {0}")]
    InconsistentData(String),
}

impl Error {
    /// Process exit code used by the command line interface.
    ///
    /// 1 = bad input, 2 = solver failure, 3 = failed identity check.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidGrid(_)
            | Error::InvalidField(_)
            | Error::GridMismatch(_)
            | Error::InvalidModel(_)
            | Error::InvalidConfiguration(_)
            | Error::InvalidOptions(_)
            | Error::InvalidConfig(_)
            | Error::Io { .. }
            | Error::MalformedDump(_)
            | Error::Unsupported(_)
            | Error::InconsistentData(_) => 1,
            Error::NotSolvable(_)
            | Error::LinearSolve(_)
            | Error::SolverDiverged { .. }
            | Error::SolverStagnated { .. }
            | Error::PositivityLost(_)
            | Error::ContinuationFailed { .. } => 2,
            Error::IdentityFailed { .. } => 3,
        }
    }

    /// Short machine-readable tag for structured error output.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidGrid(_) => "invalid_grid",
            Error::InvalidField(_) => "invalid_field",
            Error::GridMismatch(_) => "grid_mismatch",
            Error::InvalidModel(_) => "invalid_model",
            Error::InvalidConfiguration(_) => "invalid_configuration",
            Error::InvalidOptions(_) => "invalid_options",
            Error::InvalidConfig(_) => "invalid_config",
            Error::Io { .. } => "io",
            Error::MalformedDump(_) => "malformed_dump",
            Error::Unsupported(_) => "unsupported",
            Error::NotSolvable(_) => "not_solvable",
            Error::LinearSolve(_) => "linear_solve",
            Error::SolverDiverged { .. } => "solver_diverged",
            Error::SolverStagnated { .. } => "solver_stagnated",
            Error::PositivityLost(_) => "positivity_lost",
            Error::ContinuationFailed { .. } => "continuation_failed",
            Error::IdentityFailed { .. } => "identity_failed",
            Error::InconsistentData(_) => "inconsistent_data",
        }
    }
}
