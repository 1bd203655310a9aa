use std::path::PathBuf;

use thiserror::Error;

use crate::continuation::CriticalEstimate;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid boundary specification: {0}")]
    InvalidSpec(String),

    #[error("grid too coarse: n = {0}, need n >= 8")]
    GridTooCoarse(usize),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("Newton iteration did not converge in {iterations} iterations (last update {last_update:.3e})")]
    NonConvergence { iterations: usize, last_update: f64 },

    #[error("Jacobian is singular or indefinite at lambda^2 = {lambda_sq}")]
    SingularJacobian { lambda_sq: f64 },

    #[error("continuation failed to leave lambda = {lambda}")]
    Diverged { lambda: f64 },

    #[error("trace has {got} points, fold fit needs {need}")]
    TooFewPoints { got: usize, need: usize },

    #[error("trace does not approach a fold (curvature {p2:.3e}, vertex {u0:.6} vs last norm {last_norm:.6})")]
    NotAFold { p2: f64, u0: f64, last_norm: f64 },

    #[error("fold fit rms relative residual {residual:.3e} exceeds {threshold:.1e}")]
    PoorFit { residual: f64, threshold: f64 },

    #[error("grid extrapolation never reached fit quality {threshold:.1e} (last {quality:.3e} with n = {n_list:?})")]
    RetryCapExceeded {
        threshold: f64,
        quality: f64,
        n_list: Vec<usize>,
        best: Box<CriticalEstimate>,
    },

    #[error("no axisymmetric core: angular variation at the innermost radius is {variation:.3e}")]
    NoCore { variation: f64 },

    #[error("alpha values span {span:.2}x, need at least one decade")]
    InsufficientRange { span: f64 },

    #[error("radial problem is supercritical: Lambda^2 = {lambda_sq} >= 2")]
    Supercritical { lambda_sq: f64 },

    #[error("missing data: {0}")]
    MissingData(String),

    #[error("invalid config: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
