use thiserror::Error;

/// Errors produced by the channel model, the simulators and the CLI.
#[derive(Debug, Error)]
pub enum Error {
    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),

    #[error("convergence failure: {0}")]
    ConvergenceFailure(String),

    #[error("domain error: {0}")]
    Domain(String),

    /// The eigenmode series cannot be evaluated to the requested accuracy.
    /// `required_modes` is `None` when the time lies below the convergence floor.
    #[error("series not converged at t = {t_s} s (tau = {tau:e}){}", required_suffix(*.required_modes, *.available_modes))]
    NotConverged {
        t_s: f64,
        tau: f64,
        required_modes: Option<usize>,
        available_modes: usize,
    },

    #[error("no solution: {0}")]
    NoSolution(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

fn required_suffix(required: Option<usize>, available: usize) -> String {
    match required {
        Some(n) => format!(": needs {n} modes, table holds {available}"),
        None => String::from(": below the convergence floor"),
    }
}

pub type Result<T> = std::result::Result<T, Error>;
