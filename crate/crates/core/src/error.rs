use thiserror::Error;

pub type Result<T> = std::result::Result<T, OcpError>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OcpError {
    /// Invalid user-supplied configuration (grid, parameters, settings).
    #[error("configuration error: {0}")]
    Config(String),

    /// Evaluation requested outside the domain of a function.
    #[error("domain error: {0}")]
    Domain(String),

    /// Indexing or dimension contract broken by the caller.
    #[error("contract violation: {0}")]
    Contract(String),

    /// The step recurrence or the eigenvalue formula is singular at this
    /// value of gamma*dt.
    #[error("singular propagation at gamma*dt = {gamma_dt}")]
    SingularPropagation { gamma_dt: f64 },

    /// No oscillation threshold exists: the scheme oscillates for every alpha
    /// at this step size.
    #[error("no oscillation threshold exists for dt = {dt}")]
    NoThreshold { dt: f64 },

    /// A linear system had a zero or non-finite pivot.
    #[error("singular linear system (pivot {pivot}){}", .gamma_dt.map(|g| format!(", gamma*dt = {g}")).unwrap_or_default())]
    SingularSystem { pivot: usize, gamma_dt: Option<f64> },

    /// An affine recurrence left the representable range.
    #[error("blow-up at step {step}")]
    BlowUp { step: usize },

    #[error("configuration is singular: {0}")]
    SingularConfiguration(String),

    #[error("Newton did not converge after {iterations} iterations (residual {last_residual:e})")]
    Convergence {
        iterations: usize,
        last_residual: f64,
        history: Vec<f64>,
    },
}
