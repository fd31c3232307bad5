use serde_json::json;
use thiserror::Error;

use ocpstab_core::OcpError;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Solver(OcpError),
    #[error("{0}")]
    Io(String),
}

impl From<OcpError> for CliError {
    fn from(e: OcpError) -> Self {
        match e {
            OcpError::Config(msg) => CliError::Config(msg),
            other => CliError::Solver(other),
        }
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Solver(_) => 3,
            CliError::Io(_) => 1,
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        let kind = match self {
            CliError::Config(_) => "config",
            CliError::Solver(_) => "solver",
            CliError::Io(_) => "io",
        };
        let mut v = json!({
            "error": kind,
            "message": self.to_string(),
            "exit_code": self.exit_code(),
        });
        if let CliError::Solver(OcpError::Convergence { iterations, history, .. }) = self {
            v["iterations"] = json!(iterations);
            v["residual_history"] = json!(history);
        }
        v
    }
}
