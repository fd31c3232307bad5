use std::path::Path;

use serde::{Deserialize, Serialize};

use ocpstab_core::hbvp::PendulumParams;
use ocpstab_core::{LinearOcpParams, TimeGrid};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinearConfig {
    pub m: f64,
    pub b: f64,
    pub a: f64,
    pub v0: f64,
    pub vt: f64,
    #[serde(rename = "T")]
    pub final_time: f64,
    pub alpha: f64,
    #[serde(rename = "N", default, skip_serializing_if = "Option::is_none")]
    pub steps: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PendulumConfig {
    pub m1: f64,
    pub m2: f64,
    pub k: f64,
    pub a: f64,
    pub x_target: f64,
    #[serde(rename = "T")]
    pub final_time: f64,
    pub alpha: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub l0: Option<f64>,
    #[serde(rename = "N", default, skip_serializing_if = "Option::is_none")]
    pub steps: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
}

fn grid(final_time: f64, steps: Option<usize>, dt: Option<f64>) -> Result<TimeGrid, CliError> {
    Ok(match (steps, dt) {
        (Some(n), None) => TimeGrid::new(final_time, n)?,
        (None, Some(dt)) => TimeGrid::from_step(final_time, dt)?,
        _ => return Err(CliError::Config("exactly one of \"N\" and \"dt\" must be given".into())),
    })
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| CliError::Config(format!("invalid config {}: {e}", path.display())))
}

impl LinearConfig {
    pub fn params(&self) -> Result<LinearOcpParams, CliError> {
        let p = LinearOcpParams {
            m: self.m,
            b: self.b,
            a: self.a,
            v0: self.v0,
            vt: self.vt,
            final_time: self.final_time,
            alpha: self.alpha,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn grid(&self) -> Result<TimeGrid, CliError> {
        grid(self.final_time, self.steps, self.dt)
    }
}

impl PendulumConfig {
    pub fn params(&self) -> Result<PendulumParams, CliError> {
        let p = PendulumParams::new(self.m1, self.m2, self.k, self.a, self.x_target, self.l0);
        p.validate()?;
        Ok(p)
    }

    pub fn grid(&self) -> Result<TimeGrid, CliError> {
        grid(self.final_time, self.steps, self.dt)
    }
}
