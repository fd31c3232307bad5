//! Uniform time grids and the tau-family of one-step schemes.

use serde::{Deserialize, Serialize};

use crate::error::{OcpError, Result};

/// Relative mismatch allowed when a step size is converted to a step count.
pub const STEP_ROUNDING_TOLERANCE: f64 = 1e-9;

/// Uniform grid `t_n = n * dt`, `n = 0..=N`, with `dt = T / N`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    final_time: f64,
    steps: usize,
}

impl TimeGrid {
    pub fn new(final_time: f64, steps: usize) -> Result<Self> {
        if !(final_time.is_finite() && final_time > 0.0) {
            return Err(OcpError::Config(format!(
                "final time must be positive, got {final_time}"
            )));
        }
        if steps < 2 {
            return Err(OcpError::Config(format!(
                "step count must be at least 2, got {steps}"
            )));
        }
        Ok(Self { final_time, steps })
    }

    /// Builds a grid from a step size, using `N = round(T / dt)`. Fails when
    /// `dt` does not divide `T` to relative precision 1e-9.
    pub fn from_step(final_time: f64, dt: f64) -> Result<Self> {
        let steps = steps_for(final_time, dt)?;
        let mismatch = (steps as f64 * dt - final_time).abs() / final_time;
        if mismatch > STEP_ROUNDING_TOLERANCE {
            return Err(OcpError::Config(format!(
                "dt = {dt} does not divide T = {final_time} (N*dt - T relative mismatch {mismatch:e})"
            )));
        }
        Self::new(final_time, steps)
    }

    /// Nearest grid to the requested step size. The effective step is `T / N`.
    pub fn nearest(final_time: f64, dt: f64) -> Result<Self> {
        Self::new(final_time, steps_for(final_time, dt)?.max(2))
    }

    pub fn final_time(&self) -> f64 {
        self.final_time
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn node_count(&self) -> usize {
        self.steps + 1
    }

    pub fn dt(&self) -> f64 {
        self.final_time / self.steps as f64
    }

    /// Node time `t_n`. The last node is exactly `T`.
    pub fn time(&self, n: usize) -> f64 {
        if n == self.steps {
            self.final_time
        } else {
            n as f64 * self.dt()
        }
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..=self.steps).map(|n| self.time(n))
    }
}

fn steps_for(final_time: f64, dt: f64) -> Result<usize> {
    if !(final_time.is_finite() && final_time > 0.0) {
        return Err(OcpError::Config(format!(
            "final time must be positive, got {final_time}"
        )));
    }
    if !(dt.is_finite() && dt > 0.0) {
        return Err(OcpError::Config(format!("dt must be positive, got {dt}")));
    }
    let steps = (final_time / dt).round();
    if steps > u32::MAX as f64 {
        return Err(OcpError::Config(format!("dt = {dt} gives too many steps")));
    }
    Ok(steps as usize)
}

/// One-step scheme weight. Stage values are `x_{n-tau} = tau x_{n-1} + (1 - tau) x_n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scheme {
    tau: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SchemeKind {
    MidPoint,
    ImplicitEuler,
}

impl Scheme {
    pub const MID_POINT: Scheme = Scheme { tau: 0.5 };
    pub const IMPLICIT_EULER: Scheme = Scheme { tau: 0.0 };

    pub fn new(tau: f64) -> Result<Self> {
        if !(0.0..=0.5).contains(&tau) {
            return Err(OcpError::Config(format!(
                "tau must lie in [0, 1/2], got {tau}"
            )));
        }
        Ok(Self { tau })
    }

    pub fn mid_point() -> Self {
        Self::MID_POINT
    }

    pub fn implicit_euler() -> Self {
        Self::IMPLICIT_EULER
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    /// `Some` only for the two endpoint schemes that have closed-form
    /// stability results.
    pub fn kind(&self) -> Option<SchemeKind> {
        if self.tau == 0.5 {
            Some(SchemeKind::MidPoint)
        } else if self.tau == 0.0 {
            Some(SchemeKind::ImplicitEuler)
        } else {
            None
        }
    }

    /// Weights `(w_prev, w_next)` of the stage value.
    pub fn weights(&self) -> (f64, f64) {
        (self.tau, 1.0 - self.tau)
    }
}

impl From<SchemeKind> for Scheme {
    fn from(kind: SchemeKind) -> Self {
        match kind {
            SchemeKind::MidPoint => Scheme::MID_POINT,
            SchemeKind::ImplicitEuler => Scheme::IMPLICIT_EULER,
        }
    }
}

impl std::str::FromStr for Scheme {
    type Err = OcpError;

    /// Accepts `mp`, `ie`, or a numeric tau.
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "mp" | "midpoint" | "mid-point" => Ok(Scheme::MID_POINT),
            "ie" | "implicit-euler" => Ok(Scheme::IMPLICIT_EULER),
            other => other
                .parse::<f64>()
                .map_err(|_| OcpError::Config(format!("unknown scheme '{s}'")))
                .and_then(Scheme::new),
        }
    }
}

impl std::fmt::Display for Scheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self.kind() {
            Some(SchemeKind::MidPoint) => f.write_str("mp"),
            Some(SchemeKind::ImplicitEuler) => f.write_str("ie"),
            None => write!(f, "tau={}", self.tau),
        }
    }
}

/// Stage value `tau * seq[n-1] + (1 - tau) * seq[n]` for `1 <= n < seq.len()`.
pub fn interpolated_node(seq: &[f64], n: usize, tau: f64) -> Result<f64> {
    if n == 0 || n >= seq.len() {
        return Err(OcpError::Contract(format!(
            "stage index {n} out of range for a sequence of {} nodes",
            seq.len()
        )));
    }
    if !(0.0..=0.5).contains(&tau) {
        return Err(OcpError::Contract(format!("tau {tau} outside [0, 1/2]")));
    }
    Ok(tau * seq[n - 1] + (1.0 - tau) * seq[n])
}
