//! Closed-form optimum of the scalar propelled-body problem
//!
//! ```text
//! minimise  int_0^T  1/2 (v - v_t)^2 + alpha/2 u^2  dt
//! s.t.      m v' = -b v + u - m a,   v(0) = v_0
//! ```
//!
//! Stationarity of the control Hamiltonian gives `u = -lambda / (alpha m)`, and
//! the adjoint obeys `lambda' = (b/m) lambda - (v - v_t)` with `lambda(T) = 0`.

use serde::{Deserialize, Serialize};

use crate::error::{OcpError, Result};

/// Above this value of `gamma * T` the first integration constant is
/// evaluated with `exp(gamma T)` factored out.
const OVERFLOW_GUARD: f64 = 300.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearOcpParams {
    /// Mass.
    pub m: f64,
    /// Linear drag coefficient.
    pub b: f64,
    /// Gravitational acceleration.
    pub a: f64,
    /// Initial velocity.
    pub v0: f64,
    /// Target velocity.
    pub vt: f64,
    /// Final time.
    pub final_time: f64,
    /// Control-cost weight.
    pub alpha: f64,
}

impl LinearOcpParams {
    /// `(m, b, a, v_0, v_t, T) = (1, 1, 1, 0, 20, 10)` with the given `alpha`.
    pub fn reference(alpha: f64) -> Self {
        Self {
            m: 1.0,
            b: 1.0,
            a: 1.0,
            v0: 0.0,
            vt: 20.0,
            final_time: 10.0,
            alpha,
        }
    }

    pub fn with_alpha(self, alpha: f64) -> Self {
        Self { alpha, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, x: f64| {
            if x.is_finite() && x > 0.0 {
                Ok(())
            } else {
                Err(OcpError::Config(format!("{name} must be positive, got {x}")))
            }
        };
        positive("m", self.m)?;
        positive("b", self.b)?;
        positive("T", self.final_time)?;
        positive("alpha", self.alpha)?;
        if !(self.a.is_finite() && self.a >= 0.0) {
            return Err(OcpError::Config(format!(
                "a must be non-negative, got {}",
                self.a
            )));
        }
        if !self.v0.is_finite() || !self.vt.is_finite() {
            return Err(OcpError::Config("v0 and vt must be finite".into()));
        }
        Ok(())
    }

    /// `gamma = sqrt(b^2/m^2 + 1/(alpha m^2))`.
    pub fn gamma(&self) -> f64 {
        gamma(self.m, self.b, self.alpha)
    }

    /// Running-cost scale used for relative tolerances.
    pub fn scale(&self) -> f64 {
        1f64.max(self.v0.abs()).max(self.vt.abs())
    }
}

pub fn gamma(m: f64, b: f64, alpha: f64) -> f64 {
    (b * b / (m * m) + 1.0 / (alpha * m * m)).sqrt()
}

/// Point value of the exact optimum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnalyticPoint {
    pub v: f64,
    pub lambda: f64,
    pub u: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnalyticSolution {
    pub params: LinearOcpParams,
    pub gamma: f64,
    pub v_p: f64,
    pub lambda_p: f64,
    pub c1: f64,
    pub c2: f64,
    /// `c1 * exp(gamma T)`, finite for every admissible input.
    c1_scaled: f64,
}

/// Integration constants of the closed-form optimum.
pub fn derive_constants(params: &LinearOcpParams) -> Result<AnalyticSolution> {
    params.validate()?;
    let LinearOcpParams {
        m,
        b,
        a,
        v0,
        vt,
        final_time: t_end,
        alpha,
    } = *params;
    let g = params.gamma();
    let g2 = g * g;
    let v_p = (vt - alpha * b * m * a) / (alpha * m * m * g2);
    let lambda_p = -(b * vt + m * a) / (m * g2);
    let plus = b + m * g;
    let minus = b - m * g;

    let gt = g * t_end;
    let (c1, c1_scaled) = if gt <= OVERFLOW_GUARD {
        let c1 = (m * (v0 - v_p) * (-gt).exp() + plus * lambda_p)
            / (minus * (-gt).exp() - plus * gt.exp());
        (c1, c1 * gt.exp())
    } else {
        let e2 = (-2.0 * gt).exp();
        let scaled = (m * (v0 - v_p) * e2 + plus * lambda_p) / (minus * e2 - plus);
        (scaled * (-gt).exp(), scaled)
    };
    let c2 = (m * (v0 - v_p) - minus * c1) / plus;

    Ok(AnalyticSolution {
        params: *params,
        gamma: g,
        v_p,
        lambda_p,
        c1,
        c2,
        c1_scaled,
    })
}

impl AnalyticSolution {
    pub fn new(params: &LinearOcpParams) -> Result<Self> {
        derive_constants(params)
    }

    /// State, adjoint and control at `t` in `[0, T]`.
    pub fn eval(&self, t: f64) -> Result<AnalyticPoint> {
        let t_end = self.params.final_time;
        let slack = 1e-12 * t_end;
        if !(t >= -slack && t <= t_end + slack) {
            return Err(OcpError::Domain(format!("t = {t} outside [0, {t_end}]")));
        }
        let t = t.clamp(0.0, t_end);
        let LinearOcpParams { m, b, alpha, .. } = self.params;
        let g = self.gamma;
        let grow = self.c1_scaled * (g * (t - t_end)).exp();
        let decay = self.c2 * (-g * t).exp();
        let v = grow * (b / m - g) + decay * (b / m + g) + self.v_p;
        let lambda = grow + decay + self.lambda_p;
        Ok(AnalyticPoint {
            v,
            lambda,
            u: -lambda / (alpha * m),
        })
    }
}

/// Free-function form of [`AnalyticSolution::eval`].
pub fn eval_analytic(sol: &AnalyticSolution, t: f64) -> Result<AnalyticPoint> {
    sol.eval(t)
}
