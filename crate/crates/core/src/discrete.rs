//! Mid-point / implicit-Euler discretizations of the scalar problem.
//!
//! With the control eliminated through `u = -lambda / (alpha m)`, each step
//! `n = 1..=N` contributes
//!
//! ```text
//! (lambda_n - lambda_{n-1})/dt - (b/m) lambda_{n-tau} + v_{n-tau} - v_t = 0
//! (v_n - v_{n-1})/dt + (b/m) v_{n-tau} + s lambda_{n-tau} + a          = 0
//! ```
//!
//! with `s = 1/(alpha m^2)`, closed by `v_0 = v_o` and `lambda_N = 0`.

use serde::{Deserialize, Serialize};

use crate::analytic::LinearOcpParams;
use crate::banded::{solve_banded, BandedMatrix};
use crate::error::{OcpError, Result};
use crate::grid::{Scheme, SchemeKind, TimeGrid};
use crate::trajectory::ScalarTrajectory;

/// Magnitude treated as divergence by [`propagate`].
pub const BLOW_UP_MAGNITUDE: f64 = 1e300;

/// Reduced mid-point coefficients `p = b/m + 2/dt`, `q = b/m - 2/dt`, `s = 1/(alpha m^2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MpCoefficients {
    pub p: f64,
    pub q: f64,
    pub s: f64,
}

/// Reduced implicit-Euler coefficients `p* = b/m + 1/dt`, `q* = b/m - 1/dt`,
/// `r = 1/dt`, `s = 1/(alpha m^2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IeCoefficients {
    pub p: f64,
    pub q: f64,
    pub r: f64,
    pub s: f64,
}

pub fn assemble_mp(params: &LinearOcpParams, dt: f64) -> Result<MpCoefficients> {
    check_dt(dt)?;
    let k = params.b / params.m;
    Ok(MpCoefficients {
        p: k + 2.0 / dt,
        q: k - 2.0 / dt,
        s: 1.0 / (params.alpha * params.m * params.m),
    })
}

pub fn assemble_ie(params: &LinearOcpParams, dt: f64) -> Result<IeCoefficients> {
    check_dt(dt)?;
    let k = params.b / params.m;
    Ok(IeCoefficients {
        p: k + 1.0 / dt,
        q: k - 1.0 / dt,
        r: 1.0 / dt,
        s: 1.0 / (params.alpha * params.m * params.m),
    })
}

fn check_dt(dt: f64) -> Result<()> {
    if dt.is_finite() && dt > 0.0 {
        Ok(())
    } else {
        Err(OcpError::Config(format!("dt must be positive, got {dt}")))
    }
}

/// Affine step recurrence `z_n = transition * z_{n-1} + affine`, `z = (v, lambda)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PropagationForm {
    pub transition: [[f64; 2]; 2],
    pub affine: [f64; 2],
    pub scheme: SchemeKind,
}

impl PropagationForm {
    pub fn apply(&self, z: [f64; 2]) -> [f64; 2] {
        let t = &self.transition;
        [
            t[0][0] * z[0] + t[0][1] * z[1] + self.affine[0],
            t[1][0] * z[0] + t[1][1] * z[1] + self.affine[1],
        ]
    }

    /// Fixed point `(I - A)^{-1} a`, if `I - A` is invertible.
    pub fn fixed_point(&self) -> Option<[f64; 2]> {
        let t = &self.transition;
        let (a11, a12, a21, a22) = (1.0 - t[0][0], -t[0][1], -t[1][0], 1.0 - t[1][1]);
        let det = a11 * a22 - a12 * a21;
        if det == 0.0 || !det.is_finite() {
            return None;
        }
        let [b1, b2] = self.affine;
        Some([(a22 * b1 - a12 * b2) / det, (a11 * b2 - a21 * b1) / det])
    }
}

fn check_denominator(den: f64, s: f64, pq: f64, gamma_dt: f64) -> Result<()> {
    if den.abs() < 1e-12 * s.abs().max(pq.abs()) {
        Err(OcpError::SingularPropagation { gamma_dt })
    } else {
        Ok(())
    }
}

pub fn propagation_mp(params: &LinearOcpParams, dt: f64) -> Result<PropagationForm> {
    params.validate()?;
    let MpCoefficients { p, q, s } = assemble_mp(params, dt)?;
    let den = s + p * q;
    check_denominator(den, s, p * q, params.gamma() * dt)?;
    let c = -1.0 / den;
    let (a, vt) = (params.a, params.vt);
    Ok(PropagationForm {
        transition: [
            [c * (s + q * q), -c * s * (p - q)],
            [-c * (p - q), c * (s + p * p)],
        ],
        affine: [2.0 * c * (q * a - s * vt), 2.0 * c * (a + p * vt)],
        scheme: SchemeKind::MidPoint,
    })
}

pub fn propagation_ie(params: &LinearOcpParams, dt: f64) -> Result<PropagationForm> {
    params.validate()?;
    let IeCoefficients { p, q, r, s } = assemble_ie(params, dt)?;
    let den = s + p * q;
    check_denominator(den, s, p * q, params.gamma() * dt)?;
    let c = -r / den;
    let (a, vt) = (params.a, params.vt);
    Ok(PropagationForm {
        transition: [[-c * q, -c * s], [-c, c * p]],
        affine: [-(q * a - s * vt) / den, -(a + p * vt) / den],
        scheme: SchemeKind::ImplicitEuler,
    })
}

pub fn propagation(params: &LinearOcpParams, dt: f64, kind: SchemeKind) -> Result<PropagationForm> {
    match kind {
        SchemeKind::MidPoint => propagation_mp(params, dt),
        SchemeKind::ImplicitEuler => propagation_ie(params, dt),
    }
}

/// Iterates the recurrence `steps` times from `z0`; returns all `steps + 1` iterates.
pub fn propagate(form: &PropagationForm, z0: [f64; 2], steps: usize) -> Result<Vec<[f64; 2]>> {
    let mut out = Vec::with_capacity(steps + 1);
    out.push(z0);
    let mut z = z0;
    for step in 1..=steps {
        z = form.apply(z);
        if !(z[0].abs() <= BLOW_UP_MAGNITUDE && z[1].abs() <= BLOW_UP_MAGNITUDE) {
            return Err(OcpError::BlowUp { step });
        }
        out.push(z);
    }
    Ok(out)
}

/// Solves the discrete two-point problem for any `tau` in `[0, 1/2]` as one
/// banded system in the unknowns `(v_0, lambda_0, v_1, lambda_1, ...)`.
pub fn solve_bvp(
    params: &LinearOcpParams,
    grid: &TimeGrid,
    scheme: Scheme,
) -> Result<ScalarTrajectory> {
    params.validate()?;
    let dt = grid.dt();
    let steps = grid.steps();
    let dim = 2 * (steps + 1);
    let k = params.b / params.m;
    let s = 1.0 / (params.alpha * params.m * params.m);
    let (wp, wn) = scheme.weights();

    let mut mat = BandedMatrix::zeros(dim, 2, 2);
    let mut rhs = vec![0.0; dim];
    mat.add(0, 0, 1.0);
    rhs[0] = params.v0;
    for n in 1..=steps {
        let (v_prev, l_prev, v_next, l_next) = (2 * n - 2, 2 * n - 1, 2 * n, 2 * n + 1);

        let row = 2 * n - 1;
        mat.add(row, l_next, 1.0 / dt - k * wn);
        mat.add(row, l_prev, -1.0 / dt - k * wp);
        mat.add(row, v_prev, wp);
        mat.add(row, v_next, wn);
        rhs[row] = params.vt;

        let row = 2 * n;
        mat.add(row, v_next, 1.0 / dt + k * wn);
        mat.add(row, v_prev, -1.0 / dt + k * wp);
        mat.add(row, l_prev, s * wp);
        mat.add(row, l_next, s * wn);
        rhs[row] = -params.a;
    }
    mat.add(dim - 1, dim - 1, 1.0);

    let z = solve_banded(mat, &rhs).map_err(|e| match e {
        OcpError::SingularSystem { pivot, .. } => OcpError::SingularSystem {
            pivot,
            gamma_dt: Some(params.gamma() * dt),
        },
        other => other,
    })?;

    let mut state: Vec<f64> = z.iter().step_by(2).copied().collect();
    state[0] = params.v0;
    let mut adjoint: Vec<f64> = z.iter().skip(1).step_by(2).copied().collect();
    adjoint[steps] = 0.0;
    let control = adjoint
        .iter()
        .map(|l| -l / (params.alpha * params.m))
        .collect();
    Ok(ScalarTrajectory {
        grid: *grid,
        state,
        adjoint,
        control,
    })
}

/// Largest residual of the discrete equations (control included), each row
/// scaled by the magnitude of its terms.
pub fn discrete_residual(
    params: &LinearOcpParams,
    traj: &ScalarTrajectory,
    scheme: Scheme,
) -> f64 {
    let dt = traj.grid.dt();
    let k = params.b / params.m;
    let (wp, wn) = scheme.weights();
    let stage = |x: &[f64], n: usize| wp * x[n - 1] + wn * x[n];
    let (v, l, u) = (&traj.state, &traj.adjoint, &traj.control);
    let mut worst = (v[0] - params.v0).abs() / params.scale();
    worst = worst.max(l[l.len() - 1].abs());
    for n in 1..v.len() {
        let terms = [
            (l[n] - l[n - 1]) / dt,
            -k * stage(l, n),
            stage(v, n) - params.vt,
        ];
        worst = worst.max(scaled_sum(&terms));
        let terms = [
            (v[n] - v[n - 1]) / dt,
            k * stage(v, n),
            -stage(u, n) / params.m,
            params.a,
        ];
        worst = worst.max(scaled_sum(&terms));
        let terms = [stage(u, n), stage(l, n) / (params.alpha * params.m)];
        worst = worst.max(scaled_sum(&terms));
    }
    worst
}

fn scaled_sum(terms: &[f64]) -> f64 {
    let sum: f64 = terms.iter().sum();
    let scale = terms.iter().fold(1f64, |acc, t| acc.max(t.abs()));
    sum.abs() / scale
}
