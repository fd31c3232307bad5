use std::path::Path;

use serde::Serialize;
use serde_json::json;

use ocpstab_core::hbvp::{
    linear_guess, newton_solve, pendulum_problem, solve_with_continuation, ContinuationSettings,
    NewtonSettings,
};
use ocpstab_core::stability::{log_spaced, stability_report};
use ocpstab_core::{
    oscillation_index, phase_sweep, solve_bvp, AnalyticSolution, LinearOcpParams, Scheme,
    SchemeKind, StabilityReport,
};

use crate::config::{read_json, LinearConfig, PendulumConfig};
use crate::error::CliError;
use crate::output::{fmt_float, fmt_opt, write_json, Csv};

pub fn solve_linear(config: &Path, scheme: Scheme, out: &Path, summary: &Path) -> Result<(), CliError> {
    let cfg: LinearConfig = read_json(config)?;
    let params = cfg.params()?;
    let grid = cfg.grid()?;
    let exact = AnalyticSolution::new(&params)?;
    let traj = solve_bvp(&params, &grid, scheme)?;

    let mut csv = Csv::new(&["t", "v", "lambda", "u", "v_exact", "lambda_exact", "u_exact", "abs_err_v"]);
    let mut max_err = [0f64; 3];
    for (n, t) in grid.times().enumerate() {
        let e = exact.eval(t)?;
        let (v, l, u) = (traj.state[n], traj.adjoint[n], traj.control[n]);
        max_err[0] = max_err[0].max((v - e.v).abs());
        max_err[1] = max_err[1].max((l - e.lambda).abs());
        max_err[2] = max_err[2].max((u - e.u).abs());
        csv.row(&[t, v, l, u, e.v, e.lambda, e.u, (v - e.v).abs()].map(fmt_float));
    }
    let stability: Option<StabilityReport> = scheme
        .kind()
        .map(|kind| stability_report(&params, grid.dt(), kind))
        .transpose()?;
    let summary_json = json!({
        "config": cfg,
        "scheme": scheme.to_string(),
        "steps": grid.steps(),
        "dt": grid.dt(),
        "max_abs_err_v": max_err[0],
        "max_abs_err_lambda": max_err[1],
        "max_abs_err_u": max_err[2],
        "oscillation_index": oscillation_index(&traj.control)?,
        "stability": stability,
    });
    csv.write(out)?;
    write_json(summary, &summary_json)
}

pub fn stability(m: f64, b: f64, alpha: f64, dt: f64, scheme: SchemeKind) -> Result<StabilityReport, CliError> {
    let params = LinearOcpParams {
        m,
        b,
        a: 0.0,
        v0: 0.0,
        vt: 0.0,
        final_time: 1.0,
        alpha,
    };
    Ok(stability_report(&params, dt, scheme)?)
}

pub struct SweepRequest {
    pub scheme: SchemeKind,
    pub alpha_range: (f64, f64),
    pub dt_range: (f64, f64),
    pub n: usize,
    pub jobs: usize,
}

pub fn sweep(req: &SweepRequest, out: &Path) -> Result<(), CliError> {
    let alphas = log_spaced(req.alpha_range.0, req.alpha_range.1, req.n)?;
    let dts = log_spaced(req.dt_range.0, req.dt_range.1, req.n)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(req.jobs)
        .build()
        .map_err(|e| CliError::Config(format!("cannot start {} workers: {e}", req.jobs)))?;
    let base = LinearOcpParams::reference(1.0);
    let diagram = pool.install(|| phase_sweep(&base, &alphas, &dts, req.scheme))?;

    let mut csv = Csv::new(&["alpha", "dt", "class_numeric", "class_analytic", "osc_index", "alpha_th"]);
    for cell in &diagram.cells {
        csv.row(&[
            fmt_float(cell.alpha),
            fmt_float(cell.dt),
            cell.numeric.to_string(),
            cell.analytic.to_string(),
            fmt_opt(cell.oscillation_index),
            fmt_opt(cell.alpha_threshold),
        ]);
    }
    csv.write(out)
}

#[derive(Serialize)]
struct ContinuationSummary {
    used: bool,
    alphas: Vec<f64>,
}

pub fn pendulum(
    config: &Path,
    alpha: Option<f64>,
    continuation: bool,
    out: &Path,
    summary: &Path,
) -> Result<(), CliError> {
    let mut cfg: PendulumConfig = read_json(config)?;
    if let Some(alpha) = alpha {
        cfg.alpha = alpha;
    }
    let params = cfg.params()?;
    let grid = cfg.grid()?;
    let problem = pendulum_problem(&params, cfg.alpha, cfg.final_time)?;
    let guess = linear_guess(&problem, grid);
    let settings = NewtonSettings::default();
    let scheme = Scheme::MID_POINT;

    let (traj, report, total, cont) = match newton_solve(&problem, scheme, &settings, guess.clone()) {
        Ok((traj, report)) => {
            let total = report.iterations;
            (traj, report, total, ContinuationSummary { used: false, alphas: vec![] })
        }
        Err(e) if !continuation => return Err(e.into()),
        Err(_) => {
            let (traj, cr) = solve_with_continuation(
                &problem,
                scheme,
                &settings,
                &ContinuationSettings::default(),
                guess,
            )?;
            (traj, cr.last, cr.total_iterations, ContinuationSummary { used: true, alphas: cr.alphas })
        }
    };

    let mut csv = Csv::new(&["t", "x1", "x2x", "x2y", "v2x", "v2y", "u", "lambda_norm"]);
    for (n, t) in grid.times().enumerate() {
        let x = &traj.state[n];
        csv.row(&[t, x[0], x[1], x[2], x[3], x[4], traj.control[n][0], traj.adjoint[n].norm()].map(fmt_float));
    }
    let summary_json = json!({
        "config": cfg,
        "scheme": scheme.to_string(),
        "steps": grid.steps(),
        "dt": grid.dt(),
        "rest_length": params.rest_length,
        "newton_iterations": report.iterations,
        "total_iterations": total,
        "final_residual": report.final_residual,
        "residual_history": report.history,
        "oscillation_index": oscillation_index(&traj.control_component(0))?,
        "continuation": cont,
    });
    csv.write(out)?;
    write_json(summary, &summary_json)
}
