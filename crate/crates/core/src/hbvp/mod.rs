//! Tau-scheme discretization of the Euler-Lagrange boundary-value problem for
//! general dynamics `x' = f(x, u)`, solved with Newton's method on the banded
//! block system.
//!
//! Unknowns are packed node by node as `[x_n, lambda_n, u_n]`. Residual rows
//! come in the same block layout:
//!
//! ```text
//! node 0 : x_0 - x_o,  alpha Q u_0 + f_u(x_0, u_0)^T lambda_0
//! step n : (lambda_{n-1} - lambda_n)/dt - R (x_s - x_t) - f_x(x_s, u_s)^T lambda_s
//!          (x_n - x_{n-1})/dt - f(x_s, u_s)
//!          alpha Q u_s + f_u(x_s, u_s)^T lambda_s
//! end    : lambda_N
//! ```
//!
//! where `(.)_s = tau (.)_{n-1} + (1 - tau) (.)_n`. The stage control rows
//! only fix `N` of the `N + 1` nodal controls; the nodal stationarity row at
//! node 0 closes the system.

mod linear;
mod pendulum;

pub use linear::{linear_problem, LinearPropelledBody};
pub use pendulum::{
    pendulum_problem, spring_energy, spring_gradient, ElasticPendulum, PendulumParams,
};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::banded::BandedMatrix;
use crate::error::{OcpError, Result};
use crate::grid::{Scheme, TimeGrid};
use crate::trajectory::VectorTrajectory;

/// Second derivatives of `lambda^T f(x, u)` for fixed `lambda`.
#[derive(Debug, Clone, PartialEq)]
pub struct AdjointHessian {
    /// `n_x x n_x`
    pub xx: DMatrix<f64>,
    /// `n_x x n_u`
    pub xu: DMatrix<f64>,
    /// `n_u x n_u`
    pub uu: DMatrix<f64>,
}

impl AdjointHessian {
    pub fn zeros(state_dim: usize, control_dim: usize) -> Self {
        Self {
            xx: DMatrix::zeros(state_dim, state_dim),
            xu: DMatrix::zeros(state_dim, control_dim),
            uu: DMatrix::zeros(control_dim, control_dim),
        }
    }
}

pub trait Dynamics {
    fn state_dim(&self) -> usize;
    fn control_dim(&self) -> usize;
    fn rhs(&self, x: &DVector<f64>, u: &DVector<f64>) -> Result<DVector<f64>>;
    fn state_jacobian(&self, x: &DVector<f64>, u: &DVector<f64>) -> Result<DMatrix<f64>>;
    fn control_jacobian(&self, x: &DVector<f64>, u: &DVector<f64>) -> Result<DMatrix<f64>>;
    fn adjoint_hessian(
        &self,
        x: &DVector<f64>,
        u: &DVector<f64>,
        lambda: &DVector<f64>,
    ) -> Result<AdjointHessian>;
}

/// Minimise `int 1/2 (x - x_t)^T R (x - x_t) + alpha/2 u^T Q u dt` subject to
/// `x' = f(x, u)`, `x(0) = x_o`.
#[derive(Debug, Clone)]
pub struct ControlProblem<D> {
    pub dynamics: D,
    pub output_weight: DMatrix<f64>,
    pub input_weight: DMatrix<f64>,
    pub target: DVector<f64>,
    pub alpha: f64,
    pub initial_state: DVector<f64>,
    pub final_time: f64,
}

fn check_psd(name: &str, m: &DMatrix<f64>, dim: usize) -> Result<()> {
    if m.nrows() != dim || m.ncols() != dim {
        return Err(OcpError::Config(format!(
            "{name} must be {dim}x{dim}, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    let scale = m.amax().max(1.0);
    if (m - m.transpose()).amax() > 1e-12 * scale {
        return Err(OcpError::Config(format!("{name} must be symmetric")));
    }
    if m.clone().symmetric_eigenvalues().min() < -1e-12 * scale {
        return Err(OcpError::Config(format!("{name} must be positive semidefinite")));
    }
    Ok(())
}

impl<D: Dynamics> ControlProblem<D> {
    pub fn new(
        dynamics: D,
        output_weight: DMatrix<f64>,
        input_weight: DMatrix<f64>,
        target: DVector<f64>,
        alpha: f64,
        initial_state: DVector<f64>,
        final_time: f64,
    ) -> Result<Self> {
        let problem = Self {
            dynamics,
            output_weight,
            input_weight,
            target,
            alpha,
            initial_state,
            final_time,
        };
        problem.validate()?;
        Ok(problem)
    }

    pub fn validate(&self) -> Result<()> {
        let (nx, nu) = (self.state_dim(), self.control_dim());
        if nx == 0 || nu == 0 {
            return Err(OcpError::Config("state and control dimensions must be positive".into()));
        }
        check_psd("R", &self.output_weight, nx)?;
        check_psd("Q", &self.input_weight, nu)?;
        if self.target.len() != nx || self.initial_state.len() != nx {
            return Err(OcpError::Config(format!(
                "target and initial state must have dimension {nx}"
            )));
        }
        if !(self.alpha.is_finite() && self.alpha > 0.0) {
            return Err(OcpError::Config(format!("alpha must be positive, got {}", self.alpha)));
        }
        if !(self.final_time.is_finite() && self.final_time > 0.0) {
            return Err(OcpError::Config(format!(
                "final time must be positive, got {}",
                self.final_time
            )));
        }
        Ok(())
    }

    pub fn state_dim(&self) -> usize {
        self.dynamics.state_dim()
    }

    pub fn control_dim(&self) -> usize {
        self.dynamics.control_dim()
    }

    fn block_size(&self) -> usize {
        2 * self.state_dim() + self.control_dim()
    }

    pub fn with_alpha(&self, alpha: f64) -> Self
    where
        D: Clone,
    {
        Self {
            alpha,
            ..self.clone()
        }
    }
}

pub fn control_hamiltonian<D: Dynamics>(
    problem: &ControlProblem<D>,
    x: &DVector<f64>,
    u: &DVector<f64>,
    lambda: &DVector<f64>,
) -> Result<f64> {
    let (nx, nu) = (problem.state_dim(), problem.control_dim());
    if x.len() != nx || lambda.len() != nx || u.len() != nu {
        return Err(OcpError::Contract(format!(
            "expected state/adjoint of dimension {nx} and control of dimension {nu}"
        )));
    }
    let e = x - &problem.target;
    let f = problem.dynamics.rhs(x, u)?;
    Ok(0.5 * e.dot(&(&problem.output_weight * &e))
        + 0.5 * problem.alpha * u.dot(&(&problem.input_weight * u))
        + lambda.dot(&f))
}

/// Hamiltonian evaluated at every node.
pub fn nodal_hamiltonian<D: Dynamics>(
    problem: &ControlProblem<D>,
    traj: &VectorTrajectory,
) -> Result<Vec<f64>> {
    (0..traj.state.len())
        .map(|n| control_hamiltonian(problem, &traj.state[n], &traj.control[n], &traj.adjoint[n]))
        .collect()
}

struct Stage {
    x: DVector<f64>,
    lambda: DVector<f64>,
    u: DVector<f64>,
}

fn stage(traj: &VectorTrajectory, n: usize, scheme: Scheme) -> Stage {
    let (wp, wn) = scheme.weights();
    Stage {
        x: &traj.state[n - 1] * wp + &traj.state[n] * wn,
        lambda: &traj.adjoint[n - 1] * wp + &traj.adjoint[n] * wn,
        u: &traj.control[n - 1] * wp + &traj.control[n] * wn,
    }
}

fn check_trajectory<D: Dynamics>(problem: &ControlProblem<D>, traj: &VectorTrajectory) -> Result<()> {
    traj.check_dims(problem.state_dim(), problem.control_dim())?;
    let t = traj.grid.final_time();
    if (t - problem.final_time).abs() > 1e-12 * problem.final_time {
        return Err(OcpError::Contract(format!(
            "grid final time {t} differs from problem final time {}",
            problem.final_time
        )));
    }
    Ok(())
}

/// Stacked residual of the discrete optimality system.
pub fn residual<D: Dynamics>(
    problem: &ControlProblem<D>,
    traj: &VectorTrajectory,
    scheme: Scheme,
) -> Result<DVector<f64>> {
    check_trajectory(problem, traj)?;
    let (nx, nu) = (problem.state_dim(), problem.control_dim());
    let block = problem.block_size();
    let steps = traj.grid.steps();
    let dt = traj.grid.dt();
    let dyn_ = &problem.dynamics;
    let aq = &problem.input_weight * problem.alpha;
    let mut r = DVector::zeros(block * (steps + 1));

    r.rows_mut(0, nx)
        .copy_from(&(&traj.state[0] - &problem.initial_state));
    let fu0 = dyn_.control_jacobian(&traj.state[0], &traj.control[0])?;
    r.rows_mut(nx, nu)
        .copy_from(&(&aq * &traj.control[0] + fu0.tr_mul(&traj.adjoint[0])));

    for n in 1..=steps {
        let s = stage(traj, n, scheme);
        let base = nx + nu + (n - 1) * block;
        let f = dyn_.rhs(&s.x, &s.u)?;
        let fx = dyn_.state_jacobian(&s.x, &s.u)?;
        let fu = dyn_.control_jacobian(&s.x, &s.u)?;
        let adjoint = (&traj.adjoint[n - 1] - &traj.adjoint[n]) / dt
            - &problem.output_weight * (&s.x - &problem.target)
            - fx.tr_mul(&s.lambda);
        let state = (&traj.state[n] - &traj.state[n - 1]) / dt - f;
        let control = &aq * &s.u + fu.tr_mul(&s.lambda);
        r.rows_mut(base, nx).copy_from(&adjoint);
        r.rows_mut(base + nx, nx).copy_from(&state);
        r.rows_mut(base + 2 * nx, nu).copy_from(&control);
    }
    r.rows_mut(block * (steps + 1) - nx, nx)
        .copy_from(&traj.adjoint[steps]);
    Ok(r)
}

/// Bandwidths `(lower, upper)` of the Newton matrix.
pub fn jacobian_bandwidths(state_dim: usize, control_dim: usize) -> (usize, usize) {
    let block = 2 * state_dim + control_dim;
    (
        state_dim + control_dim + block - 1,
        2 * block - 1 - state_dim - control_dim,
    )
}

fn add_block(mat: &mut BandedMatrix, row: usize, col: usize, block: &DMatrix<f64>, scale: f64) {
    if scale == 0.0 {
        return;
    }
    for i in 0..block.nrows() {
        for j in 0..block.ncols() {
            let v = block[(i, j)];
            if v != 0.0 {
                mat.add(row + i, col + j, scale * v);
            }
        }
    }
}

/// Analytic Jacobian of [`residual`] with respect to the packed unknowns.
pub fn residual_jacobian<D: Dynamics>(
    problem: &ControlProblem<D>,
    traj: &VectorTrajectory,
    scheme: Scheme,
) -> Result<BandedMatrix> {
    check_trajectory(problem, traj)?;
    let (nx, nu) = (problem.state_dim(), problem.control_dim());
    let block = problem.block_size();
    let steps = traj.grid.steps();
    let dt = traj.grid.dt();
    let dyn_ = &problem.dynamics;
    let (lower, upper) = jacobian_bandwidths(nx, nu);
    let mut mat = BandedMatrix::zeros(block * (steps + 1), lower, upper);
    let eye = DMatrix::<f64>::identity(nx, nx);
    let aq = &problem.input_weight * problem.alpha;

    for i in 0..nx {
        mat.add(i, i, 1.0);
    }
    let (x0, l0, u0) = (&traj.state[0], &traj.adjoint[0], &traj.control[0]);
    let fu0 = dyn_.control_jacobian(x0, u0)?;
    let h0 = dyn_.adjoint_hessian(x0, u0, l0)?;
    add_block(&mut mat, nx, 0, &h0.xu.transpose(), 1.0);
    add_block(&mut mat, nx, nx, &fu0.transpose(), 1.0);
    add_block(&mut mat, nx, 2 * nx, &(&aq + &h0.uu), 1.0);

    let (wp, wn) = scheme.weights();
    for n in 1..=steps {
        let s = stage(traj, n, scheme);
        let fx = dyn_.state_jacobian(&s.x, &s.u)?;
        let fu = dyn_.control_jacobian(&s.x, &s.u)?;
        let h = dyn_.adjoint_hessian(&s.x, &s.u, &s.lambda)?;
        let adj_x = -(&problem.output_weight + &h.xx);
        let adj_l = fx.transpose();
        let ctl_x = h.xu.transpose();
        let ctl_l = fu.transpose();
        let ctl_u = &aq + &h.uu;

        let row = nx + nu + (n - 1) * block;
        for (node, w, sign) in [(n - 1, wp, 1.0), (n, wn, -1.0)] {
            let (cx, cl, cu) = (node * block, node * block + nx, node * block + 2 * nx);
            // adjoint rows
            add_block(&mut mat, row, cx, &adj_x, w);
            add_block(&mut mat, row, cl, &eye, sign / dt);
            add_block(&mut mat, row, cl, &adj_l, -w);
            add_block(&mut mat, row, cu, &h.xu, -w);
            // state rows
            add_block(&mut mat, row + nx, cx, &eye, -sign / dt);
            add_block(&mut mat, row + nx, cx, &fx, -w);
            add_block(&mut mat, row + nx, cu, &fu, -w);
            // control rows
            add_block(&mut mat, row + 2 * nx, cx, &ctl_x, w);
            add_block(&mut mat, row + 2 * nx, cl, &ctl_l, w);
            add_block(&mut mat, row + 2 * nx, cu, &ctl_u, w);
        }
    }
    let last = block * (steps + 1) - nx;
    for i in 0..nx {
        mat.add(last + i, steps * block + nx + i, 1.0);
    }
    Ok(mat)
}

/// Central finite-difference Jacobian of [`residual`], with step
/// `rel_step * (1 + |w_j|)` per unknown.
pub fn residual_jacobian_fd<D: Dynamics>(
    problem: &ControlProblem<D>,
    traj: &VectorTrajectory,
    scheme: Scheme,
    rel_step: f64,
) -> Result<DMatrix<f64>> {
    check_trajectory(problem, traj)?;
    let (nx, nu) = (problem.state_dim(), problem.control_dim());
    let w = traj.to_unknowns();
    let mut jac = DMatrix::zeros(w.len(), w.len());
    for j in 0..w.len() {
        let h = rel_step * (1.0 + w[j].abs());
        let mut wp = w.clone();
        wp[j] += h;
        let mut wm = w.clone();
        wm[j] -= h;
        let rp = residual(problem, &VectorTrajectory::from_unknowns(traj.grid, nx, nu, &wp)?, scheme)?;
        let rm = residual(problem, &VectorTrajectory::from_unknowns(traj.grid, nx, nu, &wm)?, scheme)?;
        jac.set_column(j, &((rp - rm) / (wp[j] - wm[j])));
    }
    Ok(jac)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum JacobianMode {
    Analytic,
    FiniteDifference,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NewtonSettings {
    /// Converged when `|r|_inf <= tolerance * max(1, |r_0|_inf)`.
    pub tolerance: f64,
    pub max_iterations: usize,
    pub jacobian: JacobianMode,
    pub fd_step: f64,
}

impl Default for NewtonSettings {
    fn default() -> Self {
        Self {
            tolerance: 1e-10,
            max_iterations: 50,
            jacobian: JacobianMode::Analytic,
            fd_step: 1e-7,
        }
    }
}

impl NewtonSettings {
    pub fn validate(&self) -> Result<()> {
        if !(self.tolerance.is_finite() && self.tolerance > 0.0) {
            return Err(OcpError::Config(format!(
                "tolerance must be positive, got {}",
                self.tolerance
            )));
        }
        if self.max_iterations == 0 {
            return Err(OcpError::Config("max iterations must be at least 1".into()));
        }
        if !(self.fd_step.is_finite() && self.fd_step > 0.0) {
            return Err(OcpError::Config(format!(
                "finite-difference step must be positive, got {}",
                self.fd_step
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub iterations: usize,
    pub initial_residual: f64,
    pub final_residual: f64,
    /// `|r|_inf` before each iteration and after the last.
    pub history: Vec<f64>,
}

fn newton_matrix<D: Dynamics>(
    problem: &ControlProblem<D>,
    traj: &VectorTrajectory,
    scheme: Scheme,
    settings: &NewtonSettings,
) -> Result<BandedMatrix> {
    match settings.jacobian {
        JacobianMode::Analytic => residual_jacobian(problem, traj, scheme),
        JacobianMode::FiniteDifference => {
            let dense = residual_jacobian_fd(problem, traj, scheme, settings.fd_step)?;
            let (lower, upper) = jacobian_bandwidths(problem.state_dim(), problem.control_dim());
            let n = dense.nrows();
            let mut mat = BandedMatrix::zeros(n, lower, upper);
            for i in 0..n {
                for j in i.saturating_sub(lower)..(i + upper + 1).min(n) {
                    mat.set(i, j, dense[(i, j)]);
                }
            }
            Ok(mat)
        }
    }
}

pub fn newton_solve<D: Dynamics>(
    problem: &ControlProblem<D>,
    scheme: Scheme,
    settings: &NewtonSettings,
    guess: VectorTrajectory,
) -> Result<(VectorTrajectory, SolveReport)> {
    problem.validate()?;
    settings.validate()?;
    let (nx, nu) = (problem.state_dim(), problem.control_dim());
    let mut traj = guess;
    let mut r = residual(problem, &traj, scheme)?;
    let initial = r.amax();
    let target = settings.tolerance * initial.max(1.0);
    let mut history = vec![initial];
    let mut iterations = 0;
    loop {
        let norm = *history.last().unwrap();
        if !norm.is_finite() || (iterations == settings.max_iterations && norm > target) {
            return Err(OcpError::Convergence {
                iterations,
                last_residual: norm,
                history,
            });
        }
        if norm <= target {
            break;
        }
        let lu = newton_matrix(problem, &traj, scheme, settings)?.factorize()?;
        let neg: Vec<f64> = r.iter().map(|v| -v).collect();
        let step = lu.solve(&neg)?;
        let w = traj.to_unknowns() + DVector::from_vec(step);
        traj = VectorTrajectory::from_unknowns(traj.grid, nx, nu, &w)?;
        iterations += 1;
        r = match residual(problem, &traj, scheme) {
            Ok(r) => r,
            Err(OcpError::SingularConfiguration(_)) => DVector::from_element(1, f64::NAN),
            Err(e) => return Err(e),
        };
        history.push(r.amax());
    }
    Ok((
        traj,
        SolveReport {
            iterations,
            initial_residual: initial,
            final_residual: *history.last().unwrap(),
            history,
        },
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContinuationSettings {
    /// Weight of the first solve; targets at or above it are solved directly.
    pub start_alpha: f64,
    /// Initial ratio between consecutive weights.
    pub factor: f64,
    /// Give up once a failed stage has shrunk the ratio below this.
    pub min_factor: f64,
    pub max_stages: usize,
}

impl Default for ContinuationSettings {
    fn default() -> Self {
        Self {
            start_alpha: 10.0,
            factor: 10f64.powf(0.125),
            min_factor: 1.001,
            max_stages: 500,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContinuationReport {
    /// Weights of the successful stages, ending at the target.
    pub alphas: Vec<f64>,
    pub total_iterations: usize,
    /// Report of the final stage.
    pub last: SolveReport,
}

/// Solves at `start_alpha` from `guess`, then lowers alpha geometrically to
/// the target, warm-starting each stage from the previous solution and
/// shrinking the ratio whenever a stage fails.
pub fn solve_with_continuation<D: Dynamics + Clone>(
    problem: &ControlProblem<D>,
    scheme: Scheme,
    settings: &NewtonSettings,
    continuation: &ContinuationSettings,
    guess: VectorTrajectory,
) -> Result<(VectorTrajectory, ContinuationReport)> {
    problem.validate()?;
    if !(continuation.factor > continuation.min_factor && continuation.min_factor > 1.0) {
        return Err(OcpError::Config(
            "continuation factor must exceed min_factor > 1".into(),
        ));
    }
    let target = problem.alpha;
    let mut alpha = continuation.start_alpha.max(target);
    let (mut traj, first) = newton_solve(&problem.with_alpha(alpha), scheme, settings, guess)?;
    let mut alphas = vec![alpha];
    let mut total_iterations = first.iterations;
    let mut last = first;
    let mut factor = continuation.factor;
    let mut attempts = 1;
    while alpha > target {
        if attempts >= continuation.max_stages {
            return Err(OcpError::Convergence {
                iterations: total_iterations,
                last_residual: last.final_residual,
                history: last.history,
            });
        }
        attempts += 1;
        let mut next = alpha / factor;
        // avoid a near-duplicate final stage from rounding in the ratio
        if next <= target * (1.0 + 1e-6) {
            next = target;
        }
        match newton_solve(&problem.with_alpha(next), scheme, settings, traj.clone()) {
            Ok((t, report)) => {
                total_iterations += report.iterations;
                traj = t;
                last = report;
                alpha = next;
                alphas.push(next);
            }
            Err(e @ (OcpError::Convergence { .. } | OcpError::SingularSystem { .. })) => {
                factor = factor.sqrt();
                if factor < continuation.min_factor {
                    return Err(e);
                }
            }
            Err(e) => return Err(e),
        }
    }
    Ok((
        traj,
        ContinuationReport {
            alphas,
            total_iterations,
            last,
        },
    ))
}

/// States with a nonzero output weight are interpolated linearly from the
/// initial value to the target; all other states stay at their initial
/// values. Adjoints and controls start at zero.
pub fn linear_guess<D: Dynamics>(problem: &ControlProblem<D>, grid: TimeGrid) -> VectorTrajectory {
    let (nx, nu) = (problem.state_dim(), problem.control_dim());
    let mut traj = VectorTrajectory::zeros(grid, nx, nu);
    let tracked: Vec<bool> = (0..nx)
        .map(|i| problem.output_weight.row(i).iter().any(|&v| v != 0.0))
        .collect();
    for (n, x) in traj.state.iter_mut().enumerate() {
        let s = n as f64 / grid.steps() as f64;
        for i in 0..nx {
            let x0 = problem.initial_state[i];
            x[i] = if tracked[i] {
                x0 + s * (problem.target[i] - x0)
            } else {
                x0
            };
        }
    }
    traj
}
