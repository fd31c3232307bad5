//! Elastic pendulum: mass 1 slides along the x-axis with commanded velocity
//! `u`, mass 2 hangs from it on a linear spring under gravity.
//!
//! State `z = (x1, x2x, x2y, v2x, v2y)`, control `u = x1'`:
//!
//! ```text
//! x1'  = u
//! x2'  = v2
//! v2'  = -grad_{x2} U / m2 - a e_y,   U = k/2 (|x2 - x1| - l0)^2
//! ```
//!
//! The cost tracks the height of mass 2 only.

use nalgebra::{DMatrix, DVector, Matrix2, Matrix2x3, Vector2};
use serde::{Deserialize, Serialize};

use super::{AdjointHessian, ControlProblem, Dynamics};
use crate::error::{OcpError, Result};

/// Spring lengths below this are treated as coincident masses.
pub const MIN_SPRING_LENGTH: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PendulumParams {
    /// Carried for completeness; mass 1 is velocity-driven, so its inertia
    /// does not enter the dynamics.
    pub m1: f64,
    pub m2: f64,
    pub k: f64,
    /// Gravity intensity.
    pub a: f64,
    pub rest_length: f64,
    pub x_target: f64,
    pub mass1_start: f64,
    pub mass2_start: [f64; 2],
}

impl PendulumParams {
    /// Rest length defaults to the initial mass separation.
    pub fn new(m1: f64, m2: f64, k: f64, a: f64, x_target: f64, rest_length: Option<f64>) -> Self {
        let mass1_start: f64 = 0.0;
        let mass2_start = [0.3, 1.0];
        let rest_length = rest_length
            .unwrap_or_else(|| (mass2_start[0] - mass1_start).hypot(mass2_start[1]));
        Self {
            m1,
            m2,
            k,
            a,
            rest_length,
            x_target,
            mass1_start,
            mass2_start,
        }
    }

    pub fn reference() -> Self {
        Self::new(1.0, 1.0, 1.0, 1.0, 2.0, None)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("m1", self.m1),
            ("m2", self.m2),
            ("k", self.k),
            ("rest_length", self.rest_length),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(OcpError::Config(format!("{name} must be positive, got {v}")));
            }
        }
        let finite = [self.a, self.x_target, self.mass1_start, self.mass2_start[0], self.mass2_start[1]];
        if finite.iter().any(|v| !v.is_finite()) {
            return Err(OcpError::Config("pendulum parameters must be finite".into()));
        }
        Ok(())
    }

    pub fn initial_state(&self) -> DVector<f64> {
        DVector::from_vec(vec![
            self.mass1_start,
            self.mass2_start[0],
            self.mass2_start[1],
            0.0,
            0.0,
        ])
    }
}

pub fn spring_energy(x1: [f64; 2], x2: [f64; 2], k: f64, rest_length: f64) -> f64 {
    let l = (x2[0] - x1[0]).hypot(x2[1] - x1[1]);
    0.5 * k * (l - rest_length).powi(2)
}

/// Gradients of the spring energy with respect to `x1` and `x2`.
pub fn spring_gradient(
    x1: [f64; 2],
    x2: [f64; 2],
    k: f64,
    rest_length: f64,
) -> Result<([f64; 2], [f64; 2])> {
    let d = [x2[0] - x1[0], x2[1] - x1[1]];
    let l = d[0].hypot(d[1]);
    if l < MIN_SPRING_LENGTH {
        return Err(OcpError::SingularConfiguration(format!(
            "masses coincide (spring length {l:e})"
        )));
    }
    let c = k * (l - rest_length) / l;
    Ok(([-c * d[0], -c * d[1]], [c * d[0], c * d[1]]))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ElasticPendulum {
    pub m2: f64,
    pub k: f64,
    pub a: f64,
    pub rest_length: f64,
}

/// `d(x2 - x1) / d(x1, x2x, x2y)`.
fn separation_map() -> Matrix2x3<f64> {
    Matrix2x3::new(-1.0, 1.0, 0.0, 0.0, 0.0, 1.0)
}

impl ElasticPendulum {
    fn separation(&self, x: &DVector<f64>) -> Result<(Vector2<f64>, f64)> {
        let d = Vector2::new(x[1] - x[0], x[2]);
        let l = d.norm();
        if l < MIN_SPRING_LENGTH {
            return Err(OcpError::SingularConfiguration(format!(
                "masses coincide (spring length {l:e})"
            )));
        }
        Ok((d, l))
    }

    /// Hessian of `U` with respect to the separation.
    fn spring_hessian(&self, d: &Vector2<f64>, l: f64) -> Matrix2<f64> {
        let r = self.rest_length / l;
        Matrix2::identity() * (self.k * (1.0 - r)) + d * d.transpose() * (self.k * r / (l * l))
    }
}

impl Dynamics for ElasticPendulum {
    fn state_dim(&self) -> usize {
        5
    }

    fn control_dim(&self) -> usize {
        1
    }

    fn rhs(&self, x: &DVector<f64>, u: &DVector<f64>) -> Result<DVector<f64>> {
        let (d, l) = self.separation(x)?;
        let g = d * (self.k * (1.0 - self.rest_length / l));
        Ok(DVector::from_vec(vec![
            u[0],
            x[3],
            x[4],
            -g[0] / self.m2,
            -g[1] / self.m2 - self.a,
        ]))
    }

    fn state_jacobian(&self, x: &DVector<f64>, _u: &DVector<f64>) -> Result<DMatrix<f64>> {
        let (d, l) = self.separation(x)?;
        let block = self.spring_hessian(&d, l) * separation_map() * (-1.0 / self.m2);
        let mut j = DMatrix::zeros(5, 5);
        j[(1, 3)] = 1.0;
        j[(2, 4)] = 1.0;
        j.view_mut((3, 0), (2, 3)).copy_from(&block);
        Ok(j)
    }

    fn control_jacobian(&self, _x: &DVector<f64>, _u: &DVector<f64>) -> Result<DMatrix<f64>> {
        let mut j = DMatrix::zeros(5, 1);
        j[(0, 0)] = 1.0;
        Ok(j)
    }

    fn adjoint_hessian(
        &self,
        x: &DVector<f64>,
        _u: &DVector<f64>,
        lambda: &DVector<f64>,
    ) -> Result<AdjointHessian> {
        let (d, l) = self.separation(x)?;
        let w = Vector2::new(lambda[3], lambda[4]) * (-1.0 / self.m2);
        let dw = d.dot(&w);
        let c = self.k * self.rest_length / (l * l * l);
        let mut t = Matrix2::zeros();
        for i in 0..2 {
            for j in 0..2 {
                let delta = if i == j { dw } else { 0.0 };
                t[(i, j)] = c * (w[i] * d[j] + d[i] * w[j] + delta - 3.0 * d[i] * d[j] * dw / (l * l));
            }
        }
        let map = separation_map();
        let mut h = AdjointHessian::zeros(5, 1);
        h.xx.view_mut((0, 0), (3, 3))
            .copy_from(&(map.transpose() * t * map));
        Ok(h)
    }
}

pub fn pendulum_problem(
    params: &PendulumParams,
    alpha: f64,
    final_time: f64,
) -> Result<ControlProblem<ElasticPendulum>> {
    params.validate()?;
    let mut r = DMatrix::zeros(5, 5);
    r[(2, 2)] = 1.0;
    let mut target = DVector::zeros(5);
    target[2] = params.x_target;
    ControlProblem::new(
        ElasticPendulum {
            m2: params.m2,
            k: params.k,
            a: params.a,
            rest_length: params.rest_length,
        },
        r,
        DMatrix::identity(1, 1),
        target,
        alpha,
        params.initial_state(),
        final_time,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{Scheme, TimeGrid};
    use crate::hbvp::{residual, residual_jacobian, residual_jacobian_fd};
    use crate::trajectory::VectorTrajectory;
    use rand::{rngs::StdRng, Rng, SeedableRng};

    #[test]
    fn default_rest_length_is_initial_separation() {
        let p = PendulumParams::reference();
        assert!((p.rest_length - 1.044_030_650_891_055).abs() < 1e-15);
        let (g1, g2) = spring_gradient([0.0, 0.0], [0.3, 1.0], 1.0, p.rest_length).unwrap();
        assert!(g1.iter().chain(&g2).all(|v| v.abs() < 1e-15));
    }

    #[test]
    fn stretched_spring_gradient() {
        let (g1, g2) = spring_gradient([0.0, 0.0], [0.0, 2.0], 1.0, 1.0).unwrap();
        assert_eq!(g1, [0.0, -1.0]);
        assert_eq!(g2, [0.0, 1.0]);
    }

    #[test]
    fn coincident_masses_are_rejected() {
        assert!(matches!(
            spring_gradient([1.0, 1.0], [1.0, 1.0], 1.0, 1.0),
            Err(OcpError::SingularConfiguration(_))
        ));
        let dynamics = pendulum_problem(&PendulumParams::reference(), 1.0, 4.0).unwrap().dynamics;
        let x = DVector::from_vec(vec![0.5, 0.5, 0.0, 0.0, 0.0]);
        assert!(dynamics.rhs(&x, &DVector::zeros(1)).is_err());
    }

    #[test]
    fn gradient_matches_energy_differences() {
        let mut rng = StdRng::seed_from_u64(7);
        for _ in 0..20 {
            let x1 = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
            let x2 = [rng.random_range(-1.0..1.0), rng.random_range(1.5..2.5)];
            let (k, l0) = (rng.random_range(0.5..2.0), rng.random_range(0.5..1.5));
            let (g1, g2) = spring_gradient(x1, x2, k, l0).unwrap();
            for i in 0..2 {
                let h = 1e-6;
                let (mut p, mut m) = (x2, x2);
                p[i] += h;
                m[i] -= h;
                let fd = (spring_energy(x1, p, k, l0) - spring_energy(x1, m, k, l0)) / (2.0 * h);
                assert!((fd - g2[i]).abs() <= 1e-6 * g2[i].abs().max(1.0));
                assert_eq!(g1[i], -g2[i]);
            }
        }
    }

    #[test]
    fn unstressed_equilibrium_rows_vanish() {
        let mut p = PendulumParams::reference();
        p.a = 0.0;
        p.x_target = p.mass2_start[1];
        let problem = pendulum_problem(&p, 1.0, 1.0).unwrap();
        let grid = TimeGrid::new(1.0, 4).unwrap();
        let mut traj = VectorTrajectory::zeros(grid, 5, 1);
        for x in &mut traj.state {
            x.copy_from(&problem.initial_state);
        }
        let r = residual(&problem, &traj, Scheme::MID_POINT).unwrap();
        assert_eq!(r.amax(), 0.0);
    }

    #[test]
    fn analytic_jacobian_matches_fd() {
        let mut rng = StdRng::seed_from_u64(11);
        for steps in 2..=5 {
            let problem = pendulum_problem(&PendulumParams::reference(), 0.05, 1.0).unwrap();
            let grid = TimeGrid::new(1.0, steps).unwrap();
            let mut traj = VectorTrajectory::zeros(grid, 5, 1);
            for n in 0..=steps {
                for i in 0..5 {
                    traj.state[n][i] = problem.initial_state[i] + rng.random_range(-0.3..0.3);
                    traj.adjoint[n][i] = rng.random_range(-1.0..1.0);
                }
                traj.control[n][0] = rng.random_range(-1.0..1.0);
            }
            for scheme in [Scheme::MID_POINT, Scheme::IMPLICIT_EULER] {
                let a = residual_jacobian(&problem, &traj, scheme).unwrap().to_dense();
                let f = residual_jacobian_fd(&problem, &traj, scheme, 1e-6).unwrap();
                let err = (&a - &f).amax() / a.amax();
                assert!(err < 1e-7, "steps {steps}: {err:e}");
            }
        }
    }
}
