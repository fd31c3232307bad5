use nalgebra::{DMatrix, DVector};

use super::{AdjointHessian, ControlProblem, Dynamics};
use crate::analytic::LinearOcpParams;
use crate::error::Result;

/// `m v' = -b v + u - m a`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearPropelledBody {
    pub m: f64,
    pub b: f64,
    pub a: f64,
}

impl Dynamics for LinearPropelledBody {
    fn state_dim(&self) -> usize {
        1
    }

    fn control_dim(&self) -> usize {
        1
    }

    fn rhs(&self, x: &DVector<f64>, u: &DVector<f64>) -> Result<DVector<f64>> {
        Ok(DVector::from_element(
            1,
            -self.b / self.m * x[0] + u[0] / self.m - self.a,
        ))
    }

    fn state_jacobian(&self, _x: &DVector<f64>, _u: &DVector<f64>) -> Result<DMatrix<f64>> {
        Ok(DMatrix::from_element(1, 1, -self.b / self.m))
    }

    fn control_jacobian(&self, _x: &DVector<f64>, _u: &DVector<f64>) -> Result<DMatrix<f64>> {
        Ok(DMatrix::from_element(1, 1, 1.0 / self.m))
    }

    fn adjoint_hessian(
        &self,
        _x: &DVector<f64>,
        _u: &DVector<f64>,
        _lambda: &DVector<f64>,
    ) -> Result<AdjointHessian> {
        Ok(AdjointHessian::zeros(1, 1))
    }
}

/// The scalar velocity-tracking problem in general form, `R = Q = [1]`.
pub fn linear_problem(params: &LinearOcpParams) -> Result<ControlProblem<LinearPropelledBody>> {
    params.validate()?;
    let one = DMatrix::from_element(1, 1, 1.0);
    ControlProblem::new(
        LinearPropelledBody {
            m: params.m,
            b: params.b,
            a: params.a,
        },
        one.clone(),
        one,
        DVector::from_element(1, params.vt),
        params.alpha,
        DVector::from_element(1, params.v0),
        params.final_time,
    )
}
