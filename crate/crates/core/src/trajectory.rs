use nalgebra::DVector;

use crate::error::{OcpError, Result};
use crate::grid::TimeGrid;

/// Nodal state, adjoint and control of a scalar problem.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarTrajectory {
    pub grid: TimeGrid,
    pub state: Vec<f64>,
    pub adjoint: Vec<f64>,
    pub control: Vec<f64>,
}

impl ScalarTrajectory {
    pub fn len(&self) -> usize {
        self.state.len()
    }

    pub fn is_empty(&self) -> bool {
        self.state.is_empty()
    }

    /// Stacked nodal pairs `z_n = (v_n, lambda_n)`.
    pub fn pairs(&self) -> Vec<[f64; 2]> {
        self.state
            .iter()
            .zip(&self.adjoint)
            .map(|(&v, &l)| [v, l])
            .collect()
    }
}

/// Nodal state, adjoint and control vectors of a general problem.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorTrajectory {
    pub grid: TimeGrid,
    pub state: Vec<DVector<f64>>,
    pub adjoint: Vec<DVector<f64>>,
    pub control: Vec<DVector<f64>>,
}

impl VectorTrajectory {
    pub fn zeros(grid: TimeGrid, state_dim: usize, control_dim: usize) -> Self {
        let nodes = grid.node_count();
        Self {
            grid,
            state: vec![DVector::zeros(state_dim); nodes],
            adjoint: vec![DVector::zeros(state_dim); nodes],
            control: vec![DVector::zeros(control_dim); nodes],
        }
    }

    pub fn state_dim(&self) -> usize {
        self.state.first().map_or(0, |x| x.len())
    }

    pub fn control_dim(&self) -> usize {
        self.control.first().map_or(0, |u| u.len())
    }

    /// Unknowns per node: state, adjoint, control.
    pub fn block_size(&self) -> usize {
        2 * self.state_dim() + self.control_dim()
    }

    pub fn check_dims(&self, state_dim: usize, control_dim: usize) -> Result<()> {
        let nodes = self.grid.node_count();
        if self.state.len() != nodes || self.adjoint.len() != nodes || self.control.len() != nodes
        {
            return Err(OcpError::Contract(format!(
                "trajectory has {}/{}/{} nodes, grid has {nodes}",
                self.state.len(),
                self.adjoint.len(),
                self.control.len()
            )));
        }
        let ok = self.state.iter().all(|x| x.len() == state_dim)
            && self.adjoint.iter().all(|l| l.len() == state_dim)
            && self.control.iter().all(|u| u.len() == control_dim);
        if !ok {
            return Err(OcpError::Contract(format!(
                "trajectory dimensions do not match state dimension {state_dim} and control dimension {control_dim}"
            )));
        }
        Ok(())
    }

    /// Packs the unknowns node by node as `[x_n, lambda_n, u_n]`.
    pub fn to_unknowns(&self) -> DVector<f64> {
        let block = self.block_size();
        let mut w = DVector::zeros(block * self.state.len());
        for (n, ((x, l), u)) in self
            .state
            .iter()
            .zip(&self.adjoint)
            .zip(&self.control)
            .enumerate()
        {
            let mut k = n * block;
            for v in x.iter().chain(l.iter()).chain(u.iter()) {
                w[k] = *v;
                k += 1;
            }
        }
        w
    }

    pub fn from_unknowns(
        grid: TimeGrid,
        state_dim: usize,
        control_dim: usize,
        w: &DVector<f64>,
    ) -> Result<Self> {
        let block = 2 * state_dim + control_dim;
        if w.len() != block * grid.node_count() {
            return Err(OcpError::Contract(format!(
                "unknown vector has length {}, expected {}",
                w.len(),
                block * grid.node_count()
            )));
        }
        let mut traj = Self::zeros(grid, state_dim, control_dim);
        for n in 0..grid.node_count() {
            let base = n * block;
            traj.state[n] = w.rows(base, state_dim).into_owned();
            traj.adjoint[n] = w.rows(base + state_dim, state_dim).into_owned();
            traj.control[n] = w.rows(base + 2 * state_dim, control_dim).into_owned();
        }
        Ok(traj)
    }

    /// Component `i` of the state across all nodes.
    pub fn state_component(&self, i: usize) -> Vec<f64> {
        self.state.iter().map(|x| x[i]).collect()
    }

    pub fn control_component(&self, i: usize) -> Vec<f64> {
        self.control.iter().map(|u| u[i]).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pack_unpack() {
        let grid = TimeGrid::new(1.0, 3).unwrap();
        let mut t = VectorTrajectory::zeros(grid, 2, 1);
        for n in 0..4 {
            t.state[n] = DVector::from_vec(vec![n as f64, 10.0 + n as f64]);
            t.adjoint[n] = DVector::from_vec(vec![-(n as f64), 0.5]);
            t.control[n] = DVector::from_vec(vec![100.0 * n as f64]);
        }
        let w = t.to_unknowns();
        assert_eq!(w.len(), 20);
        assert_eq!(w[5], 1.0);
        assert_eq!(w[9], 100.0);
        let back = VectorTrajectory::from_unknowns(grid, 2, 1, &w).unwrap();
        assert_eq!(back, t);
        assert!(VectorTrajectory::from_unknowns(grid, 2, 2, &w).is_err());
        assert!(back.check_dims(2, 1).is_ok());
        assert!(back.check_dims(3, 1).is_err());
    }
}
