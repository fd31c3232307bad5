//! Fixtures shared by the benchmarks.

use ocpstab_core::hbvp::{linear_guess, pendulum_problem, ControlProblem, ElasticPendulum, PendulumParams};
use ocpstab_core::{LinearOcpParams, TimeGrid, VectorTrajectory};

pub fn linear_case(alpha: f64, steps: usize) -> (LinearOcpParams, TimeGrid) {
    let p = LinearOcpParams::reference(alpha);
    let grid = TimeGrid::new(p.final_time, steps).expect("valid grid");
    (p, grid)
}

pub fn pendulum_case(alpha: f64, steps: usize) -> (ControlProblem<ElasticPendulum>, VectorTrajectory) {
    let problem = pendulum_problem(&PendulumParams::reference(), alpha, 4.0).expect("valid problem");
    let grid = TimeGrid::new(4.0, steps).expect("valid grid");
    let guess = linear_guess(&problem, grid);
    (problem, guess)
}
