//! Indirect-method optimal control: closed-form and discrete solutions of a
//! scalar velocity-tracking problem, eigenvalue stability analysis of the
//! mid-point and implicit-Euler discretizations, and a Newton solver for the
//! general discrete Euler-Lagrange system.

pub mod analytic;
pub mod banded;
pub mod discrete;
pub mod error;
pub mod grid;
pub mod hbvp;
pub mod stability;
pub mod trajectory;

pub use analytic::{derive_constants, eval_analytic, AnalyticPoint, AnalyticSolution, LinearOcpParams};
pub use discrete::{solve_bvp, BLOW_UP_MAGNITUDE};
pub use error::{OcpError, Result};
pub use grid::{interpolated_node, Scheme, SchemeKind, TimeGrid};
pub use stability::{
    alpha_threshold, classify, oscillation_index, phase_sweep, stability_report, Classification,
    PhaseCell, PhaseDiagram, StabilityReport,
};
pub use trajectory::{ScalarTrajectory, VectorTrajectory};
