//! Eigenvalues, spectral radii and oscillation thresholds of the mid-point and
//! implicit-Euler step recurrences, a sign-alternation detector, and the
//! `(alpha, dt)` phase sweep.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use crate::analytic::gamma;
use crate::analytic::LinearOcpParams;
use crate::discrete::{solve_bvp, BLOW_UP_MAGNITUDE};
use crate::error::{OcpError, Result};
use crate::grid::{SchemeKind, TimeGrid};

/// Relative distance to a singular point or threshold treated as "on" it.
pub const CLASSIFY_TOLERANCE: f64 = 1e-9;

/// Relative noise floor of [`oscillation_index`].
pub const OSCILLATION_NOISE_FLOOR: f64 = 1e-9;

/// A sweep cell is numerically oscillatory when its index exceeds this value,
/// i.e. at least one interior node alternates above the noise floor.
pub const SWEEP_OSCILLATION_THRESHOLD: f64 = 0.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Classification {
    Smooth,
    Oscillatory,
    BlowUp,
    /// Exactly on the threshold; informational only.
    Boundary,
}

impl Classification {
    pub fn as_str(&self) -> &'static str {
        match self {
            Classification::Smooth => "Smooth",
            Classification::Oscillatory => "Oscillatory",
            Classification::BlowUp => "BlowUp",
            Classification::Boundary => "Boundary",
        }
    }
}

impl std::fmt::Display for Classification {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Value of `gamma * dt` at which the step recurrence is singular.
pub fn singular_gamma_dt(kind: SchemeKind) -> f64 {
    match kind {
        SchemeKind::MidPoint => 2.0,
        SchemeKind::ImplicitEuler => 1.0,
    }
}

fn check_gamma_dt(x: f64, kind: SchemeKind) -> Result<()> {
    if !(x.is_finite() && x > 0.0) {
        return Err(OcpError::Domain(format!("gamma*dt must be positive, got {x}")));
    }
    if x == singular_gamma_dt(kind) {
        return Err(OcpError::SingularPropagation { gamma_dt: x });
    }
    Ok(())
}

/// `((2 + x)/(2 - x), (2 - x)/(2 + x))` with `x = gamma dt`.
pub fn eigenvalues_mp(gamma_dt: f64) -> Result<(f64, f64)> {
    check_gamma_dt(gamma_dt, SchemeKind::MidPoint)?;
    let x = gamma_dt;
    Ok(((2.0 + x) / (2.0 - x), (2.0 - x) / (2.0 + x)))
}

pub fn spectral_radius_mp(gamma_dt: f64) -> Result<f64> {
    check_gamma_dt(gamma_dt, SchemeKind::MidPoint)?;
    Ok((2.0 + gamma_dt) / (2.0 - gamma_dt).abs())
}

/// `(1/(1 + x), 1/(1 - x))` with `x = gamma dt`.
pub fn eigenvalues_ie(gamma_dt: f64) -> Result<(f64, f64)> {
    check_gamma_dt(gamma_dt, SchemeKind::ImplicitEuler)?;
    Ok((1.0 / (1.0 + gamma_dt), 1.0 / (1.0 - gamma_dt)))
}

pub fn spectral_radius_ie(gamma_dt: f64) -> Result<f64> {
    check_gamma_dt(gamma_dt, SchemeKind::ImplicitEuler)?;
    Ok(1.0 / (1.0 - gamma_dt).abs())
}

pub fn eigenvalues(gamma_dt: f64, kind: SchemeKind) -> Result<(f64, f64)> {
    match kind {
        SchemeKind::MidPoint => eigenvalues_mp(gamma_dt),
        SchemeKind::ImplicitEuler => eigenvalues_ie(gamma_dt),
    }
}

pub fn spectral_radius(gamma_dt: f64, kind: SchemeKind) -> Result<f64> {
    match kind {
        SchemeKind::MidPoint => spectral_radius_mp(gamma_dt),
        SchemeKind::ImplicitEuler => spectral_radius_ie(gamma_dt),
    }
}

/// Control weight below which the step eigenvalues turn negative:
/// `dt^2 / (4 m^2 - b^2 dt^2)` (mid-point) or `dt^2 / (m^2 - b^2 dt^2)` (implicit Euler).
pub fn alpha_threshold(kind: SchemeKind, m: f64, b: f64, dt: f64) -> Result<f64> {
    let lead = match kind {
        SchemeKind::MidPoint => 4.0 * m * m,
        SchemeKind::ImplicitEuler => m * m,
    };
    let den = lead - b * b * dt * dt;
    if den > 0.0 {
        Ok(dt * dt / den)
    } else {
        Err(OcpError::NoThreshold { dt })
    }
}

pub fn classify(params: &LinearOcpParams, dt: f64, kind: SchemeKind) -> Result<Classification> {
    params.validate()?;
    if !(dt.is_finite() && dt > 0.0) {
        return Err(OcpError::Config(format!("dt must be positive, got {dt}")));
    }
    let x = params.gamma() * dt;
    let singular = singular_gamma_dt(kind);
    let threshold = match alpha_threshold(kind, params.m, params.b, dt) {
        Ok(th) => Some(th),
        Err(OcpError::NoThreshold { .. }) => None,
        Err(e) => return Err(e),
    };
    // The threshold is also the singular point of the recurrence; an input
    // placed on it is tagged Boundary rather than forced into a class.
    if let Some(th) = threshold {
        if (params.alpha - th).abs() <= CLASSIFY_TOLERANCE * th {
            return Ok(Classification::Boundary);
        }
    }
    if (x - singular).abs() <= CLASSIFY_TOLERANCE * singular {
        return Ok(Classification::BlowUp);
    }
    Ok(match threshold {
        // gamma > b/m, so gamma dt already exceeds the singular value.
        None => Classification::Oscillatory,
        Some(th) if params.alpha < th => Classification::Oscillatory,
        Some(_) => Classification::Smooth,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub scheme: SchemeKind,
    pub gamma: f64,
    pub gamma_dt: f64,
    /// `None` at the singular point.
    pub e1: Option<f64>,
    pub e2: Option<f64>,
    pub spectral_radius: Option<f64>,
    /// `None` when no threshold exists at this step size.
    pub alpha_threshold: Option<f64>,
    pub classification: Classification,
    /// `|log10(gamma dt / 2)|`; the mid-point recurrence stays bounded in
    /// practice when this is large.
    pub log_distance: f64,
}

pub fn stability_report(
    params: &LinearOcpParams,
    dt: f64,
    kind: SchemeKind,
) -> Result<StabilityReport> {
    let classification = classify(params, dt, kind)?;
    let g = params.gamma();
    let x = g * dt;
    let blown = classification == Classification::BlowUp;
    let eig = if blown { None } else { eigenvalues(x, kind).ok() };
    Ok(StabilityReport {
        scheme: kind,
        gamma: g,
        gamma_dt: x,
        e1: eig.map(|e| e.0),
        e2: eig.map(|e| e.1),
        spectral_radius: if blown { None } else { spectral_radius(x, kind).ok() },
        alpha_threshold: alpha_threshold(kind, params.m, params.b, dt).ok(),
        classification,
        log_distance: (x / 2.0).log10().abs(),
    })
}

/// Fraction of interior nodes where consecutive first differences change
/// sign by more than the noise floor `1e-9 * max|x|`.
pub fn oscillation_index(seq: &[f64]) -> Result<f64> {
    if seq.len() < 3 {
        return Err(OcpError::Contract(format!(
            "oscillation index needs at least 3 values, got {}",
            seq.len()
        )));
    }
    let peak = seq.iter().fold(0f64, |m, x| m.max(x.abs()));
    if !peak.is_finite() {
        return Err(OcpError::Domain("sequence is not finite".into()));
    }
    if peak == 0.0 {
        return Ok(0.0);
    }
    // Work on the normalised sequence so the products cannot overflow.
    let floor = OSCILLATION_NOISE_FLOOR * OSCILLATION_NOISE_FLOOR;
    let alternating = seq
        .windows(3)
        .filter(|w| {
            let d0 = (w[1] - w[0]) / peak;
            let d1 = (w[2] - w[1]) / peak;
            d0 * d1 < -floor
        })
        .count();
    Ok(alternating as f64 / (seq.len() - 2) as f64)
}

/// `n` log-spaced values from `lo` to `hi` inclusive.
pub fn log_spaced(lo: f64, hi: f64, n: usize) -> Result<Vec<f64>> {
    if !(lo > 0.0 && hi > lo && lo.is_finite() && hi.is_finite()) || n < 2 {
        return Err(OcpError::Config(format!(
            "need 0 < lo < hi and n >= 2, got lo={lo}, hi={hi}, n={n}"
        )));
    }
    let (a, b) = (lo.log10(), hi.log10());
    let mut v: Vec<f64> = (0..n)
        .map(|k| 10f64.powf(a + (b - a) * k as f64 / (n - 1) as f64))
        .collect();
    v[0] = lo;
    v[n - 1] = hi;
    Ok(v)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseCell {
    pub alpha: f64,
    /// Effective step `T / round(T / dt)`.
    pub dt: f64,
    pub numeric: Classification,
    pub analytic: Classification,
    pub oscillation_index: Option<f64>,
    pub alpha_threshold: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseDiagram {
    pub scheme: SchemeKind,
    pub alphas: Vec<f64>,
    /// Requested step sizes.
    pub dts: Vec<f64>,
    /// Step sizes actually used on each row.
    pub effective_dts: Vec<f64>,
    /// `alpha_th(dt)` per row.
    pub boundary: Vec<Option<f64>>,
    /// Row-major: dt rows, alpha columns.
    pub cells: Vec<PhaseCell>,
}

impl PhaseDiagram {
    pub fn row(&self, i: usize) -> &[PhaseCell] {
        let w = self.alphas.len();
        &self.cells[i * w..(i + 1) * w]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[PhaseCell]> {
        self.cells.chunks(self.alphas.len())
    }
}

/// Numerical classification of one solve.
pub fn classify_numeric(
    params: &LinearOcpParams,
    grid: &TimeGrid,
    kind: SchemeKind,
) -> (Classification, Option<f64>) {
    let Ok(traj) = solve_bvp(params, grid, kind.into()) else {
        return (Classification::BlowUp, None);
    };
    let bounded = traj
        .state
        .iter()
        .chain(&traj.adjoint)
        .chain(&traj.control)
        .all(|x| x.abs() <= BLOW_UP_MAGNITUDE);
    if !bounded {
        return (Classification::BlowUp, None);
    }
    match oscillation_index(&traj.control) {
        Ok(idx) if idx > SWEEP_OSCILLATION_THRESHOLD => (Classification::Oscillatory, Some(idx)),
        Ok(idx) => (Classification::Smooth, Some(idx)),
        Err(_) => (Classification::BlowUp, None),
    }
}

/// Classifies every `(alpha, dt)` cell numerically and analytically. `params.alpha`
/// is ignored. Cells run on the ambient rayon pool; results are placed by
/// index, so the output does not depend on scheduling.
pub fn phase_sweep(
    params: &LinearOcpParams,
    alphas: &[f64],
    dts: &[f64],
    kind: SchemeKind,
) -> Result<PhaseDiagram> {
    params.validate()?;
    let increasing = |v: &[f64]| !v.is_empty() && v.windows(2).all(|w| w[1] > w[0]);
    if !increasing(alphas) || !increasing(dts) || alphas[0] <= 0.0 || dts[0] <= 0.0 {
        return Err(OcpError::Config(
            "sweep grids must be positive and strictly increasing".into(),
        ));
    }
    let grids = dts
        .iter()
        .map(|&dt| TimeGrid::nearest(params.final_time, dt))
        .collect::<Result<Vec<_>>>()?;
    let effective_dts: Vec<f64> = grids.iter().map(TimeGrid::dt).collect();
    let boundary: Vec<Option<f64>> = effective_dts
        .iter()
        .map(|&dt| alpha_threshold(kind, params.m, params.b, dt).ok())
        .collect();

    let width = alphas.len();
    let cells = (0..grids.len() * width)
        .into_par_iter()
        .map(|idx| {
            let (row, col) = (idx / width, idx % width);
            let grid = &grids[row];
            let p = params.with_alpha(alphas[col]);
            let (numeric, index) = classify_numeric(&p, grid, kind);
            let analytic = classify(&p, grid.dt(), kind)?;
            Ok(PhaseCell {
                alpha: alphas[col],
                dt: grid.dt(),
                numeric,
                analytic,
                oscillation_index: index,
                alpha_threshold: boundary[row],
            })
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(PhaseDiagram {
        scheme: kind,
        alphas: alphas.to_vec(),
        dts: dts.to_vec(),
        effective_dts,
        boundary,
        cells,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use crate::grid::Scheme;

    #[test]
    fn gamma_examples() {
        assert_relative_eq!(gamma(1.0, 1e-15, 1.0), 1.0);
        assert_relative_eq!(gamma(1.0, 1.0, 1.0), 2f64.sqrt());
        assert_relative_eq!(gamma(2.0, 2.0, 0.25), 2f64.sqrt());
    }

    #[test]
    fn mp_eigenvalue_examples() {
        let (e1, e2) = eigenvalues_mp(2.0 / 3.0).unwrap();
        assert_relative_eq!(e1, 2.0, max_relative = 1e-15);
        assert_relative_eq!(e2, 0.5, max_relative = 1e-15);
        let (e1, e2) = eigenvalues_mp(6.0).unwrap();
        assert_eq!((e1, e2), (-2.0, -0.5));
        let (e1, e2) = eigenvalues_mp(1e-12).unwrap();
        assert_relative_eq!(e1, 1.0, epsilon = 1e-11);
        assert_relative_eq!(e2, 1.0, epsilon = 1e-11);
        assert!(matches!(
            eigenvalues_mp(2.0),
            Err(OcpError::SingularPropagation { .. })
        ));
        assert!(eigenvalues_mp(-1.0).is_err());
    }

    #[test]
    fn mp_spectral_radius_examples() {
        assert_eq!(spectral_radius_mp(6.0).unwrap(), 2.0);
        assert_relative_eq!(spectral_radius_mp(2.0 / 3.0).unwrap(), 2.0, max_relative = 1e-15);
        assert!(spectral_radius_mp(2.0).is_err());
    }

    #[test]
    fn ie_examples() {
        let (e1, e2) = eigenvalues_ie(2.0).unwrap();
        assert_relative_eq!(e1, 1.0 / 3.0);
        assert_eq!(e2, -1.0);
        assert_eq!(spectral_radius_ie(2.0).unwrap(), 1.0);
        assert_eq!(eigenvalues_ie(3.0).unwrap(), (0.25, -0.5));
        assert_eq!(spectral_radius_ie(3.0).unwrap(), 0.5);
        assert_eq!(eigenvalues_ie(0.5).unwrap().1, 2.0);
        assert_eq!(spectral_radius_ie(0.5).unwrap(), 2.0);
        assert!(eigenvalues_ie(1.0).is_err());
    }

    #[test]
    fn threshold_examples() {
        let mp = alpha_threshold(SchemeKind::MidPoint, 1.0, 1.0, 0.1).unwrap();
        assert_relative_eq!(mp, 0.01 / 3.99, max_relative = 1e-14);
        let ie = alpha_threshold(SchemeKind::ImplicitEuler, 1.0, 1.0, 0.1).unwrap();
        assert_relative_eq!(ie, 0.01 / 0.99, max_relative = 1e-14);
        assert_eq!(
            alpha_threshold(SchemeKind::MidPoint, 1.0, 1.0, 2.0),
            Err(OcpError::NoThreshold { dt: 2.0 })
        );
    }

    #[test]
    fn classify_examples() {
        let p = LinearOcpParams::reference(1e-3);
        assert_eq!(classify(&p, 0.1, SchemeKind::MidPoint).unwrap(), Classification::Oscillatory);
        let p = LinearOcpParams::reference(1e-1);
        assert_eq!(classify(&p, 0.1, SchemeKind::MidPoint).unwrap(), Classification::Smooth);
        let p = LinearOcpParams::reference(5e-3);
        assert_eq!(
            classify(&p, 0.1, SchemeKind::ImplicitEuler).unwrap(),
            Classification::Oscillatory
        );
        let th = alpha_threshold(SchemeKind::MidPoint, 1.0, 1.0, 0.1).unwrap();
        let p = LinearOcpParams::reference(th);
        assert_eq!(classify(&p, 0.1, SchemeKind::MidPoint).unwrap(), Classification::Boundary);
        // gamma dt within 1e-9 of 2 while alpha sits just outside the threshold band
        let p = LinearOcpParams::reference(th * (1.0 + 1.5e-9));
        assert_eq!(classify(&p, 0.1, SchemeKind::MidPoint).unwrap(), Classification::BlowUp);
        // no threshold for dt >= 2m/b: always oscillatory
        let p = LinearOcpParams::reference(10.0);
        assert_eq!(classify(&p, 2.5, SchemeKind::MidPoint).unwrap(), Classification::Oscillatory);
    }

    #[test]
    fn report_at_blow_up_point() {
        let th = alpha_threshold(SchemeKind::MidPoint, 1.0, 1.0, 0.1).unwrap();
        let p = LinearOcpParams::reference(th * (1.0 + 1.5e-9));
        let r = stability_report(&p, 0.1, SchemeKind::MidPoint).unwrap();
        assert_eq!(r.classification, Classification::BlowUp);
        assert!(r.e1.is_none() && r.e2.is_none() && r.spectral_radius.is_none());
        assert!(r.log_distance < 1e-9);
    }

    #[test]
    fn oscillation_index_examples() {
        assert_eq!(oscillation_index(&[0.0, 1.0, 2.0, 3.0]).unwrap(), 0.0);
        assert_eq!(oscillation_index(&[0.0, 1.0, 0.0, 1.0, 0.0]).unwrap(), 1.0);
        assert_eq!(oscillation_index(&[4.0; 10]).unwrap(), 0.0);
        assert_eq!(oscillation_index(&[0.0; 10]).unwrap(), 0.0);
        assert!(matches!(oscillation_index(&[1.0, 2.0]), Err(OcpError::Contract(_))));
        assert!(oscillation_index(&[1.0, f64::INFINITY, 2.0]).is_err());
        // Alternation below the noise floor does not count.
        let tiny: Vec<f64> = (0..20).map(|k| 1.0 + 1e-12 * (k % 2) as f64).collect();
        assert_eq!(oscillation_index(&tiny).unwrap(), 0.0);
        // Huge values do not overflow.
        assert_eq!(oscillation_index(&[0.0, 1e300, 0.0, 1e300]).unwrap(), 1.0);
    }

    #[test]
    fn oscillation_index_on_linear_solves() {
        let grid = TimeGrid::new(10.0, 100).unwrap();
        let smooth = solve_bvp(&LinearOcpParams::reference(1e-1), &grid, Scheme::MID_POINT).unwrap();
        assert!(oscillation_index(&smooth.control).unwrap() < 0.05);
        let rough = solve_bvp(&LinearOcpParams::reference(1e-4), &grid, Scheme::MID_POINT).unwrap();
        assert!(oscillation_index(&rough.control).unwrap() > 0.5);
    }

    #[test]
    fn log_spaced_grid() {
        let v = log_spaced(1e-5, 1.0, 6).unwrap();
        assert_eq!(v.len(), 6);
        assert_eq!(v[0], 1e-5);
        assert_eq!(v[5], 1.0);
        assert_relative_eq!(v[2], 1e-3, max_relative = 1e-12);
        assert!(log_spaced(1.0, 1.0, 4).is_err());
        assert!(log_spaced(0.0, 1.0, 4).is_err());
    }

    #[test]
    fn sweep_far_above_thresholds_is_smooth() {
        let p = LinearOcpParams::reference(1.0);
        let alphas = log_spaced(0.1, 10.0, 5).unwrap();
        let dts = log_spaced(0.05, 0.5, 4).unwrap();
        let d = phase_sweep(&p, &alphas, &dts, SchemeKind::MidPoint).unwrap();
        assert_eq!(d.cells.len(), 20);
        assert!(d.cells.iter().all(|c| c.numeric == Classification::Smooth
            && c.analytic == Classification::Smooth));
    }

    #[test]
    fn sweep_rejects_unsorted_grid() {
        let p = LinearOcpParams::reference(1.0);
        assert!(phase_sweep(&p, &[1.0, 0.5], &[0.1], SchemeKind::MidPoint).is_err());
    }

    #[test]
    fn mp_threshold_sits_below_ie() {
        for dt in log_spaced(1e-3, 0.99, 50).unwrap() {
            let mp = alpha_threshold(SchemeKind::MidPoint, 1.0, 1.0, dt).unwrap();
            let ie = alpha_threshold(SchemeKind::ImplicitEuler, 1.0, 1.0, dt).unwrap();
            assert!(mp < ie);
        }
    }

    proptest! {
        #[test]
        fn mp_radius_at_least_one(x in 1e-6f64..1e6) {
            prop_assume!((x - 2.0).abs() > 1e-12);
            prop_assert!(spectral_radius_mp(x).unwrap() >= 1.0);
            let (e1, e2) = eigenvalues_mp(x).unwrap();
            prop_assert!((e1 * e2 - 1.0).abs() <= 1e-12);
        }

        #[test]
        fn ie_stable_iff_gamma_dt_at_least_two(x in 1e-6f64..1e3) {
            prop_assume!((x - 1.0).abs() > 1e-12);
            prop_assert_eq!(spectral_radius_ie(x).unwrap() <= 1.0, x >= 2.0);
        }

        #[test]
        fn threshold_matches_sign_change(
            m in 0.1f64..10.0, b in 0.01f64..10.0, dt in 1e-3f64..1.0, log_alpha in -6f64..2.0,
        ) {
            let alpha = 10f64.powf(log_alpha);
            let x = gamma(m, b, alpha) * dt;
            if let Ok(th) = alpha_threshold(SchemeKind::MidPoint, m, b, dt) {
                prop_assume!((alpha / th - 1.0).abs() > 1e-9);
                prop_assert_eq!(x < 2.0, alpha > th);
            }
            if let Ok(th) = alpha_threshold(SchemeKind::ImplicitEuler, m, b, dt) {
                prop_assume!((alpha / th - 1.0).abs() > 1e-9);
                prop_assert_eq!(x < 1.0, alpha > th);
            }
        }
    }
}
