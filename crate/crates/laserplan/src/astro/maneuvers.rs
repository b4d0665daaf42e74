//! Reachable plane-change envelopes for a finite delta-v budget.
//!
//! Both envelopes treat the budget as a single impulsive allocation scaled by
//! a reserve factor `beta` in (0, 1]: only `beta` of the budget is assumed
//! convertible into the plane change, the rest is held back for phasing and
//! stationkeeping.

use super::MU_EARTH;

/// An angular envelope in degrees plus a flag recording whether the
/// underlying inverse trig argument had to be clamped to its domain.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AngleEnvelope {
    pub degrees: f64,
    pub clamped: bool,
}

/// Maximum inclination change (deg) purchasable with `dv_kms` on a circular
/// orbit of radius `r_km`: 2 * beta * asin(dv / (2 v_circ)).
///
/// Budgets beyond the 180-degree turn saturate at `180 * beta` with the
/// clamped flag set.
pub fn max_inclination_change(dv_kms: f64, r_km: f64, beta: f64) -> AngleEnvelope {
    assert!(dv_kms >= 0.0, "delta-v budget must be nonnegative");
    assert!(r_km > 0.0, "orbit radius must be positive");
    assert!(beta > 0.0 && beta <= 1.0, "beta must lie in (0, 1]");
    let v_circ = (MU_EARTH / r_km).sqrt();
    let arg = dv_kms / (2.0 * v_circ);
    if arg > 1.0 {
        AngleEnvelope { degrees: 180.0 * beta, clamped: true }
    } else {
        AngleEnvelope { degrees: (2.0 * beta * arg.asin()).to_degrees(), clamped: false }
    }
}

/// Maximum RAAN change (deg) paired with the inclination envelope:
/// beta * acos((delta - cos^2 inc) / sin^2 inc), with `delta_rad` the
/// inclination envelope angle in radians and `inc_rad` the orbit inclination.
///
/// Arguments outside [-1, 1] (including the equatorial singularity where
/// sin(inc) vanishes) are clamped to the boundary with the flag set.
pub fn max_raan_change(delta_rad: f64, inc_rad: f64, beta: f64) -> AngleEnvelope {
    assert!(beta > 0.0 && beta <= 1.0, "beta must lie in (0, 1]");
    let sin_sq = inc_rad.sin().powi(2);
    let raw = if sin_sq == 0.0 {
        f64::INFINITY
    } else {
        (delta_rad - inc_rad.cos().powi(2)) / sin_sq
    };
    let clamped = !(-1.0..=1.0).contains(&raw) || !raw.is_finite();
    let arg = if raw.is_nan() { 1.0 } else { raw.clamp(-1.0, 1.0) };
    AngleEnvelope { degrees: (beta * arg.acos()).to_degrees(), clamped }
}
