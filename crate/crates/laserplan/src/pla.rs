//! Pulsed laser ablation physics.
//!
//! A platform illuminates a debris object across free space; surface material
//! ablates and the reaction pushes the debris directly away from the
//! platform. Per engagement the debris picks up a delta-v along the
//! platform-to-debris line whose magnitude follows from the delivered fluence,
//! the momentum coupling coefficient, and the debris areal density.
//! Feasibility is a window on the separation range plus a line-of-sight test
//! against a grazing shell above the Earth.

use crate::astro::{StateVector, EARTH_RADIUS_KM};
use crate::vec3::Vec3;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum PlaError {
    #[error("debris areal density must be positive (got {0})")]
    ZeroArealDensity(f64),
    #[error("engagement range must be positive (got {0} km)")]
    NonPositiveRange(f64),
}

/// Laser platform design parameters.
///
/// Defaults describe a representative ultraviolet pulsed system sized for
/// LEO debris work. All of these are overridable per scenario.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LaserSystem {
    /// Shortest engageable range, km.
    pub u_min_km: f64,
    /// Longest engageable range, km.
    pub u_max_km: f64,
    /// Primary mirror diameter, m.
    pub mirror_diameter_m: f64,
    /// Beam quality factor M^2 (1 = diffraction limited).
    pub beam_quality: f64,
    /// Diffraction spot-size constant of the optical train.
    pub diffraction_constant: f64,
    /// Wavelength, m.
    pub wavelength_m: f64,
    /// Momentum coupling coefficient, N per MW of incident flux
    /// (equivalently uN.s per J).
    pub coupling_n_per_mw: f64,
    /// Energy per pulse, J.
    pub pulse_energy_j: f64,
    /// Fraction of pulse energy surviving the transmit path.
    pub eta_transmit: f64,
    /// Fraction of delivered impulse realized as debris momentum.
    pub eta_impulse: f64,
    /// Pulses fired over one engagement (one scheduling step).
    pub pulses_per_step: u32,
}

impl Default for LaserSystem {
    fn default() -> Self {
        LaserSystem {
            u_min_km: 175.0,
            u_max_km: 325.0,
            mirror_diameter_m: 1.5,
            beam_quality: 2.0,
            diffraction_constant: 1.27,
            wavelength_m: 355e-9,
            coupling_n_per_mw: 100.0,
            pulse_energy_j: 380.0,
            eta_transmit: 0.5,
            eta_impulse: 0.5,
            pulses_per_step: 560,
        }
    }
}

/// A debris object's physical identity: everything the ablation model needs
/// besides its instantaneous orbit state.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DebrisBody {
    pub id: usize,
    /// Mass per illuminated area, kg/m^2.
    pub areal_density_kg_m2: f64,
}

/// Single-pulse fluence delivered at `range_km`, J/m^2.
///
/// Diffraction spreads the spot linearly with range, so fluence falls with
/// the inverse square: eta_t * (E / pi) * (2 d / (M^2 a lambda u))^2. The
/// formula is evaluated as (k / u)^2 so that range rescalings stay exact in
/// floating point.
pub fn fluence_at_range(laser: &LaserSystem, range_km: f64) -> Result<f64, PlaError> {
    if range_km <= 0.0 {
        return Err(PlaError::NonPositiveRange(range_km));
    }
    let u_m = range_km * 1000.0;
    let k = 2.0 * laser.mirror_diameter_m
        / (laser.beam_quality * laser.diffraction_constant * laser.wavelength_m);
    let spot = k / u_m;
    Ok(laser.eta_transmit * (laser.pulse_energy_j / std::f64::consts::PI) * spot * spot)
}

/// Delta-v (km/s) imparted on one debris object by one platform over one
/// engagement: direction is the unit platform-to-debris line, magnitude is
/// pulses * eta_i * c_m * fluence / areal_density.
pub fn delta_v_engagement(
    platform: &StateVector,
    debris_state: &StateVector,
    debris: &DebrisBody,
    laser: &LaserSystem,
) -> Result<Vec3, PlaError> {
    if debris.areal_density_kg_m2 <= 0.0 {
        return Err(PlaError::ZeroArealDensity(debris.areal_density_kg_m2));
    }
    let line = debris_state.r - platform.r;
    let range_km = line.norm();
    let fluence = fluence_at_range(laser, range_km)?;
    let coupling_ns_per_j = laser.coupling_n_per_mw * 1e-6;
    let dv_m_s = f64::from(laser.pulses_per_step) * laser.eta_impulse * coupling_ns_per_j * fluence
        / debris.areal_density_kg_m2;
    Ok(line.unit() * (dv_m_s / 1000.0))
}

/// Cooperative engagement update: position is untouched, velocity gains the
/// sum of all contributions in slice order (the order is part of the
/// deterministic contract; reorderings can change the last few bits).
pub fn apply_cooperative_engagement(debris_state: &StateVector, delta_vs: &[Vec3]) -> StateVector {
    let mut v = debris_state.v;
    for dv in delta_vs {
        v += *dv;
    }
    StateVector::new(debris_state.r, v)
}

/// Range window and grazing line-of-sight test for one platform/debris pair.
///
/// The beam must stay above a shell of `grazing_altitude_km` over the Earth
/// radius and the separation must lie in [u_min, u_max]. A body inside the
/// shell itself can never satisfy the sight line, so the test is false rather
/// than an error.
pub fn engagement_feasible(
    platform: &StateVector,
    debris_state: &StateVector,
    laser: &LaserSystem,
    grazing_altitude_km: f64,
) -> bool {
    let u = platform.r.distance(debris_state.r);
    if u < laser.u_min_km || u > laser.u_max_km {
        return false;
    }
    let shell = EARTH_RADIUS_KM + grazing_altitude_km;
    let tp = platform.r.norm_sq() - shell * shell;
    let td = debris_state.r.norm_sq() - shell * shell;
    if tp < 0.0 || td < 0.0 {
        return false;
    }
    tp.sqrt() + td.sqrt() - u >= 0.0
}
