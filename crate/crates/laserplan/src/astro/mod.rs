//! Two-body astrodynamics for the mission planner.
//!
//! Everything here works in kilometers, seconds, and degrees at the API
//! surface (radians internally where formulas need them). States are inertial
//! Cartesian position/velocity pairs; orbits are Keplerian and perturbation
//! free over the horizons the planner cares about.

mod kepler;
mod lambert;
mod maneuvers;

pub use kepler::propagate_two_body;
pub use lambert::{solve_lambert, transfer_cost};
pub use maneuvers::{max_inclination_change, max_raan_change, AngleEnvelope};

use crate::vec3::Vec3;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Gravitational parameter of Earth, km^3/s^2.
pub const MU_EARTH: f64 = 398600.4418;

/// Mean equatorial radius of Earth, km.
pub const EARTH_RADIUS_KM: f64 = 6378.137;

/// Default grazing altitude margin above the Earth radius for line-of-sight
/// feasibility, km.
pub const DEFAULT_GRAZING_ALTITUDE_KM: f64 = 100.0;

/// Default deorbit radius threshold (200 km perigee altitude), km.
pub const DEFAULT_DEORBIT_RADIUS_KM: f64 = 6578.137;

#[derive(Debug, Error, PartialEq)]
pub enum AstroError {
    #[error("degenerate orbit: angular momentum is zero")]
    DegenerateOrbit,
    #[error("propagation did not converge after {iterations} iterations (dt = {dt_s} s)")]
    PropagationDiverged { iterations: usize, dt_s: f64 },
    #[error("sentinel (zeroed) state passed where a live orbit is required")]
    SentinelState,
    #[error("non-finite state component")]
    NonFiniteState,
}

/// Inertial Cartesian state: position in km, velocity in km/s.
///
/// The all-zero state is reserved as a sentinel for objects that no longer
/// exist in the mission (deorbited debris, destroyed bodies). Propagation and
/// element extraction reject sentinels; callers branch on [`Self::is_sentinel`]
/// first.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct StateVector {
    pub r: Vec3,
    pub v: Vec3,
}

impl StateVector {
    pub const SENTINEL: StateVector = StateVector { r: Vec3::ZERO, v: Vec3::ZERO };

    pub fn new(r: Vec3, v: Vec3) -> Self {
        StateVector { r, v }
    }

    pub fn is_sentinel(&self) -> bool {
        self.r == Vec3::ZERO && self.v == Vec3::ZERO
    }

    /// Specific orbital energy, km^2/s^2.
    pub fn specific_energy(&self) -> f64 {
        self.v.norm_sq() / 2.0 - MU_EARTH / self.r.norm()
    }

    /// Specific angular momentum vector, km^2/s.
    pub fn angular_momentum(&self) -> Vec3 {
        self.r.cross(self.v)
    }
}

/// Periapsis radius and conic class of the osculating orbit.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Apsis {
    pub radius_km: f64,
    /// True when the osculating eccentricity is >= 1. The radius formula is
    /// still evaluated and returned; callers decide how to treat escapes.
    pub hyperbolic: bool,
}

/// Periapsis radius from a Cartesian state: |r x v|^2 / mu / (1 + e).
///
/// Two-body motion leaves this invariant under propagation, so it can be
/// evaluated at any point along the orbit.
pub fn periapsis(state: &StateVector) -> Result<Apsis, AstroError> {
    if state.is_sentinel() {
        return Err(AstroError::SentinelState);
    }
    if !state.r.is_finite() || !state.v.is_finite() {
        return Err(AstroError::NonFiniteState);
    }
    let h = state.angular_momentum();
    let h_sq = h.norm_sq();
    if h_sq == 0.0 {
        return Err(AstroError::DegenerateOrbit);
    }
    let ecc = eccentricity_vector(state).norm();
    Ok(Apsis {
        radius_km: h_sq / MU_EARTH / (1.0 + ecc),
        hyperbolic: ecc >= 1.0,
    })
}

/// Shorthand for [`periapsis`] when only the radius is needed.
pub fn periapsis_radius(state: &StateVector) -> Result<f64, AstroError> {
    periapsis(state).map(|a| a.radius_km)
}

fn eccentricity_vector(state: &StateVector) -> Vec3 {
    let r_n = state.r.norm();
    let v_sq = state.v.norm_sq();
    let rv = state.r.dot(state.v);
    (state.r * (v_sq - MU_EARTH / r_n) - state.v * rv) / MU_EARTH
}

/// Keplerian elements in the circular-friendly convention used across the
/// planner: semi-major axis (km), eccentricity, inclination (deg), RAAN (deg),
/// and argument of latitude (deg, measured from the ascending node).
///
/// Five elements cannot carry a periapsis direction, so [`Self::to_state`]
/// places periapsis at the ascending node (argument of periapsis zero) and
/// reads `arg_lat_deg` as the angle from the node to the object. For the
/// circular orbits this type exists for, that convention is exact;
/// eccentric post-engagement orbits are handled as raw states and never pass
/// through this type.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KeplerianElements {
    pub sma_km: f64,
    pub ecc: f64,
    pub inc_deg: f64,
    pub raan_deg: f64,
    pub arg_lat_deg: f64,
}

impl KeplerianElements {
    pub fn circular(sma_km: f64, inc_deg: f64, raan_deg: f64, arg_lat_deg: f64) -> Self {
        KeplerianElements { sma_km, ecc: 0.0, inc_deg, raan_deg, arg_lat_deg }
    }

    /// Cartesian state for these elements (periapsis-at-node convention).
    pub fn to_state(&self) -> StateVector {
        let e = self.ecc;
        let p = self.sma_km * (1.0 - e * e);
        let nu = self.arg_lat_deg.to_radians();
        let r_mag = p / (1.0 + e * nu.cos());

        // Perifocal coordinates with periapsis on the node line.
        let r_pf = Vec3::new(r_mag * nu.cos(), r_mag * nu.sin(), 0.0);
        let v_scale = (MU_EARTH / p).sqrt();
        let v_pf = Vec3::new(-v_scale * nu.sin(), v_scale * (e + nu.cos()), 0.0);

        let (si, ci) = self.inc_deg.to_radians().sin_cos();
        let (so, co) = self.raan_deg.to_radians().sin_cos();
        let rot = |pf: Vec3| {
            Vec3::new(
                co * pf.x - so * ci * pf.y,
                so * pf.x + co * ci * pf.y,
                si * pf.y,
            )
        };
        StateVector::new(rot(r_pf), rot(v_pf))
    }

    /// Extract elements from a Cartesian state. The argument of latitude is
    /// the standard omega + nu, so orbits produced by [`Self::to_state`]
    /// round-trip; for other eccentric states the periapsis direction is
    /// deliberately dropped.
    pub fn from_state(state: &StateVector) -> Result<Self, AstroError> {
        if state.is_sentinel() {
            return Err(AstroError::SentinelState);
        }
        let h = state.angular_momentum();
        let h_n = h.norm();
        if h_n == 0.0 {
            return Err(AstroError::DegenerateOrbit);
        }
        let r_n = state.r.norm();
        let energy = state.specific_energy();
        if energy >= 0.0 {
            // sma is negative/undefined for parabolic and hyperbolic states;
            // this type only describes bound orbits.
            return Err(AstroError::DegenerateOrbit);
        }
        let sma = -MU_EARTH / (2.0 * energy);
        let e_vec = eccentricity_vector(state);
        let ecc = e_vec.norm();
        let inc = (h.z / h_n).acos();

        let node = Vec3::new(-h.y, h.x, 0.0); // z_hat x h
        let node_n = node.norm();
        let (raan, arg_lat) = if node_n > 1e-12 * h_n {
            let mut raan = (node.x / node_n).acos();
            if node.y < 0.0 {
                raan = 2.0 * std::f64::consts::PI - raan;
            }
            let mut u = (node.dot(state.r) / (node_n * r_n)).clamp(-1.0, 1.0).acos();
            if state.r.z < 0.0 {
                u = 2.0 * std::f64::consts::PI - u;
            }
            (raan, u)
        } else {
            // Equatorial: the node is undefined; measure latitude from +x with
            // the sign set by the orbit direction.
            let mut u = state.r.y.atan2(state.r.x);
            if h.z < 0.0 {
                u = -u;
            }
            if u < 0.0 {
                u += 2.0 * std::f64::consts::PI;
            }
            (0.0, u)
        };

        Ok(KeplerianElements {
            sma_km: sma,
            ecc,
            inc_deg: inc.to_degrees(),
            raan_deg: raan.to_degrees(),
            arg_lat_deg: arg_lat.to_degrees(),
        })
    }

    /// Orbital period for bound orbits, seconds.
    pub fn period_s(&self) -> f64 {
        2.0 * std::f64::consts::PI * (self.sma_km.powi(3) / MU_EARTH).sqrt()
    }
}
