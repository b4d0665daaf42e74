//! Single-revolution Lambert targeting for slot-to-slot transfer costing.
//!
//! Universal-variable formulation with bisection on the universal parameter.
//! Transfers are always prograde with respect to the departure orbit, the
//! time of flight is one scheduling step, and the reported cost is the sum of
//! the two impulsive delta-v magnitudes (leave the current orbit, match the
//! target slot). Geometry the solver cannot close (transfer angle of exactly
//! zero or pi, or a time of flight outside the single-revolution branch) costs
//! +infinity and the caller drops the edge.

use super::StateVector;
use super::MU_EARTH;
use crate::vec3::Vec3;

const MAX_BISECTIONS: usize = 250;
const TOF_TOL: f64 = 1e-10;

/// Terminal velocities of the single-revolution prograde transfer from `r1`
/// to `r2` in `tof_s` seconds. `ref_normal` orients "prograde": the transfer
/// sweeps the angle whose plane normal has a positive component along it.
pub fn solve_lambert(r1: Vec3, r2: Vec3, tof_s: f64, ref_normal: Vec3) -> Option<(Vec3, Vec3)> {
    if tof_s <= 0.0 {
        return None;
    }
    let r1_n = r1.norm();
    let r2_n = r2.norm();
    if r1_n == 0.0 || r2_n == 0.0 {
        return None;
    }

    let cos_dnu = (r1.dot(r2) / (r1_n * r2_n)).clamp(-1.0, 1.0);
    let cross = r1.cross(r2);
    let prograde_short = cross.dot(ref_normal) >= 0.0;
    let dnu = if prograde_short {
        cos_dnu.acos()
    } else {
        2.0 * std::f64::consts::PI - cos_dnu.acos()
    };

    // A carries the sign of sin(dnu); it vanishes for 0 and pi transfer
    // angles where the plane is undefined.
    let denom = 1.0 - cos_dnu;
    if denom <= 1e-14 {
        return None;
    }
    let a_coef = dnu.sin() * (r1_n * r2_n / denom).sqrt();
    if a_coef.abs() < 1e-12 {
        return None;
    }

    let sqrt_mu = MU_EARTH.sqrt();
    let tof_of = |psi: f64| -> Option<(f64, f64)> {
        let (c2, c3) = stumpff(psi);
        if c2 <= 0.0 {
            return None;
        }
        let y = r1_n + r2_n + a_coef * (psi * c3 - 1.0) / c2.sqrt();
        if y < 0.0 {
            return None;
        }
        let chi = (y / c2).sqrt();
        Some(((chi.powi(3) * c3 + a_coef * y.sqrt()) / sqrt_mu, y))
    };

    // Single revolution: psi below 4 pi^2. The lower end allows hyperbolic
    // transfers; deepen it while the branch is still slower than the target
    // there, so very short flight times stay inside the bracket. Where y(psi)
    // is negative (possible for positive-A geometry at deep negative psi) the
    // branch continues toward zero flight time, so an infeasible lower end is
    // already a valid "too fast" bracket side.
    const PSI_FLOOR: f64 = -4.0e4;
    let mut lo = -16.0 * std::f64::consts::PI;
    let mut hi = 4.0 * std::f64::consts::PI * std::f64::consts::PI - 1e-9;
    while lo > PSI_FLOOR {
        match tof_of(lo) {
            Some((t, _)) if t > tof_s => lo = (lo * 2.0).max(PSI_FLOOR),
            _ => break,
        }
    }

    // Time of flight grows monotonically with psi on this branch.
    let mut y_final = 0.0;
    let mut converged = false;
    for _ in 0..MAX_BISECTIONS {
        let mid = 0.5 * (lo + hi);
        match tof_of(mid) {
            Some((t, y)) => {
                if (t - tof_s).abs() <= TOF_TOL * tof_s.max(1.0) {
                    y_final = y;
                    converged = true;
                    break;
                }
                if t < tof_s {
                    lo = mid;
                } else {
                    hi = mid;
                }
                y_final = y;
            }
            None => {
                lo = mid;
            }
        }
    }
    if !converged {
        // Accept the bracket midpoint only if it still meets tolerance.
        let mid = 0.5 * (lo + hi);
        let (t, y) = tof_of(mid)?;
        if (t - tof_s).abs() > 1e-6 * tof_s.max(1.0) {
            return None;
        }
        y_final = y;
    }

    let y = y_final;
    let f = 1.0 - y / r1_n;
    let g = a_coef * (y / MU_EARTH).sqrt();
    if g.abs() < 1e-12 {
        return None;
    }
    let g_dot = 1.0 - y / r2_n;
    let v1 = (r2 - r1 * f) / g;
    let v2 = (r2 * g_dot - r1) / g;
    if !v1.is_finite() || !v2.is_finite() {
        return None;
    }
    Some((v1, v2))
}

fn stumpff(psi: f64) -> (f64, f64) {
    if psi > 1e-6 {
        let sq = psi.sqrt();
        ((1.0 - sq.cos()) / psi, (sq - sq.sin()) / (psi * sq))
    } else if psi < -1e-6 {
        let sq = (-psi).sqrt();
        ((1.0 - sq.cosh()) / psi, (sq.sinh() - sq) / (-psi * sq))
    } else {
        (
            1.0 / 2.0 - psi / 24.0 + psi * psi / 720.0,
            1.0 / 6.0 - psi / 120.0 + psi * psi / 5040.0,
        )
    }
}

/// Total impulsive delta-v (km/s) to leave `from`'s orbit, fly the
/// single-revolution prograde transfer, and match `to`'s velocity after
/// `tof_s` seconds. +infinity when Lambert targeting fails, which signals the
/// caller to omit the edge.
pub fn transfer_cost(from: &StateVector, to: &StateVector, tof_s: f64) -> f64 {
    match solve_lambert(from.r, to.r, tof_s, from.angular_momentum()) {
        Some((v_dep, v_arr)) => (v_dep - from.v).norm() + (to.v - v_arr).norm(),
        None => {
            log::debug!(
                "lambert failed: |r1|={:.3} |r2|={:.3} tof={:.1}s; edge omitted",
                from.r.norm(),
                to.r.norm(),
                tof_s
            );
            f64::INFINITY
        }
    }
}
