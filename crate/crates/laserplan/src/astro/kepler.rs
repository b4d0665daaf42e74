//! Universal-variable two-body propagation.
//!
//! One formulation covers elliptic, parabolic, and hyperbolic motion, which
//! matters here because post-engagement debris orbits can be arbitrarily
//! eccentric. Newton iteration on the universal anomaly with Stumpff
//! functions, 1e-12 tolerance, 50 iteration cap.

use super::{AstroError, StateVector, MU_EARTH};

const TOL: f64 = 1e-12;
const MAX_ITER: usize = 50;

/// Stumpff C(psi) and S(psi) with series fallbacks near zero.
fn stumpff(psi: f64) -> (f64, f64) {
    if psi > 1e-6 {
        let sq = psi.sqrt();
        ((1.0 - sq.cos()) / psi, (sq - sq.sin()) / (psi * sq))
    } else if psi < -1e-6 {
        let sq = (-psi).sqrt();
        (
            (1.0 - sq.cosh()) / psi,
            (sq.sinh() - sq) / (-psi * sq),
        )
    } else {
        // Truncated Taylor series; |psi| <= 1e-6 keeps the error below 1e-27.
        (
            1.0 / 2.0 - psi / 24.0 + psi * psi / 720.0,
            1.0 / 6.0 - psi / 120.0 + psi * psi / 5040.0,
        )
    }
}

/// Propagate a Cartesian state by `dt_s` seconds of two-body motion.
///
/// `dt_s` may be negative (propagation backward along the orbit). Sentinel
/// states are rejected so callers cannot silently fly dead objects.
pub fn propagate_two_body(state: &StateVector, dt_s: f64) -> Result<StateVector, AstroError> {
    if state.is_sentinel() {
        return Err(AstroError::SentinelState);
    }
    if !state.r.is_finite() || !state.v.is_finite() || !dt_s.is_finite() {
        return Err(AstroError::NonFiniteState);
    }
    if dt_s == 0.0 {
        return Ok(*state);
    }

    let r0 = state.r;
    let v0 = state.v;
    let r0_n = r0.norm();
    if r0_n == 0.0 {
        return Err(AstroError::DegenerateOrbit);
    }
    let sqrt_mu = MU_EARTH.sqrt();
    let rv = r0.dot(v0);
    let alpha = 2.0 / r0_n - v0.norm_sq() / MU_EARTH; // 1 / sma

    // Initial guess for the universal anomaly chi.
    let mut chi = if alpha > 1e-12 {
        sqrt_mu * dt_s * alpha
    } else if alpha < -1e-12 {
        let a = 1.0 / alpha;
        let num = -2.0 * MU_EARTH * alpha * dt_s;
        let den = rv + dt_s.signum() * (-MU_EARTH * a).sqrt() * (1.0 - r0_n * alpha);
        dt_s.signum() * (-a).sqrt() * (num / den).abs().max(1e-300).ln()
    } else {
        // Near-parabolic: fall back to a linear guess.
        sqrt_mu * dt_s / r0_n
    };

    let mut converged = false;
    for _ in 0..MAX_ITER {
        let psi = chi * chi * alpha;
        let (c2, c3) = stumpff(psi);
        let chi_sq = chi * chi;
        let r_mag = chi_sq * c2 + rv / sqrt_mu * chi * (1.0 - psi * c3) + r0_n * (1.0 - psi * c2);
        let t_calc = (chi_sq * chi * c3 + rv / sqrt_mu * chi_sq * c2 + r0_n * chi * (1.0 - psi * c3))
            / sqrt_mu;
        let d_chi = sqrt_mu * (dt_s - t_calc) / r_mag;
        chi += d_chi;
        if d_chi.abs() < TOL * chi.abs().max(1.0) {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(AstroError::PropagationDiverged { iterations: MAX_ITER, dt_s });
    }

    let psi = chi * chi * alpha;
    let (c2, c3) = stumpff(psi);
    let chi_sq = chi * chi;
    let r_mag = chi_sq * c2 + rv / sqrt_mu * chi * (1.0 - psi * c3) + r0_n * (1.0 - psi * c2);

    let f = 1.0 - chi_sq * c2 / r0_n;
    let g = dt_s - chi_sq * chi * c3 / sqrt_mu;
    let f_dot = sqrt_mu / (r_mag * r0_n) * chi * (psi * c3 - 1.0);
    let g_dot = 1.0 - chi_sq * c2 / r_mag;

    Ok(StateVector::new(r0 * f + v0 * g, r0 * f_dot + v0 * g_dot))
}
