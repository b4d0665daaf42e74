//! Candidate orbital slot grids for reconfigurable platforms.
//!
//! A grid fixes, per time step, the ordered list of orbits a platform may
//! occupy. Step 0 always has exactly one slot — the platform's initial orbit
//! — and the same slot index refers to the same orbit identity at every step,
//! so a "stay" transfer costs exactly zero. All other transfer costs are
//! single-step Lambert solutions priced in km/s of total impulse.

use crate::astro::{
    max_inclination_change, max_raan_change, propagate_two_body, transfer_cost, KeplerianElements,
    StateVector,
};
use serde::{Deserialize, Serialize};
use std::sync::OnceLock;

use super::TegError;

/// Ordering of altitude layers relative to the initial semi-major axis.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LayerDirection {
    /// Odd layer count straddling the initial altitude: 0, +1, -1, +2, -2, ...
    Symmetric,
    /// Layers climb from the initial altitude: 0, +1, +2, ... (any count >= 1).
    Up,
}

/// One platform's candidate orbital slots across the planning horizon.
///
/// `states[t]` lists the slot states at step `t`; `states[0]` holds only the
/// initial orbit (slot 0). For `t >= 1` the slot list is the full grid, in a
/// fixed order: phase-major, plane/layer-minor, with slot 0 the unmodified
/// initial orbit. Transfer costs between consecutive steps are computed
/// lazily per step and cached.
#[derive(Debug)]
pub struct PlatformSlotGrid {
    /// Orbit definitions underlying each slot index (epoch elements).
    pub slot_elements: Vec<KeplerianElements>,
    /// Slot states per step: `states[t][s]`.
    pub states: Vec<Vec<StateVector>>,
    /// Step length, seconds.
    pub dt_s: f64,
    cost_blocks: Vec<OnceLock<Vec<f64>>>,
}

impl Clone for PlatformSlotGrid {
    fn clone(&self) -> Self {
        PlatformSlotGrid {
            slot_elements: self.slot_elements.clone(),
            states: self.states.clone(),
            dt_s: self.dt_s,
            cost_blocks: self
                .cost_blocks
                .iter()
                .map(|block| {
                    let cell = OnceLock::new();
                    if let Some(v) = block.get() {
                        let _ = cell.set(v.clone());
                    }
                    cell
                })
                .collect(),
        }
    }
}

impl PlatformSlotGrid {
    /// Builds the grid from epoch slot definitions. Slot 0 must be the
    /// platform's initial orbit; every slot is propagated to each step.
    fn from_slots(
        slot_elements: Vec<KeplerianElements>,
        num_steps: usize,
        dt_s: f64,
    ) -> Result<Self, TegError> {
        assert!(num_steps >= 1, "horizon needs at least one step");
        assert!(dt_s > 0.0, "step length must be positive");
        let epoch_states: Vec<StateVector> =
            slot_elements.iter().map(|el| el.to_state()).collect();
        let mut states = Vec::with_capacity(num_steps);
        states.push(vec![epoch_states[0]]);
        for t in 1..num_steps {
            let dt = t as f64 * dt_s;
            let mut layer = Vec::with_capacity(epoch_states.len());
            for s in &epoch_states {
                layer.push(propagate_two_body(s, dt)?);
            }
            states.push(layer);
        }
        let cost_blocks = (0..num_steps.saturating_sub(1)).map(|_| OnceLock::new()).collect();
        Ok(PlatformSlotGrid { slot_elements, states, dt_s, cost_blocks })
    }

    pub fn num_steps(&self) -> usize {
        self.states.len()
    }

    pub fn num_slots_at(&self, t: usize) -> usize {
        self.states[t].len()
    }

    pub fn slots_at(&self, t: usize) -> &[StateVector] {
        &self.states[t]
    }

    /// Impulse cost (km/s) of moving from slot `s` at step `t` to slot `w`
    /// at step `t+1`. Identical slot indices cost exactly zero; all other
    /// pairs are priced by a single-revolution Lambert transfer over one
    /// step, `+inf` when no transfer solution exists.
    pub fn cost(&self, t: usize, s: usize, w: usize) -> f64 {
        let width = self.num_slots_at(t + 1);
        self.cost_block(t)[s * width + w]
    }

    /// The full cost matrix for transfers departing step `t`, row-major
    /// `[from_slot][to_slot]`, computed on first use.
    pub fn cost_block(&self, t: usize) -> &[f64] {
        self.cost_blocks[t].get_or_init(|| {
            use rayon::prelude::*;
            let from = &self.states[t];
            let to = &self.states[t + 1];
            let width = to.len();
            (0..from.len() * width)
                .into_par_iter()
                .map(|idx| {
                    let (s, w) = (idx / width, idx % width);
                    if s == w {
                        0.0
                    } else {
                        transfer_cost(&from[s], &to[w], self.dt_s)
                    }
                })
                .collect()
        })
    }
}

#[derive(Clone, Copy, Debug, Default)]
struct PlaneOffset {
    d_inc_deg: f64,
    d_raan_deg: f64,
}

/// Symmetric plane offsets about the initial plane. Offsets come in pairs
/// alternating inclination shifts and RAAN shifts, largest first: pair 1 is
/// +/-(full inclination envelope), pair 2 +/-(full RAAN envelope), pair 3
/// +/-(half inclination envelope), and so on.
fn plane_offsets(
    n_planes: u32,
    inc_envelope_deg: f64,
    raan_envelope_deg: f64,
) -> Vec<PlaneOffset> {
    let mut out = vec![PlaneOffset::default()];
    for pair in 1..=(n_planes - 1) / 2 {
        let level = f64::from((pair + 1) / 2);
        if pair % 2 == 1 {
            let mag = inc_envelope_deg / level;
            out.push(PlaneOffset { d_inc_deg: mag, d_raan_deg: 0.0 });
            out.push(PlaneOffset { d_inc_deg: -mag, d_raan_deg: 0.0 });
        } else {
            let mag = raan_envelope_deg / level;
            out.push(PlaneOffset { d_inc_deg: 0.0, d_raan_deg: mag });
            out.push(PlaneOffset { d_inc_deg: 0.0, d_raan_deg: -mag });
        }
    }
    out
}

fn phased_elements(base: &KeplerianElements, n_phases: u32) -> Vec<KeplerianElements> {
    (0..n_phases)
        .map(|k| {
            let mut el = *base;
            el.arg_lat_deg = base.arg_lat_deg + f64::from(k) * 360.0 / f64::from(n_phases);
            el
        })
        .collect()
}

/// A single-slot grid: the platform holds its initial orbit at every step.
pub fn build_baseline_grid(
    platform_initial: &KeplerianElements,
    num_steps: usize,
    dt_s: f64,
) -> Result<PlatformSlotGrid, TegError> {
    PlatformSlotGrid::from_slots(vec![*platform_initial], num_steps, dt_s)
}

/// Grid of phase offsets crossed with orbital-plane offsets.
///
/// Phases are uniform over [0, 360) degrees of argument of latitude added to
/// the initial phase. Plane offsets are sized by the impulse budget: the
/// inclination envelope and the RAAN envelope reachable with `dv_budget_kms`
/// at efficiency `beta` bound the symmetric offset pairs. A zero budget
/// collapses the plane dimension entirely, leaving a phasing-only grid.
pub fn build_plane_change_grid(
    platform_initial: &KeplerianElements,
    dv_budget_kms: f64,
    beta: f64,
    n_phases: u32,
    n_planes: u32,
    num_steps: usize,
    dt_s: f64,
) -> Result<PlatformSlotGrid, TegError> {
    if n_phases == 0 {
        return Err(TegError::NoPhases);
    }
    if n_planes % 2 == 0 {
        return Err(TegError::EvenPlaneCount(n_planes));
    }
    assert!(dv_budget_kms >= 0.0, "plane-change budget must be nonnegative");
    let offsets = if n_planes == 1 || dv_budget_kms == 0.0 {
        vec![PlaneOffset::default()]
    } else {
        let inc_env = max_inclination_change(dv_budget_kms, platform_initial.sma_km, beta);
        if inc_env.clamped {
            return Err(TegError::InfeasiblePlaneEnvelope {
                parameter: "dv_budget_kms",
                value: dv_budget_kms,
            });
        }
        let raan_env_deg = if n_planes >= 5 {
            let env = max_raan_change(
                inc_env.degrees.to_radians(),
                platform_initial.inc_deg.to_radians(),
                beta,
            );
            if env.clamped {
                return Err(TegError::InfeasiblePlaneEnvelope {
                    parameter: "inclination_deg",
                    value: platform_initial.inc_deg,
                });
            }
            env.degrees
        } else {
            0.0
        };
        plane_offsets(n_planes, inc_env.degrees, raan_env_deg)
    };

    let mut slots = Vec::with_capacity((n_phases as usize) * offsets.len());
    for phased in phased_elements(platform_initial, n_phases) {
        for off in &offsets {
            let mut el = phased;
            el.inc_deg += off.d_inc_deg;
            el.raan_deg += off.d_raan_deg;
            slots.push(el);
        }
    }
    PlatformSlotGrid::from_slots(slots, num_steps, dt_s)
}

/// Grid of phase offsets crossed with altitude layers spaced `layer_step_km`
/// apart in semi-major axis. `floor_radius_km` rejects grids whose lowest
/// layer would dip below the usable radius band.
pub fn build_altitude_change_grid(
    platform_initial: &KeplerianElements,
    n_phases: u32,
    n_layers: u32,
    layer_step_km: f64,
    direction: LayerDirection,
    floor_radius_km: f64,
    num_steps: usize,
    dt_s: f64,
) -> Result<PlatformSlotGrid, TegError> {
    if n_phases == 0 {
        return Err(TegError::NoPhases);
    }
    assert!(n_layers >= 1, "need at least one altitude layer");
    assert!(layer_step_km >= 0.0, "layer step must be nonnegative");
    let layer_indices: Vec<i64> = match direction {
        LayerDirection::Symmetric => {
            if n_layers % 2 == 0 {
                return Err(TegError::EvenSymmetricLayers(n_layers));
            }
            let mut ks = vec![0i64];
            for k in 1..=i64::from((n_layers - 1) / 2) {
                ks.push(k);
                ks.push(-k);
            }
            ks
        }
        LayerDirection::Up => (0..i64::from(n_layers)).collect(),
    };

    let min_sma = platform_initial.sma_km
        + layer_indices.iter().copied().min().unwrap() as f64 * layer_step_km;
    let min_periapsis = min_sma * (1.0 - platform_initial.ecc);
    if min_periapsis < floor_radius_km {
        return Err(TegError::LayerBelowFloor {
            periapsis_km: min_periapsis,
            floor_km: floor_radius_km,
        });
    }

    let mut slots = Vec::with_capacity((n_phases as usize) * layer_indices.len());
    for phased in phased_elements(platform_initial, n_phases) {
        for &k in &layer_indices {
            let mut el = phased;
            el.sma_km = platform_initial.sma_km + k as f64 * layer_step_km;
            slots.push(el);
        }
    }
    PlatformSlotGrid::from_slots(slots, num_steps, dt_s)
}
