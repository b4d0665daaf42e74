//! Engagement opportunity structures over the mission timeline.
//!
//! Platforms move across a fixed grid of candidate orbital slots; each debris
//! object's reachable futures are expanded into a per-debris tree over the
//! scheduling steps (a time-expanded graph). Layer `t+1` of a debris graph
//! holds, for every node at layer `t`, one "coast" child plus one child per
//! feasible cooperative engagement that strictly lowers the debris periapsis.

mod debris;
mod grid;

pub use debris::{generate_debris_teg, DebrisTeg, TegNode};
pub use grid::{
    build_altitude_change_grid, build_baseline_grid, build_plane_change_grid, LayerDirection,
    PlatformSlotGrid,
};

use crate::astro::{periapsis_radius, AstroError, KeplerianElements, StateVector};
use crate::pla::{engagement_feasible, LaserSystem, PlaError};
use crate::vec3::Vec3;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum TegError {
    #[error("debris graph node cap exceeded at step {step}")]
    NodeCapExceeded { step: usize },
    #[error("slot grid covers {available} steps but the window needs {needed}")]
    WindowMismatch { available: usize, needed: usize },
    #[error("engagement would raise periapsis ({parent_km} km -> {post_km} km); caller must gate on strictly lowered periapsis")]
    RaisedPeriapsis { parent_km: f64, post_km: f64 },
    #[error("symmetric layer pattern needs an odd layer count (got {0})")]
    EvenSymmetricLayers(u32),
    #[error("slot grid needs at least one phase")]
    NoPhases,
    #[error("plane count must be odd (got {0})")]
    EvenPlaneCount(u32),
    #[error("lowest altitude layer (periapsis {periapsis_km} km) falls below the floor radius {floor_km} km")]
    LayerBelowFloor { periapsis_km: f64, floor_km: f64 },
    #[error("plane-change envelope evaluation infeasible: {parameter} = {value} saturates the geometry")]
    InfeasiblePlaneEnvelope { parameter: &'static str, value: f64 },
    #[error(transparent)]
    Astro(#[from] AstroError),
    #[error(transparent)]
    Pla(#[from] PlaError),
}

/// Reward shaping and engagement acceptance parameters.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct EngagementRules {
    /// Beam grazing margin above the Earth radius, km.
    pub grazing_altitude_km: f64,
    /// Perigee radius at or below which a debris object counts as deorbited, km.
    pub r_deorbit_km: f64,
    /// Penalty subtracted when a post-engagement state invades an active
    /// spacecraft's conjunction ellipsoid. Must dominate any attainable
    /// positive reward.
    pub conjunction_penalty: f64,
    /// Most platforms allowed to cooperate on one engagement.
    pub k_max: usize,
}

impl Default for EngagementRules {
    fn default() -> Self {
        EngagementRules {
            grazing_altitude_km: crate::astro::DEFAULT_GRAZING_ALTITUDE_KM,
            r_deorbit_km: crate::astro::DEFAULT_DEORBIT_RADIUS_KM,
            conjunction_penalty: 1e6,
            k_max: 3,
        }
    }
}

/// Growth limits for debris graph generation.
#[derive(Clone, Copy, Debug)]
pub struct TegLimits {
    /// Total node budget per debris graph.
    pub node_cap: usize,
    /// When true, exceeding the cap is a hard error; otherwise the offending
    /// layer drops its lowest-reward engagement children and continues.
    pub strict: bool,
}

impl Default for TegLimits {
    fn default() -> Self {
        TegLimits { node_cap: 50_000, strict: false }
    }
}

/// An active (protected) spacecraft with its conjunction-screening ellipsoid,
/// axis-aligned in the spacecraft's radial/in-track/cross-track frame.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ActiveSpacecraft {
    pub elements: KeplerianElements,
    pub ellipsoid_radial_km: f64,
    pub ellipsoid_along_km: f64,
    pub ellipsoid_cross_km: f64,
}

/// An active spacecraft's precomputed per-step states.
#[derive(Clone, Debug)]
pub struct ActiveTrack {
    pub states: Vec<StateVector>,
    pub semi_axes: [f64; 3],
}

impl ActiveTrack {
    pub fn build(sc: &ActiveSpacecraft, num_steps: usize, dt_s: f64) -> Result<Self, AstroError> {
        let initial = sc.elements.to_state();
        let mut states = Vec::with_capacity(num_steps);
        for t in 0..num_steps {
            states.push(crate::astro::propagate_two_body(&initial, t as f64 * dt_s)?);
        }
        Ok(ActiveTrack {
            states,
            semi_axes: [sc.ellipsoid_radial_km, sc.ellipsoid_along_km, sc.ellipsoid_cross_km],
        })
    }
}

/// True when `point` lies inside or on the spacecraft's conjunction
/// ellipsoid. Axes follow the radial / in-track / cross-track triad of
/// `sc_state`; a point exactly on the boundary counts as invading.
pub fn invades_conjunction_ellipsoid(point: Vec3, sc_state: &StateVector, semi_axes: [f64; 3]) -> bool {
    let radial = sc_state.r.unit();
    let cross = sc_state.r.cross(sc_state.v).unit();
    let along = cross.cross(radial);
    let delta = point - sc_state.r;
    let q = (delta.dot(radial) / semi_axes[0]).powi(2)
        + (delta.dot(along) / semi_axes[1]).powi(2)
        + (delta.dot(cross) / semi_axes[2]).powi(2);
    q <= 1.0
}

/// One cooperative engagement option: which platforms fire from which slots.
/// Members are ordered by platform index; a platform appears at most once.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EngagementCombo {
    pub members: Vec<(usize, usize)>,
}

impl EngagementCombo {
    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }
}

/// All cooperative engagement options against `debris_state` at one time
/// step. `cross_sections[p]` lists platform `p`'s candidate slot states at
/// that step. Options are every nonempty choice of up to `k_max` platforms,
/// one feasible slot each, in a fixed depth-first order (platforms ascending,
/// include-before-skip, slots ascending).
pub fn enumerate_feasible_combos(
    debris_state: &StateVector,
    cross_sections: &[&[StateVector]],
    laser: &LaserSystem,
    grazing_altitude_km: f64,
    k_max: usize,
) -> Vec<EngagementCombo> {
    let feasible: Vec<Vec<usize>> = cross_sections
        .iter()
        .map(|slots| {
            slots
                .iter()
                .enumerate()
                .filter(|(_, slot)| engagement_feasible(slot, debris_state, laser, grazing_altitude_km))
                .map(|(s, _)| s)
                .collect()
        })
        .collect();

    let mut out = Vec::new();
    let mut current: Vec<(usize, usize)> = Vec::new();
    fn descend(
        p: usize,
        feasible: &[Vec<usize>],
        k_max: usize,
        current: &mut Vec<(usize, usize)>,
        out: &mut Vec<EngagementCombo>,
    ) {
        if p == feasible.len() {
            if !current.is_empty() {
                out.push(EngagementCombo { members: current.clone() });
            }
            return;
        }
        if current.len() < k_max {
            for &s in &feasible[p] {
                current.push((p, s));
                descend(p + 1, feasible, k_max, current, out);
                current.pop();
            }
        }
        descend(p + 1, feasible, k_max, current, out);
    }
    descend(0, &feasible, k_max, &mut current, &mut out);
    out
}

/// Reward of a debris transfer.
///
/// `post` is the debris state immediately after the engagement (same time
/// point as `parent`); `next_position` is where the post-engagement orbit
/// puts the debris one step later, which is where conjunctions are screened.
///
/// The periapsis term pays 100 for a deorbit (post periapsis at or below the
/// deorbit radius), (r_deorbit / r_peri)^3 for a strict lowering that stays
/// above the threshold, and 0 when the periapsis is exactly unchanged. A
/// raised periapsis is a caller contract violation: such transfers must never
/// become graph nodes. On top of that, invading any active spacecraft's
/// ellipsoid at the next step subtracts the conjunction penalty once.
pub fn transfer_reward(
    parent: &StateVector,
    post: &StateVector,
    next_position: Vec3,
    rules: &EngagementRules,
    actives_at_next_step: &[(&StateVector, [f64; 3])],
) -> Result<f64, TegError> {
    let parent_peri = periapsis_radius(parent)?;
    let post_peri = periapsis_radius(post)?;
    let gamma = if post_peri <= rules.r_deorbit_km {
        100.0
    } else if post_peri < parent_peri {
        (rules.r_deorbit_km / post_peri).powi(3)
    } else if post_peri == parent_peri {
        0.0
    } else {
        return Err(TegError::RaisedPeriapsis { parent_km: parent_peri, post_km: post_peri });
    };
    let invaded = actives_at_next_step
        .iter()
        .any(|(sc, semi)| invades_conjunction_ellipsoid(next_position, sc, *semi));
    Ok(if invaded { gamma - rules.conjunction_penalty } else { gamma })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::astro::{KeplerianElements, MU_EARTH};
    use approx::assert_relative_eq;

    fn circular(r_km: f64) -> StateVector {
        StateVector::new(
            Vec3::new(r_km, 0.0, 0.0),
            Vec3::new(0.0, (MU_EARTH / r_km).sqrt(), 0.0),
        )
    }

    #[test]
    fn combo_enumeration_matches_powerset_filter() {
        // Two platforms, two feasible slots each, k_max 2: 2 + 2 + 4 options.
        let laser = LaserSystem::default();
        let debris = circular(7100.0);
        let near = |dy: f64| StateVector::new(debris.r + Vec3::new(0.0, dy, 0.0), debris.v);
        let p0 = [near(200.0), near(-250.0), near(500.0)];
        let p1 = [near(180.0), near(300.0)];
        let combos = enumerate_feasible_combos(
            &debris,
            &[&p0[..], &p1[..]],
            &laser,
            100.0,
            2,
        );
        assert_eq!(combos.len(), 8);
        // Include-first ordering puts cooperative pairs before singletons of
        // later platforms; every member list is sorted by platform.
        assert!(combos.iter().all(|c| c.members.windows(2).all(|w| w[0].0 < w[1].0)));
        assert_eq!(combos[0].members, vec![(0, 0), (1, 0)]);
        assert!(combos.iter().any(|c| c.members == vec![(1, 1)]));
    }

    #[test]
    fn combo_size_respects_k_max() {
        let laser = LaserSystem::default();
        let debris = circular(7100.0);
        let near = StateVector::new(debris.r + Vec3::new(0.0, 200.0, 0.0), debris.v);
        let sections: Vec<Vec<StateVector>> = (0..4).map(|_| vec![near]).collect();
        let refs: Vec<&[StateVector]> = sections.iter().map(|v| v.as_slice()).collect();
        let combos = enumerate_feasible_combos(&debris, &refs, &laser, 100.0, 2);
        assert!(combos.iter().all(|c| c.len() <= 2));
        // 4 singletons + C(4,2) pairs.
        assert_eq!(combos.len(), 4 + 6);
    }

    #[test]
    fn no_feasible_pairs_means_no_combos() {
        let laser = LaserSystem::default();
        let debris = circular(7100.0);
        let far = StateVector::new(debris.r + Vec3::new(0.0, 5000.0, 0.0), debris.v);
        let p0 = [far];
        let combos = enumerate_feasible_combos(&debris, &[&p0[..]], &laser, 100.0, 3);
        assert!(combos.is_empty());
    }

    #[test]
    fn deorbit_pays_100_lowering_pays_cubic() {
        let rules = EngagementRules::default();
        let parent = circular(7000.0);
        // Retrograde kick strong enough to sink the perigee below threshold.
        let kicked = StateVector::new(parent.r, parent.v * 0.9);
        let next = crate::astro::propagate_two_body(&kicked, 180.0).unwrap();
        assert_eq!(transfer_reward(&parent, &kicked, next.r, &rules, &[]).unwrap(), 100.0);

        // Gentle retrograde kick: lowered but above threshold.
        let gentle = StateVector::new(parent.r, parent.v * 0.995);
        let next = crate::astro::propagate_two_body(&gentle, 180.0).unwrap();
        let peri = periapsis_radius(&gentle).unwrap();
        assert!(peri > rules.r_deorbit_km);
        let r = transfer_reward(&parent, &gentle, next.r, &rules, &[]).unwrap();
        assert_relative_eq!(r, (rules.r_deorbit_km / peri).powi(3), max_relative = 1e-12);
        assert!(r > 0.0 && r < 1.0);
    }

    #[test]
    fn unchanged_orbit_scores_zero_and_raised_errors() {
        let rules = EngagementRules::default();
        let parent = circular(7000.0);
        let coast = crate::astro::propagate_two_body(&parent, 180.0).unwrap();
        assert_eq!(transfer_reward(&parent, &parent, coast.r, &rules, &[]).unwrap(), 0.0);

        let raised = StateVector::new(parent.r, parent.v * 1.01);
        let next = crate::astro::propagate_two_body(&raised, 180.0).unwrap();
        assert!(matches!(
            transfer_reward(&parent, &raised, next.r, &rules, &[]),
            Err(TegError::RaisedPeriapsis { .. })
        ));
    }

    #[test]
    fn conjunction_penalty_subtracts_alpha() {
        let rules = EngagementRules::default();
        let parent = circular(7000.0);
        let gentle = StateVector::new(parent.r, parent.v * 0.995);
        let next = crate::astro::propagate_two_body(&gentle, 180.0).unwrap();
        let clean = transfer_reward(&parent, &gentle, next.r, &rules, &[]).unwrap();

        // Park a protected spacecraft exactly where the debris arrives.
        let sc = StateVector::new(next.r, next.v);
        let with_hit =
            transfer_reward(&parent, &gentle, next.r, &rules, &[(&sc, [5.0, 25.0, 5.0])])
                .unwrap();
        assert_relative_eq!(with_hit, clean - rules.conjunction_penalty, max_relative = 1e-12);
    }

    #[test]
    fn ellipsoid_test_uses_ric_axes() {
        let sc = circular(7000.0);
        // +radial offset of 4 km inside a 5 km radial axis.
        let inside = sc.r + sc.r.unit() * 4.0;
        assert!(invades_conjunction_ellipsoid(inside, &sc, [5.0, 25.0, 5.0]));
        // 10 km radial offset escapes the 5 km radial axis even though the
        // along-track axis is 25 km.
        let outside = sc.r + sc.r.unit() * 10.0;
        assert!(!invades_conjunction_ellipsoid(outside, &sc, [5.0, 25.0, 5.0]));
        // 20 km along-track offset stays inside the 25 km along-track axis.
        let along = sc.v.unit();
        assert!(invades_conjunction_ellipsoid(sc.r + along * 20.0, &sc, [5.0, 25.0, 5.0]));
        // Boundary counts as invading.
        assert!(invades_conjunction_ellipsoid(sc.r + sc.r.unit() * 5.0, &sc, [5.0, 25.0, 5.0]));
    }

    #[test]
    fn elements_helper_used_by_grids_is_sane() {
        let el = KeplerianElements::circular(7104.8, 42.33, 0.0, 192.0);
        let s = el.to_state();
        assert_relative_eq!(s.r.norm(), 7104.8, max_relative = 1e-12);
    }
}
