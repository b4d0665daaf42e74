//! Per-debris engagement tree over the scheduling window.
//!
//! Layer `k` holds the debris states reachable at step `start_step + k`.
//! Each node spawns, at the next layer, exactly one coast child (reward 0)
//! plus one child per feasible cooperative engagement whose post-engagement
//! orbit has a strictly lower periapsis. Children whose full reward reaches
//! the deorbit level become sentinel states and stay sentinel thereafter.

use super::{
    enumerate_feasible_combos, transfer_reward, ActiveTrack, EngagementCombo, EngagementRules,
    PlatformSlotGrid, TegError, TegLimits,
};
use crate::astro::{periapsis_radius, propagate_two_body, StateVector};
use crate::pla::{apply_cooperative_engagement, delta_v_engagement, DebrisBody, LaserSystem};
use serde::{Deserialize, Serialize};

/// One reachable debris state plus the transfer edge that produced it.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TegNode {
    /// Debris state at this layer's time point; sentinel once deorbited.
    pub state: StateVector,
    /// Index of the producing node in the previous layer (`usize::MAX` for
    /// the root).
    pub parent: usize,
    /// Reward of the edge from `parent` to this node; 0 for coast edges.
    pub edge_reward: f64,
    /// Platforms (and their slots) that fired to produce this node; empty
    /// for coast edges.
    pub combo: EngagementCombo,
    /// True when this edge's reward reached the deorbit level.
    pub deorbit: bool,
}

impl TegNode {
    pub fn is_coast(&self) -> bool {
        self.combo.is_empty()
    }
}

/// One debris object's reachable-state tree across a scheduling window.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DebrisTeg {
    pub debris_id: usize,
    /// Absolute step of layer 0.
    pub start_step: usize,
    /// `layers[k]` holds the nodes at step `start_step + k`.
    pub layers: Vec<Vec<TegNode>>,
    /// Absolute step at which low-reward branches were first dropped to
    /// respect the node cap, if that happened.
    pub truncated_at: Option<usize>,
}

impl DebrisTeg {
    /// Number of transfer edges the tree spans.
    pub fn num_transfer_steps(&self) -> usize {
        self.layers.len() - 1
    }

    pub fn total_nodes(&self) -> usize {
        self.layers.iter().map(Vec::len).sum()
    }

    /// True when no edge anywhere in the tree carries positive reward.
    pub fn has_positive_reward(&self) -> bool {
        self.layers
            .iter()
            .any(|layer| layer.iter().any(|n| n.edge_reward > 0.0))
    }
}

/// Expands one debris object's engagement tree over
/// `start_step ..= start_step + num_transfer_steps`.
///
/// `grids[p]` supplies platform `p`'s candidate slots; at the window's first
/// step each platform is pinned to `current_slots[p]` (its committed slot),
/// matching the single-slot start the scheduling model assumes. Combo slot
/// indices always refer to grid slot identities.
#[allow(clippy::too_many_arguments)]
pub fn generate_debris_teg(
    debris: &DebrisBody,
    initial_state: &StateVector,
    start_step: usize,
    num_transfer_steps: usize,
    dt_s: f64,
    grids: &[PlatformSlotGrid],
    current_slots: &[usize],
    laser: &LaserSystem,
    rules: &EngagementRules,
    actives: &[ActiveTrack],
    limits: &TegLimits,
) -> Result<DebrisTeg, TegError> {
    assert_eq!(grids.len(), current_slots.len(), "one committed slot per platform");
    assert!(dt_s > 0.0, "step length must be positive");
    let needed = start_step + num_transfer_steps + 1;
    for grid in grids {
        if grid.num_steps() < needed {
            return Err(TegError::WindowMismatch { available: grid.num_steps(), needed });
        }
        debug_assert!((grid.dt_s - dt_s).abs() < 1e-9, "grid step length mismatch");
    }
    for track in actives {
        if track.states.len() < needed {
            return Err(TegError::WindowMismatch { available: track.states.len(), needed });
        }
    }

    let root = TegNode {
        state: *initial_state,
        parent: usize::MAX,
        edge_reward: 0.0,
        combo: EngagementCombo { members: Vec::new() },
        deorbit: false,
    };
    let mut layers = vec![vec![root]];
    let mut total = 1usize;
    let mut truncated_at = None;

    for k in 0..num_transfer_steps {
        let t_abs = start_step + k;

        // Platform cross-sections at this step. The window's first step pins
        // each platform to its committed slot; later steps expose the whole
        // grid. `slot_of` maps local cross-section indices back to grid slot
        // identities.
        let pinned: Vec<Vec<StateVector>> = if k == 0 {
            grids
                .iter()
                .zip(current_slots)
                .map(|(g, &c)| vec![g.states[t_abs][c]])
                .collect()
        } else {
            Vec::new()
        };
        let sections: Vec<&[StateVector]> = if k == 0 {
            pinned.iter().map(|v| v.as_slice()).collect()
        } else {
            grids.iter().map(|g| g.slots_at(t_abs)).collect()
        };
        let slot_of =
            |p: usize, local: usize| if k == 0 { current_slots[p] } else { local };

        let actives_next: Vec<(&StateVector, [f64; 3])> =
            actives.iter().map(|tr| (&tr.states[t_abs + 1], tr.semi_axes)).collect();

        let parents = &layers[k];
        let mut next: Vec<TegNode> = Vec::new();
        for (i, parent_node) in parents.iter().enumerate() {
            if parent_node.state.is_sentinel() {
                next.push(TegNode {
                    state: StateVector::SENTINEL,
                    parent: i,
                    edge_reward: 0.0,
                    combo: EngagementCombo { members: Vec::new() },
                    deorbit: false,
                });
                continue;
            }
            let coasted = propagate_two_body(&parent_node.state, dt_s)?;
            next.push(TegNode {
                state: coasted,
                parent: i,
                edge_reward: 0.0,
                combo: EngagementCombo { members: Vec::new() },
                deorbit: false,
            });

            let parent_peri = periapsis_radius(&parent_node.state)?;
            let combos = enumerate_feasible_combos(
                &parent_node.state,
                &sections,
                laser,
                rules.grazing_altitude_km,
                rules.k_max,
            );
            for combo in combos {
                let mut dvs = Vec::with_capacity(combo.len());
                for &(p, local) in &combo.members {
                    dvs.push(delta_v_engagement(
                        &sections[p][local],
                        &parent_node.state,
                        debris,
                        laser,
                    )?);
                }
                let post = apply_cooperative_engagement(&parent_node.state, &dvs);
                let post_peri = periapsis_radius(&post)?;
                if post_peri >= parent_peri {
                    // Strictly-lowered acceptance; an exact tie is rejected.
                    continue;
                }
                let next_state = propagate_two_body(&post, dt_s)?;
                let reward =
                    transfer_reward(&parent_node.state, &post, next_state.r, rules, &actives_next)?;
                let deorbit = reward >= 1.0;
                next.push(TegNode {
                    state: if deorbit { StateVector::SENTINEL } else { next_state },
                    parent: i,
                    edge_reward: reward,
                    combo: EngagementCombo {
                        members: combo
                            .members
                            .iter()
                            .map(|&(p, local)| (p, slot_of(p, local)))
                            .collect(),
                    },
                    deorbit,
                });
            }
        }

        // Node budget. Strict mode errors the moment the cumulative count
        // would pass the cap. Otherwise engagement children are rationed
        // with lookahead: every branch kept now still owes one coast node
        // per remaining layer, so admitting E extra branches at this layer
        // costs E * (remaining layers) nodes downstream. Reserving that up
        // front guarantees the build always reaches the horizon (coast
        // chains are never droppable) whenever cap >= num_transfer_steps+1.
        if limits.strict && total + next.len() > limits.node_cap {
            return Err(TegError::NodeCapExceeded { step: t_abs + 1 });
        }
        let frontier = parents.len();
        let remaining = num_transfer_steps - k;
        if total + frontier * remaining > limits.node_cap {
            return Err(TegError::NodeCapExceeded { step: t_abs + 1 });
        }
        let eng_allowance = (limits.node_cap - total) / remaining - frontier;
        let eng_count = next.len() - frontier;
        if eng_count > eng_allowance {
            let mut eng_by_reward: Vec<usize> = next
                .iter()
                .enumerate()
                .filter(|(_, n)| !n.is_coast())
                .map(|(j, _)| j)
                .collect();
            eng_by_reward.sort_by(|&a, &b| {
                next[b].edge_reward.total_cmp(&next[a].edge_reward).then(a.cmp(&b))
            });
            let kept: std::collections::BTreeSet<usize> =
                eng_by_reward.into_iter().take(eng_allowance).collect();
            next = next
                .into_iter()
                .enumerate()
                .filter(|(j, n)| n.is_coast() || kept.contains(j))
                .map(|(_, n)| n)
                .collect();
            log::warn!(
                "debris {} graph truncated at step {}: dropped {} engagement branches",
                debris.id,
                t_abs + 1,
                eng_count - eng_allowance
            );
            truncated_at.get_or_insert(t_abs + 1);
        }
        total += next.len();
        layers.push(next);
    }

    Ok(DebrisTeg { debris_id: debris.id, start_step, layers, truncated_at })
}
