//! Receding-horizon mission scheduling.
//!
//! The mission horizon is a sequence of discrete time points `0..T`; between
//! consecutive points lies one decision step (`T-1` in total). The scheduler
//! slides a lookahead window of `L` decision steps across the horizon: at
//! each non-terminal position it rebuilds every active debris object's
//! engagement tree, solves the windowed scheduling model from the platforms'
//! committed slots and remaining budgets, commits only the first step's
//! actions, and rolls platform slots, budgets, and debris states forward.
//! The final window, whose end touches the horizon, commits all of its `L`
//! steps so every decision step is committed exactly once.

use serde::{Deserialize, Serialize};

use crate::astro::{propagate_two_body, AstroError, StateVector};
use crate::ilp::{build_model, export_model, solution_to_json, solve, IlpError, SolveStatus, VarMeta};
use crate::pla::{
    apply_cooperative_engagement, delta_v_engagement, DebrisBody, LaserSystem,
};
use crate::teg::{
    generate_debris_teg, transfer_reward, ActiveTrack, DebrisTeg, EngagementRules,
    PlatformSlotGrid, TegError, TegLimits,
};

#[derive(Debug, thiserror::Error)]
pub enum RhsError {
    #[error("window length {window} must satisfy 2 <= L <= {max} (horizon {horizon} points)")]
    InvalidWindow { window: usize, horizon: usize, max: usize },
    #[error("mission setup invalid: {0}")]
    SetupShape(String),
    #[error(
        "windowed model at step {start_step} reported infeasible; coasting in place is always \
         admissible, so the model inputs are inconsistent"
    )]
    WindowInfeasible { start_step: usize },
    #[error("window at step {start_step} hit the solver time limit with no incumbent")]
    WindowTimedOut { start_step: usize },
    #[error("platform {platform} budget driven negative ({remaining_kms} km/s)")]
    BudgetViolated { platform: usize, remaining_kms: f64 },
    #[error("debris {debris} received an engagement while not active")]
    EngagedInactive { debris: usize },
    #[error("replay diverged from the log at step {step}: {detail}")]
    ReplayMismatch { step: usize, detail: String },
    #[error(
        "window {start_step}: solver objective {solver} disagrees with exhaustive \
         enumeration {exhaustive}"
    )]
    BruteForceMismatch { start_step: usize, solver: f64, exhaustive: f64 },
    #[error(transparent)]
    Ilp(#[from] IlpError),
    #[error(transparent)]
    Teg(#[from] TegError),
    #[error(transparent)]
    Astro(#[from] AstroError),
    #[error(transparent)]
    Pla(#[from] crate::pla::PlaError),
}

/// Scheduler knobs: the horizon (in time points) and the lookahead length
/// (in decision steps). The commit policy is fixed: first step only, except
/// the terminal window commits all `L` of its steps.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct RhsConfig {
    pub horizon_steps: usize,
    pub window_length: usize,
}

/// One debris object's lifetime within the mission.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MissionDebris {
    pub body: DebrisBody,
    /// State at `arrival_step` (not at the epoch, unless arrival is 0).
    pub initial_state: StateVector,
    /// First time point at which the object exists (0 = from the epoch).
    pub arrival_step: usize,
    /// Exclusive end of presence; `usize::MAX` for whole-mission objects.
    /// Used for objects that cease to exist (e.g. a parent body replaced by
    /// its fragments).
    pub departure_step: usize,
    /// Index (into the mission debris list) of the object whose demise
    /// creates this one. If that object has been deorbited before this one's
    /// arrival, the arrival is cancelled: remediating a fragment source
    /// prevents the fragments.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spawned_by: Option<usize>,
}

impl MissionDebris {
    pub fn whole_mission(body: DebrisBody, initial_state: StateVector) -> Self {
        MissionDebris {
            body,
            initial_state,
            arrival_step: 0,
            departure_step: usize::MAX,
            spawned_by: None,
        }
    }
}

/// Everything the scheduler needs besides the horizon/window pair.
#[derive(Clone, Debug)]
pub struct MissionSetup {
    pub dt_s: f64,
    /// One slot grid per platform, covering at least `horizon_steps` points.
    pub grids: Vec<PlatformSlotGrid>,
    pub initial_slots: Vec<usize>,
    pub budgets_kms: Vec<f64>,
    pub debris: Vec<MissionDebris>,
    pub laser: LaserSystem,
    pub rules: EngagementRules,
    pub actives: Vec<ActiveTrack>,
    pub limits: TegLimits,
    /// Tighten the window model so engagement counts exactly match chosen
    /// edges (recommended; the optimum is unaffected either way).
    pub strict_consistency: bool,
    /// Per-window solver wall-clock cap. `None` (the default everywhere
    /// determinism matters) solves every window to proven optimality.
    pub per_window_time_limit_s: Option<f64>,
    /// Record the full per-debris state trajectory in the log.
    pub record_trajectories: bool,
    /// Keep each solved window's exported model text and solution JSON in
    /// its [`WindowRecord`] (for artifact dumps; costs memory on big runs).
    pub record_window_artifacts: bool,
    /// Re-solve every solved window by exhaustive enumeration and fail on
    /// any objective disagreement beyond 1e-9. Only viable at test scale —
    /// the enumerator refuses joint spaces past its cap.
    pub brute_force_check: bool,
}

/// Where a debris object currently stands in its lifecycle.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum DebrisPhase {
    /// Not yet arrived (pre-trigger fragment).
    Pending,
    /// In orbit with this state at the current time point.
    Active(StateVector),
    /// Permanently removed by a deorbiting engagement.
    Deorbited,
    /// Ceased to exist for non-remediation reasons (e.g. exploded parent).
    Removed,
}

/// One platform slot transfer committed at a step (`from == to` is a stay).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CommittedTransfer {
    pub platform: usize,
    pub from_slot: usize,
    pub to_slot: usize,
    pub cost_kms: f64,
}

/// One platform firing committed at a step.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CommittedEngagement {
    pub platform: usize,
    pub slot: usize,
    pub debris: usize,
}

/// One non-coast debris edge committed at a step: the cooperative engagement
/// it encodes, its reward, and the resulting next-point state.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CommittedDebrisEdge {
    pub debris: usize,
    pub reward: f64,
    pub deorbit: bool,
    /// (platform, slot) pairs that fired.
    pub combo: Vec<(usize, usize)>,
    /// Debris state at the next time point (sentinel when deorbited).
    pub post_state: StateVector,
}

/// Everything committed over one decision step. Coasting debris and staying
/// platforms are implicit: a debris without an entry propagates naturally; a
/// platform always has exactly one transfer entry (stays included).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepCommit {
    pub step: usize,
    pub transfers: Vec<CommittedTransfer>,
    pub engagements: Vec<CommittedEngagement>,
    pub debris_moves: Vec<CommittedDebrisEdge>,
}

/// Solver diagnostics for one window position.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct WindowRecord {
    pub start_step: usize,
    pub committed_steps: usize,
    /// True when the window had no positive-reward edge anywhere and the
    /// all-coast/all-stay commitment was taken without a solve.
    pub skipped: bool,
    pub objective: f64,
    pub gap: f64,
    pub nodes_explored: u64,
    pub num_debris: usize,
    pub num_vars: usize,
    pub num_rows: usize,
    /// Exported model text (recorded only on request; never for skipped
    /// windows, which have no model).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lp_model: Option<String>,
    /// Solution in JSON form (recorded only on request).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub solution_json: Option<serde_json::Value>,
}

/// Full mission record: commitments, cumulative series (one row per time
/// point), and end-of-mission aggregates.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MissionLog {
    pub horizon_steps: usize,
    pub dt_s: f64,
    /// One entry per decision step, in order.
    pub committed: Vec<StepCommit>,
    /// Cumulative remediation capacity at each time point (index 0 = 0).
    pub v_cumulative: Vec<f64>,
    /// Cumulative platform firings at each time point.
    pub engagements_cumulative: Vec<u64>,
    /// Cumulative deorbited debris at each time point.
    pub deorbits_cumulative: Vec<u64>,
    /// Remaining budget per platform at each time point.
    pub budgets_remaining: Vec<Vec<f64>>,
    pub total_v: f64,
    pub total_engagements: u64,
    pub total_deorbits: u64,
    pub final_budgets_kms: Vec<f64>,
    pub final_slots: Vec<usize>,
    pub windows: Vec<WindowRecord>,
    /// Per-debris state at every time point (sentinel while absent or after
    /// deorbit); recorded only when the setup asks for it.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub trajectories: Option<Vec<Vec<StateVector>>>,
}

/// Subtract committed transfer costs from per-platform budgets. Exact zeros
/// (stays) leave the budget untouched; a result below zero by more than
/// floating-point slop is a contract violation, and slop itself clamps to 0.
pub fn update_platform_budget(
    budgets: &[f64],
    transfers: &[CommittedTransfer],
) -> Result<Vec<f64>, RhsError> {
    let mut out = budgets.to_vec();
    for tr in transfers {
        let b = &mut out[tr.platform];
        *b -= tr.cost_kms;
        if *b < 0.0 {
            if *b < -1e-9 {
                return Err(RhsError::BudgetViolated {
                    platform: tr.platform,
                    remaining_kms: *b,
                });
            }
            *b = 0.0;
        }
    }
    Ok(out)
}

/// Advance every debris one step: committed engagement edges impose their
/// post-state (sentinel edges become permanent deorbits), all other active
/// debris propagate ballistically. Pending/removed/deorbited objects are
/// untouched; committing an engagement on one is a contract violation.
pub fn update_debris_state(
    phases: &[DebrisPhase],
    commits: &[CommittedDebrisEdge],
    dt_s: f64,
) -> Result<Vec<DebrisPhase>, RhsError> {
    let mut out = Vec::with_capacity(phases.len());
    for phase in phases {
        out.push(match phase {
            DebrisPhase::Active(state) => {
                DebrisPhase::Active(propagate_two_body(state, dt_s)?)
            }
            other => *other,
        });
    }
    for commit in commits {
        if !matches!(phases[commit.debris], DebrisPhase::Active(_)) {
            return Err(RhsError::EngagedInactive { debris: commit.debris });
        }
        out[commit.debris] = if commit.deorbit {
            DebrisPhase::Deorbited
        } else {
            DebrisPhase::Active(commit.post_state)
        };
    }
    Ok(out)
}

struct MissionState {
    phases: Vec<DebrisPhase>,
    slots: Vec<usize>,
    budgets: Vec<f64>,
    v: f64,
    engagements: u64,
    deorbits: u64,
}

fn validate(setup: &MissionSetup, config: &RhsConfig) -> Result<(), RhsError> {
    let t = config.horizon_steps;
    let l = config.window_length;
    if t < 3 || l < 2 || l > t - 1 {
        return Err(RhsError::InvalidWindow { window: l, horizon: t, max: t.saturating_sub(1) });
    }
    let p = setup.grids.len();
    if p == 0 {
        return Err(RhsError::SetupShape("at least one platform is required".into()));
    }
    if setup.initial_slots.len() != p || setup.budgets_kms.len() != p {
        return Err(RhsError::SetupShape(
            "grids, initial_slots, and budgets_kms must have equal length".into(),
        ));
    }
    if !(setup.dt_s > 0.0) {
        return Err(RhsError::SetupShape(format!("step length {} s must be > 0", setup.dt_s)));
    }
    for (i, grid) in setup.grids.iter().enumerate() {
        if grid.num_steps() < t {
            return Err(RhsError::SetupShape(format!(
                "platform {i} grid covers {} points but the horizon needs {t}",
                grid.num_steps()
            )));
        }
        if (grid.dt_s - setup.dt_s).abs() > 1e-9 {
            return Err(RhsError::SetupShape(format!(
                "platform {i} grid step {} s differs from mission step {} s",
                grid.dt_s, setup.dt_s
            )));
        }
        if setup.initial_slots[i] >= grid.num_slots_at(0) {
            return Err(RhsError::SetupShape(format!(
                "platform {i} initial slot {} out of range",
                setup.initial_slots[i]
            )));
        }
    }
    for (g, md) in setup.debris.iter().enumerate() {
        if md.arrival_step >= md.departure_step {
            return Err(RhsError::SetupShape(format!(
                "debris {g} arrives at {} but departs at {}",
                md.arrival_step, md.departure_step
            )));
        }
        if md.arrival_step >= t {
            return Err(RhsError::SetupShape(format!(
                "debris {g} arrival step {} is beyond the horizon {t}",
                md.arrival_step
            )));
        }
        if let Some(parent) = md.spawned_by {
            if parent == g || parent >= setup.debris.len() {
                return Err(RhsError::SetupShape(format!(
                    "debris {g} names invalid spawn source {parent}"
                )));
            }
        }
    }
    for (i, track) in setup.actives.iter().enumerate() {
        if track.states.len() < t {
            return Err(RhsError::SetupShape(format!(
                "active spacecraft {i} track covers {} points but the horizon needs {t}",
                track.states.len()
            )));
        }
    }
    Ok(())
}

/// Run the full receding-horizon mission.
pub fn run_rhs(setup: &MissionSetup, config: &RhsConfig) -> Result<MissionLog, RhsError> {
    validate(setup, config)?;
    let t = config.horizon_steps;
    let l = config.window_length;

    let mut state = MissionState {
        phases: setup
            .debris
            .iter()
            .map(|md| {
                if md.arrival_step == 0 {
                    DebrisPhase::Active(md.initial_state)
                } else {
                    DebrisPhase::Pending
                }
            })
            .collect(),
        slots: setup.initial_slots.clone(),
        budgets: setup.budgets_kms.clone(),
        v: 0.0,
        engagements: 0,
        deorbits: 0,
    };

    let mut log = MissionLog {
        horizon_steps: t,
        dt_s: setup.dt_s,
        committed: Vec::with_capacity(t - 1),
        v_cumulative: vec![0.0],
        engagements_cumulative: vec![0],
        deorbits_cumulative: vec![0],
        budgets_remaining: vec![state.budgets.clone()],
        total_v: 0.0,
        total_engagements: 0,
        total_deorbits: 0,
        final_budgets_kms: Vec::new(),
        final_slots: Vec::new(),
        windows: Vec::new(),
        trajectories: setup.record_trajectories.then(|| vec![Vec::new(); setup.debris.len()]),
    };
    record_trajectory_point(&mut log, &state.phases);

    // Non-terminal windows commit one step each; the terminal window (which
    // ends exactly at the horizon) commits all L of its steps, covering every
    // decision step exactly once.
    for start in 0..t - 1 - l {
        process_lifecycle(setup, &mut state.phases, start);
        run_window(setup, config, &mut state, &mut log, start, 1)?;
    }
    let terminal = t - 1 - l;
    process_lifecycle(setup, &mut state.phases, terminal);
    run_window(setup, config, &mut state, &mut log, terminal, l)?;

    log.total_v = state.v;
    log.total_engagements = state.engagements;
    log.total_deorbits = state.deorbits;
    log.final_budgets_kms = state.budgets.clone();
    log.final_slots = state.slots.clone();
    debug_assert_eq!(log.committed.len(), t - 1);
    debug_assert_eq!(log.v_cumulative.len(), t);
    debug_assert_eq!(log.budgets_remaining.len(), t);
    Ok(log)
}

/// Arrivals and departures take effect at window starts. Every integer step
/// in `0..=T-1-L` is a window start, so each transition fires exactly at its
/// step; transitions inside the terminal window's interior are not supported
/// and are rejected by scenario-level validation.
fn process_lifecycle(setup: &MissionSetup, phases: &mut [DebrisPhase], step: usize) {
    for (g, md) in setup.debris.iter().enumerate() {
        if step >= md.departure_step
            && matches!(phases[g], DebrisPhase::Active(_) | DebrisPhase::Pending)
        {
            phases[g] = DebrisPhase::Removed;
        } else if matches!(phases[g], DebrisPhase::Pending) && step >= md.arrival_step {
            let source_deorbited = md
                .spawned_by
                .is_some_and(|parent| matches!(phases[parent], DebrisPhase::Deorbited));
            phases[g] = if source_deorbited {
                DebrisPhase::Removed
            } else {
                DebrisPhase::Active(md.initial_state)
            };
        }
    }
}

fn record_trajectory_point(log: &mut MissionLog, phases: &[DebrisPhase]) {
    if let Some(tr) = log.trajectories.as_mut() {
        for (g, phase) in phases.iter().enumerate() {
            tr[g].push(match phase {
                DebrisPhase::Active(s) => *s,
                _ => StateVector::SENTINEL,
            });
        }
    }
}

/// Solve the window starting at `start` and commit its first
/// `commit_steps` decision steps.
fn run_window(
    setup: &MissionSetup,
    config: &RhsConfig,
    state: &mut MissionState,
    log: &mut MissionLog,
    start: usize,
    commit_steps: usize,
) -> Result<(), RhsError> {
    let l = config.window_length;

    // Window-local debris: active objects, in global order.
    let globals: Vec<usize> = state
        .phases
        .iter()
        .enumerate()
        .filter(|(_, ph)| matches!(ph, DebrisPhase::Active(_)))
        .map(|(g, _)| g)
        .collect();
    let mut tegs: Vec<DebrisTeg> = Vec::with_capacity(globals.len());
    for (local, &g) in globals.iter().enumerate() {
        let DebrisPhase::Active(ref st) = state.phases[g] else { unreachable!() };
        tegs.push(generate_debris_teg(
            &setup.debris[g].body,
            st,
            start,
            l,
            setup.dt_s,
            &setup.grids,
            &state.slots,
            &setup.laser,
            &setup.rules,
            &setup.actives,
            &setup.limits,
        )?);
        debug_assert_eq!(tegs[local].debris_id, setup.debris[g].body.id);
    }

    // A window with no positive-reward edge anywhere is optimally served by
    // coasting and staying (every alternative scores <= 0), so skip the
    // solve and commit the null action directly. This also guarantees the
    // "untouched mission stays untouched" contract without relying on solver
    // tie-breaking.
    if tegs.iter().all(|teg| !teg.has_positive_reward()) {
        log.windows.push(WindowRecord {
            start_step: start,
            committed_steps: commit_steps,
            skipped: true,
            objective: 0.0,
            gap: 0.0,
            nodes_explored: 0,
            num_debris: globals.len(),
            num_vars: 0,
            num_rows: 0,
            lp_model: None,
            solution_json: None,
        });
        for offset in 0..commit_steps {
            let step = start + offset;
            let transfers: Vec<CommittedTransfer> = state
                .slots
                .iter()
                .enumerate()
                .map(|(p, &s)| CommittedTransfer {
                    platform: p,
                    from_slot: s,
                    to_slot: s,
                    cost_kms: 0.0,
                })
                .collect();
            let commit =
                StepCommit { step, transfers, engagements: Vec::new(), debris_moves: Vec::new() };
            apply_commit(setup, state, log, commit)?;
        }
        return Ok(());
    }

    let model = build_model(
        &tegs,
        &setup.grids,
        &state.slots,
        &state.budgets,
        start,
        l,
        setup.strict_consistency,
    )?;
    let solution = solve(&model, setup.per_window_time_limit_s)?;
    match solution.status {
        SolveStatus::Infeasible => return Err(RhsError::WindowInfeasible { start_step: start }),
        SolveStatus::CapExceeded if solution.selected.is_empty() => {
            return Err(RhsError::WindowTimedOut { start_step: start });
        }
        _ => {}
    }
    if setup.brute_force_check {
        let exhaustive = crate::ilp::brute_force_solve(&model)?;
        if (solution.objective - exhaustive.objective).abs() > 1e-9 {
            return Err(RhsError::BruteForceMismatch {
                start_step: start,
                solver: solution.objective,
                exhaustive: exhaustive.objective,
            });
        }
    }
    log.windows.push(WindowRecord {
        start_step: start,
        committed_steps: commit_steps,
        skipped: false,
        objective: solution.objective,
        gap: solution.gap,
        nodes_explored: solution.nodes_explored,
        num_debris: globals.len(),
        num_vars: model.vars.len(),
        num_rows: model.rows.len(),
        lp_model: setup.record_window_artifacts.then(|| export_model(&model)),
        solution_json: setup
            .record_window_artifacts
            .then(|| solution_to_json(&model, &solution)),
    });

    for offset in 0..commit_steps {
        let step = start + offset;
        let mut transfers = Vec::new();
        let mut engagements = Vec::new();
        let mut debris_moves = Vec::new();
        for &id in &solution.selected {
            match &model.vars[id] {
                VarMeta::PlatformEdge { step: o, platform, from_slot, to_slot, cost }
                    if *o == offset =>
                {
                    transfers.push(CommittedTransfer {
                        platform: *platform,
                        from_slot: *from_slot,
                        to_slot: *to_slot,
                        cost_kms: *cost,
                    });
                }
                VarMeta::Engagement { step: o, platform, slot, debris } if *o == offset => {
                    engagements.push(CommittedEngagement {
                        platform: *platform,
                        slot: *slot,
                        debris: globals[*debris],
                    });
                }
                VarMeta::DebrisEdge { step: o, debris, child, reward, combo, deorbit, .. }
                    if *o == offset && !combo.is_empty() =>
                {
                    debris_moves.push(CommittedDebrisEdge {
                        debris: globals[*debris],
                        reward: *reward,
                        deorbit: *deorbit,
                        combo: combo.clone(),
                        post_state: tegs[*debris].layers[offset + 1][*child].state,
                    });
                }
                _ => {}
            }
        }
        let commit = StepCommit { step, transfers, engagements, debris_moves };
        apply_commit(setup, state, log, commit)?;
    }
    Ok(())
}

/// Roll the mission state across one committed step and append the
/// per-point log rows.
fn apply_commit(
    setup: &MissionSetup,
    state: &mut MissionState,
    log: &mut MissionLog,
    commit: StepCommit,
) -> Result<(), RhsError> {
    state.budgets = update_platform_budget(&state.budgets, &commit.transfers)?;
    for tr in &commit.transfers {
        debug_assert_eq!(state.slots[tr.platform], tr.from_slot);
        state.slots[tr.platform] = tr.to_slot;
    }
    state.phases = update_debris_state(&state.phases, &commit.debris_moves, setup.dt_s)?;
    for edge in &commit.debris_moves {
        state.v += edge.reward;
        if edge.deorbit {
            state.deorbits += 1;
        }
    }
    state.engagements += commit.engagements.len() as u64;

    log.v_cumulative.push(state.v);
    log.engagements_cumulative.push(state.engagements);
    log.deorbits_cumulative.push(state.deorbits);
    log.budgets_remaining.push(state.budgets.clone());
    record_trajectory_point(log, &state.phases);
    log.committed.push(commit);
    Ok(())
}

/// Aggregates recomputed by independently replaying a mission log.
#[derive(Clone, Debug, PartialEq)]
pub struct ReplaySummary {
    pub capacity_v: f64,
    pub deorbits: u64,
    pub engagements: u64,
    pub final_budgets_kms: Vec<f64>,
    pub final_slots: Vec<usize>,
}

/// Re-derive a mission's outcome from its committed actions alone,
/// recomputing every transfer cost, engagement impulse, reward, and the
/// whole debris lifecycle from the physics primitives instead of trusting
/// the logged numbers. Divergence — a broken transfer chain, a firing from
/// an unoccupied slot, an engagement on absent debris, a reward or cost
/// that does not reproduce bit-for-bit, an overdrawn budget — is an error
/// naming the step. On success, compare the returned aggregates with the
/// log's to close the loop.
pub fn replay_mission(
    setup: &MissionSetup,
    config: &RhsConfig,
    log: &MissionLog,
) -> Result<ReplaySummary, RhsError> {
    validate(setup, config)?;
    let t = config.horizon_steps;
    let bad = |step: usize, detail: String| RhsError::ReplayMismatch { step, detail };
    if log.committed.len() != t - 1 {
        return Err(bad(
            0,
            format!("log holds {} committed steps for horizon {t}", log.committed.len()),
        ));
    }

    let mut phases: Vec<DebrisPhase> = setup
        .debris
        .iter()
        .map(|md| {
            if md.arrival_step == 0 {
                DebrisPhase::Active(md.initial_state)
            } else {
                DebrisPhase::Pending
            }
        })
        .collect();
    let mut slots = setup.initial_slots.clone();
    let mut budgets = setup.budgets_kms.clone();
    let (mut v, mut deorbits, mut engagements) = (0.0f64, 0u64, 0u64);
    let last_start = t - 1 - config.window_length;

    for (s, commit) in log.committed.iter().enumerate() {
        if s <= last_start {
            process_lifecycle(setup, &mut phases, s);
        }
        if commit.step != s {
            return Err(bad(s, format!("commit out of order (records step {})", commit.step)));
        }

        // Each platform moves (or stays) exactly once, along a contiguous
        // slot chain, at exactly the grid's price.
        let mut seen = vec![false; slots.len()];
        for tr in &commit.transfers {
            if tr.platform >= slots.len() || seen[tr.platform] {
                return Err(bad(s, format!("platform {} transfer malformed", tr.platform)));
            }
            seen[tr.platform] = true;
            if tr.from_slot != slots[tr.platform] {
                return Err(bad(
                    s,
                    format!(
                        "platform {} departs slot {} but occupies slot {}",
                        tr.platform, tr.from_slot, slots[tr.platform]
                    ),
                ));
            }
            let cost = setup.grids[tr.platform].cost(s, tr.from_slot, tr.to_slot);
            if cost != tr.cost_kms {
                return Err(bad(
                    s,
                    format!(
                        "platform {} transfer cost {} does not reproduce (grid says {cost})",
                        tr.platform, tr.cost_kms
                    ),
                ));
            }
            budgets[tr.platform] -= cost;
            if budgets[tr.platform] < 0.0 {
                if budgets[tr.platform] < -1e-9 {
                    return Err(RhsError::BudgetViolated {
                        platform: tr.platform,
                        remaining_kms: budgets[tr.platform],
                    });
                }
                budgets[tr.platform] = 0.0;
            }
            slots[tr.platform] = tr.to_slot;
        }
        if seen.iter().any(|&present| !present) {
            return Err(bad(s, "a platform is missing its transfer entry".to_string()));
        }

        for e in &commit.engagements {
            if slots.get(e.platform) != Some(&e.slot) {
                return Err(bad(
                    s,
                    format!("platform {} fires from slot {} it does not occupy", e.platform, e.slot),
                ));
            }
        }
        engagements += commit.engagements.len() as u64;
        if setup.strict_consistency {
            let mut fired: Vec<(usize, usize)> =
                commit.engagements.iter().map(|e| (e.platform, e.slot)).collect();
            let mut combo_members: Vec<(usize, usize)> = commit
                .debris_moves
                .iter()
                .flat_map(|edge| edge.combo.iter().copied())
                .collect();
            fired.sort_unstable();
            combo_members.sort_unstable();
            if fired != combo_members {
                return Err(bad(
                    s,
                    "committed firings do not match the union of engagement combos".to_string(),
                ));
            }
        }

        // Recompute each committed engagement edge from physics.
        let mut touched = vec![false; setup.debris.len()];
        for edge in &commit.debris_moves {
            let g = edge.debris;
            if g >= setup.debris.len() || touched[g] {
                return Err(bad(s, format!("debris {g} move malformed")));
            }
            touched[g] = true;
            let DebrisPhase::Active(pre) = phases[g] else {
                return Err(RhsError::EngagedInactive { debris: g });
            };
            if edge.combo.is_empty() {
                return Err(bad(s, format!("debris {g} committed edge has no firing members")));
            }
            let mut dvs = Vec::with_capacity(edge.combo.len());
            for &(p, sl) in &edge.combo {
                if slots.get(p) != Some(&sl) {
                    return Err(bad(
                        s,
                        format!("combo member platform {p} does not occupy slot {sl}"),
                    ));
                }
                dvs.push(delta_v_engagement(
                    &setup.grids[p].states[s][sl],
                    &pre,
                    &setup.debris[g].body,
                    &setup.laser,
                )?);
            }
            let post = apply_cooperative_engagement(&pre, &dvs);
            let next = propagate_two_body(&post, setup.dt_s)?;
            let actives_next: Vec<(&StateVector, [f64; 3])> = setup
                .actives
                .iter()
                .map(|track| (&track.states[s + 1], track.semi_axes))
                .collect();
            let reward = transfer_reward(&pre, &post, next.r, &setup.rules, &actives_next)?;
            if reward != edge.reward {
                return Err(bad(
                    s,
                    format!("debris {g} reward {} does not reproduce ({reward})", edge.reward),
                ));
            }
            let deorbit = reward >= 1.0;
            if deorbit != edge.deorbit {
                return Err(bad(s, format!("debris {g} deorbit flag does not reproduce")));
            }
            let expected_post = if deorbit { StateVector::SENTINEL } else { next };
            if expected_post != edge.post_state {
                return Err(bad(s, format!("debris {g} post-state does not reproduce")));
            }
            v += reward;
            if deorbit {
                deorbits += 1;
                phases[g] = DebrisPhase::Deorbited;
            } else {
                phases[g] = DebrisPhase::Active(next);
            }
        }

        // Everything else coasts.
        for (g, phase) in phases.iter_mut().enumerate() {
            if !touched[g] {
                if let DebrisPhase::Active(st) = phase {
                    *phase = DebrisPhase::Active(propagate_two_body(st, setup.dt_s)?);
                }
            }
        }
    }

    Ok(ReplaySummary {
        capacity_v: v,
        deorbits,
        engagements,
        final_budgets_kms: budgets,
        final_slots: slots,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::astro::KeplerianElements;
    use crate::ilp::{build_model, solve};
    use crate::pla::{apply_cooperative_engagement, delta_v_engagement};
    use crate::teg::{
        build_altitude_change_grid, build_baseline_grid, transfer_reward, LayerDirection,
    };
    use approx::assert_relative_eq;

    fn default_setup(grids: Vec<PlatformSlotGrid>, debris: Vec<MissionDebris>) -> MissionSetup {
        let n = grids.len();
        MissionSetup {
            dt_s: 180.0,
            grids,
            initial_slots: vec![0; n],
            budgets_kms: vec![2.0; n],
            debris,
            laser: LaserSystem::default(),
            rules: EngagementRules::default(),
            actives: Vec::new(),
            limits: TegLimits::default(),
            strict_consistency: true,
            per_window_time_limit_s: None,
            record_trajectories: false,
            record_window_artifacts: false,
            brute_force_check: false,
        }
    }

    fn debris_at(sma_km: f64, arg_lat_deg: f64, id: usize) -> MissionDebris {
        let el = KeplerianElements::circular(sma_km, 0.0, 0.0, arg_lat_deg);
        MissionDebris::whole_mission(
            DebrisBody { id, areal_density_kg_m2: 0.2 },
            el.to_state(),
        )
    }

    /// A run's invariant bundle: monotone series, consistent totals.
    fn assert_log_invariants(log: &MissionLog, initial_budgets: &[f64]) {
        let t = log.horizon_steps;
        assert_eq!(log.committed.len(), t - 1);
        assert_eq!(log.v_cumulative.len(), t);
        assert_eq!(log.engagements_cumulative.len(), t);
        assert_eq!(log.deorbits_cumulative.len(), t);
        assert_eq!(log.budgets_remaining.len(), t);
        for w in log.budgets_remaining.windows(2) {
            for (a, b) in w[0].iter().zip(&w[1]) {
                assert!(b <= a, "budget increased");
            }
        }
        for w in log.deorbits_cumulative.windows(2) {
            assert!(w[1] >= w[0]);
        }
        for (p, b) in log.final_budgets_kms.iter().enumerate() {
            assert!(*b >= 0.0 && *b <= initial_budgets[p]);
        }
        let replayed_v: f64 = log
            .committed
            .iter()
            .flat_map(|c| c.debris_moves.iter())
            .map(|e| e.reward)
            .sum();
        assert_eq!(replayed_v, log.total_v, "V must equal the sum of committed rewards");
        assert_eq!(*log.v_cumulative.last().unwrap(), log.total_v);
    }

    #[test]
    fn stay_and_single_maneuver_budget_arithmetic() {
        let stays = vec![CommittedTransfer {
            platform: 0,
            from_slot: 3,
            to_slot: 3,
            cost_kms: 0.0,
        }];
        assert_eq!(update_platform_budget(&[2.0], &stays).unwrap(), vec![2.0]);

        let burn = vec![CommittedTransfer {
            platform: 0,
            from_slot: 0,
            to_slot: 1,
            cost_kms: 0.3,
        }];
        assert_relative_eq!(update_platform_budget(&[2.0], &burn).unwrap()[0], 1.7);

        let too_much = vec![CommittedTransfer {
            platform: 0,
            from_slot: 0,
            to_slot: 1,
            cost_kms: 2.5,
        }];
        assert!(matches!(
            update_platform_budget(&[2.0], &too_much),
            Err(RhsError::BudgetViolated { platform: 0, .. })
        ));
    }

    #[test]
    fn uncommitted_debris_propagate_and_deorbit_is_absorbing() {
        let el = KeplerianElements::circular(7000.0, 15.0, 30.0, 45.0);
        let initial = el.to_state();
        let phases = vec![DebrisPhase::Active(initial), DebrisPhase::Pending];
        let next = update_debris_state(&phases, &[], 180.0).unwrap();
        let DebrisPhase::Active(prop) = next[0] else { panic!("still active") };
        let oracle = propagate_two_body(&initial, 180.0).unwrap();
        assert_eq!(prop, oracle);
        assert_eq!(next[1], DebrisPhase::Pending);

        // A deorbit commit becomes permanent.
        let commit = CommittedDebrisEdge {
            debris: 0,
            reward: 100.0,
            deorbit: true,
            combo: vec![(0, 0)],
            post_state: StateVector::SENTINEL,
        };
        let next = update_debris_state(&phases, &[commit.clone()], 180.0).unwrap();
        assert_eq!(next[0], DebrisPhase::Deorbited);
        let later = update_debris_state(&next, &[], 180.0).unwrap();
        assert_eq!(later[0], DebrisPhase::Deorbited);

        // Engaging it again is a contract violation.
        assert!(matches!(
            update_debris_state(&later, &[commit], 180.0),
            Err(RhsError::EngagedInactive { debris: 0 })
        ));
    }

    #[test]
    fn window_bounds_are_validated() {
        let platform = KeplerianElements::circular(7000.0, 0.0, 0.0, 180.0);
        let grid = build_baseline_grid(&platform, 6, 180.0).unwrap();
        let setup = default_setup(vec![grid], vec![debris_at(7000.0, 0.0, 0)]);
        for (t, l) in [(6, 1), (6, 6), (2, 2)] {
            let config = RhsConfig { horizon_steps: t, window_length: l };
            assert!(matches!(
                run_rhs(&setup, &config),
                Err(RhsError::InvalidWindow { .. })
            ));
        }
    }

    #[test]
    fn null_mission_commits_nothing_and_spends_nothing() {
        // The platform sits half an orbit away from the only debris at the
        // same radius: never in range, so every window is reward-free.
        let platform = KeplerianElements::circular(7000.0, 0.0, 0.0, 180.0);
        let grid = build_baseline_grid(&platform, 5, 180.0).unwrap();
        let setup = default_setup(vec![grid], vec![debris_at(7000.0, 0.0, 0)]);
        let config = RhsConfig { horizon_steps: 5, window_length: 2 };
        let log = run_rhs(&setup, &config).unwrap();
        assert_log_invariants(&log, &setup.budgets_kms);
        assert_eq!(log.total_v, 0.0);
        assert_eq!(log.total_engagements, 0);
        assert_eq!(log.total_deorbits, 0);
        assert_eq!(log.final_budgets_kms, vec![2.0]);
        assert!(log.windows.iter().all(|w| w.skipped));
        assert!(log
            .committed
            .iter()
            .flat_map(|c| c.transfers.iter())
            .all(|tr| tr.from_slot == tr.to_slot && tr.cost_kms == 0.0));
    }

    /// Platform directly above a deorbitable debris; single decision window.
    fn immediate_deorbit_setup() -> (MissionSetup, RhsConfig) {
        let platform = KeplerianElements::circular(7320.0, 0.0, 0.0, 0.0);
        let grid = build_baseline_grid(&platform, 3, 180.0).unwrap();
        let mut setup = default_setup(vec![grid], vec![debris_at(7000.0, 0.0, 9)]);
        setup.laser = LaserSystem { u_max_km: 321.0, ..LaserSystem::default() };
        (setup, RhsConfig { horizon_steps: 3, window_length: 2 })
    }

    #[test]
    fn full_horizon_window_equals_one_shot_optimum() {
        let (setup, config) = immediate_deorbit_setup();
        // L = T-1: the loop is empty and the terminal window is the whole
        // mission, solved once.
        let log = run_rhs(&setup, &config).unwrap();
        assert_log_invariants(&log, &setup.budgets_kms);
        assert_eq!(log.windows.len(), 1);
        assert_eq!(log.windows[0].committed_steps, 2);

        let teg = generate_debris_teg(
            &setup.debris[0].body,
            &setup.debris[0].initial_state,
            0,
            2,
            setup.dt_s,
            &setup.grids,
            &setup.initial_slots,
            &setup.laser,
            &setup.rules,
            &setup.actives,
            &setup.limits,
        )
        .unwrap();
        let model = build_model(
            &[teg],
            &setup.grids,
            &setup.initial_slots,
            &setup.budgets_kms,
            0,
            2,
            true,
        )
        .unwrap();
        let one_shot = solve(&model, None).unwrap();
        assert_eq!(log.total_v, one_shot.objective);
        assert_eq!(log.total_v, 100.0);
        assert_eq!(log.total_deorbits, 1);
        assert_eq!(log.total_engagements, 1);
    }

    /// A debris 320 km below the platform's bottom altitude layer drifts
    /// into radial alignment at time point 2; reaching it requires dropping
    /// one layer, so the mission only scores with transfer budget available.
    /// The step length is long enough that the single-step layer transfer
    /// costs ~0.35 km/s.
    fn climb_to_engage_setup(budget_kms: f64, t: usize) -> (MissionSetup, RhsConfig) {
        let dt_s = 1800.0;
        // Platform layers: 7520 (index 0), 7720 (1), 7320 (2).
        let platform = KeplerianElements::circular(7520.0, 0.0, 0.0, 0.0);
        let grid = build_altitude_change_grid(
            &platform,
            1,
            3,
            200.0,
            LayerDirection::Symmetric,
            6478.137,
            t,
            dt_s,
        )
        .unwrap();
        // Debris at 7000 km, phased to pass 320 km below the 7320-km layer
        // exactly two steps in (both orbits are circular, so arguments of
        // latitude advance at their mean motions).
        let n_debris = (crate::astro::MU_EARTH / 7000.0f64.powi(3)).sqrt();
        let n_layer = (crate::astro::MU_EARTH / 7320.0f64.powi(3)).sqrt();
        let drift_deg = ((n_debris - n_layer) * 2.0 * dt_s).to_degrees();
        let mut setup =
            default_setup(vec![grid], vec![debris_at(7000.0, -drift_deg, 4)]);
        setup.dt_s = dt_s;
        setup.laser = LaserSystem { u_max_km: 321.0, ..LaserSystem::default() };
        setup.budgets_kms = vec![budget_kms];
        (setup, RhsConfig { horizon_steps: t, window_length: 3 })
    }

    #[test]
    fn reconfiguration_captures_reward_budget_zero_cannot() {
        let (setup, config) = climb_to_engage_setup(0.5, 5);
        let log = run_rhs(&setup, &config).unwrap();
        assert_log_invariants(&log, &setup.budgets_kms);
        assert_eq!(log.total_v, 100.0);
        assert_eq!(log.total_deorbits, 1);
        // The climb costs real budget.
        assert!(log.final_budgets_kms[0] < 0.5);
        assert_eq!(log.final_slots, vec![2]);

        let (pinned, config) = climb_to_engage_setup(0.0, 5);
        let log0 = run_rhs(&pinned, &config).unwrap();
        assert_log_invariants(&log0, &pinned.budgets_kms);
        assert_eq!(log0.total_v, 0.0);
        assert_eq!(log0.final_budgets_kms, vec![0.0]);
    }

    #[test]
    fn committed_actions_replay_to_the_logged_capacity() {
        // T=6, L=2: three one-step windows then a terminal two-step window.
        // The short lookahead only reveals the engagement after the cheap
        // step-0 transfer has passed, so the budget must cover the pricier
        // late transfer (~0.92 km/s once the layers have dephased).
        let (mut setup, _) = climb_to_engage_setup(1.0, 6);
        setup.record_trajectories = true;
        let config = RhsConfig { horizon_steps: 6, window_length: 2 };
        let log = run_rhs(&setup, &config).unwrap();
        assert_log_invariants(&log, &setup.budgets_kms);
        assert_eq!(log.total_v, 100.0, "climb-and-engage must still score under RHS");

        // Independent replay: walk the committed actions forward through the
        // propagation/engagement primitives and recompute V, budgets, and
        // slots from scratch.
        let mut debris_state = Some(setup.debris[0].initial_state);
        let mut slot = setup.initial_slots[0];
        let mut budget = setup.budgets_kms[0];
        let mut v = 0.0;
        for (s, commit) in log.committed.iter().enumerate() {
            assert_eq!(commit.step, s);
            for tr in &commit.transfers {
                assert_eq!(tr.from_slot, slot, "transfer chain must be contiguous");
                let cost = setup.grids[0].cost(s, tr.from_slot, tr.to_slot);
                assert_eq!(tr.cost_kms, cost);
                budget -= cost;
                slot = tr.to_slot;
            }
            assert!(budget >= -1e-12);
            let Some(pre) = debris_state else {
                assert!(
                    commit.debris_moves.is_empty(),
                    "nothing may be committed on deorbited debris"
                );
                continue;
            };
            if let Some(edge) = commit.debris_moves.first() {
                let mut dvs = Vec::new();
                for &(p, sl) in &edge.combo {
                    // The firing platform must actually occupy the slot.
                    assert_eq!(p, 0);
                    assert_eq!(sl, slot);
                    dvs.push(
                        delta_v_engagement(
                            &setup.grids[p].states[s][sl],
                            &pre,
                            &setup.debris[0].body,
                            &setup.laser,
                        )
                        .unwrap(),
                    );
                }
                let post = apply_cooperative_engagement(&pre, &dvs);
                let next = propagate_two_body(&post, setup.dt_s).unwrap();
                let reward =
                    transfer_reward(&pre, &post, next.r, &setup.rules, &[]).unwrap();
                assert_eq!(reward, edge.reward, "replayed reward differs");
                v += reward;
                debris_state = if edge.deorbit { None } else { Some(next) };
            } else {
                debris_state = Some(propagate_two_body(&pre, setup.dt_s).unwrap());
            }
        }
        assert_eq!(v, log.total_v);
        assert_eq!(budget, log.final_budgets_kms[0]);
        assert_eq!(slot, log.final_slots[0]);

        // The logged trajectory matches the replayed lifecycle: sentinel
        // exactly from the deorbit point onward.
        let traj = &log.trajectories.as_ref().unwrap()[0];
        assert_eq!(traj.len(), 6);
        let deorbit_step = log
            .committed
            .iter()
            .find(|c| !c.debris_moves.is_empty())
            .map(|c| c.step)
            .expect("a deorbit was committed");
        for (point, st) in traj.iter().enumerate() {
            assert_eq!(
                st.is_sentinel(),
                point > deorbit_step,
                "trajectory sentinel boundary at point {point}"
            );
        }
    }

    #[test]
    fn deorbiting_the_spawn_source_cancels_its_fragment() {
        // Parent debris sits right under the platform at step 0 (immediate
        // deorbit). A fragment arrives at step 2, phased so the platform is
        // directly overhead again at that step — engageable if it ever
        // activates. With the spawn link, remediating the parent before the
        // trigger must cancel the fragment.
        let platform = KeplerianElements::circular(7320.0, 0.0, 0.0, 0.0);
        let grid = build_baseline_grid(&platform, 5, 180.0).unwrap();
        let n_platform = (crate::astro::MU_EARTH / 7320.0f64.powi(3)).sqrt();
        let fragment_el = KeplerianElements::circular(
            7000.0,
            0.0,
            0.0,
            (n_platform * 360.0).to_degrees(),
        );
        let parent = debris_at(7000.0, 0.0, 0);
        let fragment = MissionDebris {
            body: DebrisBody { id: 1, areal_density_kg_m2: 0.2 },
            initial_state: fragment_el.to_state(),
            arrival_step: 2,
            departure_step: usize::MAX,
            spawned_by: Some(0),
        };
        let mut setup = default_setup(vec![grid], vec![parent, fragment]);
        setup.laser = LaserSystem { u_max_km: 321.0, ..LaserSystem::default() };
        let config = RhsConfig { horizon_steps: 5, window_length: 2 };

        let log = run_rhs(&setup, &config).unwrap();
        assert_log_invariants(&log, &setup.budgets_kms);
        assert_eq!(log.total_v, 100.0, "only the parent scores");
        assert_eq!(log.total_deorbits, 1);

        // Sanity: without the spawn link the fragment activates and is
        // deorbited too, proving the cancellation (not geometry) removed it.
        let mut unlinked = setup.clone();
        unlinked.debris[1].spawned_by = None;
        let log2 = run_rhs(&unlinked, &config).unwrap();
        assert_eq!(log2.total_v, 200.0);
        assert_eq!(log2.total_deorbits, 2);
    }

    #[test]
    fn late_arriving_debris_is_scheduled_after_its_arrival() {
        // Same climb-to-engage geometry, but the debris only comes into
        // existence at step 1 (state given at that step). Windows starting
        // before step 1 must ignore it; the engagement still lands at the
        // aligned step because arrival precedes it. As in the replay test,
        // planning can only start at step 1, after the cheap step-0
        // transfer has passed, so the budget covers the dephased one.
        let (mut setup, config) = climb_to_engage_setup(1.0, 5);
        let state_at_1 =
            propagate_two_body(&setup.debris[0].initial_state, setup.dt_s).unwrap();
        setup.debris = vec![MissionDebris {
            body: setup.debris[0].body,
            initial_state: state_at_1,
            arrival_step: 1,
            departure_step: usize::MAX,
            spawned_by: None,
        }];
        let log = run_rhs(&setup, &config).unwrap();
        assert_log_invariants(&log, &setup.budgets_kms);
        assert_eq!(log.total_v, 100.0);
        // Nothing can be committed on it at step 0.
        assert!(log.committed[0].debris_moves.is_empty());
        assert!(log.committed[0].engagements.is_empty());
    }

    #[test]
    fn replay_reproduces_aggregates_and_detects_tampering() {
        let (setup, _) = climb_to_engage_setup(1.0, 6);
        let config = RhsConfig { horizon_steps: 6, window_length: 2 };
        let log = run_rhs(&setup, &config).unwrap();

        let summary = replay_mission(&setup, &config, &log).unwrap();
        assert_eq!(summary.capacity_v, log.total_v);
        assert_eq!(summary.deorbits, log.total_deorbits);
        assert_eq!(summary.engagements, log.total_engagements);
        assert_eq!(summary.final_budgets_kms, log.final_budgets_kms);
        assert_eq!(summary.final_slots, log.final_slots);

        // A reward perturbed in the last bit must be caught.
        let mut forged = log.clone();
        let idx =
            forged.committed.iter().position(|c| !c.debris_moves.is_empty()).unwrap();
        forged.committed[idx].debris_moves[0].reward *= 1.0 + 1e-15;
        assert!(matches!(
            replay_mission(&setup, &config, &forged),
            Err(RhsError::ReplayMismatch { .. })
        ));

        // So must a forged transfer price (step 0 is a stay costing 0).
        let mut forged = log.clone();
        forged.committed[0].transfers[0].cost_kms = 1e-12;
        assert!(matches!(
            replay_mission(&setup, &config, &forged),
            Err(RhsError::ReplayMismatch { .. })
        ));
    }
}
