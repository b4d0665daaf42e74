//! Exact scheduling of platform transfers and cooperative engagements.
//!
//! The model couples three families of binary variables over one planning
//! window: `x` picks each debris object's path through its time-expanded
//! graph (and carries the remediation reward), `y` marks a platform firing
//! from a slot at a debris object, and `z` picks each platform's path through
//! its slot grid (and carries the transfer cost). Constraint rows force one
//! contiguous path per debris and per platform, staff every selected
//! engagement edge with all of its required platforms, stop a platform from
//! firing anywhere it is not stationed, limit each platform to one engagement
//! per step, forbid firing while transferring, and cap per-platform transfer
//! spend. The solver is a deterministic best-bound branch-and-bound over
//! bounded-variable simplex relaxations; a brute-force enumerator provides an
//! independent oracle at test scale, and models export to LP-format text for
//! cross-checking with external solvers.

mod branch;
mod simplex;

use std::collections::{BTreeMap, BTreeSet};
use std::time::Duration;

use crate::teg::{DebrisTeg, PlatformSlotGrid};

use branch::{branch_and_bound, BnbError, BnbOutcome};
pub use simplex::{Sense, SimplexError};
use simplex::{LinearProgram, LpRow};

/// Largest joint assignment space the brute-force oracle will enumerate.
const BRUTE_FORCE_CAP: u128 = 10_000_000;

#[derive(Debug, thiserror::Error)]
pub enum IlpError {
    #[error("{what}: needs {needed} steps, only {available} available")]
    WindowMismatch { what: &'static str, needed: usize, available: usize },
    #[error("mismatched model inputs: {0}")]
    ShapeMismatch(&'static str),
    #[error("platform {platform} current slot {slot} out of range ({num_slots} slots)")]
    CurrentSlotOutOfRange { platform: usize, slot: usize, num_slots: usize },
    #[error(
        "debris {debris} step {step}: combo references platform {platform} slot {slot} \
         outside its grid"
    )]
    ComboSlotOutOfRange { debris: usize, step: usize, platform: usize, slot: usize },
    #[error("brute force space {estimate} exceeds cap {cap}")]
    BruteForceTooLarge { estimate: u128, cap: u128 },
    #[error(transparent)]
    Solver(#[from] SimplexError),
    #[error("relaxation reported unbounded; the model is malformed")]
    UnboundedRelaxation,
    #[error("variable index {0} out of range")]
    VariableOutOfRange(usize),
}

impl From<BnbError> for IlpError {
    fn from(e: BnbError) -> Self {
        match e {
            BnbError::Simplex(s) => IlpError::Solver(s),
            BnbError::UnboundedRelaxation => IlpError::UnboundedRelaxation,
        }
    }
}

/// What a model variable stands for. Steps are window-relative (0-based).
#[derive(Debug, Clone, PartialEq)]
pub enum VarMeta {
    /// Debris `debris` (index into the model's TEG list) moves along the edge
    /// from `parent` (node index in layer `step`) to `child` (node index in
    /// layer `step + 1`).
    DebrisEdge {
        debris: usize,
        step: usize,
        parent: usize,
        child: usize,
        reward: f64,
        /// Platforms (platform, slot) that must fire to realize this edge;
        /// empty for coasting.
        combo: Vec<(usize, usize)>,
        deorbit: bool,
    },
    /// Platform `platform`, stationed at `slot`, fires at debris `debris`
    /// during `step`.
    Engagement { step: usize, platform: usize, slot: usize, debris: usize },
    /// Platform `platform` transfers `from_slot` -> `to_slot` over `step`.
    PlatformEdge { step: usize, platform: usize, from_slot: usize, to_slot: usize, cost: f64 },
}

impl VarMeta {
    pub fn kind(&self) -> &'static str {
        match self {
            VarMeta::DebrisEdge { .. } => "x",
            VarMeta::Engagement { .. } => "y",
            VarMeta::PlatformEdge { .. } => "z",
        }
    }
}

/// Bijective text name for a variable, used by the LP export.
pub fn variable_name(meta: &VarMeta) -> String {
    match meta {
        VarMeta::DebrisEdge { debris, step, child, .. } => {
            format!("x_d{debris}_t{step}_n{child}")
        }
        VarMeta::Engagement { step, platform, slot, debris } => {
            format!("y_t{step}_p{platform}_s{slot}_d{debris}")
        }
        VarMeta::PlatformEdge { step, platform, from_slot, to_slot, .. } => {
            format!("z_t{step}_p{platform}_s{from_slot}_w{to_slot}")
        }
    }
}

/// One constraint row, kept with a stable human-readable label.
#[derive(Debug, Clone)]
pub struct ModelRow {
    pub label: String,
    pub coeffs: Vec<(usize, f64)>,
    pub sense: Sense,
    pub rhs: f64,
}

/// The assembled scheduling model for one planning window.
#[derive(Debug, Clone)]
pub struct IlpModel {
    pub vars: Vec<VarMeta>,
    /// Objective coefficient per variable (maximized). Nonzero only on `x`.
    pub objective: Vec<f64>,
    pub rows: Vec<ModelRow>,
    pub num_platforms: usize,
    pub num_debris: usize,
    pub start_step: usize,
    pub window_steps: usize,
    pub budgets_kms: Vec<f64>,
    /// (debris, step, child) -> var.
    x_index: BTreeMap<(usize, usize, usize), usize>,
    /// (step, platform, slot, debris) -> var.
    y_index: BTreeMap<(usize, usize, usize, usize), usize>,
    /// (step, platform, from, to) -> var.
    z_index: BTreeMap<(usize, usize, usize, usize), usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    CapExceeded,
}

/// Result of an exact solve or a brute-force enumeration.
#[derive(Debug, Clone)]
pub struct Solution {
    pub objective: f64,
    pub status: SolveStatus,
    /// Upper-bound slack: 0 when proven optimal, best outstanding bound minus
    /// the incumbent when a cap tripped.
    pub gap: f64,
    /// Indices of variables set to 1, ascending.
    pub selected: Vec<usize>,
    pub per_platform_dv_kms: Vec<f64>,
    pub nodes_explored: u64,
}

/// Build the scheduling model for one window.
///
/// `tegs` must all start at `start_step` and span `window_steps` transfer
/// steps; `grids[p]` must cover `start_step + window_steps + 1` states;
/// `current_slots[p]` is where platform `p` sits at the window start (slot
/// index within `grids[p].states[start_step]`). With `strict_consistency` a
/// per-(step, debris) equality pins the engagement count to exactly the
/// staffing of the chosen edge; without it, surplus engagements that change
/// nothing in the objective remain admissible.
pub fn build_model(
    tegs: &[DebrisTeg],
    grids: &[PlatformSlotGrid],
    current_slots: &[usize],
    budgets_kms: &[f64],
    start_step: usize,
    window_steps: usize,
    strict_consistency: bool,
) -> Result<IlpModel, IlpError> {
    let num_platforms = grids.len();
    if num_platforms == 0 {
        return Err(IlpError::ShapeMismatch("at least one platform grid is required"));
    }
    if current_slots.len() != num_platforms || budgets_kms.len() != num_platforms {
        return Err(IlpError::ShapeMismatch(
            "grids, current_slots, and budgets_kms must have equal length",
        ));
    }
    if window_steps == 0 {
        return Err(IlpError::ShapeMismatch("window must span at least one step"));
    }
    if budgets_kms.iter().any(|b| !b.is_finite() || *b < 0.0) {
        return Err(IlpError::ShapeMismatch("budgets must be finite and nonnegative"));
    }
    for (p, grid) in grids.iter().enumerate() {
        let needed = start_step + window_steps + 1;
        if grid.num_steps() < needed {
            return Err(IlpError::WindowMismatch {
                what: "platform grid",
                needed,
                available: grid.num_steps(),
            });
        }
        if current_slots[p] >= grid.num_slots_at(start_step) {
            return Err(IlpError::CurrentSlotOutOfRange {
                platform: p,
                slot: current_slots[p],
                num_slots: grid.num_slots_at(start_step),
            });
        }
    }
    for (d, teg) in tegs.iter().enumerate() {
        if teg.start_step != start_step {
            return Err(IlpError::ShapeMismatch("TEG start step differs from the window"));
        }
        if teg.num_transfer_steps() != window_steps {
            return Err(IlpError::WindowMismatch {
                what: "debris TEG",
                needed: window_steps,
                available: teg.num_transfer_steps(),
            });
        }
        for (t, layer) in teg.layers.iter().enumerate().skip(1) {
            for node in layer {
                let mut seen = BTreeSet::new();
                for &(p, s) in &node.combo.members {
                    if p >= num_platforms || s >= grids[p].num_slots_at(start_step + t - 1) {
                        return Err(IlpError::ComboSlotOutOfRange {
                            debris: d,
                            step: t - 1,
                            platform: p,
                            slot: s,
                        });
                    }
                    if !seen.insert(p) {
                        return Err(IlpError::ShapeMismatch(
                            "combo lists the same platform twice",
                        ));
                    }
                }
            }
        }
    }

    let mut vars: Vec<VarMeta> = Vec::new();
    let mut objective: Vec<f64> = Vec::new();
    let mut x_index = BTreeMap::new();
    let mut y_index = BTreeMap::new();
    let mut z_index = BTreeMap::new();

    // x block: debris-major, then step, then child order within the layer.
    for (d, teg) in tegs.iter().enumerate() {
        for t in 0..window_steps {
            for (k, node) in teg.layers[t + 1].iter().enumerate() {
                let id = vars.len();
                vars.push(VarMeta::DebrisEdge {
                    debris: d,
                    step: t,
                    parent: node.parent,
                    child: k,
                    reward: node.edge_reward,
                    combo: node.combo.members.clone(),
                    deorbit: node.deorbit,
                });
                objective.push(node.edge_reward);
                x_index.insert((d, t, k), id);
            }
        }
    }

    // y block: one variable per distinct (step, platform, slot, debris)
    // appearing in any engagement combo.
    let mut y_keys: BTreeSet<(usize, usize, usize, usize)> = BTreeSet::new();
    for (d, teg) in tegs.iter().enumerate() {
        for t in 0..window_steps {
            for node in &teg.layers[t + 1] {
                for &(p, s) in &node.combo.members {
                    y_keys.insert((t, p, s, d));
                }
            }
        }
    }
    for &(t, p, s, d) in &y_keys {
        let id = vars.len();
        vars.push(VarMeta::Engagement { step: t, platform: p, slot: s, debris: d });
        objective.push(0.0);
        y_index.insert((t, p, s, d), id);
    }

    // z block: step-major, then platform, then (from, to); only finite-cost
    // edges materialize. The first step leaves from the committed slot only.
    let mut z_out: BTreeMap<(usize, usize, usize), Vec<usize>> = BTreeMap::new();
    let mut z_in: BTreeMap<(usize, usize, usize), Vec<usize>> = BTreeMap::new();
    let mut z_moves: BTreeMap<(usize, usize), Vec<usize>> = BTreeMap::new();
    for t in 0..window_steps {
        let abs = start_step + t;
        for (p, grid) in grids.iter().enumerate() {
            let sources: Vec<usize> = if t == 0 {
                vec![current_slots[p]]
            } else {
                (0..grid.num_slots_at(abs)).collect()
            };
            for s in sources {
                for w in 0..grid.num_slots_at(abs + 1) {
                    let cost = grid.cost(abs, s, w);
                    if !cost.is_finite() {
                        continue;
                    }
                    let id = vars.len();
                    vars.push(VarMeta::PlatformEdge {
                        step: t,
                        platform: p,
                        from_slot: s,
                        to_slot: w,
                        cost,
                    });
                    objective.push(0.0);
                    z_index.insert((t, p, s, w), id);
                    z_out.entry((t, p, s)).or_default().push(id);
                    z_in.entry((t, p, w)).or_default().push(id);
                    if s != w {
                        z_moves.entry((t, p)).or_default().push(id);
                    }
                }
            }
        }
    }

    let mut rows: Vec<ModelRow> = Vec::new();

    // Each debris leaves its root exactly once.
    for (d, teg) in tegs.iter().enumerate() {
        let coeffs: Vec<(usize, f64)> =
            (0..teg.layers[1].len()).map(|k| (x_index[&(d, 0, k)], 1.0)).collect();
        rows.push(ModelRow {
            label: format!("dinit_d{d}"),
            coeffs,
            sense: Sense::Eq,
            rhs: 1.0,
        });
    }
    // Debris path contiguity: outflow of every interior node equals the flow
    // on its single incoming edge.
    for (d, teg) in tegs.iter().enumerate() {
        for t in 1..window_steps {
            for jj in 0..teg.layers[t].len() {
                let mut coeffs: Vec<(usize, f64)> = teg.layers[t + 1]
                    .iter()
                    .enumerate()
                    .filter(|(_, node)| node.parent == jj)
                    .map(|(k, _)| (x_index[&(d, t, k)], 1.0))
                    .collect();
                coeffs.push((x_index[&(d, t - 1, jj)], -1.0));
                rows.push(ModelRow {
                    label: format!("dflow_d{d}_t{t}_n{jj}"),
                    coeffs,
                    sense: Sense::Eq,
                    rhs: 0.0,
                });
            }
        }
    }
    // Staffing: choosing an engagement edge requires every listed platform to
    // fire from its listed slot.
    for (d, teg) in tegs.iter().enumerate() {
        for t in 0..window_steps {
            for (k, node) in teg.layers[t + 1].iter().enumerate() {
                if node.combo.members.is_empty() {
                    continue;
                }
                let mut coeffs: Vec<(usize, f64)> = node
                    .combo
                    .members
                    .iter()
                    .map(|&(p, s)| (y_index[&(t, p, s, d)], 1.0))
                    .collect();
                coeffs.push((x_index[&(d, t, k)], -(node.combo.members.len() as f64)));
                rows.push(ModelRow {
                    label: format!("staff_d{d}_t{t}_n{k}"),
                    coeffs,
                    sense: Sense::Ge,
                    rhs: 0.0,
                });
            }
        }
    }
    // Optional tightening: the total engagement count on a debris equals the
    // staffing requirement of whichever edge was chosen, so no surplus
    // engagements (which would impart unmodeled impulse) can ride along.
    if strict_consistency {
        for t in 0..window_steps {
            for (d, teg) in tegs.iter().enumerate() {
                let mut coeffs: Vec<(usize, f64)> = y_keys
                    .iter()
                    .filter(|&&(yt, _, _, yd)| yt == t && yd == d)
                    .map(|key| (y_index[key], 1.0))
                    .collect();
                if coeffs.is_empty() {
                    continue;
                }
                for (k, node) in teg.layers[t + 1].iter().enumerate() {
                    if !node.combo.members.is_empty() {
                        coeffs.push((
                            x_index[&(d, t, k)],
                            -(node.combo.members.len() as f64),
                        ));
                    }
                }
                rows.push(ModelRow {
                    label: format!("consist_t{t}_d{d}"),
                    coeffs,
                    sense: Sense::Eq,
                    rhs: 0.0,
                });
            }
        }
    }
    // A platform only fires from a slot it actually occupies (it must take
    // some outgoing transfer edge from that slot, the zero-cost stay
    // included).
    {
        let mut by_tps: BTreeMap<(usize, usize, usize), Vec<usize>> = BTreeMap::new();
        for (&(t, p, s, _), &id) in &y_index {
            by_tps.entry((t, p, s)).or_default().push(id);
        }
        for (&(t, p, s), ys) in &by_tps {
            let mut coeffs: Vec<(usize, f64)> = ys.iter().map(|&id| (id, 1.0)).collect();
            if let Some(zs) = z_out.get(&(t, p, s)) {
                coeffs.extend(zs.iter().map(|&id| (id, -1.0)));
            }
            rows.push(ModelRow {
                label: format!("located_t{t}_p{p}_s{s}"),
                coeffs,
                sense: Sense::Le,
                rhs: 0.0,
            });
        }
    }
    // At most one engagement per platform per step, and firing rules out
    // moving in the same step.
    {
        let mut by_tp: BTreeMap<(usize, usize), Vec<usize>> = BTreeMap::new();
        for (&(t, p, _, _), &id) in &y_index {
            by_tp.entry((t, p)).or_default().push(id);
        }
        for (&(t, p), ys) in &by_tp {
            rows.push(ModelRow {
                label: format!("onefire_t{t}_p{p}"),
                coeffs: ys.iter().map(|&id| (id, 1.0)).collect(),
                sense: Sense::Le,
                rhs: 1.0,
            });
        }
        for (&(t, p), ys) in &by_tp {
            let mut coeffs: Vec<(usize, f64)> = ys.iter().map(|&id| (id, 1.0)).collect();
            if let Some(moves) = z_moves.get(&(t, p)) {
                coeffs.extend(moves.iter().map(|&id| (id, 1.0)));
            }
            rows.push(ModelRow {
                label: format!("fire_or_move_t{t}_p{p}"),
                coeffs,
                sense: Sense::Le,
                rhs: 1.0,
            });
        }
    }
    // Each platform leaves its committed slot exactly once...
    for p in 0..num_platforms {
        let zs = z_out
            .get(&(0, p, current_slots[p]))
            .expect("the stay edge always exists at the committed slot");
        rows.push(ModelRow {
            label: format!("pinit_p{p}"),
            coeffs: zs.iter().map(|&id| (id, 1.0)).collect(),
            sense: Sense::Eq,
            rhs: 1.0,
        });
    }
    // ...and thereafter transfers out of a slot exactly as often as it
    // arrived there.
    for p in 0..num_platforms {
        for t in 1..window_steps {
            let abs = start_step + t;
            for s in 0..grids[p].num_slots_at(abs) {
                let mut coeffs: Vec<(usize, f64)> = Vec::new();
                if let Some(zs) = z_out.get(&(t, p, s)) {
                    coeffs.extend(zs.iter().map(|&id| (id, 1.0)));
                }
                if let Some(zs) = z_in.get(&(t - 1, p, s)) {
                    coeffs.extend(zs.iter().map(|&id| (id, -1.0)));
                }
                rows.push(ModelRow {
                    label: format!("pflow_p{p}_t{t}_s{s}"),
                    coeffs,
                    sense: Sense::Eq,
                    rhs: 0.0,
                });
            }
        }
    }
    // Transfer spend stays within each platform's remaining budget.
    for p in 0..num_platforms {
        let mut coeffs: Vec<(usize, f64)> = Vec::new();
        for (&(_, zp, _, _), &id) in &z_index {
            if zp != p {
                continue;
            }
            if let VarMeta::PlatformEdge { cost, .. } = &vars[id] {
                if *cost != 0.0 {
                    coeffs.push((id, *cost));
                }
            }
        }
        rows.push(ModelRow {
            label: format!("budget_p{p}"),
            coeffs,
            sense: Sense::Le,
            rhs: budgets_kms[p],
        });
    }

    Ok(IlpModel {
        vars,
        objective,
        rows,
        num_platforms,
        num_debris: tegs.len(),
        start_step,
        window_steps,
        budgets_kms: budgets_kms.to_vec(),
        x_index,
        y_index,
        z_index,
    })
}

impl IlpModel {
    fn to_lp(&self) -> LinearProgram {
        LinearProgram {
            objective: self.objective.clone(),
            lower: vec![0.0; self.vars.len()],
            upper: vec![1.0; self.vars.len()],
            rows: self
                .rows
                .iter()
                .map(|r| LpRow { coeffs: r.coeffs.clone(), sense: r.sense, rhs: r.rhs })
                .collect(),
        }
    }

    fn extract(&self, selected: Vec<usize>, status: SolveStatus, gap: f64, nodes: u64) -> Solution {
        let mut per_platform_dv = vec![0.0; self.num_platforms];
        let mut objective = 0.0;
        for &id in &selected {
            objective += self.objective[id];
            if let VarMeta::PlatformEdge { platform, cost, .. } = &self.vars[id] {
                per_platform_dv[*platform] += cost;
            }
        }
        Solution {
            objective,
            status,
            gap,
            selected,
            per_platform_dv_kms: per_platform_dv,
            nodes_explored: nodes,
        }
    }
}

/// Solve the model to proven optimality (or to the wall-clock limit).
pub fn solve(model: &IlpModel, time_limit_s: Option<f64>) -> Result<Solution, IlpError> {
    solve_with_fixes(model, &[], time_limit_s)
}

/// Solve with extra 0/1 pins on selected variables (used to evaluate
/// restricted policies such as "never transfer").
pub fn solve_with_fixes(
    model: &IlpModel,
    fixes: &[(usize, bool)],
    time_limit_s: Option<f64>,
) -> Result<Solution, IlpError> {
    let mut lp = model.to_lp();
    for &(id, up) in fixes {
        if id >= lp.objective.len() {
            return Err(IlpError::VariableOutOfRange(id));
        }
        let v = if up { 1.0 } else { 0.0 };
        lp.lower[id] = v;
        lp.upper[id] = v;
    }
    let limit = time_limit_s.map(Duration::from_secs_f64);
    let result = branch_and_bound(&lp, limit)?;
    let nodes = result.nodes_explored;
    Ok(match result.outcome {
        BnbOutcome::Optimal { values, objective } => {
            let selected: Vec<usize> =
                values.iter().enumerate().filter(|(_, &v)| v).map(|(i, _)| i).collect();
            let solution = model.extract(selected, SolveStatus::Optimal, 0.0, nodes);
            debug_assert!(
                (solution.objective - objective).abs() <= 1e-6 * (1.0 + objective.abs()),
                "search-tree objective {objective} drifted from the exact recomputation {}",
                solution.objective
            );
            solution
        }
        BnbOutcome::Infeasible => Solution {
            objective: 0.0,
            status: SolveStatus::Infeasible,
            gap: 0.0,
            selected: Vec::new(),
            per_platform_dv_kms: vec![0.0; model.num_platforms],
            nodes_explored: nodes,
        },
        BnbOutcome::CapExceeded { incumbent, best_bound } => match incumbent {
            Some((obj, values)) => {
                let selected: Vec<usize> =
                    values.iter().enumerate().filter(|(_, &v)| v).map(|(i, _)| i).collect();
                let gap = (best_bound - obj).max(0.0);
                model.extract(selected, SolveStatus::CapExceeded, gap, nodes)
            }
            None => Solution {
                objective: 0.0,
                status: SolveStatus::CapExceeded,
                gap: f64::INFINITY,
                selected: Vec::new(),
                per_platform_dv_kms: vec![0.0; model.num_platforms],
                nodes_explored: nodes,
            },
        },
    })
}

struct PlatformPath {
    vars: Vec<usize>,
    /// Slot occupied at each window step 0..window_steps.
    pos: Vec<usize>,
    /// Whether the platform changes slots over each step.
    moving: Vec<bool>,
}

struct DebrisPath {
    vars: Vec<usize>,
    reward: f64,
    /// Per step: staffing members of the chosen edge (empty when coasting).
    staffing: Vec<Vec<(usize, usize)>>,
}

/// Exhaustively enumerate joint platform paths and engagement schedules and
/// return the best assignment. Independent of the LP machinery; serves as the
/// definitional oracle for [`solve`] at small scale.
pub fn brute_force_solve(model: &IlpModel) -> Result<Solution, IlpError> {
    let w = model.window_steps;

    // All budget-feasible platform paths, in variable order.
    let mut platform_paths: Vec<Vec<PlatformPath>> = Vec::with_capacity(model.num_platforms);
    for p in 0..model.num_platforms {
        let mut paths = Vec::new();
        // Depth-first over z edges; the committed slot is the only step-0
        // source, so starting from its outgoing list covers every path.
        fn rec(
            model: &IlpModel,
            p: usize,
            t: usize,
            s: usize,
            acc: &mut Vec<usize>,
            cost: f64,
            pos: &mut Vec<usize>,
            moving: &mut Vec<bool>,
            out: &mut Vec<PlatformPath>,
        ) {
            if t == model.window_steps {
                out.push(PlatformPath {
                    vars: acc.clone(),
                    pos: pos.clone(),
                    moving: moving.clone(),
                });
                return;
            }
            for (&(_, _, _, to), &id) in
                model.z_index.range((t, p, s, 0)..=(t, p, s, usize::MAX))
            {
                let VarMeta::PlatformEdge { cost: c, .. } = &model.vars[id] else {
                    unreachable!()
                };
                let next_cost = cost + c;
                if next_cost > model.budgets_kms[p] + 1e-9 {
                    continue;
                }
                acc.push(id);
                pos.push(s);
                moving.push(s != to);
                rec(model, p, t + 1, to, acc, next_cost, pos, moving, out);
                acc.pop();
                pos.pop();
                moving.pop();
            }
        }
        let start = model
            .z_index
            .range((0, p, 0, 0)..(0, p + 1, 0, 0))
            .next()
            .map(|(&(_, _, s, _), _)| s)
            .expect("every platform has step-0 edges");
        let mut acc = Vec::new();
        let mut pos = Vec::new();
        let mut moving = Vec::new();
        rec(model, p, 0, start, &mut acc, 0.0, &mut pos, &mut moving, &mut paths);
        platform_paths.push(paths);
    }

    // All debris paths through their TEGs, in variable order.
    let mut debris_paths: Vec<Vec<DebrisPath>> = Vec::with_capacity(model.num_debris);
    for d in 0..model.num_debris {
        let mut paths = Vec::new();
        fn rec(
            model: &IlpModel,
            d: usize,
            t: usize,
            node: usize,
            acc: &mut Vec<usize>,
            reward: f64,
            staffing: &mut Vec<Vec<(usize, usize)>>,
            out: &mut Vec<DebrisPath>,
        ) {
            if t == model.window_steps {
                out.push(DebrisPath {
                    vars: acc.clone(),
                    reward,
                    staffing: staffing.clone(),
                });
                return;
            }
            for (&(_, _, k), &id) in model.x_index.range((d, t, 0)..=(d, t, usize::MAX)) {
                let VarMeta::DebrisEdge { parent, reward: r, combo, .. } = &model.vars[id]
                else {
                    unreachable!()
                };
                if *parent != node {
                    continue;
                }
                acc.push(id);
                staffing.push(combo.clone());
                rec(model, d, t + 1, k, acc, reward + r, staffing, out);
                acc.pop();
                staffing.pop();
            }
        }
        let mut acc = Vec::new();
        let mut staffing = Vec::new();
        rec(model, d, 0, 0, &mut acc, 0.0, &mut staffing, &mut paths);
        debris_paths.push(paths);
    }

    let mut estimate: u128 = 1;
    for paths in &platform_paths {
        estimate = estimate.saturating_mul(paths.len().max(1) as u128);
    }
    for paths in &debris_paths {
        estimate = estimate.saturating_mul(paths.len().max(1) as u128);
    }
    if estimate > BRUTE_FORCE_CAP {
        return Err(IlpError::BruteForceTooLarge { estimate, cap: BRUTE_FORCE_CAP });
    }

    // Joint enumeration: fix one path per platform, then assign debris paths
    // subject to staffing availability.
    let mut best: Option<(f64, Vec<usize>)> = None;
    let mut platform_choice = vec![0usize; model.num_platforms];

    fn assign_debris(
        model: &IlpModel,
        debris_paths: &[Vec<DebrisPath>],
        plat: &[&PlatformPath],
        d: usize,
        used: &mut Vec<Vec<bool>>,
        reward: f64,
        chosen: &mut Vec<usize>,
        best: &mut Option<(f64, Vec<usize>)>,
        selected_platform_vars: &[usize],
    ) {
        if d == debris_paths.len() {
            if best.as_ref().is_none_or(|(b, _)| reward > *b + 1e-12) {
                let mut selected: Vec<usize> = selected_platform_vars.to_vec();
                for (dd, &path_idx) in chosen.iter().enumerate() {
                    let path = &debris_paths[dd][path_idx];
                    selected.extend_from_slice(&path.vars);
                    for (t, members) in path.staffing.iter().enumerate() {
                        for &(p, s) in members {
                            selected.push(model.y_index[&(t, p, s, dd)]);
                        }
                    }
                }
                selected.sort_unstable();
                *best = Some((reward, selected));
            }
            return;
        }
        'path: for (i, path) in debris_paths[d].iter().enumerate() {
            // Check staffing availability along the whole path.
            for (t, members) in path.staffing.iter().enumerate() {
                for &(p, s) in members {
                    if plat[p].pos[t] != s || plat[p].moving[t] || used[t][p] {
                        continue 'path;
                    }
                }
            }
            for (t, members) in path.staffing.iter().enumerate() {
                for &(p, _) in members {
                    used[t][p] = true;
                }
            }
            chosen.push(i);
            assign_debris(
                model,
                debris_paths,
                plat,
                d + 1,
                used,
                reward + path.reward,
                chosen,
                best,
                selected_platform_vars,
            );
            chosen.pop();
            for (t, members) in path.staffing.iter().enumerate() {
                for &(p, _) in members {
                    used[t][p] = false;
                }
            }
        }
    }

    fn product(
        model: &IlpModel,
        platform_paths: &[Vec<PlatformPath>],
        debris_paths: &[Vec<DebrisPath>],
        p: usize,
        choice: &mut Vec<usize>,
        best: &mut Option<(f64, Vec<usize>)>,
        w: usize,
    ) {
        if p == platform_paths.len() {
            let plat: Vec<&PlatformPath> =
                choice.iter().enumerate().map(|(pp, &i)| &platform_paths[pp][i]).collect();
            let selected_platform_vars: Vec<usize> =
                plat.iter().flat_map(|path| path.vars.iter().copied()).collect();
            let mut used = vec![vec![false; platform_paths.len()]; w];
            let mut chosen = Vec::new();
            assign_debris(
                model,
                debris_paths,
                &plat,
                0,
                &mut used,
                0.0,
                &mut chosen,
                best,
                &selected_platform_vars,
            );
            return;
        }
        for i in 0..platform_paths[p].len() {
            choice[p] = i;
            product(model, platform_paths, debris_paths, p + 1, choice, best, w);
        }
    }

    product(model, &platform_paths, &debris_paths, 0, &mut platform_choice, &mut best, w);

    let (_, selected) = best.expect("the all-stay, all-coast assignment is always feasible");
    Ok(model.extract(selected, SolveStatus::Optimal, 0.0, 0))
}

/// Render the model as LP-format text: objective, named rows, and the binary
/// declaration for every variable. Variable names encode kind, step, and
/// indices bijectively, so external solvers produce directly comparable
/// solutions.
pub fn export_model(model: &IlpModel) -> String {
    fn push_terms(out: &mut String, coeffs: &[(usize, f64)], names: &[String]) {
        for (i, &(id, c)) in coeffs.iter().enumerate() {
            if i == 0 {
                if c < 0.0 {
                    out.push_str(&format!(" - {} {}", fmt(-c), names[id]));
                } else {
                    out.push_str(&format!(" {} {}", fmt(c), names[id]));
                }
            } else if c < 0.0 {
                out.push_str(&format!(" - {} {}", fmt(-c), names[id]));
            } else {
                out.push_str(&format!(" + {} {}", fmt(c), names[id]));
            }
        }
    }
    fn fmt(v: f64) -> String {
        format!("{v}")
    }

    let names: Vec<String> = model.vars.iter().map(variable_name).collect();
    let mut out = String::new();
    out.push_str(&format!(
        "\\ scheduling model: {} debris, {} platforms, window {} steps from step {}\n",
        model.num_debris, model.num_platforms, model.window_steps, model.start_step
    ));
    out.push_str("Maximize\n obj:");
    let obj_terms: Vec<(usize, f64)> = model
        .objective
        .iter()
        .enumerate()
        .filter(|(_, &c)| c != 0.0)
        .map(|(i, &c)| (i, c))
        .collect();
    push_terms(&mut out, &obj_terms, &names);
    out.push_str("\nSubject To\n");
    for row in &model.rows {
        out.push_str(&format!(" {}:", row.label));
        push_terms(&mut out, &row.coeffs, &names);
        let sense = match row.sense {
            Sense::Le => "<=",
            Sense::Ge => ">=",
            Sense::Eq => "=",
        };
        out.push_str(&format!(" {} {}\n", sense, fmt(row.rhs)));
    }
    out.push_str("Binary\n");
    for name in &names {
        out.push_str(&format!(" {name}\n"));
    }
    out.push_str("End\n");
    out
}

/// Structured JSON dump of a solution: selected variables with their names
/// and kinds, the objective, bound gap, and per-platform transfer spend.
pub fn solution_to_json(model: &IlpModel, solution: &Solution) -> serde_json::Value {
    let variables: Vec<serde_json::Value> = solution
        .selected
        .iter()
        .map(|&id| {
            serde_json::json!({
                "name": variable_name(&model.vars[id]),
                "kind": model.vars[id].kind(),
                "value": 1,
            })
        })
        .collect();
    serde_json::json!({
        "objective": solution.objective,
        "status": match solution.status {
            SolveStatus::Optimal => "optimal",
            SolveStatus::Infeasible => "infeasible",
            SolveStatus::CapExceeded => "cap_exceeded",
        },
        "gap": solution.gap,
        "nodes_explored": solution.nodes_explored,
        "per_platform_dv_kms": solution.per_platform_dv_kms,
        "variables": variables,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::astro::{KeplerianElements, StateVector};
    use crate::pla::{DebrisBody, LaserSystem};
    use crate::teg::{
        build_altitude_change_grid, build_baseline_grid, generate_debris_teg, DebrisTeg,
        EngagementCombo, EngagementRules, LayerDirection, TegLimits, TegNode,
    };
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha20Rng;

    fn coast_node(parent: usize) -> TegNode {
        TegNode {
            state: StateVector::SENTINEL,
            parent,
            edge_reward: 0.0,
            combo: EngagementCombo { members: Vec::new() },
            deorbit: false,
        }
    }

    fn eng_node(parent: usize, reward: f64, members: Vec<(usize, usize)>) -> TegNode {
        TegNode {
            state: StateVector::SENTINEL,
            parent,
            edge_reward: reward,
            combo: EngagementCombo { members },
            deorbit: reward >= 1.0,
        }
    }

    fn synthetic_teg(debris_id: usize, start: usize, layers: Vec<Vec<TegNode>>) -> DebrisTeg {
        DebrisTeg { debris_id, start_step: start, layers, truncated_at: None }
    }

    /// Small real-geometry instance: one debris directly below the platform,
    /// engageable at the first step only.
    fn deorbit_instance() -> (Vec<DebrisTeg>, Vec<crate::teg::PlatformSlotGrid>) {
        let platform = KeplerianElements::circular(7320.0, 0.0, 0.0, 0.0);
        let debris_el = KeplerianElements::circular(7000.0, 0.0, 0.0, 0.0);
        let grid = build_baseline_grid(&platform, 4, 180.0).unwrap();
        let laser = LaserSystem { u_max_km: 321.0, ..LaserSystem::default() };
        let debris = DebrisBody { id: 7, areal_density_kg_m2: 0.2 };
        let teg = generate_debris_teg(
            &debris,
            &debris_el.to_state(),
            0,
            2,
            180.0,
            &[grid.clone()],
            &[0],
            &laser,
            &EngagementRules::default(),
            &[],
            &TegLimits::default(),
        )
        .unwrap();
        (vec![teg], vec![grid])
    }

    #[test]
    fn coast_only_instance_scores_zero_along_the_only_path() {
        // Platform half an orbit away: no engagement opportunities at all.
        let platform = KeplerianElements::circular(7000.0, 0.0, 0.0, 180.0);
        let debris_el = KeplerianElements::circular(7000.0, 0.0, 0.0, 0.0);
        let grid = build_baseline_grid(&platform, 5, 180.0).unwrap();
        let teg = generate_debris_teg(
            &DebrisBody { id: 0, areal_density_kg_m2: 0.2 },
            &debris_el.to_state(),
            0,
            3,
            180.0,
            &[grid.clone()],
            &[0],
            &LaserSystem::default(),
            &EngagementRules::default(),
            &[],
            &TegLimits::default(),
        )
        .unwrap();
        let model =
            build_model(&[teg], &[grid], &[0], &[2.0], 0, 3, true).unwrap();
        let sol = solve(&model, None).unwrap();
        assert_eq!(sol.status, SolveStatus::Optimal);
        assert_eq!(sol.objective, 0.0);
        assert_eq!(sol.gap, 0.0);
        // One debris edge per step plus one platform edge per step.
        let x_count = sol
            .selected
            .iter()
            .filter(|&&id| matches!(model.vars[id], VarMeta::DebrisEdge { .. }))
            .count();
        let z_count = sol
            .selected
            .iter()
            .filter(|&&id| matches!(model.vars[id], VarMeta::PlatformEdge { .. }))
            .count();
        assert_eq!(x_count, 3);
        assert_eq!(z_count, 3);
        assert_eq!(sol.per_platform_dv_kms, vec![0.0]);
    }

    #[test]
    fn single_deorbit_opportunity_is_taken_in_full() {
        let (tegs, grids) = deorbit_instance();
        let model = build_model(&tegs, &grids, &[0], &[2.0], 0, 2, true).unwrap();
        let sol = solve(&model, None).unwrap();
        assert_eq!(sol.status, SolveStatus::Optimal);
        assert_eq!(sol.objective, 100.0);
        assert_eq!(sol.gap, 0.0);
        let y_count = sol
            .selected
            .iter()
            .filter(|&&id| matches!(model.vars[id], VarMeta::Engagement { .. }))
            .count();
        assert_eq!(y_count, 1);
        assert_eq!(sol.per_platform_dv_kms, vec![0.0]);
        // The chosen first-step edge is the deorbiting engagement.
        let deorbit_taken = sol.selected.iter().any(|&id| {
            matches!(
                model.vars[id],
                VarMeta::DebrisEdge { step: 0, deorbit: true, .. }
            )
        });
        assert!(deorbit_taken);
    }

    #[test]
    fn two_member_combo_emits_joint_staffing_row_and_solves() {
        // A cooperative edge requiring platform 1 at slot 3 and platform 5 at
        // slot 14, both of which is where those platforms already sit.
        let elems = KeplerianElements::circular(7104.8, 42.33, 10.0, 25.0);
        let grid = build_altitude_change_grid(
            &elems,
            1,
            15,
            25.0,
            LayerDirection::Up,
            6478.137,
            4,
            180.0,
        )
        .unwrap();
        let grids = vec![grid; 6];
        let current = vec![0, 3, 0, 0, 0, 14];
        let budgets = vec![0.0; 6];
        let teg = synthetic_teg(
            0,
            1,
            vec![
                vec![coast_node(usize::MAX)],
                vec![coast_node(0), eng_node(0, 0.42, vec![(1, 3), (5, 14)])],
                vec![coast_node(0), coast_node(1)],
            ],
        );
        let model = build_model(&[teg], &grids, &current, &budgets, 1, 2, true).unwrap();

        let staff = model
            .rows
            .iter()
            .find(|r| r.label == "staff_d0_t0_n1")
            .expect("staffing row present");
        assert_eq!(staff.sense, Sense::Ge);
        assert_eq!(staff.rhs, 0.0);
        let rendered: Vec<(String, f64)> = staff
            .coeffs
            .iter()
            .map(|&(id, c)| (variable_name(&model.vars[id]), c))
            .collect();
        assert_eq!(
            rendered,
            vec![
                ("y_t0_p1_s3_d0".to_string(), 1.0),
                ("y_t0_p5_s14_d0".to_string(), 1.0),
                ("x_d0_t0_n1".to_string(), -2.0),
            ]
        );
        let text = export_model(&model);
        assert!(
            text.contains("staff_d0_t0_n1: 1 y_t0_p1_s3_d0 + 1 y_t0_p5_s14_d0 - 2 x_d0_t0_n1 >= 0"),
            "staffing row missing from export:\n{text}"
        );

        let sol = solve(&model, None).unwrap();
        assert_relative_eq!(sol.objective, 0.42, epsilon = 1e-9);
        let ys: Vec<String> = sol
            .selected
            .iter()
            .filter(|&&id| matches!(model.vars[id], VarMeta::Engagement { .. }))
            .map(|&id| variable_name(&model.vars[id]))
            .collect();
        assert_eq!(ys, vec!["y_t0_p1_s3_d0".to_string(), "y_t0_p5_s14_d0".to_string()]);
        assert_eq!(sol.per_platform_dv_kms, vec![0.0; 6]);
    }

    #[test]
    fn row_and_variable_counts_match_hand_enumeration() {
        // Window of 3 steps, 2 platforms, 2 debris, 2 slots per step.
        // Debris 0 has one extra engagement edge at the first step; debris 1
        // coasts only. Hand counts:
        //   x: d0 has layers sized [1,2,2,2] -> 2+2+2 = 6 edges; d1 has
        //      [1,1,1,1] -> 3. Total 9.
        //   y: the single combo member -> 1.
        //   z: per platform, step 0 leaves the committed slot (2 targets),
        //      steps 1..2 connect 2x2 slots -> 2+4+4 = 10; two platforms -> 20.
        //   rows: dinit 2; dflow d0 2+2, d1 1+1 -> 6; staff 1; consist 1
        //      (strict only); located 1; onefire 1; fire_or_move 1; pinit 2;
        //      pflow 2 platforms x 2 steps x 2 slots = 8; budget 2.
        //      Total 25 strict, 24 verbatim.
        let elems = KeplerianElements::circular(7104.8, 42.33, 10.0, 25.0);
        let grid = build_altitude_change_grid(
            &elems,
            1,
            2,
            30.0,
            LayerDirection::Up,
            6478.137,
            5,
            180.0,
        )
        .unwrap();
        let grids = vec![grid.clone(), grid];
        let d0 = synthetic_teg(
            0,
            1,
            vec![
                vec![coast_node(usize::MAX)],
                vec![coast_node(0), eng_node(0, 0.6, vec![(0, 0)])],
                vec![coast_node(0), coast_node(1)],
                vec![coast_node(0), coast_node(1)],
            ],
        );
        let d1 = synthetic_teg(
            1,
            1,
            vec![
                vec![coast_node(usize::MAX)],
                vec![coast_node(0)],
                vec![coast_node(0)],
                vec![coast_node(0)],
            ],
        );
        let tegs = vec![d0, d1];
        let strict =
            build_model(&tegs, &grids, &[0, 0], &[1.0, 1.0], 1, 3, true).unwrap();
        assert_eq!(strict.vars.len(), 30);
        let (mut nx, mut ny, mut nz) = (0, 0, 0);
        for v in &strict.vars {
            match v {
                VarMeta::DebrisEdge { .. } => nx += 1,
                VarMeta::Engagement { .. } => ny += 1,
                VarMeta::PlatformEdge { .. } => nz += 1,
            }
        }
        assert_eq!((nx, ny, nz), (9, 1, 20));
        assert_eq!(strict.rows.len(), 25);
        assert_eq!(strict.rows.first().unwrap().label, "dinit_d0");
        assert_eq!(strict.rows.last().unwrap().label, "budget_p1");

        let verbatim =
            build_model(&tegs, &grids, &[0, 0], &[1.0, 1.0], 1, 3, false).unwrap();
        assert_eq!(verbatim.rows.len(), 24);
        assert!(verbatim.rows.iter().all(|r| !r.label.starts_with("consist")));
    }

    /// Deterministic random instance small enough for the brute-force oracle.
    fn random_instance(
        seed: u64,
    ) -> (Vec<DebrisTeg>, Vec<crate::teg::PlatformSlotGrid>, Vec<usize>, Vec<f64>, usize) {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let num_platforms = rng.gen_range(1..=2usize);
        let num_debris = rng.gen_range(1..=2usize);
        let window = rng.gen_range(2..=3usize);
        let slots = rng.gen_range(2..=3usize);
        let start = 1usize;
        let grids: Vec<_> = (0..num_platforms)
            .map(|p| {
                let elems = KeplerianElements::circular(
                    7104.8,
                    42.33,
                    10.0 + 5.0 * p as f64,
                    25.0 + 40.0 * p as f64,
                );
                build_altitude_change_grid(
                    &elems,
                    1,
                    slots as u32,
                    40.0,
                    LayerDirection::Up,
                    6478.137,
                    start + window + 1,
                    180.0,
                )
                .unwrap()
            })
            .collect();
        let current: Vec<usize> =
            (0..num_platforms).map(|_| rng.gen_range(0..slots)).collect();
        let budgets: Vec<f64> = (0..num_platforms)
            .map(|_| *[0.0, 0.02, 0.05, 0.5].get(rng.gen_range(0..4)).unwrap())
            .collect();
        let rewards = [0.3, 0.7, 100.0, -5.0];
        let tegs: Vec<DebrisTeg> = (0..num_debris)
            .map(|d| {
                let mut layers = vec![vec![coast_node(usize::MAX)]];
                for t in 0..window {
                    let parents = layers.last().unwrap().len();
                    let mut layer = Vec::new();
                    for parent in 0..parents {
                        layer.push(coast_node(parent));
                        if rng.gen_bool(0.6) {
                            let k = rng.gen_range(1..=num_platforms.min(2));
                            let mut chosen: Vec<usize> = (0..num_platforms).collect();
                            while chosen.len() > k {
                                let drop = rng.gen_range(0..chosen.len());
                                chosen.remove(drop);
                            }
                            let members: Vec<(usize, usize)> = chosen
                                .iter()
                                .map(|&p| {
                                    let s = if t == 0 {
                                        current[p]
                                    } else {
                                        rng.gen_range(0..slots)
                                    };
                                    (p, s)
                                })
                                .collect();
                            let reward = rewards[rng.gen_range(0..rewards.len())];
                            layer.push(eng_node(parent, reward, members));
                        }
                    }
                    layers.push(layer);
                }
                synthetic_teg(d, start, layers)
            })
            .collect();
        (tegs, grids, current, budgets, window)
    }

    /// Drop every engagement edge that names a removed platform, rebuilding
    /// parent indices layer by layer.
    fn restrict_to_first_platform(teg: &DebrisTeg) -> DebrisTeg {
        let mut layers: Vec<Vec<TegNode>> = vec![teg.layers[0].clone()];
        let mut keep_prev: Vec<Option<usize>> = vec![Some(0)];
        for layer in &teg.layers[1..] {
            let mut next = Vec::new();
            let mut keep_next = Vec::new();
            for node in layer {
                let parent_kept = keep_prev[node.parent];
                let uses_removed = node.combo.members.iter().any(|&(p, _)| p > 0);
                match parent_kept {
                    Some(new_parent) if !uses_removed => {
                        let mut copy = node.clone();
                        copy.parent = new_parent;
                        keep_next.push(Some(next.len()));
                        next.push(copy);
                    }
                    _ => keep_next.push(None),
                }
            }
            layers.push(next);
            keep_prev = keep_next;
        }
        DebrisTeg {
            debris_id: teg.debris_id,
            start_step: teg.start_step,
            layers,
            truncated_at: None,
        }
    }

    #[test]
    fn exact_solver_matches_brute_force_on_many_random_instances() {
        for seed in 0..60u64 {
            let (tegs, grids, current, budgets, window) = random_instance(seed);
            let strict =
                build_model(&tegs, &grids, &current, &budgets, 1, window, true).unwrap();
            let exact = solve(&strict, None).unwrap();
            assert_eq!(exact.status, SolveStatus::Optimal, "seed {seed}");
            let oracle = brute_force_solve(&strict).unwrap();
            assert!(
                (exact.objective - oracle.objective).abs()
                    <= 1e-9 * oracle.objective.abs().max(1.0),
                "seed {seed}: solver {} vs oracle {}",
                exact.objective,
                oracle.objective
            );

            // The relaxed staffing mode may admit surplus engagements but
            // never changes the optimum.
            let verbatim =
                build_model(&tegs, &grids, &current, &budgets, 1, window, false).unwrap();
            let relaxed = solve(&verbatim, None).unwrap();
            assert!(
                (relaxed.objective - oracle.objective).abs()
                    <= 1e-9 * oracle.objective.abs().max(1.0),
                "seed {seed}: relaxed staffing changed the optimum"
            );

            // Budgets are always respected.
            for (p, &dv) in exact.per_platform_dv_kms.iter().enumerate() {
                assert!(dv <= budgets[p] + 1e-9, "seed {seed}: platform {p} over budget");
            }

            // Forbidding every transfer can never help.
            let stay_fixes: Vec<(usize, bool)> = strict
                .vars
                .iter()
                .enumerate()
                .filter(|(_, v)| {
                    matches!(v, VarMeta::PlatformEdge { from_slot, to_slot, .. } if from_slot != to_slot)
                })
                .map(|(id, _)| (id, false))
                .collect();
            let pinned = solve_with_fixes(&strict, &stay_fixes, None).unwrap();
            assert!(
                pinned.objective <= exact.objective + 1e-9,
                "seed {seed}: pinned platforms beat the free optimum"
            );

            // Removing a platform never increases the optimum.
            if grids.len() == 2 {
                let reduced_tegs: Vec<DebrisTeg> =
                    tegs.iter().map(restrict_to_first_platform).collect();
                let reduced = build_model(
                    &reduced_tegs,
                    &grids[..1],
                    &current[..1],
                    &budgets[..1],
                    1,
                    window,
                    true,
                )
                .unwrap();
                let smaller = brute_force_solve(&reduced).unwrap();
                assert!(
                    smaller.objective <= oracle.objective + 1e-9,
                    "seed {seed}: dropping a platform increased the optimum"
                );
            }

            if seed % 10 == 0 {
                let again = solve(&strict, None).unwrap();
                assert_eq!(again.selected, exact.selected, "seed {seed}: nondeterministic");
                assert_eq!(again.objective.to_bits(), exact.objective.to_bits());
            }
        }
    }

    #[test]
    fn oversized_brute_force_request_is_refused() {
        let elems = KeplerianElements::circular(7104.8, 42.33, 10.0, 25.0);
        let grid = build_altitude_change_grid(
            &elems,
            1,
            3,
            40.0,
            LayerDirection::Up,
            6478.137,
            5,
            180.0,
        )
        .unwrap();
        let grids = vec![grid];
        // Quaternary debris trees: every parent spawns one coast and three
        // engagement children, giving 4^3 = 64 leaves per debris over a
        // 3-step window; four such debris already exceed the enumeration cap
        // (64^4 > 1e7) before platform paths multiply in.
        let make_teg = |id: usize| {
            let mut layers = vec![vec![coast_node(usize::MAX)]];
            for t in 0..3usize {
                let parents = layers.last().unwrap().len();
                let mut layer = Vec::new();
                for parent in 0..parents {
                    layer.push(coast_node(parent));
                    for variant in 0..3usize {
                        let slot = if t == 0 { 0 } else { variant };
                        layer.push(eng_node(parent, 0.1 * (variant + 1) as f64, vec![(0, slot)]));
                    }
                }
                layers.push(layer);
            }
            synthetic_teg(id, 1, layers)
        };
        let tegs: Vec<DebrisTeg> = (0..4).map(make_teg).collect();
        let model = build_model(&tegs, &grids, &[0], &[0.5], 1, 3, true).unwrap();
        match brute_force_solve(&model) {
            Err(IlpError::BruteForceTooLarge { estimate, cap }) => {
                assert!(estimate > cap);
            }
            other => panic!("expected refusal, got {other:?}"),
        }
    }

    #[test]
    fn contradictory_fixes_surface_as_infeasible_status() {
        let (tegs, grids) = deorbit_instance();
        let model = build_model(&tegs, &grids, &[0], &[2.0], 0, 2, true).unwrap();
        // Forbid every first-step platform edge: the departure row can no
        // longer be satisfied.
        let fixes: Vec<(usize, bool)> = model
            .vars
            .iter()
            .enumerate()
            .filter(|(_, v)| matches!(v, VarMeta::PlatformEdge { step: 0, .. }))
            .map(|(id, _)| (id, false))
            .collect();
        let sol = solve_with_fixes(&model, &fixes, None).unwrap();
        assert_eq!(sol.status, SolveStatus::Infeasible);
    }

    #[test]
    fn export_round_trips_row_and_variable_counts() {
        let (tegs, grids) = deorbit_instance();
        let model = build_model(&tegs, &grids, &[0], &[2.0], 0, 2, true).unwrap();
        let text = export_model(&model);

        let subject_start = text.find("Subject To\n").unwrap();
        let binary_start = text.find("Binary\n").unwrap();
        let end = text.find("End\n").unwrap();
        let row_lines: Vec<&str> = text[subject_start + 11..binary_start]
            .lines()
            .filter(|l| !l.trim().is_empty())
            .collect();
        let var_lines: Vec<&str> = text[binary_start + 7..end]
            .lines()
            .map(|l| l.trim())
            .filter(|l| !l.is_empty())
            .collect();
        assert_eq!(row_lines.len(), model.rows.len());
        assert_eq!(var_lines.len(), model.vars.len());
        let unique: BTreeSet<&str> = var_lines.iter().copied().collect();
        assert_eq!(unique.len(), model.vars.len(), "variable names must be bijective");
        // Every row references only declared variables.
        for line in &row_lines {
            let (_, body) = line.split_once(':').unwrap();
            for token in body.split_whitespace() {
                if token.starts_with('x') || token.starts_with('y') || token.starts_with('z') {
                    assert!(unique.contains(token), "undeclared variable {token}");
                }
            }
        }

        // A coast-only model has an empty objective line but stays parseable.
        let platform = KeplerianElements::circular(7000.0, 0.0, 0.0, 180.0);
        let debris_el = KeplerianElements::circular(7000.0, 0.0, 0.0, 0.0);
        let grid = build_baseline_grid(&platform, 4, 180.0).unwrap();
        let teg = generate_debris_teg(
            &DebrisBody { id: 0, areal_density_kg_m2: 0.2 },
            &debris_el.to_state(),
            0,
            2,
            180.0,
            &[grid.clone()],
            &[0],
            &LaserSystem::default(),
            &EngagementRules::default(),
            &[],
            &TegLimits::default(),
        )
        .unwrap();
        let coast_model = build_model(&[teg], &[grid], &[0], &[2.0], 0, 2, true).unwrap();
        let coast_text = export_model(&coast_model);
        assert!(coast_text.contains("Maximize\n obj:\n"));
    }

    #[test]
    fn solution_json_lists_selected_variables_in_order() {
        let (tegs, grids) = deorbit_instance();
        let model = build_model(&tegs, &grids, &[0], &[2.0], 0, 2, true).unwrap();
        let sol = solve(&model, None).unwrap();
        let json = solution_to_json(&model, &sol);
        assert_eq!(json["objective"], 100.0);
        assert_eq!(json["status"], "optimal");
        assert_eq!(json["gap"], 0.0);
        let vars = json["variables"].as_array().unwrap();
        assert_eq!(vars.len(), sol.selected.len());
        assert!(vars.iter().any(|v| v["kind"] == "y"));
    }
}
