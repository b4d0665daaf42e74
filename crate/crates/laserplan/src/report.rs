//! Run reports and artifact emission: the run/sweep pipelines behind the
//! command-line front end. A run loads a scenario, executes the
//! receding-horizon scheduler, verifies the log by independent replay, and
//! emits a JSON report plus plot-ready CSV series; a sweep repeats that
//! across one axis (window length or budget), pairing every cell with a
//! baseline run on the identical debris field for improvement percentages.
//!
//! All serialized outputs are deterministic: identical (scenario, seed,
//! overrides) produce byte-identical files. Wall-clock timing is therefore
//! reported on the terminal only, never in a file.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::astro::KeplerianElements;
use crate::ilp::{
    brute_force_solve, build_model, solve, solve_with_fixes, IlpError, IlpModel, VarMeta,
};
use crate::pla::{DebrisBody, LaserSystem};
use crate::rhs::{replay_mission, run_rhs, MissionLog, RhsError, StepCommit};
use crate::scenario::{
    build_mission, substream, validate_config, Conops, ConopsConfig, ScenarioConfig,
    ScenarioError,
};
use crate::teg::{
    build_altitude_change_grid, build_baseline_grid, generate_debris_teg, EngagementRules,
    LayerDirection, TegError, TegLimits,
};

#[derive(Debug, thiserror::Error)]
pub enum ReportError {
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Rhs(#[from] RhsError),
    #[error(transparent)]
    Ilp(#[from] IlpError),
    #[error(transparent)]
    Teg(#[from] TegError),
    #[error("cannot write artifact")]
    Io(#[from] std::io::Error),
    #[error("cannot serialize report")]
    Json(#[from] serde_json::Error),
    #[error("replayed aggregates diverge from the log: {detail}")]
    ReplayDiverged { detail: String },
    #[error(
        "cannot override CONOPS to {kind}: the scenario file carries no grid parameters for it \
         (only `baseline` or the file's own kind are valid overrides)"
    )]
    OverrideUnsupported { kind: Conops },
    #[error("sweep axis needs at least one value and at least one scenario")]
    EmptyAxis,
    #[error(
        "sweep scenarios must share one seed so every column sees the same debris field; \
         `{first}` and `{second}` disagree"
    )]
    SweepSeedMismatch { first: String, second: String },
    #[error("sweep cell {axis_value} failed: {source}")]
    SweepCell {
        axis_value: String,
        #[source]
        source: Box<ReportError>,
    },
    #[error("solver disagrees with exhaustive enumeration: {detail}")]
    OracleMismatch { detail: String },
}

/// Headline results of one scenario run, mirroring the mission log's
/// aggregates exactly.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunReport {
    pub scenario_id: String,
    pub conops: Conops,
    pub window_length: usize,
    pub dv_budget_kms: f64,
    /// Debris remediation capacity: the accumulated transfer rewards.
    pub capacity_v: f64,
    pub deorbit_count: u64,
    pub engagement_count: u64,
    /// Transfer impulse actually spent, per platform.
    pub per_platform_dv_kms: Vec<f64>,
    /// Wall-clock seconds for scheduling plus replay verification. Excluded
    /// from serialized reports so identical runs produce identical bytes.
    #[serde(skip)]
    pub wall_time_s: f64,
    /// Solver optimality gap per window position (0 for skipped windows).
    pub window_gaps: Vec<f64>,
}

/// A finished run: the headline report and the full mission log behind it.
#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub report: RunReport,
    pub log: MissionLog,
}

/// Command-line overrides applied on top of a scenario file.
#[derive(Clone, Copy, Debug, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub window_length: Option<usize>,
    pub budget: Option<f64>,
    pub conops: Option<Conops>,
}

/// Apply overrides and re-validate. CONOPS can only be overridden to
/// `baseline` (parameter-free) or to the file's own kind; any other kind
/// would need grid parameters the file does not carry.
pub fn apply_overrides(
    config: &mut ScenarioConfig,
    overrides: &Overrides,
) -> Result<(), ReportError> {
    if let Some(seed) = overrides.seed {
        config.seed = seed;
    }
    if let Some(l) = overrides.window_length {
        config.time.window_length = l;
    }
    if let Some(budget) = overrides.budget {
        config.dv_budget_kms = budget;
    }
    if let Some(kind) = overrides.conops {
        if kind == Conops::Baseline {
            config.conops = ConopsConfig::baseline();
        } else if kind != config.conops.kind {
            return Err(ReportError::OverrideUnsupported { kind });
        }
    }
    validate_config(config)?;
    Ok(())
}

/// Extra verification/recording switches for a run.
#[derive(Clone, Copy, Debug, Default)]
pub struct ExecutionOptions {
    /// Keep each solved window's exported model text and solution JSON in
    /// the log, for artifact dumps.
    pub record_window_artifacts: bool,
    /// Re-solve every solved window by exhaustive enumeration and fail on
    /// any objective disagreement (test-scale scenarios only).
    pub brute_force_check: bool,
}

/// Execute a validated configuration end to end: build the mission, run the
/// receding-horizon scheduler, then re-derive the outcome by independent
/// replay and require exact agreement before reporting anything.
pub fn execute_run(config: &ScenarioConfig) -> Result<RunOutcome, ReportError> {
    execute_run_with(config, ExecutionOptions::default())
}

/// As [`execute_run`], with verification/recording switches.
pub fn execute_run_with(
    config: &ScenarioConfig,
    options: ExecutionOptions,
) -> Result<RunOutcome, ReportError> {
    let started = std::time::Instant::now();
    let mut mission = build_mission(config)?;
    mission.setup.record_window_artifacts = options.record_window_artifacts;
    mission.setup.brute_force_check = options.brute_force_check;
    let log = run_rhs(&mission.setup, &mission.rhs)?;

    let replay = replay_mission(&mission.setup, &mission.rhs, &log)?;
    if replay.capacity_v != log.total_v
        || replay.deorbits != log.total_deorbits
        || replay.engagements != log.total_engagements
        || replay.final_budgets_kms != log.final_budgets_kms
        || replay.final_slots != log.final_slots
    {
        return Err(ReportError::ReplayDiverged {
            detail: format!(
                "replay V={} deorbits={} engagements={} vs log V={} deorbits={} engagements={}",
                replay.capacity_v,
                replay.deorbits,
                replay.engagements,
                log.total_v,
                log.total_deorbits,
                log.total_engagements
            ),
        });
    }

    let report = RunReport {
        scenario_id: config.id.clone(),
        conops: config.conops.kind,
        window_length: config.time.window_length,
        dv_budget_kms: config.dv_budget_kms,
        capacity_v: log.total_v,
        deorbit_count: log.total_deorbits,
        engagement_count: log.total_engagements,
        per_platform_dv_kms: spent_per_platform(&log.committed, config.platforms.len()),
        wall_time_s: started.elapsed().as_secs_f64(),
        window_gaps: log.windows.iter().map(|w| w.gap).collect(),
    };
    Ok(RunOutcome { report, log })
}

/// Sum committed transfer costs per platform (exactly what `schedule.csv`
/// carries, so post-hoc budget audits reproduce these numbers).
pub fn spent_per_platform(committed: &[StepCommit], num_platforms: usize) -> Vec<f64> {
    let mut spent = vec![0.0; num_platforms];
    for commit in committed {
        for tr in &commit.transfers {
            spent[tr.platform] += tr.cost_kms;
        }
    }
    spent
}

/// Improvement of `v` over `v_baseline` in percent, or `None` when the
/// baseline scored zero (the ratio is undefined).
pub fn improvement_pct(v: f64, v_baseline: f64) -> Option<f64> {
    (v_baseline != 0.0).then(|| (v - v_baseline) / v_baseline * 100.0)
}

/// Write `report.json`, `timeseries.csv`, and `schedule.csv` into `out_dir`
/// (created if missing), plus `mission_log.json` with the full commitment
/// record.
pub fn write_run_artifacts(
    out_dir: &Path,
    report: &RunReport,
    log: &MissionLog,
) -> Result<(), ReportError> {
    fs::create_dir_all(out_dir)?;
    let mut json = serde_json::to_string_pretty(report)?;
    json.push('\n');
    fs::write(out_dir.join("report.json"), json)?;

    let mut log_json = serde_json::to_string_pretty(log)?;
    log_json.push('\n');
    fs::write(out_dir.join("mission_log.json"), log_json)?;

    fs::write(out_dir.join("timeseries.csv"), timeseries_csv(log))?;
    fs::write(out_dir.join("schedule.csv"), schedule_csv(log))?;
    Ok(())
}

/// One row per time point: cumulative capacity, firings, and deorbits.
pub fn timeseries_csv(log: &MissionLog) -> String {
    let mut out = String::from("step,v_cumulative,engagements_cumulative,deorbits_cumulative\n");
    for i in 0..log.v_cumulative.len() {
        let _ = writeln!(
            out,
            "{},{},{},{}",
            i, log.v_cumulative[i], log.engagements_cumulative[i], log.deorbits_cumulative[i]
        );
    }
    out
}

/// One row per committed action. Stays are omitted; `transfer` rows carry
/// the platform impulse price in the Δv column (the basis for budget
/// audits), `engage` rows target a debris index and cost the platform
/// nothing.
pub fn schedule_csv(log: &MissionLog) -> String {
    let mut out = String::from("t,platform,action,target,dv_kms\n");
    for commit in &log.committed {
        for tr in &commit.transfers {
            if tr.from_slot != tr.to_slot {
                let _ = writeln!(
                    out,
                    "{},{},transfer,{},{}",
                    commit.step, tr.platform, tr.to_slot, tr.cost_kms
                );
            }
        }
        for e in &commit.engagements {
            let _ = writeln!(out, "{},{},engage,{},0", commit.step, e.platform, e.debris);
        }
    }
    out
}

/// Write `window{N}.lp` and `solution_window{N}.lp.json` for every window
/// whose artifacts were recorded (skipped windows have none).
pub fn write_window_dumps(out_dir: &Path, log: &MissionLog) -> Result<usize, ReportError> {
    fs::create_dir_all(out_dir)?;
    let mut written = 0;
    for window in &log.windows {
        if let Some(lp) = &window.lp_model {
            fs::write(out_dir.join(format!("window{}.lp", window.start_step)), lp)?;
            written += 1;
        }
        if let Some(solution) = &window.solution_json {
            let mut text = serde_json::to_string_pretty(solution)?;
            text.push('\n');
            fs::write(
                out_dir.join(format!("solution_window{}.lp.json", window.start_step)),
                text,
            )?;
        }
    }
    Ok(written)
}

/// Terminal summary table for one run, with an improvement line when a
/// baseline report is supplied.
pub fn render_run_table(report: &RunReport, baseline: Option<&RunReport>) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<22} {:<16} {:>3} {:>8} {:>12} {:>9} {:>12} {:>9}",
        "scenario", "conops", "L", "budget", "V", "deorbits", "engagements", "wall_s"
    );
    let _ = writeln!(
        out,
        "{:<22} {:<16} {:>3} {:>8.3} {:>12.4} {:>9} {:>12} {:>9.2}",
        report.scenario_id,
        report.conops.to_string(),
        report.window_length,
        report.dv_budget_kms,
        report.capacity_v,
        report.deorbit_count,
        report.engagement_count,
        report.wall_time_s
    );
    if let Some(base) = baseline {
        match improvement_pct(report.capacity_v, base.capacity_v) {
            Some(pct) => {
                let _ = writeln!(
                    out,
                    "improvement vs {} ({}): {:.2} %",
                    base.scenario_id, base.conops, pct
                );
            }
            None => {
                let _ = writeln!(
                    out,
                    "improvement vs {} ({}): undefined (baseline V = 0)",
                    base.scenario_id, base.conops
                );
            }
        }
    }
    out
}

/// The swept dimension: exactly one of window length or budget.
#[derive(Clone, Debug)]
pub enum SweepAxis {
    WindowLength(Vec<usize>),
    Budget(Vec<f64>),
}

impl SweepAxis {
    pub fn label(&self) -> &'static str {
        match self {
            SweepAxis::WindowLength(_) => "window_length",
            SweepAxis::Budget(_) => "budget_kms",
        }
    }

    fn rows(&self) -> Vec<(String, Overrides)> {
        match self {
            SweepAxis::WindowLength(values) => values
                .iter()
                .map(|&l| {
                    (l.to_string(), Overrides { window_length: Some(l), ..Default::default() })
                })
                .collect(),
            SweepAxis::Budget(values) => values
                .iter()
                .map(|&b| (b.to_string(), Overrides { budget: Some(b), ..Default::default() }))
                .collect(),
        }
    }
}

/// One sweep cell: a CONOPS column evaluated at one axis value.
#[derive(Clone, Debug, Serialize)]
pub struct SweepCell {
    pub scenario_id: String,
    pub conops: Conops,
    pub capacity_v: f64,
    pub deorbits: u64,
    /// Vs. the reference (first) column on the same row; `None` for the
    /// reference column itself and whenever the reference scored zero.
    pub improvement_pct: Option<f64>,
}

/// One axis value: a cell per CONOPS column, in column order.
#[derive(Clone, Debug, Serialize)]
pub struct SweepRow {
    pub axis_value: String,
    pub cells: Vec<SweepCell>,
}

/// The full sensitivity matrix: axis values down, CONOPS columns across,
/// improvement always relative to the first column.
#[derive(Clone, Debug, Serialize)]
pub struct SweepTable {
    pub axis_label: String,
    /// Column identities (scenario id, CONOPS), reference first.
    pub columns: Vec<(String, Conops)>,
    pub rows: Vec<SweepRow>,
}

/// Run the full sensitivity matrix: every axis value × every scenario
/// column, all on the identical seed so the columns compare the same debris
/// field. A single non-baseline scenario is automatically paired with a
/// derived baseline twin (same file, reconfiguration stripped) as the
/// reference column. Cells execute concurrently; results keep axis order; a
/// failing cell aborts the sweep, naming the cell.
pub fn run_sweep(
    scenarios: &[ScenarioConfig],
    axis: &SweepAxis,
) -> Result<SweepTable, ReportError> {
    let rows = axis.rows();
    if rows.is_empty() {
        return Err(ReportError::EmptyAxis);
    }
    let mut columns: Vec<ScenarioConfig> = Vec::with_capacity(scenarios.len() + 1);
    if let [only] = scenarios {
        if only.conops.kind != Conops::Baseline {
            let mut twin = only.clone();
            twin.id = format!("{}_baseline", only.id);
            twin.conops = ConopsConfig::baseline();
            validate_config(&twin)?;
            columns.push(twin);
        }
    }
    columns.extend_from_slice(scenarios);
    if columns.is_empty() {
        return Err(ReportError::EmptyAxis);
    }
    for other in &columns[1..] {
        if other.seed != columns[0].seed {
            return Err(ReportError::SweepSeedMismatch {
                first: columns[0].id.clone(),
                second: other.id.clone(),
            });
        }
    }

    let jobs: Vec<(usize, usize)> =
        (0..rows.len()).flat_map(|r| (0..columns.len()).map(move |c| (r, c))).collect();
    let outcomes: Vec<RunOutcome> = jobs
        .into_par_iter()
        .map(|(r, c)| {
            let (axis_value, overrides) = &rows[r];
            let mut config = columns[c].clone();
            apply_overrides(&mut config, overrides)
                .and_then(|()| execute_run(&config))
                .map_err(|source| ReportError::SweepCell {
                    axis_value: format!("{}={axis_value}, scenario={}", axis.label(), config.id),
                    source: Box::new(source),
                })
        })
        .collect::<Result<_, _>>()?;

    let table_rows = rows
        .iter()
        .enumerate()
        .map(|(r, (axis_value, _))| {
            let row_reports: Vec<&RunReport> =
                (0..columns.len()).map(|c| &outcomes[r * columns.len() + c].report).collect();
            let reference_v = row_reports[0].capacity_v;
            SweepRow {
                axis_value: axis_value.clone(),
                cells: row_reports
                    .iter()
                    .enumerate()
                    .map(|(c, rep)| SweepCell {
                        scenario_id: rep.scenario_id.clone(),
                        conops: rep.conops,
                        capacity_v: rep.capacity_v,
                        deorbits: rep.deorbit_count,
                        improvement_pct: (c > 0)
                            .then(|| improvement_pct(rep.capacity_v, reference_v))
                            .flatten(),
                    })
                    .collect(),
            }
        })
        .collect();

    Ok(SweepTable {
        axis_label: axis.label().to_string(),
        columns: columns.iter().map(|s| (s.id.clone(), s.conops.kind)).collect(),
        rows: table_rows,
    })
}

fn pct_text(pct: Option<f64>) -> String {
    match pct {
        Some(p) => format!("{p:.2}"),
        None => "n/a".to_string(),
    }
}

/// Matrix CSV: one row per axis value; per column its capacity and deorbit
/// count, then the improvement percentages over the reference column
/// (2 decimals; `n/a` when the reference scored zero).
pub fn sweep_csv(table: &SweepTable) -> String {
    let mut out = table.axis_label.clone();
    for (id, _) in &table.columns {
        let _ = write!(out, ",v_{id},deorbits_{id}");
    }
    for (id, _) in table.columns.iter().skip(1) {
        let _ = write!(out, ",improvement_{id}_pct");
    }
    out.push('\n');
    for row in &table.rows {
        let _ = write!(out, "{}", row.axis_value);
        for cell in &row.cells {
            let _ = write!(out, ",{},{}", cell.capacity_v, cell.deorbits);
        }
        for cell in row.cells.iter().skip(1) {
            let _ = write!(out, ",{}", pct_text(cell.improvement_pct));
        }
        out.push('\n');
    }
    out
}

/// Terminal table for a sweep: capacity per column, improvement over the
/// reference column alongside.
pub fn render_sweep_table(table: &SweepTable) -> String {
    let mut out = String::new();
    let _ = write!(out, "{:<14}", table.axis_label);
    for (id, conops) in &table.columns {
        let _ = write!(out, " {:>22}", format!("V[{id} {conops}]"));
    }
    for (id, _) in table.columns.iter().skip(1) {
        let _ = write!(out, " {:>18}", format!("Δ%[{id}]"));
    }
    out.push('\n');
    for row in &table.rows {
        let _ = write!(out, "{:<14}", row.axis_value);
        for cell in &row.cells {
            let _ = write!(out, " {:>22.4}", cell.capacity_v);
        }
        for cell in row.cells.iter().skip(1) {
            let _ = write!(out, " {:>18}", pct_text(cell.improvement_pct));
        }
        out.push('\n');
    }
    out
}

/// A randomly generated window-model instance small enough for exhaustive
/// enumeration: at most 2 platforms, 3 debris, 3 slots per platform, and 3
/// decision steps.
pub struct MicroInstance {
    pub model: IlpModel,
    pub window_steps: usize,
    pub num_platforms: usize,
    pub num_debris: usize,
    pub reconfigurable: bool,
}

/// Build a seeded random micro instance around the engageable-band geometry
/// (platforms a few hundred km above a debris shell), so a healthy share of
/// instances have positive-reward edges and real scheduling trade-offs.
pub fn seeded_micro_instance(seed: u64) -> Result<MicroInstance, ReportError> {
    let mut rng = substream(seed, "micro");
    let window_steps = rng.gen_range(1..=3usize);
    let num_platforms = rng.gen_range(1..=2usize);
    let num_debris = rng.gen_range(1..=3usize);
    let reconfigurable = rng.gen_bool(0.7);
    let dt_s = 1800.0;
    let num_steps = window_steps + 1;
    let laser = LaserSystem::default();
    let rules = EngagementRules::default();

    let mut grids = Vec::with_capacity(num_platforms);
    for _ in 0..num_platforms {
        let elements = KeplerianElements::circular(
            rng.gen_range(7250.0..7450.0),
            30.0,
            0.0,
            rng.gen_range(-4.0..4.0),
        );
        let grid = if reconfigurable {
            build_altitude_change_grid(
                &elements,
                1,
                3,
                rng.gen_range(120.0..240.0),
                LayerDirection::Symmetric,
                crate::astro::EARTH_RADIUS_KM + rules.grazing_altitude_km,
                num_steps,
                dt_s,
            )?
        } else {
            build_baseline_grid(&elements, num_steps, dt_s)?
        };
        grids.push(grid);
    }
    let current_slots = vec![0usize; num_platforms];
    let budgets: Vec<f64> = (0..num_platforms).map(|_| rng.gen_range(0.2..2.5)).collect();

    let mut tegs = Vec::with_capacity(num_debris);
    for id in 0..num_debris {
        let elements = KeplerianElements::circular(
            rng.gen_range(6950.0..7120.0),
            30.0,
            0.0,
            rng.gen_range(-6.0..6.0),
        );
        let body = DebrisBody { id, areal_density_kg_m2: 0.2 };
        tegs.push(generate_debris_teg(
            &body,
            &elements.to_state(),
            0,
            window_steps,
            dt_s,
            &grids,
            &current_slots,
            &laser,
            &rules,
            &[],
            &TegLimits::default(),
        )?);
    }

    let model =
        build_model(&tegs, &grids, &current_slots, &budgets, 0, window_steps, true)?;
    Ok(MicroInstance { model, window_steps, num_platforms, num_debris, reconfigurable })
}

/// Indices of every transfer variable that departs its slot (used to pin a
/// model to the stay-only policy).
pub fn moving_transfer_vars(model: &IlpModel) -> Vec<(usize, bool)> {
    model
        .vars
        .iter()
        .enumerate()
        .filter_map(|(i, var)| match var {
            VarMeta::PlatformEdge { from_slot, to_slot, .. } if from_slot != to_slot => {
                Some((i, false))
            }
            _ => None,
        })
        .collect()
}

/// Outcome of one exhaustive-enumeration comparison.
#[derive(Clone, Debug, Serialize)]
pub struct OracleCase {
    pub seed: u64,
    pub objective: f64,
    pub num_vars: usize,
    pub had_reward: bool,
}

/// Compare the internal branch-and-bound against exhaustive enumeration on
/// `count` seeded micro instances. Objectives must agree to 1e-9 on every
/// instance; the first disagreement aborts with both values.
pub fn run_oracle_battery(base_seed: u64, count: usize) -> Result<Vec<OracleCase>, ReportError> {
    let mut cases = Vec::with_capacity(count);
    for k in 0..count {
        let seed = base_seed.wrapping_add(k as u64);
        let instance = seeded_micro_instance(seed)?;
        let fast = solve(&instance.model, None)?;
        let exhaustive = brute_force_solve(&instance.model)?;
        if (fast.objective - exhaustive.objective).abs() > 1e-9 {
            return Err(ReportError::OracleMismatch {
                detail: format!(
                    "seed {seed}: branch-and-bound {} vs exhaustive {}",
                    fast.objective, exhaustive.objective
                ),
            });
        }
        cases.push(OracleCase {
            seed,
            objective: fast.objective,
            num_vars: instance.model.vars.len(),
            had_reward: fast.objective > 0.0,
        });
    }
    Ok(cases)
}

/// Solve a micro instance twice — freely, and pinned to the stay-only
/// transfer policy — returning `(free, pinned)` objectives.
pub fn free_vs_pinned(model: &IlpModel) -> Result<(f64, f64), ReportError> {
    let free = solve(model, None)?;
    let pinned = solve_with_fixes(model, &moving_transfer_vars(model), None)?;
    Ok((free.objective, pinned.objective))
}
