//! Command-line front end: runs scenarios and sensitivity sweeps, validates
//! configuration files, dumps solver artifacts, and cross-checks the
//! scheduler against exhaustive enumeration.
//!
//! Exit codes: 0 success, 1 operational failure (invalid scenario, solver or
//! I/O error, failed cross-check), 2 usage error (unknown flag or verb).
//! Logging is controlled by the `LASERPLAN_LOG` environment variable alone
//! (`error` when unset); all file outputs are byte-deterministic for
//! identical (scenario, seed, flags).

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{ArgGroup, Args, Parser, Subcommand};

use laserplan::report::{
    apply_overrides, execute_run_with, render_run_table, render_sweep_table, run_oracle_battery,
    run_sweep, sweep_csv, write_run_artifacts, write_window_dumps, ExecutionOptions, Overrides,
    RunReport, SweepAxis,
};
use laserplan::scenario::{build_mission, load_scenario, Conops, ScenarioConfig};

#[derive(Parser)]
#[command(
    name = "laserplan",
    version,
    about = "Mission planner for space-based laser debris remediation: \
             schedules constellation reconfigurations and engagements over a \
             receding horizon and reports remediation capacity"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario end to end; write report.json, timeseries.csv,
    /// schedule.csv, and mission_log.json
    Run(RunArgs),
    /// Run a sensitivity matrix over one axis (window length or budget),
    /// pairing every scenario column with the identical seed
    Sweep(SweepArgs),
    /// Parse and validate a scenario file and print its shape
    ValidateConfig(ValidateConfigArgs),
    /// Run a scenario recording every solved window; dump windowN.lp and
    /// solution_windowN.lp.json next to the run artifacts
    ExportLp(ExportLpArgs),
    /// Cross-check branch-and-bound against exhaustive enumeration on 64
    /// seeded micro instances
    OracleCheck(OracleCheckArgs),
}

fn parse_conops(s: &str) -> Result<Conops, String> {
    match s {
        "baseline" => Ok(Conops::Baseline),
        "plane_change" => Ok(Conops::PlaneChange),
        "altitude_change" => Ok(Conops::AltitudeChange),
        other => Err(format!(
            "unknown CONOPS `{other}` (expected baseline, plane_change, or altitude_change)"
        )),
    }
}

#[derive(Args)]
struct RunArgs {
    /// Scenario file (TOML)
    #[arg(long)]
    scenario: PathBuf,
    /// Replace the scenario's random seed
    #[arg(long)]
    seed: Option<u64>,
    /// Replace the lookahead window length (decision steps)
    #[arg(long)]
    window_length: Option<usize>,
    /// Replace the per-platform transfer budget (km/s)
    #[arg(long)]
    budget: Option<f64>,
    /// Replace the CONOPS (only `baseline` or the file's own kind)
    #[arg(long, value_parser = parse_conops)]
    conops: Option<Conops>,
    /// Directory for report.json and the CSV series
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
    /// report.json of a reference run; prints the improvement percentage
    #[arg(long)]
    baseline_report: Option<PathBuf>,
    /// Re-solve every window by exhaustive enumeration and fail on any
    /// objective disagreement (test-scale scenarios only)
    #[arg(long)]
    brute_force_check: bool,
}

#[derive(Args)]
#[command(group(
    ArgGroup::new("axis").required(true).multiple(false).args(["window_length", "budget"])
))]
struct SweepArgs {
    /// Scenario file; repeat for one matrix column per CONOPS
    /// (a single non-baseline file gains a derived baseline column)
    #[arg(long, required = true)]
    scenario: Vec<PathBuf>,
    /// Replace every scenario's random seed
    #[arg(long)]
    seed: Option<u64>,
    /// Sweep the window length over these values (comma-separated)
    #[arg(long, value_delimiter = ',')]
    window_length: Option<Vec<usize>>,
    /// Sweep the per-platform budget (km/s) over these values
    /// (comma-separated)
    #[arg(long, value_delimiter = ',')]
    budget: Option<Vec<f64>>,
    /// Directory for sweep.csv
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
}

#[derive(Args)]
struct ValidateConfigArgs {
    /// Scenario file (TOML)
    #[arg(long)]
    scenario: PathBuf,
}

#[derive(Args)]
struct ExportLpArgs {
    /// Scenario file (TOML)
    #[arg(long)]
    scenario: PathBuf,
    /// Replace the scenario's random seed
    #[arg(long)]
    seed: Option<u64>,
    /// Replace the lookahead window length (decision steps)
    #[arg(long)]
    window_length: Option<usize>,
    /// Replace the per-platform transfer budget (km/s)
    #[arg(long)]
    budget: Option<f64>,
    /// Replace the CONOPS (only `baseline` or the file's own kind)
    #[arg(long, value_parser = parse_conops)]
    conops: Option<Conops>,
    /// Directory for the window dumps and run artifacts
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
}

#[derive(Args)]
struct OracleCheckArgs {
    /// Base seed for the instance battery
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter("LASERPLAN_LOG")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(args) => run(args),
        Command::Sweep(args) => sweep(args),
        Command::ValidateConfig(args) => validate_config_cmd(args),
        Command::ExportLp(args) => export_lp(args),
        Command::OracleCheck(args) => oracle_check(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn load_with_overrides(
    path: &PathBuf,
    overrides: &Overrides,
) -> anyhow::Result<ScenarioConfig> {
    let mut config = load_scenario(path)
        .with_context(|| format!("scenario `{}`", path.display()))?;
    apply_overrides(&mut config, overrides)
        .with_context(|| format!("scenario `{}` with overrides", path.display()))?;
    Ok(config)
}

fn run(args: RunArgs) -> anyhow::Result<()> {
    let overrides = Overrides {
        seed: args.seed,
        window_length: args.window_length,
        budget: args.budget,
        conops: args.conops,
    };
    let config = load_with_overrides(&args.scenario, &overrides)?;
    let options = ExecutionOptions {
        record_window_artifacts: false,
        brute_force_check: args.brute_force_check,
    };
    let outcome = execute_run_with(&config, options).context("run")?;
    write_run_artifacts(&args.out_dir, &outcome.report, &outcome.log)
        .with_context(|| format!("writing artifacts to `{}`", args.out_dir.display()))?;

    let baseline: Option<RunReport> = match &args.baseline_report {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("baseline report `{}`", path.display()))?;
            Some(
                serde_json::from_str(&text)
                    .with_context(|| format!("baseline report `{}`", path.display()))?,
            )
        }
        None => None,
    };
    print!("{}", render_run_table(&outcome.report, baseline.as_ref()));
    if args.brute_force_check {
        let solved = outcome.log.windows.iter().filter(|w| !w.skipped).count();
        println!(
            "brute-force check: {solved} solved window(s) match exhaustive enumeration"
        );
    }
    Ok(())
}

fn sweep(args: SweepArgs) -> anyhow::Result<()> {
    let overrides = Overrides { seed: args.seed, ..Default::default() };
    let mut scenarios = Vec::with_capacity(args.scenario.len());
    for path in &args.scenario {
        scenarios.push(load_with_overrides(path, &overrides)?);
    }
    let axis = match (args.window_length, args.budget) {
        (Some(values), None) => SweepAxis::WindowLength(values),
        (None, Some(values)) => SweepAxis::Budget(values),
        _ => unreachable!("the axis argument group admits exactly one"),
    };
    let table = run_sweep(&scenarios, &axis).context("sweep")?;
    std::fs::create_dir_all(&args.out_dir)
        .with_context(|| format!("creating `{}`", args.out_dir.display()))?;
    let csv_path = args.out_dir.join("sweep.csv");
    std::fs::write(&csv_path, sweep_csv(&table))
        .with_context(|| format!("writing `{}`", csv_path.display()))?;
    print!("{}", render_sweep_table(&table));
    Ok(())
}

fn validate_config_cmd(args: ValidateConfigArgs) -> anyhow::Result<()> {
    let config = load_scenario(&args.scenario)
        .with_context(|| format!("scenario `{}`", args.scenario.display()))?;
    let mission = build_mission(&config)
        .with_context(|| format!("scenario `{}`", args.scenario.display()))?;

    let population = config.debris.population.as_ref().map_or(0, |p| p.count as usize);
    let breakup = config.debris.breakup.as_ref().map_or(0, |b| b.fragment_count as usize);
    let slot_counts: Vec<String> =
        mission.setup.grids.iter().map(|g| g.slot_elements.len().to_string()).collect();

    println!("scenario:  {}", config.id);
    println!("epoch:     {}", config.epoch_utc.to_rfc3339());
    println!("seed:      {}", config.seed);
    println!(
        "time:      T={} points, step={} s, window L={}",
        config.time.horizon_steps, config.time.step_s, config.time.window_length
    );
    println!(
        "platforms: {} (candidate slots per platform: {})",
        config.platforms.len(),
        slot_counts.join(",")
    );
    println!("conops:    {}", config.conops.kind);
    println!(
        "debris:    {} total ({population} sampled, {breakup} fragments{})",
        mission.setup.debris.len(),
        if breakup > 0 { " + 1 parent" } else { "" }
    );
    println!("actives:   {}", config.active_spacecraft.len());
    println!("budget:    {} km/s per platform", config.dv_budget_kms);
    println!("valid");
    Ok(())
}

fn export_lp(args: ExportLpArgs) -> anyhow::Result<()> {
    let overrides = Overrides {
        seed: args.seed,
        window_length: args.window_length,
        budget: args.budget,
        conops: args.conops,
    };
    let config = load_with_overrides(&args.scenario, &overrides)?;
    let options =
        ExecutionOptions { record_window_artifacts: true, brute_force_check: false };
    let outcome = execute_run_with(&config, options).context("run")?;
    write_run_artifacts(&args.out_dir, &outcome.report, &outcome.log)
        .with_context(|| format!("writing artifacts to `{}`", args.out_dir.display()))?;
    let dumped = write_window_dumps(&args.out_dir, &outcome.log)
        .with_context(|| format!("writing window dumps to `{}`", args.out_dir.display()))?;
    print!("{}", render_run_table(&outcome.report, None));
    println!(
        "exported {dumped} window model(s) ({} window(s) skipped as rewardless) to {}",
        outcome.log.windows.iter().filter(|w| w.skipped).count(),
        args.out_dir.display()
    );
    Ok(())
}

fn oracle_check(args: OracleCheckArgs) -> anyhow::Result<()> {
    const COUNT: usize = 64;
    let cases = run_oracle_battery(args.seed, COUNT).context("oracle check")?;
    let with_reward = cases.iter().filter(|c| c.had_reward).count();
    println!(
        "oracle check: {}/{} micro instances match exhaustive enumeration \
         ({with_reward} with positive reward; base seed {})",
        cases.len(),
        COUNT,
        args.seed
    );
    Ok(())
}
