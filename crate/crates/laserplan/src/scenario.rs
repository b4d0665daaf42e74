//! Scenario ingestion and generation: the mission configuration schema, its
//! loader/validator, seeded debris population sampling, breakup fragment
//! generation, and assembly of a runnable mission from a configuration.
//!
//! Configurations are TOML files with strict unknown-field rejection.
//! All randomness derives from the scenario's single `seed` through named
//! substreams (`"population"`, `"breakup"`), so changing one generator's
//! parameters never perturbs the other's draws, and sweeps that vary
//! planning knobs share the identical debris field.

use std::fs;
use std::path::Path;

use chrono::{DateTime, Utc};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::astro::{propagate_two_body, AstroError, KeplerianElements, EARTH_RADIUS_KM};
use crate::pla::{DebrisBody, LaserSystem};
use crate::rhs::{MissionDebris, MissionSetup, RhsConfig};
use crate::teg::{
    build_altitude_change_grid, build_baseline_grid, build_plane_change_grid, ActiveSpacecraft,
    ActiveTrack, EngagementRules, LayerDirection, PlatformSlotGrid, TegError, TegLimits,
};

#[derive(Debug, thiserror::Error)]
pub enum ScenarioError {
    #[error("cannot read scenario file")]
    Io(#[from] std::io::Error),
    #[error("scenario file is not valid TOML: {0}")]
    Parse(String),
    #[error("invalid scenario: {field}: {constraint}")]
    Validation { field: String, constraint: String },
    #[error("grid construction failed")]
    Grid(#[from] TegError),
    #[error("orbit conversion failed")]
    Astro(#[from] AstroError),
}

fn invalid(field: &str, constraint: impl Into<String>) -> ScenarioError {
    ScenarioError::Validation { field: field.to_string(), constraint: constraint.into() }
}

/// Time discretization and planning-window settings.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeGrid {
    /// Number of time points spanning the mission (decision steps + 1).
    pub horizon_steps: usize,
    /// Step length, seconds.
    pub step_s: f64,
    /// Lookahead window length in decision steps.
    pub window_length: usize,
}

/// Which candidate-slot family each platform reconfigures over.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Conops {
    /// No reconfiguration: each platform holds its initial orbit.
    Baseline,
    /// Inclination/RAAN offsets crossed with phasing.
    PlaneChange,
    /// Altitude layers crossed with phasing.
    AltitudeChange,
}

impl std::fmt::Display for Conops {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Conops::Baseline => "baseline",
            Conops::PlaneChange => "plane_change",
            Conops::AltitudeChange => "altitude_change",
        })
    }
}

/// CONOPS selection plus the grid parameters for the selected kind. Fields
/// irrelevant to the kind must be omitted; validation enforces consistency.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConopsConfig {
    pub kind: Conops,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_phases: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_planes: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_layers: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub layer_step_km: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub layer_direction: Option<LayerDirection>,
}

impl ConopsConfig {
    pub fn baseline() -> Self {
        ConopsConfig {
            kind: Conops::Baseline,
            n_phases: None,
            n_planes: None,
            n_layers: None,
            layer_step_km: None,
            layer_direction: None,
        }
    }
}

/// Statistical description of the background debris field. All debris are
/// circular; semi-major axes come from an altitude histogram via inverse
/// CDF, inclinations from a continuous uniform range, RAAN and argument of
/// latitude from evenly spaced grids over [0, 360) degrees.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DebrisPopulationSpec {
    pub count: usize,
    /// Histogram bin edges, km of altitude above the Earth radius,
    /// nondecreasing, one more entry than the frequency list. A degenerate
    /// bin (equal edges) pins its samples to that altitude exactly.
    pub altitude_bin_edges_km: Vec<f64>,
    /// Relative frequency per bin; must sum to 1 within 1e-9.
    pub altitude_bin_freqs: Vec<f64>,
    /// Inclusive inclination range, degrees.
    pub inclination_range_deg: [f64; 2],
    /// Number of evenly spaced RAAN values over [0, 360).
    pub raan_grid_count: u32,
    /// Number of evenly spaced argument-of-latitude values over [0, 360).
    pub arg_lat_grid_count: u32,
    /// Mass per illuminated area of every sampled object, kg/m^2.
    pub areal_density_kg_m2: f64,
}

/// An on-orbit fragmentation: the parent object, when it breaks up, and the
/// dispersion of the fragment cloud around the parent's orbit at that time.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BreakupEvent {
    /// Parent orbit. In a scenario file these are the parent's elements at
    /// the epoch; fragment dispersion is applied around the parent's
    /// propagated elements at the trigger boundary.
    pub parent: KeplerianElements,
    pub parent_areal_density_kg_m2: f64,
    /// Seconds from the epoch. Fragments appear at the first step boundary
    /// at or after this time; the parent ceases to exist there.
    pub trigger_s: f64,
    pub fragment_count: usize,
    /// Largest semi-major-axis deviation of any fragment, km.
    pub max_sma_deviation_km: f64,
    /// Largest deviation of any fragment's inclination, RAAN, or argument
    /// of latitude, degrees.
    pub max_angle_deviation_deg: f64,
    /// Mass per illuminated area of every fragment, kg/m^2.
    pub areal_density_kg_m2: f64,
}

/// Background population and/or a breakup event; at least one is required.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DebrisConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub population: Option<DebrisPopulationSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub breakup: Option<BreakupEvent>,
}

/// Engagement acceptance and reward-shaping knobs, all defaulted.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RulesConfig {
    /// Perigee radius at or below which a debris counts as deorbited, km.
    pub r_deorbit_km: f64,
    /// Beam grazing margin above the Earth radius, km.
    pub grazing_altitude_km: f64,
    /// Reward penalty for invading an active spacecraft's ellipsoid.
    pub conjunction_penalty: f64,
    /// Most platforms allowed on one cooperative engagement.
    pub k_max: usize,
    /// Fraction of the transfer budget usable for plane-change envelopes.
    pub beta: f64,
}

impl Default for RulesConfig {
    fn default() -> Self {
        let rules = EngagementRules::default();
        RulesConfig {
            r_deorbit_km: rules.r_deorbit_km,
            grazing_altitude_km: rules.grazing_altitude_km,
            conjunction_penalty: rules.conjunction_penalty,
            k_max: rules.k_max,
            beta: 0.8,
        }
    }
}

/// A complete mission description as read from a scenario file.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    /// Identifier used in reports and output file naming.
    pub id: String,
    /// Calendar epoch (labeling only; dynamics are epoch-relative).
    pub epoch_utc: DateTime<Utc>,
    /// Master seed; all stochastic generation flows from it.
    pub seed: u64,
    /// Transfer budget per platform, km/s (uniform across the fleet).
    pub dv_budget_kms: f64,
    pub time: TimeGrid,
    pub laser: LaserSystem,
    /// Initial orbital elements, one entry per platform.
    pub platforms: Vec<KeplerianElements>,
    pub conops: ConopsConfig,
    pub debris: DebrisConfig,
    #[serde(default)]
    pub rules: RulesConfig,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub active_spacecraft: Vec<ActiveSpacecraft>,
}

/// A debris object produced by a generator: physical identity plus orbit.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampledDebris {
    pub body: DebrisBody,
    pub elements: KeplerianElements,
}

/// Deterministic, label-separated generator: the same (seed, label) pair
/// always yields the same stream, and distinct labels yield unrelated
/// streams even for the same seed.
pub fn substream(seed: u64, label: &str) -> ChaCha20Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    let tag = label.as_bytes();
    assert!(tag.len() <= 24, "substream label too long");
    key[8..8 + tag.len()].copy_from_slice(tag);
    ChaCha20Rng::from_seed(key)
}

fn validate_population(spec: &DebrisPopulationSpec) -> Result<(), ScenarioError> {
    let f = "debris.population";
    if spec.count == 0 {
        return Err(invalid(&format!("{f}.count"), "must be > 0"));
    }
    if spec.altitude_bin_freqs.is_empty() {
        return Err(invalid(&format!("{f}.altitude_bin_freqs"), "histogram must not be empty"));
    }
    if spec.altitude_bin_edges_km.len() != spec.altitude_bin_freqs.len() + 1 {
        return Err(invalid(
            &format!("{f}.altitude_bin_edges_km"),
            format!(
                "needs exactly one more edge ({}) than frequencies ({})",
                spec.altitude_bin_edges_km.len(),
                spec.altitude_bin_freqs.len()
            ),
        ));
    }
    if spec.altitude_bin_edges_km.windows(2).any(|w| w[1] < w[0]) {
        return Err(invalid(&format!("{f}.altitude_bin_edges_km"), "edges must be nondecreasing"));
    }
    if spec.altitude_bin_freqs.iter().any(|&p| !(p >= 0.0) || !p.is_finite()) {
        return Err(invalid(&format!("{f}.altitude_bin_freqs"), "frequencies must be >= 0"));
    }
    let total: f64 = spec.altitude_bin_freqs.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(invalid(
            &format!("{f}.altitude_bin_freqs"),
            format!("frequencies sum to {total}, expected 1 within 1e-9"),
        ));
    }
    if spec.inclination_range_deg[1] < spec.inclination_range_deg[0] {
        return Err(invalid(&format!("{f}.inclination_range_deg"), "range must be ordered"));
    }
    if spec.raan_grid_count == 0 || spec.arg_lat_grid_count == 0 {
        return Err(invalid(&format!("{f}.raan_grid_count"), "grid counts must be > 0"));
    }
    if !(spec.areal_density_kg_m2 > 0.0) {
        return Err(invalid(&format!("{f}.areal_density_kg_m2"), "must be > 0"));
    }
    Ok(())
}

fn validate_breakup(event: &BreakupEvent) -> Result<(), ScenarioError> {
    let f = "debris.breakup";
    if !(event.trigger_s > 0.0) {
        return Err(invalid(&format!("{f}.trigger_s"), "must be > 0"));
    }
    if event.fragment_count == 0 {
        return Err(invalid(&format!("{f}.fragment_count"), "must be > 0"));
    }
    if event.max_sma_deviation_km < 0.0 || event.max_angle_deviation_deg < 0.0 {
        return Err(invalid(&format!("{f}.max_sma_deviation_km"), "deviations must be >= 0"));
    }
    if !(event.areal_density_kg_m2 > 0.0) || !(event.parent_areal_density_kg_m2 > 0.0) {
        return Err(invalid(&format!("{f}.areal_density_kg_m2"), "must be > 0"));
    }
    if !(event.parent.sma_km > EARTH_RADIUS_KM) {
        return Err(invalid(&format!("{f}.parent.sma_km"), "parent orbit must clear the Earth"));
    }
    Ok(())
}

/// Draw the background debris field. Per object, the draw order is fixed:
/// bin selector, in-bin position, inclination, RAAN grid index, argument-of-
/// latitude grid index. Fully reproducible per seed; independent of any
/// breakup generation sharing the seed.
pub fn sample_debris_population(
    spec: &DebrisPopulationSpec,
    seed: u64,
) -> Result<Vec<SampledDebris>, ScenarioError> {
    validate_population(spec)?;
    let mut rng = substream(seed, "population");
    let total: f64 = spec.altitude_bin_freqs.iter().sum();
    let mut cdf = Vec::with_capacity(spec.altitude_bin_freqs.len());
    let mut acc = 0.0;
    for &p in &spec.altitude_bin_freqs {
        acc += p / total;
        cdf.push(acc);
    }
    let [inc_lo, inc_hi] = spec.inclination_range_deg;
    let mut out = Vec::with_capacity(spec.count);
    for id in 0..spec.count {
        let u: f64 = rng.gen();
        let bin = cdf.iter().position(|&c| u < c).unwrap_or(cdf.len() - 1);
        let lo = spec.altitude_bin_edges_km[bin];
        let hi = spec.altitude_bin_edges_km[bin + 1];
        let v: f64 = rng.gen();
        let altitude = lo + v * (hi - lo);
        let inc = inc_lo + rng.gen::<f64>() * (inc_hi - inc_lo);
        let raan =
            f64::from(rng.gen_range(0..spec.raan_grid_count)) * 360.0
                / f64::from(spec.raan_grid_count);
        let arg_lat =
            f64::from(rng.gen_range(0..spec.arg_lat_grid_count)) * 360.0
                / f64::from(spec.arg_lat_grid_count);
        out.push(SampledDebris {
            body: DebrisBody { id, areal_density_kg_m2: spec.areal_density_kg_m2 },
            elements: KeplerianElements::circular(
                EARTH_RADIUS_KM + altitude,
                inc,
                raan,
                arg_lat,
            ),
        });
    }
    Ok(out)
}

/// Generate the fragment cloud of a breakup around `event.parent`. Per
/// fragment, the draw order is fixed: sma deviation, inclination deviation,
/// RAAN deviation, argument-of-latitude deviation, each uniform within its
/// bound. Fragment ids run 0..fragment_count; callers embedding fragments in
/// a larger debris list reassign them.
pub fn generate_breakup(
    event: &BreakupEvent,
    seed: u64,
) -> Result<Vec<SampledDebris>, ScenarioError> {
    validate_breakup(event)?;
    let mut rng = substream(seed, "breakup");
    let ds = event.max_sma_deviation_km;
    let da = event.max_angle_deviation_deg;
    let mut out = Vec::with_capacity(event.fragment_count);
    for id in 0..event.fragment_count {
        let d_sma = rng.gen_range(-ds..=ds);
        let d_inc = rng.gen_range(-da..=da);
        let d_raan = rng.gen_range(-da..=da);
        let d_arg_lat = rng.gen_range(-da..=da);
        out.push(SampledDebris {
            body: DebrisBody { id, areal_density_kg_m2: event.areal_density_kg_m2 },
            elements: KeplerianElements::circular(
                event.parent.sma_km + d_sma,
                event.parent.inc_deg + d_inc,
                event.parent.raan_deg + d_raan,
                event.parent.arg_lat_deg + d_arg_lat,
            ),
        });
    }
    Ok(out)
}

fn validate_conops(conops: &ConopsConfig) -> Result<(), ScenarioError> {
    let require = |field: &str, ok: bool| -> Result<(), ScenarioError> {
        if ok {
            Ok(())
        } else {
            Err(invalid(
                &format!("conops.{field}"),
                format!("required by kind = {}", conops.kind),
            ))
        }
    };
    let forbid = |field: &str, absent: bool| -> Result<(), ScenarioError> {
        if absent {
            Ok(())
        } else {
            Err(invalid(
                &format!("conops.{field}"),
                format!("not applicable to kind = {}", conops.kind),
            ))
        }
    };
    match conops.kind {
        Conops::Baseline => {
            forbid("n_phases", conops.n_phases.is_none())?;
            forbid("n_planes", conops.n_planes.is_none())?;
            forbid("n_layers", conops.n_layers.is_none())?;
            forbid("layer_step_km", conops.layer_step_km.is_none())?;
            forbid("layer_direction", conops.layer_direction.is_none())?;
        }
        Conops::PlaneChange => {
            require("n_phases", conops.n_phases.is_some_and(|n| n > 0))?;
            require("n_planes", conops.n_planes.is_some_and(|n| n > 0))?;
            forbid("n_layers", conops.n_layers.is_none())?;
            forbid("layer_step_km", conops.layer_step_km.is_none())?;
            forbid("layer_direction", conops.layer_direction.is_none())?;
        }
        Conops::AltitudeChange => {
            require("n_phases", conops.n_phases.is_some_and(|n| n > 0))?;
            require("n_layers", conops.n_layers.is_some_and(|n| n > 0))?;
            require("layer_step_km", conops.layer_step_km.is_some_and(|s| s >= 0.0))?;
            require("layer_direction", conops.layer_direction.is_some())?;
            forbid("n_planes", conops.n_planes.is_none())?;
        }
    }
    Ok(())
}

/// Check every invariant of a configuration; errors name the offending
/// field and the violated constraint.
pub fn validate_config(config: &ScenarioConfig) -> Result<(), ScenarioError> {
    if config.id.is_empty()
        || !config.id.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-')
    {
        return Err(invalid("id", "must be nonempty [A-Za-z0-9_-]+ (used in file names)"));
    }
    let t = config.time.horizon_steps;
    if t < 3 {
        return Err(invalid("time.horizon_steps", "needs at least 3 time points"));
    }
    if !(config.time.step_s > 0.0) {
        return Err(invalid("time.step_s", "must be > 0"));
    }
    let l = config.time.window_length;
    if l < 2 || l > t - 1 {
        return Err(invalid(
            "time.window_length",
            format!("must satisfy 2 <= L <= {} for {t} time points", t - 1),
        ));
    }

    let lz = &config.laser;
    for (name, v) in [
        ("laser.u_min_km", lz.u_min_km),
        ("laser.u_max_km", lz.u_max_km),
        ("laser.mirror_diameter_m", lz.mirror_diameter_m),
        ("laser.beam_quality", lz.beam_quality),
        ("laser.diffraction_constant", lz.diffraction_constant),
        ("laser.wavelength_m", lz.wavelength_m),
        ("laser.coupling_n_per_mw", lz.coupling_n_per_mw),
        ("laser.pulse_energy_j", lz.pulse_energy_j),
    ] {
        if !(v > 0.0) || !v.is_finite() {
            return Err(invalid(name, format!("must be > 0, got {v}")));
        }
    }
    if lz.u_max_km <= lz.u_min_km {
        return Err(invalid("laser.u_max_km", "must exceed u_min_km"));
    }
    for (name, v) in [("laser.eta_transmit", lz.eta_transmit), ("laser.eta_impulse", lz.eta_impulse)]
    {
        if !(v > 0.0 && v <= 1.0) {
            return Err(invalid(name, format!("must be in (0, 1], got {v}")));
        }
    }
    if lz.pulses_per_step == 0 {
        return Err(invalid("laser.pulses_per_step", "must be >= 1"));
    }

    let r = &config.rules;
    if !(r.r_deorbit_km > EARTH_RADIUS_KM) {
        return Err(invalid("rules.r_deorbit_km", "must exceed the Earth radius"));
    }
    if !(r.grazing_altitude_km >= 0.0) {
        return Err(invalid("rules.grazing_altitude_km", "must be >= 0"));
    }
    if !(r.conjunction_penalty > 0.0) {
        return Err(invalid("rules.conjunction_penalty", "must be > 0"));
    }
    if r.k_max == 0 {
        return Err(invalid("rules.k_max", "must be >= 1"));
    }
    if !(r.beta > 0.0 && r.beta <= 1.0) {
        return Err(invalid("rules.beta", "must be in (0, 1]"));
    }

    if config.platforms.is_empty() {
        return Err(invalid("platforms", "at least one platform is required"));
    }
    let floor = EARTH_RADIUS_KM + r.grazing_altitude_km;
    for (i, el) in config.platforms.iter().enumerate() {
        if !(el.ecc >= 0.0 && el.ecc < 1.0) {
            return Err(invalid(&format!("platforms[{i}].ecc"), "must be in [0, 1)"));
        }
        if !(el.sma_km * (1.0 - el.ecc) > floor) {
            return Err(invalid(
                &format!("platforms[{i}].sma_km"),
                format!("periapsis must clear the grazing floor ({floor} km)"),
            ));
        }
    }
    if !(config.dv_budget_kms >= 0.0) || !config.dv_budget_kms.is_finite() {
        return Err(invalid("dv_budget_kms", "must be finite and >= 0"));
    }

    validate_conops(&config.conops)?;

    if config.debris.population.is_none() && config.debris.breakup.is_none() {
        return Err(invalid("debris", "needs a population, a breakup event, or both"));
    }
    if let Some(pop) = &config.debris.population {
        validate_population(pop)?;
        if !(pop.altitude_bin_edges_km[0] > r.grazing_altitude_km) {
            return Err(invalid(
                "debris.population.altitude_bin_edges_km",
                format!(
                    "lowest altitude {} km must exceed the grazing margin {} km",
                    pop.altitude_bin_edges_km[0], r.grazing_altitude_km
                ),
            ));
        }
    }
    if let Some(event) = &config.debris.breakup {
        validate_breakup(event)?;
        let trigger_step = breakup_trigger_step(event.trigger_s, config.time.step_s);
        let last_window_start = t - 1 - l;
        if trigger_step > last_window_start {
            return Err(invalid(
                "debris.breakup.trigger_s",
                format!(
                    "maps to step {trigger_step}, after the last window start \
                     {last_window_start}; fragments would never be scheduled"
                ),
            ));
        }
    }

    for (i, sc) in config.active_spacecraft.iter().enumerate() {
        if !(sc.ellipsoid_radial_km > 0.0
            && sc.ellipsoid_along_km > 0.0
            && sc.ellipsoid_cross_km > 0.0)
        {
            return Err(invalid(
                &format!("active_spacecraft[{i}]"),
                "ellipsoid semi-axes must be > 0",
            ));
        }
    }
    Ok(())
}

/// First step boundary at or after the trigger time.
pub fn breakup_trigger_step(trigger_s: f64, step_s: f64) -> usize {
    (trigger_s / step_s).ceil() as usize
}

/// Parse and fully validate a scenario file.
pub fn load_scenario(path: impl AsRef<Path>) -> Result<ScenarioConfig, ScenarioError> {
    let text = fs::read_to_string(path)?;
    parse_scenario(&text)
}

/// Parse and fully validate scenario TOML text.
pub fn parse_scenario(text: &str) -> Result<ScenarioConfig, ScenarioError> {
    let config: ScenarioConfig =
        toml::from_str(text).map_err(|e| ScenarioError::Parse(e.to_string()))?;
    validate_config(&config)?;
    Ok(config)
}

/// Serialize a configuration to its canonical TOML form: fixed key order,
/// defaults materialized, optional fields omitted when absent. Canonical
/// text re-parses to an identical configuration and re-serializes to
/// identical text.
pub fn canonical_toml(config: &ScenarioConfig) -> String {
    toml::to_string_pretty(config).expect("scenario configs always serialize")
}

/// A runnable mission assembled from a configuration.
#[derive(Clone, Debug)]
pub struct Mission {
    pub setup: MissionSetup,
    pub rhs: RhsConfig,
    /// Index of the breakup parent in `setup.debris`, when the scenario has
    /// a breakup event.
    pub breakup_parent: Option<usize>,
}

/// Build the mission a configuration describes: candidate-slot grids for
/// the configured CONOPS, the sampled debris field, breakup lifecycle
/// intervals, and active-spacecraft tracks.
pub fn build_mission(config: &ScenarioConfig) -> Result<Mission, ScenarioError> {
    validate_config(config)?;
    let t = config.time.horizon_steps;
    let dt = config.time.step_s;
    let rules = EngagementRules {
        grazing_altitude_km: config.rules.grazing_altitude_km,
        r_deorbit_km: config.rules.r_deorbit_km,
        conjunction_penalty: config.rules.conjunction_penalty,
        k_max: config.rules.k_max,
    };

    let mut grids: Vec<PlatformSlotGrid> = Vec::with_capacity(config.platforms.len());
    for el in &config.platforms {
        let grid = match config.conops.kind {
            Conops::Baseline => build_baseline_grid(el, t, dt)?,
            Conops::PlaneChange => build_plane_change_grid(
                el,
                config.dv_budget_kms,
                config.rules.beta,
                config.conops.n_phases.unwrap(),
                config.conops.n_planes.unwrap(),
                t,
                dt,
            )?,
            Conops::AltitudeChange => build_altitude_change_grid(
                el,
                config.conops.n_phases.unwrap(),
                config.conops.n_layers.unwrap(),
                config.conops.layer_step_km.unwrap(),
                config.conops.layer_direction.unwrap(),
                EARTH_RADIUS_KM + config.rules.grazing_altitude_km,
                t,
                dt,
            )?,
        };
        grids.push(grid);
    }

    let mut debris: Vec<MissionDebris> = Vec::new();
    if let Some(pop) = &config.debris.population {
        for sample in sample_debris_population(pop, config.seed)? {
            debris.push(MissionDebris::whole_mission(sample.body, sample.elements.to_state()));
        }
    }
    let mut breakup_parent = None;
    if let Some(event) = &config.debris.breakup {
        let trigger_step = breakup_trigger_step(event.trigger_s, dt);
        let parent_index = debris.len();
        breakup_parent = Some(parent_index);
        let parent_state = event.parent.to_state();
        debris.push(MissionDebris {
            body: DebrisBody {
                id: parent_index,
                areal_density_kg_m2: event.parent_areal_density_kg_m2,
            },
            initial_state: parent_state,
            arrival_step: 0,
            departure_step: trigger_step,
            spawned_by: None,
        });
        // Fragments disperse around where the parent actually is at the
        // trigger boundary, not around its epoch elements.
        let parent_at_trigger = KeplerianElements::from_state(&propagate_two_body(
            &parent_state,
            trigger_step as f64 * dt,
        )?)?;
        let effective = BreakupEvent { parent: parent_at_trigger, ..event.clone() };
        for fragment in generate_breakup(&effective, config.seed)? {
            debris.push(MissionDebris {
                body: DebrisBody {
                    id: parent_index + 1 + fragment.body.id,
                    areal_density_kg_m2: fragment.body.areal_density_kg_m2,
                },
                initial_state: fragment.elements.to_state(),
                arrival_step: trigger_step,
                departure_step: usize::MAX,
                spawned_by: Some(parent_index),
            });
        }
    }

    let mut actives = Vec::with_capacity(config.active_spacecraft.len());
    for sc in &config.active_spacecraft {
        actives.push(ActiveTrack::build(sc, t, dt)?);
    }

    let n = grids.len();
    Ok(Mission {
        setup: MissionSetup {
            dt_s: dt,
            grids,
            initial_slots: vec![0; n],
            budgets_kms: vec![config.dv_budget_kms; n],
            debris,
            laser: config.laser.clone(),
            rules,
            actives,
            limits: TegLimits::default(),
            strict_consistency: true,
            per_window_time_limit_s: None,
            record_trajectories: false,
            record_window_artifacts: false,
            brute_force_check: false,
        },
        rhs: RhsConfig { horizon_steps: t, window_length: config.time.window_length },
        breakup_parent,
    })
}
