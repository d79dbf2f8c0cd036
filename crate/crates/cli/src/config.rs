//! Scenario files: TOML with one section per simulator module.

use std::fmt;

use mms_core::choice::EstimationConfig;
use mms_core::demand::{Horizon, ModeSettings};
use mms_core::dispatch::DispatchConfig;
use mms_core::{FareSchedule, Mode, NetworkConfig, NlParams, PricingConfig, PricingMode, Scenario, WtpModel};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub network: NetworkSection,
    pub demand: DemandSection,
    pub fares: FaresSection,
    pub choice: ChoiceSection,
    pub pricing: PricingSection,
    pub dispatch: DispatchSection,
    pub sim: SimSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkSection {
    pub region_size_km: f64,
    pub zone_count: usize,
    pub station_spacing_km: f64,
    pub station_merge_km: f64,
    pub ring_half_widths_km: Vec<f64>,
    pub transit_speed_kmh: f64,
    pub boarding_wait_min: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DemandSection {
    pub lambda_per_hour: f64,
    /// Clock time, `HH:MM`.
    pub horizon_start: String,
    pub horizon_end: String,
    pub walk_kmh: f64,
    pub bike_kmh: f64,
    pub car_kmh: f64,
    pub taxi_wait_min: f64,
    pub car_cost_per_km: f64,
    pub transit_station_candidates: usize,
    pub wtp_cost_per_km: f64,
    /// Variance of willingness to pay, $².
    pub wtp_sigma: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FaresSection {
    pub base_fare: f64,
    pub per_km: f64,
    pub avg_op_cost_per_km: f64,
    pub transit_fare: f64,
    pub taxi_flag: f64,
    pub taxi_per_km: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsSection {
    pub beta_ovtt: f64,
    pub beta_ivtt: f64,
    pub beta_cost: f64,
    /// Walk, bike, car, taxi, transit, r, rt.
    pub asc: Vec<f64>,
    /// Non-motorized, auto, public transport.
    pub mu: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimationSection {
    pub free_asc: bool,
    pub starts: usize,
    pub gradient_tolerance: f64,
    pub max_iterations: usize,
    pub jitter: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChoiceSection {
    pub truth: ParamsSection,
    pub initial: ParamsSection,
    pub estimation: EstimationSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PricingSection {
    pub mode: String,
    pub alpha: f64,
    pub starts: usize,
    pub step_tolerance: f64,
    pub max_iterations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DispatchSection {
    pub fleet_size: usize,
    pub capacity: usize,
    pub gamma: f64,
    pub beta_delay: f64,
    pub service_radius_km: f64,
    pub relocation_interval_min: f64,
    pub speed_kmh: f64,
    pub station_candidates: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimSection {
    pub days: u32,
    pub seed: u64,
    pub record_events: bool,
}

/// A config problem, with the 1-based line it was found on when known.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub line: Option<usize>,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(l) => write!(f, "line {l}: {}", self.message),
            None => f.write_str(&self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

impl ConfigError {
    fn at(text: &str, key: &str, message: impl Into<String>) -> Self {
        Self { line: find_key(text, key), message: message.into() }
    }
}

/// Line of `section.key` in `text`, if present.
fn find_key(text: &str, path: &str) -> Option<usize> {
    let (section, key) = path.rsplit_once('.').unwrap_or(("", path));
    let mut current = String::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
            current = name.trim().to_string();
            continue;
        }
        if current == section {
            if let Some((k, _)) = line.split_once('=') {
                if k.trim() == key {
                    return Some(i + 1);
                }
            }
        }
    }
    None
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].bytes().filter(|&b| b == b'\n').count() + 1
}

pub fn format_clock(minutes: f64) -> String {
    let m = minutes.round() as i64;
    format!("{:02}:{:02}", m / 60, m % 60)
}

pub fn parse_clock(s: &str) -> Option<f64> {
    let (h, m) = s.trim().split_once(':')?;
    let (h, m): (u32, u32) = (h.parse().ok()?, m.parse().ok()?);
    (h < 24 && m < 60).then(|| f64::from(h * 60 + m))
}

impl ParamsSection {
    fn from_params(p: &NlParams) -> Self {
        Self { beta_ovtt: p.beta_ovtt, beta_ivtt: p.beta_ivtt, beta_cost: p.beta_cost, asc: p.asc.to_vec(), mu: p.mu.to_vec() }
    }

    fn to_params(&self, text: &str, name: &str) -> Result<NlParams, ConfigError> {
        let asc = self
            .asc
            .as_slice()
            .try_into()
            .map_err(|_| ConfigError::at(text, &format!("choice.{name}.asc"), format!("asc needs {} values, one per mode", Mode::COUNT)))?;
        let mu = self.mu.as_slice().try_into().map_err(|_| ConfigError::at(text, &format!("choice.{name}.mu"), "mu needs 3 values, one per nest"))?;
        Ok(NlParams { beta_ovtt: self.beta_ovtt, beta_ivtt: self.beta_ivtt, beta_cost: self.beta_cost, asc, mu })
    }
}

impl Config {
    pub fn from_scenario(s: &Scenario) -> Self {
        let e = &s.estimation;
        Self {
            network: NetworkSection {
                region_size_km: s.network.region_size_km,
                zone_count: s.network.zone_count,
                station_spacing_km: s.network.station_spacing_km,
                station_merge_km: s.network.station_merge_km,
                ring_half_widths_km: s.network.ring_half_widths_km.clone(),
                transit_speed_kmh: s.network.transit_speed_kmh,
                boarding_wait_min: s.network.boarding_wait_min,
            },
            demand: DemandSection {
                lambda_per_hour: s.lambda_per_hour,
                horizon_start: format_clock(s.horizon.start),
                horizon_end: format_clock(s.horizon.end),
                walk_kmh: s.modes.walk_kmh,
                bike_kmh: s.modes.bike_kmh,
                car_kmh: s.modes.car_kmh,
                taxi_wait_min: s.modes.taxi_wait_min,
                car_cost_per_km: s.modes.car_cost_per_km,
                transit_station_candidates: s.modes.station_candidates,
                wtp_cost_per_km: s.wtp.car_cost_per_km,
                wtp_sigma: s.wtp.sigma,
            },
            fares: FaresSection {
                base_fare: s.fares.base_fare,
                per_km: s.fares.per_km,
                avg_op_cost_per_km: s.fares.avg_op_cost_per_km,
                transit_fare: s.fares.transit_fare,
                taxi_flag: s.fares.taxi_flag,
                taxi_per_km: s.fares.taxi_per_km,
            },
            choice: ChoiceSection {
                truth: ParamsSection::from_params(&s.truth),
                initial: ParamsSection::from_params(&s.initial),
                estimation: EstimationSection {
                    free_asc: e.free_asc,
                    starts: e.starts,
                    gradient_tolerance: e.gradient_tolerance,
                    max_iterations: e.max_iterations,
                    jitter: e.jitter,
                    seed: e.seed,
                },
            },
            pricing: PricingSection {
                mode: s.pricing.mode.name().to_string(),
                alpha: s.pricing.alpha,
                starts: s.pricing.starts,
                step_tolerance: s.pricing.step_tolerance,
                max_iterations: s.pricing.max_iterations,
            },
            dispatch: DispatchSection {
                fleet_size: s.fleet_size,
                capacity: s.capacity,
                gamma: s.dispatch.gamma,
                beta_delay: s.dispatch.beta_delay,
                service_radius_km: s.dispatch.service_radius_km,
                relocation_interval_min: s.dispatch.relocation_interval_min,
                speed_kmh: s.dispatch.speed_kmh,
                station_candidates: s.dispatch.station_candidates,
            },
            sim: SimSection { days: s.days, seed: s.seed, record_events: s.record_events },
        }
    }

    /// Builds the scenario. `text` is the source the config was read from
    /// and is only used to locate offending keys.
    pub fn to_scenario(&self, text: &str) -> Result<Scenario, ConfigError> {
        let d = &self.demand;
        let start =
            parse_clock(&d.horizon_start).ok_or_else(|| ConfigError::at(text, "demand.horizon_start", format!("expected HH:MM, got {:?}", d.horizon_start)))?;
        let end = parse_clock(&d.horizon_end).ok_or_else(|| ConfigError::at(text, "demand.horizon_end", format!("expected HH:MM, got {:?}", d.horizon_end)))?;
        let mode = PricingMode::parse(&self.pricing.mode).ok_or_else(|| {
            ConfigError::at(text, "pricing.mode", format!("unknown pricing mode {:?}; expected none, constrained or unconstrained", self.pricing.mode))
        })?;
        let n = &self.network;
        let f = &self.fares;
        let e = &self.choice.estimation;
        let p = &self.dispatch;
        let scenario = Scenario {
            network: NetworkConfig {
                region_size_km: n.region_size_km,
                zone_count: n.zone_count,
                station_spacing_km: n.station_spacing_km,
                station_merge_km: n.station_merge_km,
                ring_half_widths_km: n.ring_half_widths_km.clone(),
                transit_speed_kmh: n.transit_speed_kmh,
                boarding_wait_min: n.boarding_wait_min,
            },
            lambda_per_hour: d.lambda_per_hour,
            days: self.sim.days,
            fleet_size: p.fleet_size,
            capacity: p.capacity,
            horizon: Horizon::new(start, end),
            dispatch: DispatchConfig {
                gamma: p.gamma,
                beta_delay: p.beta_delay,
                service_radius_km: p.service_radius_km,
                relocation_interval_min: p.relocation_interval_min,
                speed_kmh: p.speed_kmh,
                station_candidates: p.station_candidates,
            },
            pricing: PricingConfig {
                mode,
                alpha: self.pricing.alpha,
                s: 0.0,
                starts: self.pricing.starts,
                step_tolerance: self.pricing.step_tolerance,
                max_iterations: self.pricing.max_iterations,
            },
            fares: FareSchedule {
                base_fare: f.base_fare,
                per_km: f.per_km,
                avg_op_cost_per_km: f.avg_op_cost_per_km,
                transit_fare: f.transit_fare,
                taxi_flag: f.taxi_flag,
                taxi_per_km: f.taxi_per_km,
            },
            wtp: WtpModel { car_cost_per_km: d.wtp_cost_per_km, sigma: d.wtp_sigma },
            modes: ModeSettings {
                walk_kmh: d.walk_kmh,
                bike_kmh: d.bike_kmh,
                car_kmh: d.car_kmh,
                taxi_wait_min: d.taxi_wait_min,
                car_cost_per_km: d.car_cost_per_km,
                station_candidates: d.transit_station_candidates,
            },
            truth: self.choice.truth.to_params(text, "truth")?,
            initial: self.choice.initial.to_params(text, "initial")?,
            estimation: EstimationConfig {
                free_asc: e.free_asc,
                starts: e.starts,
                gradient_tolerance: e.gradient_tolerance,
                max_iterations: e.max_iterations,
                jitter: e.jitter,
                seed: e.seed,
            },
            seed: self.sim.seed,
            record_events: self.sim.record_events,
        };
        scenario.validate().map_err(|err| ConfigError { line: None, message: err.to_string() })?;
        Ok(scenario)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}

/// Parses and validates a scenario file.
pub fn parse(text: &str) -> Result<Scenario, ConfigError> {
    let config: Config = toml::from_str(text).map_err(|e| ConfigError { line: e.span().map(|s| line_of(text, s.start)), message: e.message().to_string() })?;
    config.to_scenario(text)
}

/// The reference scenario as config text.
pub fn emit_reference_config() -> String {
    Config::from_scenario(&Scenario::default()).to_toml()
}

pub fn emit(scenario: &Scenario) -> String {
    Config::from_scenario(scenario).to_toml()
}
