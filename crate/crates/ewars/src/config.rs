//! Flat `key = value` run configuration.
//!
//! An empty file yields the reference desk-scale setup (2 atm chamber, 1 atm
//! ambient, 300 K, 0.128 m³, constant-leak estimator preset). Unknown keys
//! are rejected with the offending line number. Areas are given in mm² and
//! pressures in Pa or atm (`*_pa` / `*_atm` key variants); everything is
//! converted to SI internally.

use std::path::Path;

use crate::chamber_sim::{LeakScenario, SensorModel};
use crate::estimator::{AnchorMode, EwarsConfig, RefineStrategy, SearchBounds};
use crate::gas_dynamics::{
    AmbientConditions, BlowdownContext, ChamberGeometry, GasModel, InitialState,
};
use crate::{Error, Result};

pub const MM2_TO_M2: f64 = 1e-6;
pub const ATM_TO_PA: f64 = 101_325.0;

/// Display unit for pressures in CLI summaries.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PressureUnit {
    Pascal,
    Atmosphere,
}

/// Fully resolved run configuration: physical parameters, estimator tuning,
/// scenario definition, and output options.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub gamma: f64,
    pub r_specific: f64,
    /// Ambient pressure, Pa.
    pub p_atm: f64,
    /// Initial chamber pressure, Pa.
    pub p01: f64,
    /// Initial temperature, K.
    pub t01: f64,
    /// Chamber volume, m³.
    pub volume: f64,
    pub ewars: EwarsConfig,
    /// Scenario leak areas in m²: one value for a constant leak, several for
    /// a multi-step schedule.
    pub leak_areas: Vec<f64>,
    /// Per-step duration for multi-step scenarios, s.
    pub step_duration: f64,
    /// Total scenario duration for constant leaks, s.
    pub duration: f64,
    pub noise_sigma: f64,
    pub sample_rate: f64,
    /// Simulator integration step, s.
    pub sim_dt: f64,
    pub seed: u64,
    pub out: Option<String>,
    pub pressure_display: PressureUnit,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            gamma: 1.4,
            r_specific: 287.0,
            p_atm: ATM_TO_PA,
            p01: 2.0 * ATM_TO_PA,
            t01: 300.0,
            volume: 0.128,
            ewars: EwarsConfig::constant_leak(),
            leak_areas: vec![0.22e-6],
            step_duration: 180.0,
            duration: 300.0,
            noise_sigma: 100.0,
            sample_rate: 1000.0,
            sim_dt: 1e-3,
            seed: 0,
            out: None,
            pressure_display: PressureUnit::Pascal,
        }
    }
}

impl RunConfig {
    pub fn context(&self) -> Result<BlowdownContext> {
        let gas = GasModel::new(self.gamma, self.r_specific)?;
        let ambient = AmbientConditions::new(self.p_atm)?;
        let geometry = ChamberGeometry::new(self.volume)?;
        let initial = InitialState::from_pressure_temperature(self.p01, self.t01, &gas)?;
        BlowdownContext::new(gas, ambient, geometry, initial)
    }

    pub fn scenario(&self) -> Result<LeakScenario> {
        if self.leak_areas.len() == 1 {
            crate::chamber_sim::scenario_constant(self.leak_areas[0], self.duration)
        } else {
            crate::chamber_sim::scenario_steps(&self.leak_areas, self.step_duration)
        }
    }

    pub fn sensor(&self) -> Result<SensorModel> {
        SensorModel::new(self.sample_rate, self.noise_sigma, self.seed)
    }

    pub fn validate(&self) -> Result<()> {
        self.context()?;
        self.ewars.validate()?;
        self.scenario()?;
        self.sensor()?;
        if !(self.sim_dt > 0.0) {
            return Err(Error::domain(format!("sim_dt_s must be > 0, got {}", self.sim_dt)));
        }
        Ok(())
    }
}

fn bad(line: usize, message: impl std::fmt::Display) -> Error {
    Error::Config { line, message: message.to_string() }
}

fn parse_f64(line: usize, key: &str, v: &str) -> Result<f64> {
    v.parse::<f64>().map_err(|_| bad(line, format!("{key}: expected a number, got `{v}`")))
}

fn parse_u64(line: usize, key: &str, v: &str) -> Result<u64> {
    v.parse::<u64>().map_err(|_| bad(line, format!("{key}: expected an integer, got `{v}`")))
}

/// Applies one `key = value` pair to the config.
fn apply_key(cfg: &mut RunConfig, key: &str, value: &str, line: usize) -> Result<()> {
    match key {
        "gamma" => cfg.gamma = parse_f64(line, key, value)?,
        "r_specific" => cfg.r_specific = parse_f64(line, key, value)?,
        "p_atm_pa" => cfg.p_atm = parse_f64(line, key, value)?,
        "p_atm_atm" => cfg.p_atm = parse_f64(line, key, value)? * ATM_TO_PA,
        "p01_pa" => cfg.p01 = parse_f64(line, key, value)?,
        "p01_atm" => cfg.p01 = parse_f64(line, key, value)? * ATM_TO_PA,
        "t01_k" => cfg.t01 = parse_f64(line, key, value)?,
        "volume_m3" => cfg.volume = parse_f64(line, key, value)?,
        "preset" => match value {
            "constant" => {
                cfg.ewars = EwarsConfig::constant_leak();
            }
            "variable" => {
                cfg.ewars = EwarsConfig::variable_leak();
            }
            other => return Err(bad(line, format!("preset: expected constant|variable, got `{other}`"))),
        },
        "alpha" => {
            let a = parse_f64(line, key, value)?;
            if !(0.0..=1.0).contains(&a) {
                return Err(bad(line, format!("alpha must be in [0, 1], got {a}")));
            }
            cfg.ewars.alpha = a;
        }
        "epsilon_mm2" => {
            let e = parse_f64(line, key, value)?;
            if !(e > 0.0) {
                return Err(bad(line, format!("epsilon_mm2 must be > 0, got {e}")));
            }
            cfg.ewars.epsilon = e * MM2_TO_M2;
        }
        "n_grid" => cfg.ewars.n_grid = parse_u64(line, key, value)? as usize,
        "area_lb_mm2" => cfg.ewars.bounds.a_lb = parse_f64(line, key, value)? * MM2_TO_M2,
        "area_ub_mm2" => cfg.ewars.bounds.a_ub = parse_f64(line, key, value)? * MM2_TO_M2,
        "update_interval_s" => cfg.ewars.update_interval = parse_f64(line, key, value)?,
        "anchor_mode" => {
            cfg.ewars.anchor_mode = match value {
                "previous" => AnchorMode::PreviousMeasurement,
                "initial" => AnchorMode::InitialCondition,
                other => {
                    return Err(bad(line, format!("anchor_mode: expected previous|initial, got `{other}`")))
                }
            }
        }
        "refine_strategy" => {
            cfg.ewars.refine_strategy = match value {
                "replay" => RefineStrategy::Replay,
                "interpolate" => RefineStrategy::Interpolate,
                other => {
                    return Err(bad(
                        line,
                        format!("refine_strategy: expected replay|interpolate, got `{other}`"),
                    ))
                }
            }
        }
        "weight_floor" => cfg.ewars.weight_floor = parse_f64(line, key, value)?,
        "model_dt_s" => cfg.ewars.model_dt = Some(parse_f64(line, key, value)?),
        "leak_mm2" => {
            let mut areas = Vec::new();
            for part in value.split(',') {
                areas.push(parse_f64(line, key, part.trim())? * MM2_TO_M2);
            }
            if areas.is_empty() {
                return Err(bad(line, "leak_mm2: expected at least one area"));
            }
            cfg.leak_areas = areas;
        }
        "step_duration_s" => cfg.step_duration = parse_f64(line, key, value)?,
        "duration_s" => cfg.duration = parse_f64(line, key, value)?,
        "noise_sigma_pa" => cfg.noise_sigma = parse_f64(line, key, value)?,
        "sample_rate_hz" => cfg.sample_rate = parse_f64(line, key, value)?,
        "sim_dt_s" => cfg.sim_dt = parse_f64(line, key, value)?,
        "seed" => cfg.seed = parse_u64(line, key, value)?,
        "out" => cfg.out = Some(value.to_string()),
        "pressure_display" => {
            cfg.pressure_display = match value {
                "pa" => PressureUnit::Pascal,
                "atm" => PressureUnit::Atmosphere,
                other => return Err(bad(line, format!("pressure_display: expected pa|atm, got `{other}`"))),
            }
        }
        other => return Err(bad(line, format!("unknown key `{other}`"))),
    }
    Ok(())
}

/// Parses configuration text. Later keys override earlier ones; `preset`
/// resets every estimator field it covers, so place overrides after it.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let mut cfg = RunConfig::default();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let stripped = match raw.find('#') {
            Some(pos) => &raw[..pos],
            None => raw,
        };
        let stripped = stripped.trim();
        if stripped.is_empty() {
            continue;
        }
        let Some((key, value)) = stripped.split_once('=') else {
            return Err(bad(line, format!("expected `key = value`, got `{stripped}`")));
        };
        apply_key(&mut cfg, key.trim(), value.trim(), line)?;
    }
    cfg.validate().map_err(|e| match e {
        Error::Config { .. } => e,
        other => Error::Config { line: 0, message: other.to_string() },
    })?;
    Ok(cfg)
}

/// Loads and validates a configuration file.
pub fn load_config(path: impl AsRef<Path>) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path)?;
    parse_config(&text)
}

/// Search bounds in mm² for reporting.
pub fn bounds_mm2(bounds: &SearchBounds) -> (f64, f64) {
    (bounds.a_lb / MM2_TO_M2, bounds.a_ub / MM2_TO_M2)
}
