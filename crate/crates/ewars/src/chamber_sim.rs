//! Synthetic pressure chamber: generates ground-truth and noisy pressure
//! streams for constant and multi-step leak scenarios, and emulates the
//! flow-controller calibration chain (volts → slpm → leak area).

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::estimator::MeasurementSample;
use crate::gas_dynamics::{
    exit_mass_flow, rk4_step_with, stage_coefficients, stage_of, BlowdownContext, FlowStage,
};
use crate::{Error, Result};

/// Piecewise-constant true leak-area schedule.
#[derive(Debug, Clone, PartialEq)]
pub struct LeakScenario {
    /// `(start_time s, leak_area m²)`, start times strictly increasing, the
    /// first at 0.
    pub segments: Vec<(f64, f64)>,
    pub duration: f64,
}

impl LeakScenario {
    pub fn new(segments: Vec<(f64, f64)>, duration: f64) -> Result<Self> {
        if segments.is_empty() {
            return Err(Error::domain("scenario needs at least one segment"));
        }
        if segments[0].0 != 0.0 {
            return Err(Error::domain("first segment must start at t = 0"));
        }
        for w in segments.windows(2) {
            if w[1].0 <= w[0].0 {
                return Err(Error::domain("segment start times must be strictly increasing"));
            }
        }
        if segments.iter().any(|&(_, a)| a < 0.0) {
            return Err(Error::domain("leak areas must be >= 0"));
        }
        if !(duration > 0.0) {
            return Err(Error::domain(format!("duration must be > 0, got {duration}")));
        }
        Ok(LeakScenario { segments, duration })
    }

    /// True leak area at time `t`.
    pub fn area_at(&self, t: f64) -> f64 {
        let mut area = self.segments[0].1;
        for &(start, a) in &self.segments {
            if t >= start {
                area = a;
            } else {
                break;
            }
        }
        area
    }
}

/// Single constant-leak scenario.
pub fn scenario_constant(area: f64, duration: f64) -> Result<LeakScenario> {
    if area < 0.0 {
        return Err(Error::domain(format!("leak area must be >= 0, got {area}")));
    }
    LeakScenario::new(vec![(0.0, area)], duration)
}

/// Multi-step scenario: each area in turn for `step_duration` seconds.
pub fn scenario_steps(areas: &[f64], step_duration: f64) -> Result<LeakScenario> {
    if areas.is_empty() {
        return Err(Error::domain("scenario needs at least one step"));
    }
    if !(step_duration > 0.0) {
        return Err(Error::domain(format!("step duration must be > 0, got {step_duration}")));
    }
    let segments =
        areas.iter().enumerate().map(|(i, &a)| (i as f64 * step_duration, a)).collect();
    LeakScenario::new(segments, areas.len() as f64 * step_duration)
}

/// Pressure transducer model: sampling rate and additive Gaussian noise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SensorModel {
    /// Samples per second; 1 kHz by default.
    pub sample_rate: f64,
    /// Additive Gaussian noise standard deviation in Pa.
    pub noise_sigma: f64,
    pub seed: u64,
}

impl SensorModel {
    pub fn new(sample_rate: f64, noise_sigma: f64, seed: u64) -> Result<Self> {
        if !(sample_rate > 0.0) {
            return Err(Error::domain(format!("sample rate must be > 0, got {sample_rate}")));
        }
        if !(noise_sigma >= 0.0) {
            return Err(Error::domain(format!("noise sigma must be >= 0, got {noise_sigma}")));
        }
        Ok(SensorModel { sample_rate, noise_sigma, seed })
    }
}

impl Default for SensorModel {
    fn default() -> Self {
        SensorModel { sample_rate: 1000.0, noise_sigma: 100.0, seed: 0 }
    }
}

/// Sixth-order volts → slpm flow-controller calibration.
#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationPolynomial {
    /// Coefficients in ascending order: `c0 + c1·v + ... + c6·v^6`.
    pub coefficients: [f64; 7],
    /// Admissible command range in volts.
    pub valid_range: (f64, f64),
}

impl CalibrationPolynomial {
    /// Validates non-negativity and monotonicity over the 0–6 V operating
    /// range by dense evaluation.
    pub fn new(coefficients: [f64; 7]) -> Result<Self> {
        let cal = CalibrationPolynomial { coefficients, valid_range: (0.0, 10.0) };
        let mut last = f64::NEG_INFINITY;
        for i in 0..=600 {
            let v = i as f64 * 0.01;
            let q = cal.eval(v);
            if q < 0.0 {
                return Err(Error::domain(format!("calibration negative at {v} V")));
            }
            if q < last {
                return Err(Error::domain(format!("calibration not non-decreasing at {v} V")));
            }
            last = q;
        }
        Ok(cal)
    }

    /// Linear 1 slpm/V placeholder used when no fitted calibration is
    /// supplied.
    pub fn identity() -> Self {
        CalibrationPolynomial {
            coefficients: [0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0],
            valid_range: (0.0, 10.0),
        }
    }

    fn eval(&self, v: f64) -> f64 {
        // Horner form.
        self.coefficients.iter().rev().fold(0.0, |acc, &c| acc * v + c)
    }
}

/// Flow-controller command to volumetric flow at standard conditions.
pub fn volts_to_slpm(v: f64, cal: &CalibrationPolynomial) -> Result<f64> {
    let (lo, hi) = cal.valid_range;
    if !(v >= lo && v <= hi) {
        return Err(Error::domain(format!("command {v} V outside [{lo}, {hi}] V")));
    }
    Ok(cal.eval(v))
}

/// Standard conditions `(pressure Pa, temperature K)` declaring what one
/// "standard liter" means.
pub type StdConditions = (f64, f64);

/// Default standard conditions for slpm: 101325 Pa, 293.15 K.
pub const STD_CONDITIONS: StdConditions = (101_325.0, 293.15);

/// Converts a standard-liters-per-minute flow into the equivalent orifice
/// area at chamber pressure `p0`, inverting the (linear-in-area) exit-flow
/// relation for the regime at `p0`.
pub fn slpm_to_area(
    q_slpm: f64,
    p0: f64,
    ctx: &BlowdownContext,
    std_conditions: StdConditions,
) -> Result<f64> {
    if !(q_slpm >= 0.0) {
        return Err(Error::domain(format!("flow must be >= 0, got {q_slpm}")));
    }
    if p0 <= ctx.ambient.p_atm {
        return Err(Error::domain(format!(
            "no flow regime at p0 = {p0} Pa <= ambient {} Pa",
            ctx.ambient.p_atm
        )));
    }
    if matches!(stage_of(p0, &ctx.ambient, &ctx.gas), FlowStage::Equalized) {
        return Err(Error::domain("chamber equalized; area is undefined"));
    }
    let (p_std, t_std) = std_conditions;
    let rho_std = crate::gas_dynamics::density_from_ideal_gas(p_std, t_std, &ctx.gas)?;
    // slpm → kg/s: liters to m³ (1e-3) and minutes to seconds (60).
    let mdot = q_slpm * rho_std / 60_000.0;
    let mdot_unit_area = exit_mass_flow(p0, 1.0, ctx)?;
    Ok(mdot / mdot_unit_area)
}

/// One simulated run: the noisy measurement stream, the noise-free truth,
/// and the true-area schedule for scoring.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulatedRun {
    pub noisy: Vec<MeasurementSample>,
    pub truth: Vec<MeasurementSample>,
    pub schedule: LeakScenario,
}

/// Integrates the blowdown under a piecewise-constant leak schedule and
/// samples it at the sensor rate with seeded Gaussian noise.
///
/// The integrator step `dt` must not exceed the sampling period; with
/// `dt = 1/sample_rate` every integrator step is a sample and a zero-noise
/// run reproduces `integrate_trajectory` bit-exactly.
pub fn simulate(
    scenario: &LeakScenario,
    sensor: &SensorModel,
    ctx: &BlowdownContext,
    dt: f64,
) -> Result<SimulatedRun> {
    if !(dt > 0.0) {
        return Err(Error::domain(format!("dt must be > 0, got {dt}")));
    }
    let period = 1.0 / sensor.sample_rate;
    if dt > period * (1.0 + 1e-9) {
        return Err(Error::domain(format!(
            "dt = {dt} s exceeds the sampling period {period} s"
        )));
    }
    let stride = (period / dt).round().max(1.0) as usize;
    let n_steps = (scenario.duration / dt).round() as usize;

    let mut rng = ChaCha8Rng::seed_from_u64(sensor.seed);
    let normal = Normal::new(0.0, sensor.noise_sigma.max(f64::MIN_POSITIVE))
        .map_err(|e| Error::domain(format!("noise model: {e}")))?;
    let draw = |rng: &mut ChaCha8Rng| {
        if sensor.noise_sigma > 0.0 {
            normal.sample(rng)
        } else {
            0.0
        }
    };

    let mut truth = Vec::with_capacity(n_steps / stride + 1);
    let mut noisy = Vec::with_capacity(n_steps / stride + 1);
    let mut p = ctx.initial.p01;
    truth.push(MeasurementSample { time: 0.0, pressure: p });
    noisy.push(MeasurementSample { time: 0.0, pressure: p + draw(&mut rng) });
    let mut current_area = f64::NAN;
    let mut coeffs = stage_coefficients(0.0, ctx)?;
    for i in 1..=n_steps {
        // Re-read the schedule each step so step changes land exactly on
        // their scheduled times.
        let t_start = (i - 1) as f64 * dt;
        let area = scenario.area_at(t_start);
        if area != current_area {
            coeffs = stage_coefficients(area, ctx)?;
            current_area = area;
        }
        p = rk4_step_with(p, dt, &coeffs, ctx);
        if i % stride == 0 {
            let t = i as f64 * dt;
            truth.push(MeasurementSample { time: t, pressure: p });
            noisy.push(MeasurementSample { time: t, pressure: p + draw(&mut rng) });
        }
    }
    Ok(SimulatedRun { noisy, truth, schedule: scenario.clone() })
}
