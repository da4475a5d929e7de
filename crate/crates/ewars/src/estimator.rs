//! Inverse leak estimation from a stream of pressure measurements.
//!
//! The estimator minimizes the squared mismatch between the blowdown model
//! and measured pressure over a grid of candidate leak areas. Per time step
//! the grid objective is smoothed with an exponentially weighted recursion
//! (`S_t = α·F_t + (1−α)·S_{t−1}`) and the minimum is located with an
//! adaptively refined search that shrinks the interval around the argmin
//! until the grid spacing drops below the convergence resolution ε.

use std::collections::VecDeque;
use std::time::{Duration, Instant};

use crate::gas_dynamics::{
    rk4_step_with, stage_coefficients, BlowdownContext, StageCoefficients,
};
use crate::{Error, Result};

/// Search interval for the leak area, in m².
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchBounds {
    pub a_lb: f64,
    pub a_ub: f64,
}

impl SearchBounds {
    pub fn new(a_lb: f64, a_ub: f64) -> Result<Self> {
        if !(a_lb > 0.0 && a_lb < a_ub) {
            return Err(Error::domain(format!(
                "search bounds require 0 < a_lb < a_ub, got [{a_lb}, {a_ub}]"
            )));
        }
        Ok(SearchBounds { a_lb, a_ub })
    }

    pub fn width(&self) -> f64 {
        self.a_ub - self.a_lb
    }
}

impl Default for SearchBounds {
    /// [1e-3, 1] mm² expressed in m².
    fn default() -> Self {
        SearchBounds { a_lb: 1e-9, a_ub: 1e-6 }
    }
}

/// Where the model trajectory behind each objective evaluation is anchored.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AnchorMode {
    /// Integrate from the previous measurement (one-interval-ahead
    /// prediction). Keeps the exponentially weighted sum well-defined under
    /// time-varying leaks.
    PreviousMeasurement,
    /// Integrate from the initial condition `(0, p01)`.
    InitialCondition,
}

/// How the smoothed objective is obtained at refinement candidates that are
/// not on the persistent base grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RefineStrategy {
    /// Exact weighted re-summation of past objective terms over the retained
    /// history window.
    Replay,
    /// Piecewise-linear interpolation of the base-grid values.
    Interpolate,
}

/// Estimator tuning.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EwarsConfig {
    /// Smoothing factor, 0 ≤ α ≤ 1. α = 1 disables smoothing entirely.
    pub alpha: f64,
    /// Convergence resolution of the refined search, in m².
    pub epsilon: f64,
    /// Grid points per refinement level (the grid has `n_grid + 1` nodes).
    pub n_grid: usize,
    pub bounds: SearchBounds,
    /// Estimator period in seconds; the raw stream is decimated to one
    /// update per interval.
    pub update_interval: f64,
    pub anchor_mode: AnchorMode,
    pub refine_strategy: RefineStrategy,
    /// Replay truncation threshold: history terms with weight
    /// `α(1−α)^k` below this are dropped.
    pub weight_floor: f64,
    /// Internal integration step for model evaluations. `None` uses one RK4
    /// step per anchored span for previous-measurement anchoring (the
    /// pressure timescale is ~10³ s, so sub-stepping buys nothing) and 0.1 s
    /// sub-steps for initial-condition anchoring.
    pub model_dt: Option<f64>,
}

impl EwarsConfig {
    /// Constant-leak preset: N = 150, α = 0.125.
    pub fn constant_leak() -> Self {
        EwarsConfig {
            alpha: 0.125,
            epsilon: 5e-11, // 5e-5 mm²
            n_grid: 150,
            bounds: SearchBounds::default(),
            update_interval: 0.1,
            anchor_mode: AnchorMode::PreviousMeasurement,
            refine_strategy: RefineStrategy::Replay,
            weight_floor: 1e-9,
            model_dt: None,
        }
    }

    /// Variable-leak preset: N = 250, α = 0.01. The longer update interval
    /// trades stream decimation for per-update signal, which the small α
    /// needs to resolve step changes against sensor noise.
    pub fn variable_leak() -> Self {
        EwarsConfig {
            alpha: 0.01,
            n_grid: 250,
            update_interval: 0.5,
            ..EwarsConfig::constant_leak()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::domain(format!("alpha must be in [0, 1], got {}", self.alpha)));
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::domain(format!("epsilon must be > 0, got {}", self.epsilon)));
        }
        if self.n_grid < 3 {
            return Err(Error::domain(format!("n_grid must be >= 3, got {}", self.n_grid)));
        }
        if !(self.weight_floor > 0.0 && self.weight_floor < 1.0) {
            return Err(Error::domain(format!(
                "weight_floor must be in (0, 1), got {}",
                self.weight_floor
            )));
        }
        if !(self.update_interval > 0.0) {
            return Err(Error::domain(format!(
                "update_interval must be > 0, got {}",
                self.update_interval
            )));
        }
        SearchBounds::new(self.bounds.a_lb, self.bounds.a_ub)?;
        Ok(())
    }
}

impl Default for EwarsConfig {
    fn default() -> Self {
        EwarsConfig::constant_leak()
    }
}

/// One timestamped pressure measurement.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeasurementSample {
    pub time: f64,
    pub pressure: f64,
}

/// Exponentially weighted objective maintained on the persistent base grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SmoothedObjective {
    /// Candidate leak areas, strictly increasing, spanning the full bounds.
    pub grid: Vec<f64>,
    /// Smoothed objective per candidate, Pa².
    pub s_values: Vec<f64>,
    pub last_update_time: f64,
}

/// One output of the estimator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimateRecord {
    pub time: f64,
    /// Leak-area estimate in m².
    pub area_estimate: f64,
    pub smoothed_objective_at_min: f64,
    /// Candidate objective evaluations spent this step (all levels).
    pub evaluations: usize,
    pub refinement_levels: usize,
}

fn integrate_anchored(
    anchor_time: f64,
    anchor_pressure: f64,
    now_time: f64,
    coeffs: &StageCoefficients,
    config: &EwarsConfig,
    ctx: &BlowdownContext,
) -> f64 {
    let span = now_time - anchor_time;
    if span <= 0.0 {
        return anchor_pressure;
    }
    let sub = match config.model_dt {
        Some(dt) => dt,
        None => match config.anchor_mode {
            AnchorMode::PreviousMeasurement => span,
            AnchorMode::InitialCondition => 0.1,
        },
    };
    let n = (span / sub).ceil().max(1.0) as usize;
    let dt = span / n as f64;
    let mut p = anchor_pressure;
    for _ in 0..n {
        p = rk4_step_with(p, dt, coeffs, ctx);
    }
    p
}

/// Model pressure at `now_time` for a candidate leak area, anchored per the
/// configured mode.
pub fn model_pressure(
    a_e: f64,
    prev: &MeasurementSample,
    now_time: f64,
    config: &EwarsConfig,
    ctx: &BlowdownContext,
) -> Result<f64> {
    let coeffs = stage_coefficients(a_e, ctx)?;
    Ok(model_pressure_with(&coeffs, prev, now_time, config, ctx))
}

fn model_pressure_with(
    coeffs: &StageCoefficients,
    prev: &MeasurementSample,
    now_time: f64,
    config: &EwarsConfig,
    ctx: &BlowdownContext,
) -> f64 {
    match config.anchor_mode {
        AnchorMode::PreviousMeasurement => {
            let mut p = prev.pressure;
            if p < ctx.ambient.p_atm {
                log::warn!(
                    "anchor pressure {p} Pa below ambient {} Pa; clamping",
                    ctx.ambient.p_atm
                );
                p = ctx.ambient.p_atm;
            }
            integrate_anchored(prev.time, p, now_time, coeffs, config, ctx)
        }
        AnchorMode::InitialCondition => {
            integrate_anchored(0.0, ctx.initial.p01, now_time, coeffs, config, ctx)
        }
    }
}

/// Squared pressure residual `[P_model − P_measured]²` in Pa².
pub fn objective(
    a_e: f64,
    prev: &MeasurementSample,
    current: &MeasurementSample,
    config: &EwarsConfig,
    ctx: &BlowdownContext,
) -> Result<f64> {
    let model = model_pressure(a_e, prev, current.time, config, ctx)?;
    let r = model - current.pressure;
    Ok(r * r)
}

fn objective_with(
    coeffs: &StageCoefficients,
    prev: &MeasurementSample,
    current: &MeasurementSample,
    config: &EwarsConfig,
    ctx: &BlowdownContext,
) -> f64 {
    let model = model_pressure_with(coeffs, prev, current.time, config, ctx);
    let r = model - current.pressure;
    r * r
}

/// One step of the exponential-weighting recursion.
pub fn ew_update(s_prev: f64, f_t: f64, alpha: f64) -> f64 {
    alpha * f_t + (1.0 - alpha) * s_prev
}

fn grid_point(lb: f64, ub: f64, i: usize, n: usize) -> f64 {
    lb + (ub - lb) * (i as f64 / n as f64)
}

/// Index of the smallest value; ties broken toward the lowest index
/// (smallest area).
fn argmin(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v < values[best] {
            best = i;
        }
    }
    best
}

/// Full brute-force search: evaluates the objective on a uniform
/// `(n0 + 1)`-point inclusive grid and returns the argmin plus the
/// evaluation count.
pub fn full_bfs<F: FnMut(f64) -> f64>(
    mut objective_fn: F,
    bounds: &SearchBounds,
    n0: usize,
) -> (f64, usize) {
    assert!(n0 >= 2, "full_bfs needs at least a 3-point grid");
    let values: Vec<f64> =
        (0..=n0).map(|i| objective_fn(grid_point(bounds.a_lb, bounds.a_ub, i, n0))).collect();
    let i = argmin(&values);
    (grid_point(bounds.a_lb, bounds.a_ub, i, n0), n0 + 1)
}

/// Adaptively refined search: iterated coarse-grid argmin with interval
/// shrinking `[A*−Δ, A*+Δ]` (clipped to the original bounds) until the grid
/// spacing Δ falls to ε. Requires a unimodal objective for the convergence
/// guarantee.
pub fn ars<F: FnMut(f64) -> f64>(
    mut objective_fn: F,
    bounds: &SearchBounds,
    n_grid: usize,
    epsilon: f64,
) -> Result<(f64, usize, usize)> {
    let (orig_lb, orig_ub) = (bounds.a_lb, bounds.a_ub);
    let (mut lb, mut ub) = (orig_lb, orig_ub);
    let mut evaluations = 0;
    let mut levels = 0;
    loop {
        let delta = (ub - lb) / n_grid as f64;
        let mut values = Vec::with_capacity(n_grid + 1);
        for i in 0..=n_grid {
            let a = grid_point(lb, ub, i, n_grid);
            let v = objective_fn(a);
            if !v.is_finite() {
                return Err(Error::NonFiniteObjective { area: a });
            }
            values.push(v);
        }
        evaluations += n_grid + 1;
        levels += 1;
        let a_star = grid_point(lb, ub, argmin(&values), n_grid);
        if delta <= epsilon {
            return Ok((a_star, evaluations, levels));
        }
        lb = (a_star - delta).max(orig_lb);
        ub = (a_star + delta).min(orig_ub);
    }
}

/// Number of retained history steps for replay, from the weight truncation
/// threshold.
fn replay_depth(alpha: f64, weight_floor: f64) -> usize {
    const DEPTH_CAP: usize = 1_000_000;
    if alpha >= 1.0 {
        return 1;
    }
    if alpha <= 0.0 {
        return DEPTH_CAP;
    }
    let k = ((weight_floor / alpha).ln() / (1.0 - alpha).ln()).ceil();
    (k.max(1.0) as usize).min(DEPTH_CAP)
}

/// One (previous, current) measurement pair consumed by an estimator step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepPair {
    pub prev: MeasurementSample,
    pub current: MeasurementSample,
}

/// Mutable estimator state: the smoothed base-grid objective plus the
/// retained measurement history for replay refinement.
#[derive(Debug, Clone)]
pub struct EwarsState {
    pub smoothed: SmoothedObjective,
    history: VecDeque<StepPair>,
    /// Total steps consumed since construction (history may be shorter).
    steps: usize,
    initialized: bool,
}

impl EwarsState {
    pub fn new(config: &EwarsConfig) -> Result<Self> {
        config.validate()?;
        let b = config.bounds;
        let grid: Vec<f64> =
            (0..=config.n_grid).map(|i| grid_point(b.a_lb, b.a_ub, i, config.n_grid)).collect();
        let s_values = vec![0.0; grid.len()];
        Ok(EwarsState {
            smoothed: SmoothedObjective { grid, s_values, last_update_time: f64::NEG_INFINITY },
            history: VecDeque::new(),
            steps: 0,
            initialized: false,
        })
    }

    /// Smoothed objective at an arbitrary candidate, replayed exactly from
    /// the retained history.
    fn replay(&self, a: f64, config: &EwarsConfig, ctx: &BlowdownContext) -> Result<f64> {
        let coeffs = stage_coefficients(a, ctx)?;
        let m = self.history.len();
        let complete = self.steps == m;
        let alpha = config.alpha;
        let mut s = 0.0;
        // history is ordered oldest..newest; k counts back from the newest.
        for (k, pair) in self.history.iter().rev().enumerate() {
            let w = if k == m - 1 && complete {
                // Oldest term carries the initialization weight (S_0 = F_0).
                (1.0 - alpha).powi(k as i32)
            } else {
                alpha * (1.0 - alpha).powi(k as i32)
            };
            if w < config.weight_floor && !(k == m - 1 && complete) {
                break;
            }
            s += w * objective_with(&coeffs, &pair.prev, &pair.current, config, ctx);
        }
        Ok(s)
    }

    fn interpolate(&self, a: f64) -> f64 {
        let grid = &self.smoothed.grid;
        let s = &self.smoothed.s_values;
        if a <= grid[0] {
            return s[0];
        }
        if a >= *grid.last().unwrap() {
            return *s.last().unwrap();
        }
        let span = grid.last().unwrap() - grid[0];
        let n = grid.len() - 1;
        let x = (a - grid[0]) / span * n as f64;
        let i = (x.floor() as usize).min(n - 1);
        let frac = x - i as f64;
        s[i] + frac * (s[i + 1] - s[i])
    }
}

/// One estimator update: refresh the smoothed base grid with the new
/// objective, then refine around its argmin down to resolution ε.
pub fn ewars_step(
    state: &mut EwarsState,
    pair: &StepPair,
    config: &EwarsConfig,
    ctx: &BlowdownContext,
) -> Result<EstimateRecord> {
    if pair.current.time <= state.smoothed.last_update_time {
        return Err(Error::OutOfOrderSample {
            time: pair.current.time,
            last: state.smoothed.last_update_time,
        });
    }
    let n_grid = config.n_grid;
    // (1) new objective on the persistent base grid, EW applied elementwise.
    let mut f_t = Vec::with_capacity(n_grid + 1);
    for &a in &state.smoothed.grid {
        let coeffs = stage_coefficients(a, ctx)?;
        let v = objective_with(&coeffs, &pair.prev, &pair.current, config, ctx);
        if !v.is_finite() {
            return Err(Error::NonFiniteObjective { area: a });
        }
        f_t.push(v);
    }
    if state.initialized {
        for (s, f) in state.smoothed.s_values.iter_mut().zip(&f_t) {
            *s = ew_update(*s, *f, config.alpha);
        }
    } else {
        state.smoothed.s_values.copy_from_slice(&f_t);
        state.initialized = true;
    }
    state.steps += 1;
    state.history.push_back(*pair);
    let depth = replay_depth(config.alpha, config.weight_floor);
    while state.history.len() > depth {
        state.history.pop_front();
    }

    // (2) refinement around the base-grid argmin. The base grid counts as
    // the first level; each further level re-grids [A*−Δ, A*+Δ] clipped to
    // the original bounds.
    let mut evaluations = n_grid + 1;
    let mut levels = 1;
    let i0 = argmin(&state.smoothed.s_values);
    let mut a_star = state.smoothed.grid[i0];
    let mut s_min = state.smoothed.s_values[i0];
    let (orig_lb, orig_ub) = (config.bounds.a_lb, config.bounds.a_ub);
    let mut delta = config.bounds.width() / n_grid as f64;
    while delta > config.epsilon {
        let lb = (a_star - delta).max(orig_lb);
        let ub = (a_star + delta).min(orig_ub);
        delta = (ub - lb) / n_grid as f64;
        let mut values = Vec::with_capacity(n_grid + 1);
        for i in 0..=n_grid {
            let a = grid_point(lb, ub, i, n_grid);
            let v = match config.refine_strategy {
                RefineStrategy::Replay => state.replay(a, config, ctx)?,
                RefineStrategy::Interpolate => state.interpolate(a),
            };
            if !v.is_finite() {
                return Err(Error::NonFiniteObjective { area: a });
            }
            values.push(v);
        }
        evaluations += n_grid + 1;
        levels += 1;
        let i = argmin(&values);
        a_star = grid_point(lb, ub, i, n_grid);
        s_min = values[i];
    }
    state.smoothed.last_update_time = pair.current.time;

    Ok(EstimateRecord {
        time: pair.current.time,
        area_estimate: a_star,
        smoothed_objective_at_min: s_min,
        evaluations,
        refinement_levels: levels,
    })
}

/// Decimates a raw time-ordered sample stream to one `(prev, current)` pair
/// per update interval, pairing each update with the nearest sample at or
/// before the update time.
#[derive(Debug, Clone)]
pub struct Decimator {
    interval: f64,
    t0: Option<f64>,
    anchor: Option<MeasurementSample>,
    pending: Option<MeasurementSample>,
    next_index: u64,
    last_seen: Option<f64>,
}

impl Decimator {
    pub fn new(interval: f64) -> Self {
        Decimator {
            interval,
            t0: None,
            anchor: None,
            pending: None,
            next_index: 1,
            last_seen: None,
        }
    }

    pub fn push(&mut self, s: MeasurementSample) -> Vec<StepPair> {
        if let Some(last) = self.last_seen {
            if s.time <= last {
                log::warn!("dropping out-of-order sample at t = {} s (last {} s)", s.time, last);
                return Vec::new();
            }
        }
        self.last_seen = Some(s.time);
        let Some(t0) = self.t0 else {
            self.t0 = Some(s.time);
            self.anchor = Some(s);
            return Vec::new();
        };
        let tol = self.interval * 1e-6;
        let mut out = Vec::new();
        loop {
            let update_time = t0 + self.next_index as f64 * self.interval;
            if s.time < update_time - tol {
                self.pending = Some(s);
                break;
            }
            if s.time <= update_time + tol {
                // Sample lands on the update time.
                out.push(self.fire(s));
                self.pending = None;
                self.next_index += 1;
                break;
            }
            // The stream jumped past this update time; use the last sample
            // seen before it, if any arrived since the previous update.
            if let Some(p) = self.pending.take() {
                let anchor = self.anchor.expect("anchor set with t0");
                if p.time > anchor.time {
                    out.push(self.fire(p));
                }
            }
            self.next_index += 1;
        }
        out
    }

    fn fire(&mut self, current: MeasurementSample) -> StepPair {
        let prev = self.anchor.expect("anchor set with t0");
        if current.time - prev.time > 10.0 * self.interval {
            log::warn!(
                "measurement gap of {} s exceeds 10 update intervals; continuing",
                current.time - prev.time
            );
        }
        self.anchor = Some(current);
        StepPair { prev, current }
    }
}

/// Streaming estimator: decimation plus EWARS state behind a single
/// push-a-sample interface. Identical inputs produce identical records
/// whether samples arrive from a file or a live stream.
#[derive(Debug, Clone)]
pub struct EwarsRunner {
    config: EwarsConfig,
    ctx: BlowdownContext,
    decimator: Decimator,
    state: EwarsState,
}

impl EwarsRunner {
    pub fn new(config: EwarsConfig, ctx: BlowdownContext) -> Result<Self> {
        let state = EwarsState::new(&config)?;
        let decimator = Decimator::new(config.update_interval);
        Ok(EwarsRunner { config, ctx, decimator, state })
    }

    pub fn push(&mut self, sample: MeasurementSample) -> Result<Vec<EstimateRecord>> {
        let mut records = Vec::new();
        for pair in self.decimator.push(sample) {
            records.push(ewars_step(&mut self.state, &pair, &self.config, &self.ctx)?);
        }
        Ok(records)
    }

    pub fn state(&self) -> &EwarsState {
        &self.state
    }
}

/// Runs the full EWARS loop over a time-ordered measurement stream.
pub fn run_ewars(
    samples: impl IntoIterator<Item = MeasurementSample>,
    config: &EwarsConfig,
    ctx: &BlowdownContext,
) -> Result<Vec<EstimateRecord>> {
    let mut runner = EwarsRunner::new(*config, *ctx)?;
    let mut records = Vec::new();
    for s in samples {
        records.extend(runner.push(s)?);
    }
    Ok(records)
}

/// Side-by-side cost/quality comparison of per-step full brute-force search
/// and EWARS on the same stream.
#[derive(Debug, Clone)]
pub struct BenchReport {
    pub evals_fbfs: usize,
    pub evals_ewars: usize,
    pub wall_fbfs: Duration,
    pub wall_ewars: Duration,
    pub series_fbfs: Vec<EstimateRecord>,
    pub series_ewars: Vec<EstimateRecord>,
}

/// Runs per-step fBFS (no smoothing, full fine grid every update) and EWARS
/// on the same stream and reports evaluation counts, wall times, and both
/// estimate series.
pub fn bench_compare(
    samples: &[MeasurementSample],
    config: &EwarsConfig,
    ctx: &BlowdownContext,
    n0_fbfs: usize,
) -> Result<BenchReport> {
    let t = Instant::now();
    let series_ewars = run_ewars(samples.iter().copied(), config, ctx)?;
    let wall_ewars = t.elapsed();
    let evals_ewars = series_ewars.iter().map(|r| r.evaluations).sum();

    let t = Instant::now();
    let mut decimator = Decimator::new(config.update_interval);
    let mut series_fbfs = Vec::new();
    let mut evals_fbfs = 0;
    for &s in samples {
        for pair in decimator.push(s) {
            let mut failure = None;
            let (a_min, evals) = full_bfs(
                |a| match objective(a, &pair.prev, &pair.current, config, ctx) {
                    Ok(v) => v,
                    Err(e) => {
                        failure.get_or_insert(e);
                        f64::INFINITY
                    }
                },
                &config.bounds,
                n0_fbfs,
            );
            if let Some(e) = failure {
                return Err(e);
            }
            evals_fbfs += evals;
            let f_min = objective(a_min, &pair.prev, &pair.current, config, ctx)?;
            series_fbfs.push(EstimateRecord {
                time: pair.current.time,
                area_estimate: a_min,
                smoothed_objective_at_min: f_min,
                evaluations: evals,
                refinement_levels: 1,
            });
        }
    }
    let wall_fbfs = t.elapsed();

    Ok(BenchReport { evals_fbfs, evals_ewars, wall_fbfs, wall_ewars, series_fbfs, series_ewars })
}
