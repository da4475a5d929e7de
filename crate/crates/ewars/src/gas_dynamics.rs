//! Spatially lumped isentropic blowdown of a pressurized chamber through an
//! orifice.
//!
//! The chamber pressure `p0(t)` obeys a first-order ODE with two regimes:
//! choked exit flow (Stage-I, sonic orifice) while the pressure ratio exceeds
//! the critical value, and unchoked flow (Stage-II, subsonic exit at ambient
//! back-pressure) below it. All quantities are strict SI: Pa, m², m³, K,
//! kg, s. Unit conversions (mm², atm) happen at external interfaces only.

use crate::{Error, Result};

/// Working gas: ratio of specific heats and specific gas constant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GasModel {
    /// Ratio of specific heats (> 1). 1.4 for air.
    pub gamma: f64,
    /// Specific gas constant in J/(kg·K).
    pub r_specific: f64,
}

impl GasModel {
    pub fn new(gamma: f64, r_specific: f64) -> Result<Self> {
        if !(gamma > 1.0) {
            return Err(Error::domain(format!("gamma must be > 1, got {gamma}")));
        }
        if !(r_specific > 0.0) {
            return Err(Error::domain(format!(
                "specific gas constant must be > 0, got {r_specific}"
            )));
        }
        Ok(GasModel { gamma, r_specific })
    }

    /// Dry air.
    pub fn air() -> Self {
        GasModel { gamma: 1.4, r_specific: 287.0 }
    }

    /// Critical (choking) chamber-to-ambient pressure ratio
    /// `((γ+1)/2)^(γ/(γ−1))`; 1.892929 for γ = 1.4.
    pub fn critical_pressure_ratio(&self) -> f64 {
        let g = self.gamma;
        ((g + 1.0) / 2.0).powf(g / (g - 1.0))
    }
}

impl Default for GasModel {
    fn default() -> Self {
        GasModel::air()
    }
}

/// Conditions outside the chamber.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AmbientConditions {
    /// Ambient pressure in Pa.
    pub p_atm: f64,
}

impl AmbientConditions {
    pub fn new(p_atm: f64) -> Result<Self> {
        if !(p_atm > 0.0) {
            return Err(Error::domain(format!("ambient pressure must be > 0, got {p_atm}")));
        }
        Ok(AmbientConditions { p_atm })
    }

    /// Standard sea-level pressure, 1 atm.
    pub fn sea_level() -> Self {
        AmbientConditions { p_atm: 101_325.0 }
    }
}

/// Chamber interior gas volume.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChamberGeometry {
    /// Interior volume in m³.
    pub volume: f64,
}

impl ChamberGeometry {
    pub fn new(volume: f64) -> Result<Self> {
        if !(volume > 0.0) {
            return Err(Error::domain(format!("chamber volume must be > 0, got {volume}")));
        }
        Ok(ChamberGeometry { volume })
    }
}

/// Thermodynamic state of the chamber at the start of a blowdown.
///
/// Density and sonic speed are derived from pressure and temperature at
/// construction and kept consistent by the ideal-gas and isentropic
/// relations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InitialState {
    /// Initial pressure in Pa.
    pub p01: f64,
    /// Initial temperature in K.
    pub t01: f64,
    /// Initial density in kg/m³ (`p01 / (R·T01)`).
    pub rho01: f64,
    /// Initial sonic speed in m/s (`sqrt(γ·R·T01)`).
    pub a01: f64,
}

impl InitialState {
    pub fn from_pressure_temperature(p01: f64, t01: f64, gas: &GasModel) -> Result<Self> {
        let rho01 = density_from_ideal_gas(p01, t01, gas)?;
        let a01 = (gas.gamma * gas.r_specific * t01).sqrt();
        Ok(InitialState { p01, t01, rho01, a01 })
    }
}

/// Choked/unchoked regime tag for a chamber pressure.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FlowStage {
    /// Stage-I: sonic exit, mass flow independent of ambient pressure.
    Choked,
    /// Stage-II: subsonic exit at ambient back-pressure.
    Unchoked,
    /// Chamber pressure at or below ambient; no flow.
    Equalized,
}

/// The two regime constants of the governing pressure ODE for a candidate
/// leak area. Both are ≤ 0 and scale linearly with the area.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StageCoefficients {
    /// Stage-I coefficient; `dp0/dt = c_one · p0^((3γ−1)/(2γ))` in Pa/s.
    pub c_one: f64,
    /// Stage-II coefficient in 1/s, acting on the normalized pressure
    /// `p̄0 = p0 / p_atm`.
    pub c_two: f64,
}

/// Everything the blowdown operations need: gas, ambient, geometry, and the
/// initial state. Immutable after construction; cheap to copy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlowdownContext {
    pub gas: GasModel,
    pub ambient: AmbientConditions,
    pub geometry: ChamberGeometry,
    pub initial: InitialState,
}

impl BlowdownContext {
    pub fn new(
        gas: GasModel,
        ambient: AmbientConditions,
        geometry: ChamberGeometry,
        initial: InitialState,
    ) -> Result<Self> {
        if !(initial.p01 > ambient.p_atm) {
            return Err(Error::domain(format!(
                "initial pressure {} Pa must exceed ambient {} Pa",
                initial.p01, ambient.p_atm
            )));
        }
        Ok(BlowdownContext { gas, ambient, geometry, initial })
    }

    /// Desk-scale reference rig: air, 1 atm ambient, 0.128 m³ chamber
    /// pressurized to 2 atm at 300 K.
    pub fn reference_rig() -> Self {
        let gas = GasModel::air();
        let ambient = AmbientConditions::sea_level();
        let geometry = ChamberGeometry { volume: 0.128 };
        let initial =
            InitialState::from_pressure_temperature(2.0 * 101_325.0, 300.0, &gas).unwrap();
        BlowdownContext { gas, ambient, geometry, initial }
    }

    /// Chamber pressure at the Stage-I/Stage-II boundary, in Pa.
    pub fn choking_pressure(&self) -> f64 {
        self.gas.critical_pressure_ratio() * self.ambient.p_atm
    }
}

impl Default for BlowdownContext {
    fn default() -> Self {
        BlowdownContext::reference_rig()
    }
}

/// A solved pressure history: ordered `(time s, pressure Pa)` samples for a
/// fixed leak area.
#[derive(Debug, Clone, PartialEq)]
pub struct PressureTrajectory {
    pub samples: Vec<(f64, f64)>,
    /// Leak area in m² the trajectory was integrated with.
    pub leak_area: f64,
}

/// Ideal-gas density `p / (R·T)`.
pub fn density_from_ideal_gas(p: f64, t: f64, gas: &GasModel) -> Result<f64> {
    if !(p > 0.0) {
        return Err(Error::domain(format!("pressure must be > 0, got {p}")));
    }
    if !(t > 0.0) {
        return Err(Error::domain(format!("temperature must be > 0, got {t}")));
    }
    Ok(p / (gas.r_specific * t))
}

/// Classifies the flow regime for a chamber pressure.
pub fn stage_of(p0: f64, ambient: &AmbientConditions, gas: &GasModel) -> FlowStage {
    if p0 <= ambient.p_atm {
        FlowStage::Equalized
    } else if p0 >= gas.critical_pressure_ratio() * ambient.p_atm {
        FlowStage::Choked
    } else {
        FlowStage::Unchoked
    }
}

/// Computes the two ODE coefficients for a leak area.
pub fn stage_coefficients(a_e: f64, ctx: &BlowdownContext) -> Result<StageCoefficients> {
    if !(a_e >= 0.0) {
        return Err(Error::domain(format!("leak area must be >= 0, got {a_e}")));
    }
    let g = ctx.gas.gamma;
    let init = &ctx.initial;
    let scale = -g * a_e / ctx.geometry.volume;
    let c_one = scale
        * (2.0 / (g + 1.0)).powf(1.0 / (g - 1.0))
        * (2.0 * g * init.p01.powf(1.0 / g) / ((g + 1.0) * init.rho01)).sqrt();
    let c_two = scale
        * (2.0 / (g - 1.0)).sqrt()
        * init.a01
        * (ctx.ambient.p_atm / init.p01).powf((g - 1.0) / (2.0 * g));
    Ok(StageCoefficients { c_one, c_two })
}

// Relative slack accepted above p01 before a pressure is rejected.
const PRESSURE_TOL: f64 = 1e-9;

fn check_pressure_range(p0: f64, ctx: &BlowdownContext) -> Result<()> {
    if p0 < ctx.ambient.p_atm * (1.0 - PRESSURE_TOL) || p0 > ctx.initial.p01 * (1.0 + PRESSURE_TOL)
    {
        return Err(Error::domain(format!(
            "pressure {p0} Pa outside [{}, {}] Pa",
            ctx.ambient.p_atm, ctx.initial.p01
        )));
    }
    Ok(())
}

/// Exit mass flow in kg/s through an orifice of area `a_e` at chamber
/// pressure `p0`. Selects the choked or unchoked branch from the regime.
pub fn exit_mass_flow(p0: f64, a_e: f64, ctx: &BlowdownContext) -> Result<f64> {
    if !(a_e >= 0.0) {
        return Err(Error::domain(format!("leak area must be >= 0, got {a_e}")));
    }
    check_pressure_range(p0, ctx)?;
    let g = ctx.gas.gamma;
    let init = &ctx.initial;
    let p_atm = ctx.ambient.p_atm;
    let mdot = match stage_of(p0, &ctx.ambient, &ctx.gas) {
        FlowStage::Equalized => 0.0,
        FlowStage::Choked => {
            init.rho01 / init.p01.powf(1.0 / g)
                * (2.0 / (g + 1.0)).powf(1.0 / (g - 1.0))
                * a_e
                * (2.0 * g * init.p01.powf(1.0 / g) / ((g + 1.0) * init.rho01)).sqrt()
                * p0.powf((g + 1.0) / (2.0 * g))
        }
        FlowStage::Unchoked => {
            // Radicand can dip below zero from rounding right at equalization.
            let radicand = (2.0 * g / (g - 1.0)) * p0
                / (init.rho01 * (p0 / init.p01).powf(1.0 / g))
                * (1.0 - (p_atm / p0).powf((g - 1.0) / g));
            init.rho01 * (p_atm / init.p01).powf(1.0 / g) * a_e * radicand.max(0.0).sqrt()
        }
    };
    Ok(mdot)
}

/// Pressure rate `dp0/dt` in Pa/s for a given regime.
///
/// The Stage-II branch of the governing equation is stated for the
/// normalized pressure `p̄0 = p0/p_atm`; the `p_atm` factor here converts it
/// back to Pa/s so both branches share one signature.
pub fn dp0_dt(
    p0: f64,
    coeffs: &StageCoefficients,
    stage: FlowStage,
    ambient: &AmbientConditions,
    gas: &GasModel,
) -> f64 {
    let g = gas.gamma;
    match stage {
        FlowStage::Equalized => 0.0,
        FlowStage::Choked => coeffs.c_one * p0.powf((3.0 * g - 1.0) / (2.0 * g)),
        FlowStage::Unchoked => {
            let pbar = p0 / ambient.p_atm;
            let x = pbar.powf((g - 1.0) / g);
            ambient.p_atm * coeffs.c_two * x * (x - 1.0).max(0.0).sqrt()
        }
    }
}

/// One classical RK4 update of the chamber pressure over `dt` with
/// precomputed coefficients.
///
/// The regime is selected from the step's start pressure and held for all
/// four slope evaluations; the result is clamped to ambient pressure.
pub fn rk4_step_with(p0: f64, dt: f64, coeffs: &StageCoefficients, ctx: &BlowdownContext) -> f64 {
    let stage = stage_of(p0, &ctx.ambient, &ctx.gas);
    let f = |p: f64| dp0_dt(p, coeffs, stage, &ctx.ambient, &ctx.gas);
    let k1 = f(p0);
    let k2 = f(p0 + 0.5 * dt * k1);
    let k3 = f(p0 + 0.5 * dt * k2);
    let k4 = f(p0 + dt * k3);
    let p1 = p0 + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    p1.max(ctx.ambient.p_atm)
}

/// One RK4 update of the chamber pressure over `dt` for a leak area `a_e`.
pub fn rk4_step(p0: f64, dt: f64, a_e: f64, ctx: &BlowdownContext) -> Result<f64> {
    if !(dt > 0.0) {
        return Err(Error::domain(format!("dt must be > 0, got {dt}")));
    }
    check_pressure_range(p0, ctx)?;
    let coeffs = stage_coefficients(a_e, ctx)?;
    Ok(rk4_step_with(p0, dt, &coeffs, ctx))
}

/// Integrates the blowdown from the initial state for `t_end` seconds with a
/// constant leak area, sampling every `dt`.
pub fn integrate_trajectory(
    a_e: f64,
    t_end: f64,
    dt: f64,
    ctx: &BlowdownContext,
) -> Result<PressureTrajectory> {
    if !(t_end > 0.0) {
        return Err(Error::domain(format!("t_end must be > 0, got {t_end}")));
    }
    if !(dt > 0.0) {
        return Err(Error::domain(format!("dt must be > 0, got {dt}")));
    }
    let coeffs = stage_coefficients(a_e, ctx)?;
    let n_steps = (t_end / dt).round().max(1.0) as usize;
    let mut samples = Vec::with_capacity(n_steps + 1);
    let mut p = ctx.initial.p01;
    samples.push((0.0, p));
    for i in 1..=n_steps {
        p = rk4_step_with(p, dt, &coeffs, ctx);
        samples.push((i as f64 * dt, p));
    }
    Ok(PressureTrajectory { samples, leak_area: a_e })
}

/// Closed-form Stage-I pressure for γ = 1.4: separating variables in
/// `dp/dt = C_I·p^(8/7)` gives `p(t) = (p01^(−1/7) − (C_I/7)·t)^(−7)`.
///
/// Only valid while the chamber stays choked; evaluation past that window is
/// rejected.
pub fn analytic_stage1(t: f64, ctx: &BlowdownContext, c_one: f64) -> Result<f64> {
    if (ctx.gas.gamma - 1.4).abs() > 1e-12 {
        return Err(Error::domain(format!(
            "closed-form Stage-I solution requires gamma = 1.4, got {}",
            ctx.gas.gamma
        )));
    }
    if !(t >= 0.0) {
        return Err(Error::domain(format!("time must be >= 0, got {t}")));
    }
    let p01 = ctx.initial.p01;
    let p = (p01.powf(-1.0 / 7.0) - c_one / 7.0 * t).powi(-7);
    let p_star = ctx.choking_pressure();
    if p < p_star * (1.0 - PRESSURE_TOL) {
        return Err(Error::domain(format!(
            "t = {t} s is past the choked-flow window (p = {p} Pa < p* = {p_star} Pa)"
        )));
    }
    Ok(p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn rig() -> BlowdownContext {
        BlowdownContext::reference_rig()
    }

    /// Independent oracle: standard choked-nozzle mass flow
    /// `ṁ = A·p0·sqrt(γ/(R·T0))·(2/(γ+1))^((γ+1)/(2(γ−1))))` evaluated at the
    /// initial state, where the isentropic stagnation temperature follows
    /// `T0 = T01·(p0/p01)^((γ−1)/γ)`.
    fn choked_mdot_oracle(p0: f64, a_e: f64, ctx: &BlowdownContext) -> f64 {
        let g = ctx.gas.gamma;
        let t0 = ctx.initial.t01 * (p0 / ctx.initial.p01).powf((g - 1.0) / g);
        a_e * p0
            * (g / (ctx.gas.r_specific * t0)).sqrt()
            * (2.0 / (g + 1.0)).powf((g + 1.0) / (2.0 * (g - 1.0)))
    }

    #[test]
    fn ideal_gas_density() {
        let gas = GasModel::air();
        let rho = density_from_ideal_gas(202_650.0, 300.0, &gas).unwrap();
        assert_relative_eq!(rho, 2.35366, max_relative = 1e-5);
        let half = density_from_ideal_gas(101_325.0, 300.0, &gas).unwrap();
        assert_relative_eq!(half, rho / 2.0, max_relative = 1e-12);
        assert!(density_from_ideal_gas(0.0, 300.0, &gas).is_err());
        assert!(density_from_ideal_gas(1.0, -3.0, &gas).is_err());
    }

    #[test]
    fn initial_state_consistency() {
        let gas = GasModel::air();
        let init = InitialState::from_pressure_temperature(202_650.0, 300.0, &gas).unwrap();
        assert_relative_eq!(
            init.rho01,
            init.p01 / (gas.r_specific * init.t01),
            max_relative = 1e-12
        );
        assert_relative_eq!(
            init.a01,
            (gas.gamma * gas.r_specific * init.t01).sqrt(),
            max_relative = 1e-12
        );
    }

    #[test]
    fn critical_ratio_for_air() {
        assert_relative_eq!(GasModel::air().critical_pressure_ratio(), 1.892929, epsilon = 1e-4);
    }

    #[test]
    fn stage_classification() {
        let ctx = rig();
        assert_eq!(stage_of(202_650.0, &ctx.ambient, &ctx.gas), FlowStage::Choked);
        assert_eq!(stage_of(150_000.0, &ctx.ambient, &ctx.gas), FlowStage::Unchoked);
        assert_eq!(stage_of(101_325.0, &ctx.ambient, &ctx.gas), FlowStage::Equalized);
        // Boundary pressure is choked (the >= convention).
        let p_star = ctx.choking_pressure();
        assert_eq!(stage_of(p_star, &ctx.ambient, &ctx.gas), FlowStage::Choked);
    }

    #[test]
    fn coefficients_zero_area_and_linearity() {
        let ctx = rig();
        let zero = stage_coefficients(0.0, &ctx).unwrap();
        assert_eq!(zero.c_one, 0.0);
        assert_eq!(zero.c_two, 0.0);
        let one = stage_coefficients(2.8e-7, &ctx).unwrap();
        let two = stage_coefficients(5.6e-7, &ctx).unwrap();
        assert_relative_eq!(two.c_one, 2.0 * one.c_one, max_relative = 1e-14);
        assert_relative_eq!(two.c_two, 2.0 * one.c_two, max_relative = 1e-14);
        assert!(one.c_one <= 0.0 && one.c_two <= 0.0);
        assert!(stage_coefficients(-1e-9, &ctx).is_err());
    }

    #[test]
    fn initial_rate_against_mass_balance_oracle() {
        // dp/dt at p01 must equal -mdot/(V·drho0/dp0) with mdot from the
        // standard choked-nozzle formula.
        let ctx = rig();
        let a_e = 2.8e-7;
        let coeffs = stage_coefficients(a_e, &ctx).unwrap();
        let rate = coeffs.c_one * ctx.initial.p01.powf(8.0 / 7.0);
        let mdot = choked_mdot_oracle(ctx.initial.p01, a_e, &ctx);
        let drho_dp = ctx.initial.rho01 / (ctx.gas.gamma * ctx.initial.p01);
        let oracle = -mdot / (ctx.geometry.volume * drho_dp);
        assert_relative_eq!(rate, oracle, max_relative = 1e-10);
        assert_relative_eq!(rate, -124.7, max_relative = 1e-3);
    }

    #[test]
    fn exit_mass_flow_examples() {
        let ctx = rig();
        assert_eq!(exit_mass_flow(202_650.0, 0.0, &ctx).unwrap(), 0.0);
        let mdot = exit_mass_flow(202_650.0, 2.8e-7, &ctx).unwrap();
        assert_relative_eq!(mdot, 1.324e-4, max_relative = 1e-3);
        assert_relative_eq!(
            mdot,
            choked_mdot_oracle(202_650.0, 2.8e-7, &ctx),
            max_relative = 1e-10
        );
        // Equalized chamber: no flow.
        assert_eq!(exit_mass_flow(101_325.0, 2.8e-7, &ctx).unwrap(), 0.0);
        // Out of range pressures rejected.
        assert!(exit_mass_flow(90_000.0, 1e-7, &ctx).is_err());
        assert!(exit_mass_flow(250_000.0, 1e-7, &ctx).is_err());
    }

    #[test]
    fn rate_examples_and_branch_continuity() {
        let ctx = rig();
        let sealed = StageCoefficients { c_one: 0.0, c_two: 0.0 };
        assert_eq!(dp0_dt(202_650.0, &sealed, FlowStage::Choked, &ctx.ambient, &ctx.gas), 0.0);
        let coeffs = stage_coefficients(2.8e-7, &ctx).unwrap();
        let rate = dp0_dt(202_650.0, &coeffs, FlowStage::Choked, &ctx.ambient, &ctx.gas);
        assert_relative_eq!(rate, -124.7, max_relative = 1e-3);
        // Both branches describe a sonic exit at the threshold pressure.
        let p_star = ctx.choking_pressure();
        let r1 = dp0_dt(p_star, &coeffs, FlowStage::Choked, &ctx.ambient, &ctx.gas);
        let r2 = dp0_dt(p_star, &coeffs, FlowStage::Unchoked, &ctx.ambient, &ctx.gas);
        assert_relative_eq!(r1, r2, max_relative = 1e-6);
    }

    #[test]
    fn rk4_single_step() {
        let ctx = rig();
        let p01 = ctx.initial.p01;
        assert_eq!(rk4_step(p01, 1e-3, 0.0, &ctx).unwrap(), p01);
        let p1 = rk4_step(p01, 1e-3, 2.8e-7, &ctx).unwrap();
        assert!((p1 - (p01 - 0.1247)).abs() < 1e-4);
    }

    #[test]
    fn rk4_matches_analytic_stage1() {
        let ctx = rig();
        let a_e = 2.8e-7;
        let coeffs = stage_coefficients(a_e, &ctx).unwrap();
        let traj = integrate_trajectory(a_e, 60.0, 1e-3, &ctx).unwrap();
        let mut max_rel = 0.0f64;
        for &(t, p) in traj.samples.iter().step_by(100) {
            let exact = analytic_stage1(t, &ctx, coeffs.c_one).unwrap();
            max_rel = max_rel.max(((p - exact) / exact).abs());
        }
        assert!(max_rel < 1e-6, "max relative error {max_rel}");
    }

    #[test]
    fn trajectory_shape_and_transition() {
        let ctx = rig();
        let traj = integrate_trajectory(2.8e-7, 120.0, 1e-3, &ctx).unwrap();
        // Monotone, bounded.
        for w in traj.samples.windows(2) {
            assert!(w[1].1 <= w[0].1);
            assert!(w[1].1 >= ctx.ambient.p_atm && w[1].1 <= ctx.initial.p01);
        }
        // Stage-I -> Stage-II crossing near t = 90 s.
        let p_star = ctx.choking_pressure();
        let t_cross = traj
            .samples
            .iter()
            .find(|&&(_, p)| p < p_star)
            .map(|&(t, _)| t)
            .expect("trajectory never crossed the choking pressure");
        assert!((80.0..100.0).contains(&t_cross), "crossing at {t_cross} s");
        // Sealed chamber stays at p01.
        let sealed = integrate_trajectory(0.0, 1.0, 1e-3, &ctx).unwrap();
        assert!(sealed.samples.iter().all(|&(_, p)| p == ctx.initial.p01));
    }

    #[test]
    fn mass_budget_closes() {
        // V·(rho0(t_end) − rho01) = −∫ mdot dt, trapezoidal quadrature.
        let ctx = rig();
        let a_e = 2.8e-7;
        let dt = 1e-3;
        let traj = integrate_trajectory(a_e, 60.0, dt, &ctx).unwrap();
        let g = ctx.gas.gamma;
        let rho = |p: f64| ctx.initial.rho01 * (p / ctx.initial.p01).powf(1.0 / g);
        let mut integral = 0.0;
        for w in traj.samples.windows(2) {
            let m0 = exit_mass_flow(w[0].1, a_e, &ctx).unwrap();
            let m1 = exit_mass_flow(w[1].1, a_e, &ctx).unwrap();
            integral += 0.5 * (m0 + m1) * dt;
        }
        let p_end = traj.samples.last().unwrap().1;
        let lhs = ctx.geometry.volume * (rho(p_end) - ctx.initial.rho01);
        assert_relative_eq!(lhs, -integral, max_relative = 1e-6);
    }

    #[test]
    fn analytic_stage1_edges() {
        let ctx = rig();
        let coeffs = stage_coefficients(2.8e-7, &ctx).unwrap();
        assert_relative_eq!(
            analytic_stage1(0.0, &ctx, coeffs.c_one).unwrap(),
            ctx.initial.p01,
            max_relative = 1e-12
        );
        assert_relative_eq!(
            analytic_stage1(45.0, &ctx, 0.0).unwrap(),
            ctx.initial.p01,
            max_relative = 1e-12
        );
        // Past the choked window.
        assert!(analytic_stage1(500.0, &ctx, coeffs.c_one).is_err());
        // Finite-difference derivative check at t = 10 s.
        let h = 1e-3;
        let c = coeffs.c_one;
        let p = analytic_stage1(10.0, &ctx, c).unwrap();
        let dp = (analytic_stage1(10.0 + h, &ctx, c).unwrap()
            - analytic_stage1(10.0 - h, &ctx, c).unwrap())
            / (2.0 * h);
        assert_relative_eq!(dp, c * p.powf(8.0 / 7.0), max_relative = 1e-8);
    }

    #[test]
    fn flow_linear_in_area() {
        let ctx = rig();
        for &p0 in &[202_650.0, 195_000.0, 160_000.0, 120_000.0] {
            let m1 = exit_mass_flow(p0, 1e-7, &ctx).unwrap();
            let m3 = exit_mass_flow(p0, 3e-7, &ctx).unwrap();
            assert_relative_eq!(m3, 3.0 * m1, max_relative = 1e-12);
        }
    }
}
