//! Mean-field dynamics in the thermodynamic limit: five coupled ODEs for the
//! normalized collective spin (jx, jy, jz) and the cavity quadratures (x, p),
//! integrated with fixed-step RK4 aligned to the drive switching times.

use std::io::Write;
use std::sync::Arc;

use crate::error::{Result, TqcError};
use crate::model::{DriveSchedule, ModelParams};

/// Phase-space point of the mean-field equations. The spin components are
/// normalized so that jx² + jy² + jz² = ¼.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanFieldState {
    pub jx: f64,
    pub jy: f64,
    pub jz: f64,
    pub x: f64,
    pub p: f64,
}

impl MeanFieldState {
    pub fn spin_norm_sq(&self) -> f64 {
        self.jx * self.jx + self.jy * self.jy + self.jz * self.jz
    }

    pub fn is_finite(&self) -> bool {
        self.jx.is_finite()
            && self.jy.is_finite()
            && self.jz.is_finite()
            && self.x.is_finite()
            && self.p.is_finite()
    }

    fn axpy(&self, scale: f64, d: &MeanFieldState) -> MeanFieldState {
        MeanFieldState {
            jx: self.jx + scale * d.jx,
            jy: self.jy + scale * d.jy,
            jz: self.jz + scale * d.jz,
            x: self.x + scale * d.x,
            p: self.p + scale * d.p,
        }
    }
}

/// Right-hand side of the mean-field equations at coupling λ_t:
///
/// djx/dt = −ω₀ jy
/// djy/dt = ω₀ jx − 2λ_t√(2ω) x jz
/// djz/dt = 2λ_t√(2ω) x jy
/// dx/dt  = p − (κ/2) x
/// dp/dt  = −ω² x − (κ/2) p − 2λ_t√(2ω) jx
pub fn mean_field_rhs(
    state: &MeanFieldState,
    lambda_t: f64,
    params: &ModelParams,
) -> MeanFieldState {
    let g = 2.0 * lambda_t * (2.0 * params.omega).sqrt();
    MeanFieldState {
        jx: -params.omega0 * state.jy,
        jy: params.omega0 * state.jx - g * state.x * state.jz,
        jz: g * state.x * state.jy,
        x: state.p - params.kappa / 2.0 * state.x,
        p: -params.omega * params.omega * state.x - params.kappa / 2.0 * state.p - g * state.jx,
    }
}

fn rk4_step_with_lambda(
    state: &MeanFieldState,
    dt: f64,
    lambda: f64,
    params: &ModelParams,
) -> MeanFieldState {
    let k1 = mean_field_rhs(state, lambda, params);
    let k2 = mean_field_rhs(&state.axpy(dt / 2.0, &k1), lambda, params);
    let k3 = mean_field_rhs(&state.axpy(dt / 2.0, &k2), lambda, params);
    let k4 = mean_field_rhs(&state.axpy(dt, &k3), lambda, params);
    MeanFieldState {
        jx: state.jx + dt / 6.0 * (k1.jx + 2.0 * k2.jx + 2.0 * k3.jx + k4.jx),
        jy: state.jy + dt / 6.0 * (k1.jy + 2.0 * k2.jy + 2.0 * k3.jy + k4.jy),
        jz: state.jz + dt / 6.0 * (k1.jz + 2.0 * k2.jz + 2.0 * k3.jz + k4.jz),
        x: state.x + dt / 6.0 * (k1.x + 2.0 * k2.x + 2.0 * k3.x + k4.x),
        p: state.p + dt / 6.0 * (k1.p + 2.0 * k2.p + 2.0 * k3.p + k4.p),
    }
}

fn check_commensurate(dt: f64, period: f64) -> Result<()> {
    if dt <= 0.0 {
        return Err(TqcError::Config("dt must be positive".into()));
    }
    let ratio = period / 2.0 / dt;
    if (ratio - ratio.round()).abs() > 1e-9 * ratio.max(1.0) {
        return Err(TqcError::Config(format!(
            "dt = {dt} does not divide the half-period {}; steps would straddle a drive switch",
            period / 2.0
        )));
    }
    Ok(())
}

/// Single RK4 step from time t. The coupling is sampled once at the step
/// midpoint; with dt dividing T/2 the midpoint lies strictly inside a
/// half-period, so all four stages see the same (constant) λ.
pub fn rk4_step(
    state: &MeanFieldState,
    t: f64,
    dt: f64,
    schedule: &DriveSchedule,
    params: &ModelParams,
) -> Result<MeanFieldState> {
    check_commensurate(dt, schedule.period())?;
    let lambda = schedule.amplitude(t + dt / 2.0);
    Ok(rk4_step_with_lambda(state, dt, lambda, params))
}

/// What a trajectory records.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RecordMode {
    /// Every integration step.
    Dense,
    /// Only the half-period boundaries (two samples per drive period).
    Stroboscopic,
}

/// Recorded integration output.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub sample_times: Vec<f64>,
    pub states: Vec<MeanFieldState>,
    /// Indices of samples lying exactly on half-period boundaries.
    pub stroboscopic_indices: Vec<usize>,
    pub schedule: Arc<DriveSchedule>,
    pub params: ModelParams,
}

impl Trajectory {
    /// jx at the stroboscopic samples, in recording order.
    pub fn stroboscopic_jx(&self) -> Vec<f64> {
        self.stroboscopic_indices
            .iter()
            .map(|&i| self.states[i].jx)
            .collect()
    }

    /// Times of the stroboscopic samples.
    pub fn stroboscopic_times(&self) -> Vec<f64> {
        self.stroboscopic_indices
            .iter()
            .map(|&i| self.sample_times[i])
            .collect()
    }

    /// Maximum deviation of the spin norm from ¼ over all samples.
    pub fn max_spin_norm_drift(&self) -> f64 {
        self.states
            .iter()
            .map(|s| (s.spin_norm_sq() - 0.25).abs())
            .fold(0.0, f64::max)
    }

    /// Writes the `t,jx,jy,jz,x,p,lambda_t,stroboscopic` CSV.
    pub fn write_csv<W: Write>(&self, mut w: W, time_in_periods: bool) -> Result<()> {
        writeln!(w, "t,jx,jy,jz,x,p,lambda_t,stroboscopic")?;
        let period = self.schedule.period();
        let mut strobo = vec![false; self.sample_times.len()];
        for &i in &self.stroboscopic_indices {
            strobo[i] = true;
        }
        for (i, (t, s)) in self.sample_times.iter().zip(&self.states).enumerate() {
            let lambda = self.schedule.amplitude(*t);
            let t_out = if time_in_periods { t / period } else { *t };
            writeln!(
                w,
                "{},{},{},{},{},{},{},{}",
                t_out,
                s.jx,
                s.jy,
                s.jz,
                s.x,
                s.p,
                lambda,
                if strobo[i] { 1 } else { 0 }
            )?;
        }
        Ok(())
    }
}

/// Integrates the mean-field equations for n_periods drive periods.
///
/// dt_per_period must be a positive even integer so that steps align with
/// the half-period switching times. The default used throughout the crate
/// is 1000 steps per period.
pub fn integrate(
    initial: &MeanFieldState,
    schedule: &Arc<DriveSchedule>,
    params: &ModelParams,
    n_periods: u64,
    dt_per_period: u64,
    record_mode: RecordMode,
) -> Result<Trajectory> {
    params.validate()?;
    if n_periods == 0 {
        return Err(TqcError::Config("n_periods must be >= 1".into()));
    }
    if dt_per_period == 0 || !dt_per_period.is_multiple_of(2) {
        return Err(TqcError::Config(format!(
            "dt_per_period must be a positive even integer, got {dt_per_period}"
        )));
    }
    let period = schedule.period();
    let half = period / 2.0;
    let dt = period / dt_per_period as f64;
    let steps_per_half = dt_per_period / 2;
    let total_steps = n_periods * dt_per_period;
    schedule.precompute(n_periods + 1);

    let cap = match record_mode {
        RecordMode::Dense => total_steps as usize + 1,
        RecordMode::Stroboscopic => 2 * n_periods as usize + 1,
    };
    let mut sample_times = Vec::with_capacity(cap);
    let mut states = Vec::with_capacity(cap);
    let mut stroboscopic_indices = Vec::with_capacity(2 * n_periods as usize + 1);

    sample_times.push(0.0);
    states.push(*initial);
    stroboscopic_indices.push(0);

    let mut state = *initial;
    for k in 0..total_steps {
        let hp = k / steps_per_half;
        let lambda = schedule.amplitude_for_half_period(hp);
        state = rk4_step_with_lambda(&state, dt, lambda, params);
        // The exact flow conserves |j| = ½; project the O(dt⁵) per-step RK4
        // drift back onto the sphere so long runs hold the invariant.
        let norm_sq = state.spin_norm_sq();
        if norm_sq > 0.0 {
            let scale = (0.25 / norm_sq).sqrt();
            state.jx *= scale;
            state.jy *= scale;
            state.jz *= scale;
        }
        let step_done = k + 1;
        let on_half_boundary = step_done % steps_per_half == 0;
        if on_half_boundary && !state.is_finite() {
            return Err(TqcError::Integration {
                time: step_done as f64 * dt,
                msg: "state became non-finite".into(),
            });
        }
        match record_mode {
            RecordMode::Dense => {
                let t = if on_half_boundary {
                    (step_done / steps_per_half) as f64 * half
                } else {
                    step_done as f64 * dt
                };
                sample_times.push(t);
                states.push(state);
                if on_half_boundary {
                    stroboscopic_indices.push(states.len() - 1);
                }
            }
            RecordMode::Stroboscopic => {
                if on_half_boundary {
                    let m = step_done / steps_per_half;
                    sample_times.push(m as f64 * half);
                    states.push(state);
                    stroboscopic_indices.push(states.len() - 1);
                }
            }
        }
    }

    Ok(Trajectory {
        sample_times,
        states,
        stroboscopic_indices,
        schedule: Arc::clone(schedule),
        params: *params,
    })
}

/// Slightly displaced copy of a symmetric-sector initial state:
/// jx' = jx − 5×10⁻⁴, jy' = 0, jz' = −√(¼ − jx'²), cavity quadratures kept.
pub fn perturbed_initial_state(base: &MeanFieldState) -> Result<MeanFieldState> {
    if base.jy != 0.0 {
        return Err(TqcError::Domain(
            "perturbed_initial_state expects a base state with jy = 0".into(),
        ));
    }
    let jx = base.jx - 0.5e-3;
    if jx * jx > 0.25 {
        return Err(TqcError::Domain(format!(
            "perturbed jx = {jx} leaves the Bloch sphere"
        )));
    }
    Ok(MeanFieldState {
        jx,
        jy: 0.0,
        jz: -(0.25 - jx * jx).sqrt(),
        x: base.x,
        p: base.p,
    })
}
