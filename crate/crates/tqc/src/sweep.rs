//! Parameter scans: the detuning phase diagram and the lifetime-vs-N study.
//! Rows run on a bounded rayon pool, are merged in grid order, and failures
//! are recorded per row instead of aborting the sweep.

use std::io::Write;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::diagnostics::{
    decorrelator, find_subharmonic_peak, fit_lifetime, power_spectrum, quasicrystal_fraction,
    QC_WINDOW_DELTA,
};
use crate::error::{Result, TqcError};
use crate::meanfield::{integrate, perturbed_initial_state, RecordMode};
use crate::model::{superradiant_fixed_point, DriveSchedule, ModelParams};
use crate::quantum::{
    build_operators, check_truncation, default_n_max, evolve, initial_state_with_ops,
    EvolveOptions, DEFAULT_MAX_DIM,
};

/// Row outcome; failures carry the error text.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RowStatus {
    Ok,
    Failed(String),
}

impl RowStatus {
    pub fn is_ok(&self) -> bool {
        matches!(self, RowStatus::Ok)
    }

    fn label(&self) -> &str {
        match self {
            RowStatus::Ok => "ok",
            RowStatus::Failed(_) => "failed",
        }
    }
}

/// One row of the detuning sweep.
#[derive(Debug, Clone, Serialize)]
pub struct EpsilonRecord {
    pub epsilon: f64,
    pub f: Option<f64>,
    pub f_norm: Option<f64>,
    pub mean_d: Option<f64>,
    pub d_norm: Option<f64>,
    pub nu0_used: f64,
    pub status: RowStatus,
}

/// One row of the system-size sweep.
#[derive(Debug, Clone, Serialize)]
pub struct SizeRecord {
    pub n_qubits: usize,
    pub tau: Option<f64>,
    pub amplitude: Option<f64>,
    pub residual: Option<f64>,
    pub status: RowStatus,
}

/// Settings for [`sweep_epsilon`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EpsilonSweepConfig {
    /// Drive periods per trajectory.
    pub n_periods: u64,
    /// RK4 steps per period.
    pub dt_per_period: u64,
    /// Worker threads; 0 lets rayon pick.
    pub workers: usize,
    /// Reference subharmonic frequency; when absent the ε = 0 row defines it.
    pub nu0: Option<f64>,
    /// Half-width of the quasicrystal-fraction window.
    pub delta: f64,
}

impl Default for EpsilonSweepConfig {
    fn default() -> Self {
        EpsilonSweepConfig {
            n_periods: 5000,
            dt_per_period: 1000,
            workers: 0,
            nu0: None,
            delta: QC_WINDOW_DELTA,
        }
    }
}

/// Settings for [`sweep_system_size`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SizeSweepConfig {
    pub epsilon: f64,
    pub n_periods: u64,
    pub dt_per_period: u64,
    /// Fock cutoff; None picks the per-N default.
    pub n_max: Option<usize>,
    pub max_dim: usize,
    pub workers: usize,
    /// Truncation-tail pass threshold.
    pub tail_threshold: f64,
}

impl Default for SizeSweepConfig {
    fn default() -> Self {
        SizeSweepConfig {
            epsilon: 0.0,
            n_periods: 300,
            dt_per_period: 500,
            n_max: None,
            max_dim: DEFAULT_MAX_DIM,
            workers: 0,
            tail_threshold: 1e-6,
        }
    }
}

/// Output of a detuning sweep.
#[derive(Debug, Clone)]
pub struct EpsilonSweepResult {
    pub records: Vec<EpsilonRecord>,
    pub params: ModelParams,
    pub config: EpsilonSweepConfig,
    pub nu0: f64,
}

/// Output of a system-size sweep.
#[derive(Debug, Clone)]
pub struct SizeSweepResult {
    pub records: Vec<SizeRecord>,
    pub params: ModelParams,
    pub config: SizeSweepConfig,
}

fn pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| TqcError::Config(format!("worker pool: {e}")))
}

/// Base + perturbed mean-field run for one detuning, returning
/// (quasicrystal fraction, time-averaged decorrelator).
fn epsilon_row(
    epsilon: f64,
    params: &ModelParams,
    cfg: &EpsilonSweepConfig,
    nu0: f64,
) -> Result<(f64, f64)> {
    let schedule = Arc::new(DriveSchedule::new(params, epsilon)?);
    let base0 = superradiant_fixed_point(params)?;
    let pert0 = perturbed_initial_state(&base0)?;
    let base = integrate(
        &base0,
        &schedule,
        params,
        cfg.n_periods,
        cfg.dt_per_period,
        RecordMode::Stroboscopic,
    )?;
    let pert = integrate(
        &pert0,
        &schedule,
        params,
        cfg.n_periods,
        cfg.dt_per_period,
        RecordMode::Stroboscopic,
    )?;
    let spec = power_spectrum(&base.stroboscopic_jx(), 2.0)?;
    let f = quasicrystal_fraction(&spec, nu0, cfg.delta)?;
    let d = decorrelator(&base, &pert, 0.0, cfg.n_periods as f64 * schedule.period())?;
    Ok((f, d.mean_d))
}

/// Reference subharmonic frequency from an ε = 0 run at the sweep settings.
pub fn reference_nu0(params: &ModelParams, cfg: &EpsilonSweepConfig) -> Result<f64> {
    let schedule = Arc::new(DriveSchedule::new(params, 0.0)?);
    let base0 = superradiant_fixed_point(params)?;
    let traj = integrate(
        &base0,
        &schedule,
        params,
        cfg.n_periods,
        cfg.dt_per_period,
        RecordMode::Stroboscopic,
    )?;
    let spec = power_spectrum(&traj.stroboscopic_jx(), 2.0)?;
    find_subharmonic_peak(&spec)
}

/// Detuning sweep: every grid point gets a base + perturbed trajectory pair,
/// the quasicrystal fraction against the shared ν₀, and the decorrelator.
/// Columns are normalized by their maxima over successful rows.
pub fn sweep_epsilon(
    grid: &[f64],
    params: &ModelParams,
    cfg: &EpsilonSweepConfig,
) -> Result<EpsilonSweepResult> {
    if grid.is_empty() {
        return Err(TqcError::Config("epsilon grid must be nonempty".into()));
    }
    let nu0 = match cfg.nu0 {
        Some(v) => v,
        None => {
            if !grid.iter().any(|e| e.abs() < 1e-15) {
                return Err(TqcError::Config(
                    "grid must contain epsilon = 0 to define nu0, or supply nu0 explicitly".into(),
                ));
            }
            reference_nu0(params, cfg)?
        }
    };

    let pool = pool(cfg.workers)?;
    let rows: Vec<EpsilonRecord> = pool.install(|| {
        grid.par_iter()
            .map(|&epsilon| match epsilon_row(epsilon, params, cfg, nu0) {
                Ok((f, mean_d)) => EpsilonRecord {
                    epsilon,
                    f: Some(f),
                    f_norm: None,
                    mean_d: Some(mean_d),
                    d_norm: None,
                    nu0_used: nu0,
                    status: RowStatus::Ok,
                },
                Err(e) => EpsilonRecord {
                    epsilon,
                    f: None,
                    f_norm: None,
                    mean_d: None,
                    d_norm: None,
                    nu0_used: nu0,
                    status: RowStatus::Failed(e.to_string()),
                },
            })
            .collect()
    });

    let mut result = EpsilonSweepResult {
        records: rows,
        params: *params,
        config: cfg.clone(),
        nu0,
    };
    normalize_columns(&mut result)?;
    Ok(result)
}

/// Divides the f and ⟨d⟩ columns by their maxima over successful rows.
pub fn normalize_columns(result: &mut EpsilonSweepResult) -> Result<()> {
    let f_max = result
        .records
        .iter()
        .filter(|r| r.status.is_ok())
        .filter_map(|r| r.f)
        .fold(f64::NAN, f64::max);
    let d_max = result
        .records
        .iter()
        .filter(|r| r.status.is_ok())
        .filter_map(|r| r.mean_d)
        .fold(f64::NAN, f64::max);
    if f_max.is_nan() {
        return Err(TqcError::Domain(
            "cannot normalize: no successful rows".into(),
        ));
    }
    for r in result.records.iter_mut() {
        if let Some(f) = r.f {
            r.f_norm = Some(if f_max > 0.0 { f / f_max } else { 1.0 });
        }
        if let Some(d) = r.mean_d {
            r.d_norm = Some(if d_max > 0.0 { d / d_max } else { 1.0 });
        }
    }
    Ok(())
}

fn size_row(
    n_qubits: usize,
    params: &ModelParams,
    cfg: &SizeSweepConfig,
) -> Result<(f64, f64, f64)> {
    let n_max = cfg.n_max.unwrap_or_else(|| default_n_max(n_qubits));
    let row_params = ModelParams {
        n_qubits: Some(n_qubits),
        ..*params
    };
    let ops = build_operators(n_qubits, n_max, &row_params, cfg.max_dim)?;
    let rho0 = initial_state_with_ops(&ops);
    let schedule = Arc::new(DriveSchedule::new(&row_params, cfg.epsilon)?);
    let traj = evolve(
        &rho0,
        &schedule,
        &row_params,
        cfg.n_periods,
        cfg.dt_per_period,
        &ops,
        &EvolveOptions::default(),
    )?;
    let report = check_truncation(&traj, cfg.tail_threshold);
    if !report.pass {
        return Err(TqcError::Integration {
            time: 0.0,
            msg: report
                .guidance
                .unwrap_or_else(|| "truncation check failed".into()),
        });
    }
    let series: Vec<f64> = traj.jx.iter().map(|v| v.abs()).collect();
    let fit = fit_lifetime(&series, &traj.sample_times, traj.period)?;
    Ok((fit.tau, fit.amplitude, fit.residual))
}

/// System-size sweep: quantum evolution and lifetime fit per qubit count.
pub fn sweep_system_size(
    n_list: &[usize],
    params: &ModelParams,
    cfg: &SizeSweepConfig,
) -> Result<SizeSweepResult> {
    if n_list.is_empty() {
        return Err(TqcError::Config("system-size list must be nonempty".into()));
    }
    let pool = pool(cfg.workers)?;
    let rows: Vec<SizeRecord> = pool.install(|| {
        n_list
            .par_iter()
            .map(|&n| match size_row(n, params, cfg) {
                Ok((tau, amplitude, residual)) => SizeRecord {
                    n_qubits: n,
                    tau: Some(tau),
                    amplitude: Some(amplitude),
                    residual: Some(residual),
                    status: RowStatus::Ok,
                },
                Err(e) => SizeRecord {
                    n_qubits: n,
                    tau: None,
                    amplitude: None,
                    residual: None,
                    status: RowStatus::Failed(e.to_string()),
                },
            })
            .collect()
    });
    Ok(SizeSweepResult {
        records: rows,
        params: *params,
        config: cfg.clone(),
    })
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

impl EpsilonSweepResult {
    /// Writes the `epsilon,f,f_norm,mean_d,d_norm,status` CSV.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "epsilon,f,f_norm,mean_d,d_norm,status")?;
        for r in &self.records {
            writeln!(
                w,
                "{},{},{},{},{},{}",
                r.epsilon,
                opt(r.f),
                opt(r.f_norm),
                opt(r.mean_d),
                opt(r.d_norm),
                r.status.label()
            )?;
        }
        Ok(())
    }
}

impl SizeSweepResult {
    /// Writes the `N,tau,A,residual,status` CSV.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "N,tau,A,residual,status")?;
        for r in &self.records {
            writeln!(
                w,
                "{},{},{},{},{}",
                r.n_qubits,
                opt(r.tau),
                opt(r.amplitude),
                opt(r.residual),
                r.status.label()
            )?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quick_cfg() -> EpsilonSweepConfig {
        EpsilonSweepConfig {
            n_periods: 80,
            dt_per_period: 200,
            workers: 2,
            nu0: None,
            delta: QC_WINDOW_DELTA,
        }
    }

    #[test]
    fn single_point_grid_normalizes_to_one() {
        let params = ModelParams::default();
        let result = sweep_epsilon(&[0.0], &params, &quick_cfg()).unwrap();
        assert_eq!(result.records.len(), 1);
        let r = &result.records[0];
        assert!(r.status.is_ok());
        assert_eq!(r.f_norm, Some(1.0));
        assert_eq!(r.d_norm, Some(1.0));
    }

    #[test]
    fn rows_follow_grid_order_and_count() {
        let params = ModelParams::default();
        let grid = [0.0, 0.05, 0.02];
        let result = sweep_epsilon(&grid, &params, &quick_cfg()).unwrap();
        assert_eq!(result.records.len(), 3);
        for (r, e) in result.records.iter().zip(&grid) {
            assert_eq!(r.epsilon, *e);
        }
    }

    #[test]
    fn grid_without_zero_needs_explicit_nu0() {
        let params = ModelParams::default();
        let err = sweep_epsilon(&[0.01, 0.02], &params, &quick_cfg()).unwrap_err();
        assert!(matches!(err, TqcError::Config(_)));
        let mut cfg = quick_cfg();
        cfg.nu0 = Some(0.4);
        assert!(sweep_epsilon(&[0.01, 0.02], &params, &cfg).is_ok());
    }

    #[test]
    fn worker_count_does_not_change_results() {
        let params = ModelParams::default();
        let grid = [0.0, 0.1];
        let mut cfg1 = quick_cfg();
        cfg1.workers = 1;
        let mut cfg8 = quick_cfg();
        cfg8.workers = 8;
        let a = sweep_epsilon(&grid, &params, &cfg1).unwrap();
        let b = sweep_epsilon(&grid, &params, &cfg8).unwrap();
        for (x, y) in a.records.iter().zip(&b.records) {
            assert_eq!(x.f, y.f);
            assert_eq!(x.mean_d, y.mean_d);
            assert_eq!(x.f_norm, y.f_norm);
            assert_eq!(x.d_norm, y.d_norm);
        }
    }

    #[test]
    fn normalization_handles_failed_rows() {
        let mut result = EpsilonSweepResult {
            records: vec![
                EpsilonRecord {
                    epsilon: 0.0,
                    f: Some(2.0),
                    f_norm: None,
                    mean_d: Some(0.1),
                    d_norm: None,
                    nu0_used: 0.4,
                    status: RowStatus::Ok,
                },
                EpsilonRecord {
                    epsilon: 0.1,
                    f: None,
                    f_norm: None,
                    mean_d: None,
                    d_norm: None,
                    nu0_used: 0.4,
                    status: RowStatus::Failed("boom".into()),
                },
            ],
            params: ModelParams::default(),
            config: quick_cfg(),
            nu0: 0.4,
        };
        normalize_columns(&mut result).unwrap();
        assert_eq!(result.records[0].f_norm, Some(1.0));
        assert_eq!(result.records[1].f_norm, None);

        result.records[0].status = RowStatus::Failed("boom".into());
        result.records[0].f = None;
        assert!(normalize_columns(&mut result).is_err());
    }

    #[test]
    fn single_size_row_runs_end_to_end() {
        let params = ModelParams::default();
        let cfg = SizeSweepConfig {
            n_periods: 60,
            n_max: Some(24),
            tail_threshold: 1e-5,
            ..SizeSweepConfig::default()
        };
        let result = sweep_system_size(&[2], &params, &cfg).unwrap();
        assert_eq!(result.records.len(), 1);
        let r = &result.records[0];
        assert!(r.status.is_ok(), "row failed: {:?}", r.status);
        assert!(r.tau.unwrap() > 0.0);
    }

    #[test]
    fn undersized_cutoff_flags_the_row() {
        let params = ModelParams::default();
        let cfg = SizeSweepConfig {
            n_periods: 40,
            n_max: Some(4),
            ..SizeSweepConfig::default()
        };
        let result = sweep_system_size(&[4], &params, &cfg).unwrap();
        match &result.records[0].status {
            RowStatus::Failed(msg) => assert!(msg.contains("n_max") || msg.contains("tail")),
            RowStatus::Ok => panic!("expected truncation failure at n_max = 4"),
        }
    }

    #[test]
    fn csv_shapes() {
        let params = ModelParams::default();
        let result = sweep_epsilon(&[0.0], &params, &quick_cfg()).unwrap();
        let mut buf = Vec::new();
        result.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("epsilon,f,f_norm,mean_d,d_norm,status\n"));
        assert_eq!(text.lines().count(), 2);
    }
}
