use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use tqc::config::{parse_config_file, RunConfig};
use tqc::diagnostics::{
    bloch_projection, decorrelator, find_subharmonic_peak, fit_lifetime, power_spectrum,
    quasicrystal_fraction, DiagnosticSummary, QC_WINDOW_DELTA,
};
use tqc::meanfield::{integrate, perturbed_initial_state, RecordMode};
use tqc::model::{superradiant_fixed_point, DriveSchedule};
use tqc::quantum::{
    build_operators, check_truncation, evolve, initial_state_with_ops, EvolveOptions,
};
use tqc::sweep::{sweep_epsilon, sweep_system_size, EpsilonSweepConfig, SizeSweepConfig};
use tqc::{Result, TqcError};

#[derive(Parser)]
#[command(
    name = "tqc",
    version,
    about = "Fibonacci-driven open Dicke model: simulation and diagnostics"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Mean-field run in the thermodynamic limit (trajectory, spectrum, Bloch projection)
    MfRun(MfRunArgs),
    /// Exact Lindblad run for N qubits in the symmetric sector
    QRun(QRunArgs),
    /// Parameter scans: detuning phase diagram or lifetime vs system size
    Sweep(SweepArgs),
    /// Re-analyze stored trajectory CSVs without re-simulation
    Analyze(AnalyzeArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// Plain-text config file (key = value pairs, [section] headers allowed)
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum TimeUnits {
    Time,
    Periods,
}

#[derive(Args)]
struct MfRunArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Drive-period detuning ε
    #[arg(long)]
    epsilon: Option<f64>,
    /// Number of drive periods
    #[arg(long)]
    periods: Option<u64>,
    /// RK4 steps per period (even)
    #[arg(long)]
    dt_per_period: Option<u64>,
    /// Comma-separated artifacts: trajectory,spectrum,bloch
    #[arg(long, default_value = "trajectory")]
    emit: String,
    /// Also integrate the perturbed twin and report the decorrelator
    #[arg(long)]
    decorrelator: bool,
    /// Reference subharmonic frequency for f when ε ≠ 0
    #[arg(long)]
    nu0: Option<f64>,
    /// Time column units in exported CSVs
    #[arg(long, value_enum, default_value_t = TimeUnits::Time)]
    time_units: TimeUnits,
}

#[derive(Args)]
struct QRunArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[arg(long)]
    n_qubits: Option<usize>,
    #[arg(long)]
    epsilon: Option<f64>,
    /// Fock-space cutoff
    #[arg(long)]
    n_max: Option<usize>,
    #[arg(long)]
    periods: Option<u64>,
    #[arg(long)]
    dt_per_period: Option<u64>,
    /// Fit the |jx| envelope and write lifetime.json
    #[arg(long)]
    fit: bool,
    #[arg(long, value_enum, default_value_t = TimeUnits::Time)]
    time_units: TimeUnits,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum SweepMode {
    Epsilon,
    SystemSize,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[arg(long, value_enum)]
    mode: SweepMode,
    /// Grid start (epsilon mode)
    #[arg(long, default_value_t = 0.0)]
    from: f64,
    /// Grid end, inclusive (epsilon mode)
    #[arg(long, default_value_t = 0.2)]
    to: f64,
    /// Grid step (epsilon mode)
    #[arg(long, default_value_t = 0.005)]
    step: f64,
    /// Qubit counts, as "lo:hi" or a comma list (system-size mode)
    #[arg(long, default_value = "2:6")]
    n: String,
    /// Detuning for system-size mode
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    periods: Option<u64>,
    #[arg(long)]
    dt_per_period: Option<u64>,
    /// Worker threads (0 = all cores)
    #[arg(long, default_value_t = 0)]
    workers: usize,
    /// Explicit reference ν₀ (otherwise the ε = 0 row defines it)
    #[arg(long)]
    nu0: Option<f64>,
    #[arg(long)]
    n_max: Option<usize>,
}

#[derive(Args)]
struct AnalyzeArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Stored trajectory CSV (mean-field or quantum export format)
    #[arg(long)]
    input: PathBuf,
    /// Second trajectory for the decorrelator
    #[arg(long)]
    perturbed: Option<PathBuf>,
    /// Emit the recomputed spectrum CSV
    #[arg(long)]
    spectrum: bool,
    /// Fit the |jx| envelope
    #[arg(long)]
    fit: bool,
    /// Reference ν₀ for the quasicrystal fraction
    #[arg(long)]
    nu0: Option<f64>,
    /// Drive period override; inferred from the stroboscopic grid otherwise
    #[arg(long)]
    period: Option<f64>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::MfRun(args) => cmd_mf_run(args),
        Command::QRun(args) => cmd_q_run(args),
        Command::Sweep(args) => cmd_sweep(args),
        Command::Analyze(args) => cmd_analyze(args),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                TqcError::Config(_) | TqcError::Parse { .. } | TqcError::Domain(_) => {
                    ExitCode::from(2)
                }
                _ => ExitCode::from(1),
            }
        }
    }
}

fn resolve_config(common: &CommonArgs, base: RunConfig) -> Result<RunConfig> {
    let mut cfg = base;
    if let Some(path) = &common.config {
        let keys = parse_config_file(path)?;
        cfg.apply_file_keys(&keys)?;
    }
    cfg.apply_env()?;
    Ok(cfg)
}

fn write_snapshot<T: Serialize>(out_dir: &Path, snapshot: &T) -> Result<()> {
    fs::create_dir_all(out_dir)?;
    let json = serde_json::to_string_pretty(snapshot)
        .map_err(|e| TqcError::Config(format!("snapshot serialization: {e}")))?;
    fs::write(out_dir.join("config.json"), json + "\n")?;
    Ok(())
}

fn cmd_mf_run(args: MfRunArgs) -> Result<()> {
    let mut cfg = resolve_config(&args.common, RunConfig::default())?;
    if let Some(e) = args.epsilon {
        cfg.epsilon = e;
    }
    if let Some(p) = args.periods {
        cfg.n_periods = p;
    }
    if let Some(d) = args.dt_per_period {
        cfg.dt_per_period = d;
    }
    let emit: Vec<&str> = args.emit.split(',').map(str::trim).collect();
    for item in &emit {
        if !matches!(*item, "trajectory" | "spectrum" | "bloch" | "") {
            return Err(TqcError::Config(format!(
                "unknown --emit artifact '{item}' (expected trajectory, spectrum, bloch)"
            )));
        }
    }
    if cfg.n_periods == 0 {
        return Err(TqcError::Config("--periods must be >= 1".into()));
    }

    let params = cfg.model_params();
    params.validate()?;
    if !params.is_superradiant() {
        eprintln!(
            "warning: lambda = {} does not exceed lambda_c = {:.6}; no symmetry-broken phase",
            params.lambda_max,
            params.critical_coupling()?
        );
    }
    let out_dir = &args.common.out_dir;
    write_snapshot(out_dir, &cfg)?;

    let schedule = Arc::new(DriveSchedule::new(&params, cfg.epsilon)?);
    let initial = superradiant_fixed_point(&params)?;
    let traj = integrate(
        &initial,
        &schedule,
        &params,
        cfg.n_periods,
        cfg.dt_per_period,
        RecordMode::Stroboscopic,
    )?;
    let in_periods = args.time_units == TimeUnits::Periods;

    if emit.contains(&"trajectory") {
        let f = fs::File::create(out_dir.join("trajectory.csv"))?;
        traj.write_csv(std::io::BufWriter::new(f), in_periods)?;
    }

    let spec = power_spectrum(&traj.stroboscopic_jx(), 2.0)?;
    if emit.contains(&"spectrum") {
        let f = fs::File::create(out_dir.join("spectrum.csv"))?;
        spec.write_csv(std::io::BufWriter::new(f))?;
    }
    if emit.contains(&"bloch") {
        let points = bloch_projection(&traj)?;
        let mut buf = String::from("bx,by,bz\n");
        for p in points {
            buf.push_str(&format!("{},{},{}\n", p[0], p[1], p[2]));
        }
        fs::write(out_dir.join("bloch.csv"), buf)?;
    }

    let nu0 = if cfg.epsilon == 0.0 {
        Some(find_subharmonic_peak(&spec)?)
    } else {
        args.nu0
    };
    let f_value = match nu0 {
        Some(nu0) => Some(quasicrystal_fraction(&spec, nu0, QC_WINDOW_DELTA)?),
        None => None,
    };
    let mean_d = if args.decorrelator {
        let pert0 = perturbed_initial_state(&initial)?;
        let pert = integrate(
            &pert0,
            &schedule,
            &params,
            cfg.n_periods,
            cfg.dt_per_period,
            RecordMode::Stroboscopic,
        )?;
        let t_f = cfg.n_periods as f64 * schedule.period();
        Some(decorrelator(&traj, &pert, 0.0, t_f)?.mean_d)
    } else {
        None
    };

    let summary = DiagnosticSummary {
        epsilon: cfg.epsilon,
        f: f_value,
        f_norm: None,
        mean_d,
        d_norm: None,
        nu0,
        tau: None,
        amplitude: None,
        residual: None,
    };
    let json = serde_json::to_string_pretty(&summary)
        .map_err(|e| TqcError::Config(format!("summary serialization: {e}")))?;
    fs::write(out_dir.join("summary.json"), json + "\n")?;

    let mut line = format!("mf-run epsilon={} periods={}", cfg.epsilon, cfg.n_periods);
    if let Some(nu0) = nu0 {
        line.push_str(&format!(" nu0={nu0}"));
    }
    if let Some(f) = f_value {
        line.push_str(&format!(" f={f}"));
    }
    if let Some(d) = mean_d {
        line.push_str(&format!(" mean_d={d}"));
    }
    line.push_str(&format!(
        " spin_norm_drift={:.3e}",
        traj.max_spin_norm_drift()
    ));
    println!("{line}");
    Ok(())
}

fn cmd_q_run(args: QRunArgs) -> Result<()> {
    let base = RunConfig {
        n_periods: 300,
        dt_per_period: 500,
        ..RunConfig::default()
    };
    let mut cfg = resolve_config(&args.common, base)?;
    if let Some(e) = args.epsilon {
        cfg.epsilon = e;
    }
    if let Some(n) = args.n_qubits {
        cfg.n_qubits = n;
    }
    if let Some(m) = args.n_max {
        cfg.n_max = m;
    }
    if let Some(p) = args.periods {
        cfg.n_periods = p;
    }
    if let Some(d) = args.dt_per_period {
        cfg.dt_per_period = d;
    }
    if cfg.n_qubits == 0 {
        return Err(TqcError::Config("--n-qubits must be >= 1".into()));
    }
    if cfg.n_periods == 0 {
        return Err(TqcError::Config("--periods must be >= 1".into()));
    }

    let params = cfg.model_params();
    params.validate()?;
    let out_dir = &args.common.out_dir;
    write_snapshot(out_dir, &cfg)?;

    let ops = build_operators(cfg.n_qubits, cfg.n_max, &params, cfg.max_dim)?;
    let rho0 = initial_state_with_ops(&ops);
    let schedule = Arc::new(DriveSchedule::new(&params, cfg.epsilon)?);
    let traj = evolve(
        &rho0,
        &schedule,
        &params,
        cfg.n_periods,
        cfg.dt_per_period,
        &ops,
        &EvolveOptions::default(),
    )?;

    let f = fs::File::create(out_dir.join("quantum_trajectory.csv"))?;
    traj.write_csv(
        std::io::BufWriter::new(f),
        args.time_units == TimeUnits::Periods,
    )?;

    let report = check_truncation(&traj, 1e-6);
    if !report.pass {
        eprintln!(
            "warning: {}",
            report
                .guidance
                .as_deref()
                .unwrap_or("truncation check failed")
        );
    }

    let mut line = format!(
        "q-run N={} epsilon={} periods={} max_tail={:.3e}",
        cfg.n_qubits,
        cfg.epsilon,
        cfg.n_periods,
        traj.max_tail()
    );
    if args.fit {
        let series: Vec<f64> = traj.jx.iter().map(|v| v.abs()).collect();
        let fit = fit_lifetime(&series, &traj.sample_times, traj.period)?;
        let json = serde_json::to_string_pretty(&fit)
            .map_err(|e| TqcError::Config(format!("fit serialization: {e}")))?;
        fs::write(out_dir.join("lifetime.json"), json + "\n")?;
        line.push_str(&format!(" tau={} A={}", fit.tau, fit.amplitude));
    }
    println!("{line}");
    Ok(())
}

fn parse_n_list(raw: &str) -> Result<Vec<usize>> {
    let parse_one = |s: &str| {
        s.trim()
            .parse::<usize>()
            .map_err(|_| TqcError::Config(format!("invalid qubit count '{s}' in --n '{raw}'")))
    };
    if let Some((lo, hi)) = raw.split_once(':') {
        let lo = parse_one(lo)?;
        let hi = parse_one(hi)?;
        if lo == 0 || hi < lo {
            return Err(TqcError::Config(format!("invalid --n range '{raw}'")));
        }
        return Ok((lo..=hi).collect());
    }
    let list: Result<Vec<usize>> = raw.split(',').map(parse_one).collect();
    let list = list?;
    if list.is_empty() || list.contains(&0) {
        return Err(TqcError::Config(format!("invalid --n list '{raw}'")));
    }
    Ok(list)
}

#[derive(Serialize)]
struct SweepSnapshot<'a, C: Serialize> {
    run: &'a RunConfig,
    sweep: &'a C,
}

fn cmd_sweep(args: SweepArgs) -> Result<()> {
    let out_dir = &args.common.out_dir;
    match args.mode {
        SweepMode::Epsilon => {
            let mut cfg = resolve_config(&args.common, RunConfig::default())?;
            if let Some(p) = args.periods {
                cfg.n_periods = p;
            }
            if let Some(d) = args.dt_per_period {
                cfg.dt_per_period = d;
            }
            if args.step <= 0.0 || args.to < args.from {
                return Err(TqcError::Config(format!(
                    "invalid epsilon grid: from {} to {} step {}",
                    args.from, args.to, args.step
                )));
            }
            let n_points = ((args.to - args.from) / args.step + 1.5).floor() as usize;
            let grid: Vec<f64> = (0..n_points)
                .map(|i| args.from + i as f64 * args.step)
                .filter(|&e| e <= args.to + 1e-12)
                .collect();
            let sweep_cfg = EpsilonSweepConfig {
                n_periods: cfg.n_periods,
                dt_per_period: cfg.dt_per_period,
                workers: args.workers,
                nu0: args.nu0,
                delta: QC_WINDOW_DELTA,
            };
            let params = cfg.model_params();
            write_snapshot(
                out_dir,
                &SweepSnapshot {
                    run: &cfg,
                    sweep: &sweep_cfg,
                },
            )?;
            let result = sweep_epsilon(&grid, &params, &sweep_cfg)?;
            let f = fs::File::create(out_dir.join("sweep_epsilon.csv"))?;
            result.write_csv(std::io::BufWriter::new(f))?;
            let failed = result.records.iter().filter(|r| !r.status.is_ok()).count();
            println!(
                "sweep epsilon rows={} failed={} nu0={}",
                result.records.len(),
                failed,
                result.nu0
            );
        }
        SweepMode::SystemSize => {
            let base = RunConfig {
                n_periods: 300,
                dt_per_period: 500,
                ..RunConfig::default()
            };
            let mut cfg = resolve_config(&args.common, base)?;
            if let Some(p) = args.periods {
                cfg.n_periods = p;
            }
            if let Some(d) = args.dt_per_period {
                cfg.dt_per_period = d;
            }
            if let Some(e) = args.epsilon {
                cfg.epsilon = e;
            }
            let n_list = parse_n_list(&args.n)?;
            let sweep_cfg = SizeSweepConfig {
                epsilon: cfg.epsilon,
                n_periods: cfg.n_periods,
                dt_per_period: cfg.dt_per_period,
                n_max: args.n_max,
                max_dim: cfg.max_dim,
                workers: args.workers,
                tail_threshold: 1e-6,
            };
            let params = cfg.model_params();
            write_snapshot(
                out_dir,
                &SweepSnapshot {
                    run: &cfg,
                    sweep: &sweep_cfg,
                },
            )?;
            let result = sweep_system_size(&n_list, &params, &sweep_cfg)?;
            let f = fs::File::create(out_dir.join("sweep_system_size.csv"))?;
            result.write_csv(std::io::BufWriter::new(f))?;
            let failed = result.records.iter().filter(|r| !r.status.is_ok()).count();
            println!(
                "sweep system-size rows={} failed={}",
                result.records.len(),
                failed
            );
        }
    }
    Ok(())
}

/// A stored series: sample times, jx values and the stroboscopic markers.
struct StoredSeries {
    times: Vec<f64>,
    jx: Vec<f64>,
    strobo: Vec<bool>,
}

impl StoredSeries {
    fn stroboscopic(&self) -> (Vec<f64>, Vec<f64>) {
        let mut t = Vec::new();
        let mut v = Vec::new();
        for i in 0..self.times.len() {
            if self.strobo[i] {
                t.push(self.times[i]);
                v.push(self.jx[i]);
            }
        }
        (t, v)
    }

    /// Period inferred from the stroboscopic grid spacing (two per period).
    fn inferred_period(&self) -> Result<f64> {
        let (t, _) = self.stroboscopic();
        if t.len() < 2 {
            return Err(TqcError::Domain(
                "cannot infer the drive period from fewer than two stroboscopic samples".into(),
            ));
        }
        Ok(2.0 * (t[1] - t[0]))
    }
}

fn load_series(path: &Path) -> Result<StoredSeries> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines().enumerate();
    let Some((_, header)) = lines.next() else {
        return Err(TqcError::Parse {
            line: 1,
            msg: "empty file".into(),
        });
    };
    let cols: Vec<&str> = header.split(',').map(str::trim).collect();
    let col = |name: &str| cols.iter().position(|c| *c == name);
    let (Some(t_col), Some(jx_col)) = (col("t"), col("jx")) else {
        return Err(TqcError::Parse {
            line: 1,
            msg: format!("header must contain 't' and 'jx' columns, got '{header}'"),
        });
    };
    let strobo_col = col("stroboscopic");
    let mut out = StoredSeries {
        times: Vec::new(),
        jx: Vec::new(),
        strobo: Vec::new(),
    };
    for (i, raw) in lines {
        let line_no = i + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = raw.split(',').collect();
        let get = |idx: usize| -> Result<f64> {
            fields
                .get(idx)
                .ok_or(TqcError::Parse {
                    line: line_no,
                    msg: format!("missing column {idx}"),
                })?
                .trim()
                .parse::<f64>()
                .map_err(|_| TqcError::Parse {
                    line: line_no,
                    msg: format!("invalid number '{}'", fields[idx]),
                })
        };
        out.times.push(get(t_col)?);
        out.jx.push(get(jx_col)?);
        // quantum exports sample only at half-periods, so every row counts
        let is_strobo = match strobo_col {
            Some(c) => get(c)? != 0.0,
            None => true,
        };
        out.strobo.push(is_strobo);
    }
    Ok(out)
}

fn cmd_analyze(args: AnalyzeArgs) -> Result<()> {
    let series = load_series(&args.input)?;
    let out_dir = &args.common.out_dir;
    fs::create_dir_all(out_dir)?;
    let (times, jx) = series.stroboscopic();
    let period = match args.period {
        Some(p) => p,
        None => series.inferred_period()?,
    };

    let spec = power_spectrum(&jx, 2.0)?;
    if args.spectrum {
        let f = fs::File::create(out_dir.join("spectrum.csv"))?;
        spec.write_csv(std::io::BufWriter::new(f))?;
    }
    let nu0 = match args.nu0 {
        Some(v) => Some(v),
        None => find_subharmonic_peak(&spec).ok(),
    };
    let f_value = match nu0 {
        Some(nu0) => Some(quasicrystal_fraction(&spec, nu0, QC_WINDOW_DELTA)?),
        None => None,
    };

    let fit = if args.fit {
        let abs_jx: Vec<f64> = jx.iter().map(|v| v.abs()).collect();
        Some(fit_lifetime(&abs_jx, &times, period)?)
    } else {
        None
    };

    let mean_d = match &args.perturbed {
        Some(path) => {
            let other = load_series(path)?;
            let (times2, jx2) = other.stroboscopic();
            if times2.len() != times.len() || times2.iter().zip(&times).any(|(a, b)| a != b) {
                return Err(TqcError::Domain(
                    "decorrelator requires identical sampling grids".into(),
                ));
            }
            let n = times.len() as f64;
            Some(
                jx.iter()
                    .zip(&jx2)
                    .map(|(a, b)| (a.abs() - b.abs()).abs())
                    .sum::<f64>()
                    / n,
            )
        }
        None => None,
    };

    let summary = DiagnosticSummary {
        epsilon: f64::NAN,
        f: f_value,
        f_norm: None,
        mean_d,
        d_norm: None,
        nu0,
        tau: fit.as_ref().map(|f| f.tau),
        amplitude: fit.as_ref().map(|f| f.amplitude),
        residual: fit.as_ref().map(|f| f.residual),
    };
    let json = serde_json::to_string_pretty(&summary)
        .map_err(|e| TqcError::Config(format!("summary serialization: {e}")))?;
    fs::write(out_dir.join("analysis.json"), json + "\n")?;

    let mut line = format!("analyze {}", args.input.display());
    if let Some(nu0) = nu0 {
        line.push_str(&format!(" nu0={nu0}"));
    }
    if let Some(f) = f_value {
        line.push_str(&format!(" f={f}"));
    }
    if let Some(d) = mean_d {
        line.push_str(&format!(" mean_d={d}"));
    }
    if let Some(fit) = &fit {
        line.push_str(&format!(" tau={} A={}", fit.tau, fit.amplitude));
    }
    println!("{line}");
    Ok(())
}
