//! Classification machinery: power spectra of stroboscopic records,
//! subharmonic peak identification, the quasicrystal fraction, the
//! decorrelator, Bloch-sphere projection and exponential lifetime fitting.

use std::io::Write;

use rustfft::{num_complex::Complex64, FftPlanner};
use serde::Serialize;

use crate::error::{Result, TqcError};
use crate::meanfield::Trajectory;

/// Half-width of the quasicrystal-fraction window, in drive-frequency units.
pub const QC_WINDOW_DELTA: f64 = 1.0 / 20.0;

/// One-sided magnitude spectrum. Frequencies are in units of the drive
/// frequency 1/T; with two samples per period the Nyquist frequency is 1.
#[derive(Debug, Clone)]
pub struct Spectrum {
    pub freqs: Vec<f64>,
    pub amps: Vec<f64>,
    pub bin_width: f64,
}

impl Spectrum {
    /// Index of the bin whose frequency is closest to nu.
    pub fn bin_of(&self, nu: f64) -> usize {
        let i = (nu / self.bin_width).round() as isize;
        i.clamp(0, self.freqs.len() as isize - 1) as usize
    }

    /// Writes the `nu,amp` CSV.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "nu,amp")?;
        for (nu, amp) in self.freqs.iter().zip(&self.amps) {
            writeln!(w, "{nu},{amp}")?;
        }
        Ok(())
    }
}

/// Rectangular-window discrete Fourier magnitude of a stroboscopic record.
///
/// The series is truncated to the largest power of two; amplitudes carry a
/// 1/n normalization so bin 0 reports the series mean.
pub fn power_spectrum(series: &[f64], samples_per_period: f64) -> Result<Spectrum> {
    if series.len() < 64 {
        return Err(TqcError::Spectrum(format!(
            "series too short: {} samples, need at least 64",
            series.len()
        )));
    }
    let n = 1usize << (usize::BITS - 1 - series.len().leading_zeros());
    let mut buf: Vec<Complex64> = series[..n]
        .iter()
        .map(|&x| Complex64::new(x, 0.0))
        .collect();
    let fft = FftPlanner::new().plan_fft_forward(n);
    fft.process(&mut buf);
    let bin_width = samples_per_period / n as f64;
    let half = n / 2;
    let freqs: Vec<f64> = (0..=half).map(|k| k as f64 * bin_width).collect();
    let amps: Vec<f64> = buf[..=half].iter().map(|z| z.norm() / n as f64).collect();
    Ok(Spectrum {
        freqs,
        amps,
        bin_width,
    })
}

/// Frequency of the largest-amplitude non-DC bin. Bins below 2·bin_width are
/// treated as DC; ties break toward lower frequency. A flat spectrum
/// (max/median below 5) is rejected as having no peak.
pub fn find_subharmonic_peak(spec: &Spectrum) -> Result<f64> {
    let start = spec
        .freqs
        .iter()
        .position(|&nu| nu >= 2.0 * spec.bin_width - 1e-12)
        .ok_or_else(|| TqcError::Spectrum("spectrum has no non-DC bins".into()))?;
    let candidates = &spec.amps[start..];
    if candidates.is_empty() {
        return Err(TqcError::Spectrum("spectrum has no non-DC bins".into()));
    }
    let mut best = start;
    for (i, &a) in spec.amps.iter().enumerate().skip(start) {
        if a > spec.amps[best] {
            best = i;
        }
    }
    let mut sorted: Vec<f64> = candidates.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let median = sorted[sorted.len() / 2];
    if median > 0.0 && spec.amps[best] / median < 5.0 {
        return Err(TqcError::Spectrum(format!(
            "no subharmonic peak: max/median = {:.2} < 5",
            spec.amps[best] / median
        )));
    }
    Ok(spec.freqs[best])
}

/// Quasicrystal fraction: the weight of the ν₀ bin relative to the total
/// weight inside [ν₀ − δ, ν₀ + δ] (inclusive of the endpoint bins).
pub fn quasicrystal_fraction(spec: &Spectrum, nu0: f64, delta: f64) -> Result<f64> {
    let nu_max = *spec.freqs.last().unwrap_or(&0.0);
    if nu0 - delta < -1e-12 || nu0 + delta > nu_max + 1e-12 {
        return Err(TqcError::Spectrum(format!(
            "window [{}, {}] leaves the frequency axis [0, {nu_max}]",
            nu0 - delta,
            nu0 + delta
        )));
    }
    let peak_bin = spec.bin_of(nu0);
    let mut total = 0.0;
    let mut count = 0usize;
    for (nu, amp) in spec.freqs.iter().zip(&spec.amps) {
        if *nu >= nu0 - delta - 1e-12 && *nu <= nu0 + delta + 1e-12 {
            total += amp;
            count += 1;
        }
    }
    if count == 0 || total == 0.0 {
        return Err(TqcError::Spectrum(
            "empty quasicrystal-fraction window".into(),
        ));
    }
    Ok(spec.amps[peak_bin] / total)
}

/// Decorrelator output.
#[derive(Debug, Clone)]
pub struct DecorrelatorResult {
    /// Time-averaged decorrelator ⟨d⟩.
    pub mean_d: f64,
    pub window: (f64, f64),
    /// (t, d(t)) inside the window.
    pub series: Vec<(f64, f64)>,
}

/// Time-averaged separation ⟨d⟩ = mean over samples in [t_i, t_f] of
/// | |j_x(t)| − |j_x'(t)| | between a trajectory and its perturbed twin.
pub fn decorrelator(
    traj: &Trajectory,
    traj_perturbed: &Trajectory,
    t_i: f64,
    t_f: f64,
) -> Result<DecorrelatorResult> {
    if traj.sample_times.len() != traj_perturbed.sample_times.len()
        || traj
            .sample_times
            .iter()
            .zip(&traj_perturbed.sample_times)
            .any(|(a, b)| a != b)
    {
        return Err(TqcError::Domain(
            "decorrelator requires identical sampling grids".into(),
        ));
    }
    if t_i >= t_f {
        return Err(TqcError::Domain(format!(
            "decorrelator window must have t_i < t_f, got [{t_i}, {t_f}]"
        )));
    }
    let mut series = Vec::new();
    let mut acc = 0.0;
    for ((t, a), b) in traj
        .sample_times
        .iter()
        .zip(&traj.states)
        .zip(&traj_perturbed.states)
    {
        if *t >= t_i && *t <= t_f {
            let d = (a.jx.abs() - b.jx.abs()).abs();
            acc += d;
            series.push((*t, d));
        }
    }
    if series.is_empty() {
        return Err(TqcError::Domain(
            "decorrelator window contains no samples".into(),
        ));
    }
    Ok(DecorrelatorResult {
        mean_d: acc / series.len() as f64,
        window: (t_i, t_f),
        series,
    })
}

/// Projects the spin samples onto the unit Bloch sphere, scaling each
/// (jx, jy, jz) by 1/(2|j|).
pub fn bloch_projection(traj: &Trajectory) -> Result<Vec<[f64; 3]>> {
    traj.states
        .iter()
        .map(|s| {
            let norm = s.spin_norm_sq().sqrt();
            if norm == 0.0 {
                return Err(TqcError::Domain(
                    "zero-norm spin cannot be projected".into(),
                ));
            }
            Ok([s.jx / norm, s.jy / norm, s.jz / norm])
        })
        .collect()
}

/// Exponential-envelope fit |j_x| ≈ A e^{−t/τ}.
#[derive(Debug, Clone, Serialize)]
pub struct LifetimeFit {
    pub amplitude: f64,
    /// Decay time in units of the drive period; +∞ when non-decaying.
    pub tau: f64,
    /// Root-mean-square residual of the log-linear fit.
    pub residual: f64,
    pub n_points: usize,
    pub non_decaying: bool,
}

/// Fits the envelope of |series| to A e^{−t/τ}.
///
/// The envelope is the per-window maximum of |series| over consecutive
/// five-period windows, each point carrying the time at which the maximum
/// occurred. Values below 1e-6 are discarded; at least ten usable points
/// are required. τ is returned in units of the supplied period.
pub fn fit_lifetime(series: &[f64], times: &[f64], period: f64) -> Result<LifetimeFit> {
    if series.len() != times.len() {
        return Err(TqcError::Domain(
            "fit_lifetime requires matching series and time arrays".into(),
        ));
    }
    if period <= 0.0 {
        return Err(TqcError::Domain("period must be positive".into()));
    }
    let window = 5.0 * period;
    let t0 = times.first().copied().unwrap_or(0.0);
    let mut envelope: Vec<(f64, f64)> = Vec::new();
    let mut idx = 0usize;
    let mut w = 0u64;
    while idx < series.len() {
        let w_end = t0 + (w + 1) as f64 * window;
        let mut best: Option<(f64, f64)> = None;
        while idx < series.len() && times[idx] < w_end {
            let v = series[idx].abs();
            if best.is_none_or(|(_, bv)| v > bv) {
                best = Some((times[idx], v));
            }
            idx += 1;
        }
        if let Some((t, v)) = best {
            if v >= 1e-6 {
                envelope.push((t, v));
            }
        }
        w += 1;
    }
    if envelope.len() < 10 {
        return Err(TqcError::Domain(format!(
            "fit_lifetime needs at least 10 usable envelope points, got {}",
            envelope.len()
        )));
    }
    // least squares on log y = log A − t/τ
    let n = envelope.len() as f64;
    let (mut st, mut sy, mut stt, mut sty) = (0.0, 0.0, 0.0, 0.0);
    for &(t, v) in &envelope {
        let ly = v.ln();
        st += t;
        sy += ly;
        stt += t * t;
        sty += t * ly;
    }
    let denom = n * stt - st * st;
    let slope = (n * sty - st * sy) / denom;
    let intercept = (sy - slope * st) / n;
    let amplitude = intercept.exp();
    let mut ss = 0.0;
    for &(t, v) in &envelope {
        let r = v.ln() - (intercept + slope * t);
        ss += r * r;
    }
    let residual = (ss / n).sqrt();
    if slope >= 0.0 {
        return Ok(LifetimeFit {
            amplitude,
            tau: f64::INFINITY,
            residual,
            n_points: envelope.len(),
            non_decaying: true,
        });
    }
    Ok(LifetimeFit {
        amplitude,
        tau: -1.0 / slope / period,
        residual,
        n_points: envelope.len(),
        non_decaying: false,
    })
}

/// Scalar diagnostic summary for one run, serialized as JSON next to the
/// numeric outputs.
#[derive(Debug, Clone, Serialize)]
pub struct DiagnosticSummary {
    pub epsilon: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub f: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub f_norm: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mean_d: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub d_norm: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub nu0: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tau: Option<f64>,
    #[serde(rename = "A", skip_serializing_if = "Option::is_none")]
    pub amplitude: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub residual: Option<f64>,
}
