//! Physical parameters, the superradiant critical coupling, the binary
//! Fibonacci sequence and the piecewise-constant coupling schedule shared by
//! the mean-field and quantum engines.

use std::f64::consts::PI;
use std::sync::Mutex;

use crate::error::{Result, TqcError};
use crate::meanfield::MeanFieldState;

/// The golden ratio (1 + √5)/2.
pub const GOLDEN_RATIO: f64 = 1.618033988749894848204586834365638118_f64;

/// Physical constants of the open Dicke model, in units with ħ = 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    /// Optical (cavity) frequency ω.
    pub omega: f64,
    /// Atomic frequency ω₀.
    pub omega0: f64,
    /// Photon loss rate κ.
    pub kappa: f64,
    /// Peak coupling strength λ.
    pub lambda_max: f64,
    /// Qubit count, used by the quantum engine only.
    pub n_qubits: Option<usize>,
}

impl Default for ModelParams {
    fn default() -> Self {
        ModelParams {
            omega: 1.0,
            omega0: 1.0,
            kappa: 0.05,
            lambda_max: 1.0,
            n_qubits: None,
        }
    }
}

impl ModelParams {
    /// Validates positivity of the frequencies, rates and coupling.
    pub fn validate(&self) -> Result<()> {
        if self.omega <= 0.0 || self.omega0 <= 0.0 || self.kappa <= 0.0 || self.lambda_max <= 0.0 {
            return Err(TqcError::Domain(
                "omega, omega0, kappa and lambda must all be positive".into(),
            ));
        }
        if let Some(n) = self.n_qubits {
            if n == 0 {
                return Err(TqcError::Domain("n_qubits must be positive".into()));
            }
        }
        Ok(())
    }

    /// Critical coupling for these parameters.
    pub fn critical_coupling(&self) -> Result<f64> {
        critical_coupling(self.omega0, self.omega, self.kappa)
    }

    /// True when the peak coupling exceeds the critical coupling.
    pub fn is_superradiant(&self) -> bool {
        match critical_coupling(self.omega0, self.omega, self.kappa) {
            Ok(lc) => self.lambda_max > lc,
            Err(_) => false,
        }
    }
}

/// Critical coupling λ_c = ½√((ω₀/ω)(ω² + κ²/4)) of the superradiant
/// transition. κ = 0 is allowed (closed-cavity limit).
pub fn critical_coupling(omega0: f64, omega: f64, kappa: f64) -> Result<f64> {
    if omega0 <= 0.0 || omega <= 0.0 || kappa < 0.0 {
        return Err(TqcError::Domain(format!(
            "critical_coupling requires omega0 > 0, omega > 0, kappa >= 0; got ({omega0}, {omega}, {kappa})"
        )));
    }
    Ok(0.5 * ((omega0 / omega) * (omega * omega + kappa * kappa / 4.0)).sqrt())
}

/// n-th element of the binary Fibonacci sequence, r_n ∈ {−1, +1},
/// as sign(cos(2πbn) − cos(bπ)) with b the golden ratio.
///
/// An exactly zero argument (never hit for integer n at machine precision)
/// resolves to +1 by convention.
pub fn fibonacci_element(n: u64) -> Result<i8> {
    if n == 0 {
        return Err(TqcError::Domain("fibonacci_element requires n >= 1".into()));
    }
    let arg = (2.0 * PI * GOLDEN_RATIO * n as f64).cos() - (GOLDEN_RATIO * PI).cos();
    Ok(if arg >= 0.0 { 1 } else { -1 })
}

/// Time-dependent coupling schedule: the peak coupling fires during the
/// first half of period n iff r_n = +1, and is zero during every second
/// half. Periods are left-closed: t ∈ [(n−1)T, (n−1/2)T) is the on-window.
#[derive(Debug)]
pub struct DriveSchedule {
    base_period: f64,
    epsilon: f64,
    period: f64,
    lambda_max: f64,
    sequence_cache: Mutex<Vec<i8>>,
}

impl Clone for DriveSchedule {
    fn clone(&self) -> Self {
        DriveSchedule {
            base_period: self.base_period,
            epsilon: self.epsilon,
            period: self.period,
            lambda_max: self.lambda_max,
            sequence_cache: Mutex::new(self.sequence_cache.lock().unwrap().clone()),
        }
    }
}

impl DriveSchedule {
    /// Builds the schedule with base period T₀ = 2π/ω₀ and T = T₀(1 + ε).
    pub fn new(params: &ModelParams, epsilon: f64) -> Result<Self> {
        params.validate()?;
        let base_period = 2.0 * PI / params.omega0;
        let period = base_period * (1.0 + epsilon);
        if period <= 0.0 {
            return Err(TqcError::Config(format!(
                "drive period must be positive; epsilon = {epsilon} gives T = {period}"
            )));
        }
        Ok(DriveSchedule {
            base_period,
            epsilon,
            period,
            lambda_max: params.lambda_max,
            sequence_cache: Mutex::new(Vec::new()),
        })
    }

    pub fn base_period(&self) -> f64 {
        self.base_period
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    pub fn lambda_max(&self) -> f64 {
        self.lambda_max
    }

    /// r_n for period n (1-based), served from the lazily extended cache.
    pub fn element(&self, n: u64) -> i8 {
        assert!(n >= 1, "sequence index is 1-based");
        let mut cache = self.sequence_cache.lock().unwrap();
        while (cache.len() as u64) < n {
            let next = cache.len() as u64 + 1;
            cache.push(fibonacci_element(next).expect("next >= 1"));
        }
        cache[(n - 1) as usize]
    }

    /// Precomputes r_1 … r_n so later reads never take the write path.
    pub fn precompute(&self, n: u64) {
        if n >= 1 {
            self.element(n);
        }
    }

    /// Coupling amplitude for half-period index hp (0-based): hp = 2(n−1)
    /// is the on-window of period n, hp = 2(n−1)+1 the off-window.
    pub fn amplitude_for_half_period(&self, hp: u64) -> f64 {
        if hp % 2 == 1 {
            return 0.0;
        }
        let n = hp / 2 + 1;
        let r = self.element(n);
        self.lambda_max * (1.0 + r as f64) / 2.0
    }

    /// λ(t) for t ≥ 0. Piecewise constant on half-periods.
    pub fn amplitude(&self, t: f64) -> f64 {
        drive_amplitude(t, self)
    }
}

/// λ(t): with n = floor(t/T) + 1, returns λ(1 + r_n)/2 while t mod T < T/2
/// and zero otherwise.
pub fn drive_amplitude(t: f64, schedule: &DriveSchedule) -> f64 {
    debug_assert!(t >= 0.0, "drive_amplitude is defined for t >= 0");
    let period = schedule.period();
    let n = (t / period).floor() as u64 + 1;
    let frac = t - (n - 1) as f64 * period;
    if frac < period / 2.0 {
        schedule.lambda_max() * (1.0 + schedule.element(n) as f64) / 2.0
    } else {
        0.0
    }
}

/// Symmetry-broken steady state of the constant-λ dynamics, valid for
/// λ > λ_c: j_z⁰ = −½λ_c²/λ², j_x⁰ = ½√(1 − λ_c⁴/λ⁴), j_y = 0, with the
/// cavity quadratures completing the fixed point of the (x, p) block.
pub fn superradiant_fixed_point(params: &ModelParams) -> Result<MeanFieldState> {
    params.validate()?;
    let lc = critical_coupling(params.omega0, params.omega, params.kappa)?;
    let lambda = params.lambda_max;
    if lambda <= lc {
        return Err(TqcError::Domain(format!(
            "no symmetry-broken branch: lambda = {lambda} <= lambda_c = {lc}"
        )));
    }
    let ratio2 = (lc / lambda).powi(2);
    let jz = -0.5 * ratio2;
    let jx = 0.5 * (1.0 - ratio2 * ratio2).sqrt();
    let x = -2.0 * lambda * (2.0 * params.omega).sqrt() * jx
        / (params.omega * params.omega + params.kappa * params.kappa / 4.0);
    let p = params.kappa * x / 2.0;
    Ok(MeanFieldState {
        jx,
        jy: 0.0,
        jz,
        x,
        p,
    })
}
