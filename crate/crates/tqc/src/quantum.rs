//! Exact Lindblad evolution for N qubits in the symmetric spin-J = N/2
//! sector tensored with a truncated Fock space. All generators are
//! collective, so the (N+1)-dimensional representation is exactly closed and
//! N up to ~10 stays tractable. The master equation is integrated directly
//! with RK4 and sparse operator application; observables agree with a
//! spectral-decomposition treatment but the cost per step is O(dim²).

use std::io::Write;
use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Result, TqcError};
use crate::linalg::{CMat, SparseMat};
use crate::model::{DriveSchedule, ModelParams};

/// Default cap on the product-space dimension; override via config or the
/// TQC_MAX_DIM environment variable.
pub const DEFAULT_MAX_DIM: usize = 4096;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// Collective spin and cavity operators, both on their native factors and
/// lifted to the (photon ⊗ spin) product space.
#[derive(Debug, Clone)]
pub struct OperatorSet {
    pub n_qubits: usize,
    pub n_max: usize,
    /// Product dimension (N+1)(n_max+1).
    pub dim: usize,
    // spin-sector operators, dimension N+1, basis |J, m⟩ with m descending
    pub jx_spin: SparseMat,
    pub jy_spin: SparseMat,
    pub jz_spin: SparseMat,
    // Fock-sector operators, dimension n_max+1
    pub a_fock: SparseMat,
    pub adag_fock: SparseMat,
    pub n_fock: SparseMat,
    // lifted to the product space
    pub jx: SparseMat,
    pub jy: SparseMat,
    pub jz: SparseMat,
    pub a: SparseMat,
    pub a_dag: SparseMat,
    pub n_op: SparseMat,
    /// λ-independent Hamiltonian part ω a†a + ω₀ Jz.
    pub h_static: SparseMat,
    /// Coupling operator (a + a†) Jx; enters H with coefficient 2λ/√N.
    pub h_coupling: SparseMat,
}

/// Builds the ladder-operator representation for spin J = N/2 and the
/// tridiagonal cavity operators, then lifts both to the product space.
pub fn build_operators(
    n_qubits: usize,
    n_max: usize,
    params: &ModelParams,
    max_dim: usize,
) -> Result<OperatorSet> {
    if n_qubits < 1 {
        return Err(TqcError::Domain("n_qubits must be >= 1".into()));
    }
    if n_max < 4 {
        return Err(TqcError::Domain("n_max must be >= 4".into()));
    }
    let dim_spin = n_qubits + 1;
    let dim_fock = n_max + 1;
    let dim = dim_spin * dim_fock;
    if dim > max_dim {
        return Err(TqcError::Resource(format!(
            "product dimension {dim} = ({n_qubits}+1)(n_max {n_max}+1) exceeds the cap {max_dim}; \
             lower n_qubits or n_max, or raise max_dim / TQC_MAX_DIM"
        )));
    }

    let j = n_qubits as f64 / 2.0;
    // Basis index i holds m = J − i (descending), so Jz = diag(J, J−1, …, −J).
    let jz_diag: Vec<Complex64> = (0..dim_spin).map(|i| c(j - i as f64, 0.0)).collect();
    let jz_spin = SparseMat::diag(&jz_diag);
    // J₊|J, m⟩ = √(J(J+1) − m(m+1)) |J, m+1⟩; |J, m+1⟩ sits at index i−1.
    let mut jp_triplets = Vec::new();
    for i in 1..dim_spin {
        let m = j - i as f64;
        let coeff = (j * (j + 1.0) - m * (m + 1.0)).sqrt();
        jp_triplets.push((i - 1, i, c(coeff, 0.0)));
    }
    let jp = SparseMat::from_triplets(dim_spin, &jp_triplets);
    let jm = jp.adjoint();
    let jx_spin = jp.linear_combination(c(0.5, 0.0), &jm, c(0.5, 0.0));
    let jy_spin = jp.linear_combination(c(0.0, -0.5), &jm, c(0.0, 0.5));

    // a|n⟩ = √n |n−1⟩ in the ascending Fock basis.
    let mut a_triplets = Vec::new();
    for n in 1..dim_fock {
        a_triplets.push((n - 1, n, c((n as f64).sqrt(), 0.0)));
    }
    let a_fock = SparseMat::from_triplets(dim_fock, &a_triplets);
    let adag_fock = a_fock.adjoint();
    let n_diag: Vec<Complex64> = (0..dim_fock).map(|n| c(n as f64, 0.0)).collect();
    let n_fock = SparseMat::diag(&n_diag);

    let id_spin = SparseMat::identity(dim_spin);
    let id_fock = SparseMat::identity(dim_fock);
    let jx = id_fock.kron(&jx_spin);
    let jy = id_fock.kron(&jy_spin);
    let jz = id_fock.kron(&jz_spin);
    let a = a_fock.kron(&id_spin);
    let a_dag = adag_fock.kron(&id_spin);
    let n_op = n_fock.kron(&id_spin);

    let h_static = n_op.linear_combination(c(params.omega, 0.0), &jz, c(params.omega0, 0.0));
    let a_plus_adag = a_fock.linear_combination(c(1.0, 0.0), &adag_fock, c(1.0, 0.0));
    let h_coupling = a_plus_adag.kron(&jx_spin);

    Ok(OperatorSet {
        n_qubits,
        n_max,
        dim,
        jx_spin,
        jy_spin,
        jz_spin,
        a_fock,
        adag_fock,
        n_fock,
        jx,
        jy,
        jz,
        a,
        a_dag,
        n_op,
        h_static,
        h_coupling,
    })
}

/// Hermitian unit-trace state on the product space.
#[derive(Debug, Clone)]
pub struct DensityMatrix {
    pub mat: CMat,
    pub n_qubits: usize,
    pub n_max: usize,
}

impl DensityMatrix {
    pub fn trace(&self) -> f64 {
        self.mat.trace().re
    }

    pub fn hermiticity_defect(&self) -> f64 {
        self.mat.hermiticity_defect()
    }

    pub fn purity(&self) -> f64 {
        // Tr ρ² for Hermitian ρ = Σ |ρ_ij|².
        self.mat.data.iter().map(|z| z.norm_sqr()).sum()
    }

    /// Smallest eigenvalue; O(dim³) per call, intended for spot checks.
    pub fn min_eigenvalue(&self) -> f64 {
        crate::linalg::hermitian_min_eigenvalue(&self.mat)
    }

    /// Population of the top two Fock levels, summed over the spin sector.
    pub fn truncation_tail(&self) -> f64 {
        let dim_spin = self.n_qubits + 1;
        let mut tail = 0.0;
        for n in [self.n_max - 1, self.n_max] {
            for i in 0..dim_spin {
                let idx = n * dim_spin + i;
                tail += self.mat.at(idx, idx).re;
            }
        }
        tail
    }
}

/// Pure initial state |+⟩^⊗N ⊗ |0⟩: all spins along +x, photon vacuum.
/// In the collective Jz basis the spin amplitudes are 2^{−N/2}√(C(N, k)).
pub fn initial_state(
    n_qubits: usize,
    n_max: usize,
    params: &ModelParams,
    max_dim: usize,
) -> Result<DensityMatrix> {
    let ops = build_operators(n_qubits, n_max, params, max_dim)?;
    Ok(initial_state_with_ops(&ops))
}

/// Same as [`initial_state`], reusing an already-built operator set.
pub fn initial_state_with_ops(ops: &OperatorSet) -> DensityMatrix {
    let dim_spin = ops.n_qubits + 1;
    let mut amps = vec![c(0.0, 0.0); ops.dim];
    let norm = 0.5f64.powi(ops.n_qubits as i32).sqrt(); // 2^{−N/2}
    let mut binom = 1.0f64;
    for (k, amp) in amps.iter_mut().take(dim_spin).enumerate() {
        // photon vacuum occupies the first spin block
        *amp = c(norm * binom.sqrt(), 0.0);
        binom = binom * (ops.n_qubits - k) as f64 / (k + 1) as f64;
    }
    let mut mat = CMat::zeros(ops.dim);
    for i in 0..ops.dim {
        if amps[i].norm_sqr() == 0.0 {
            continue;
        }
        for j in 0..ops.dim {
            mat.set(i, j, amps[i] * amps[j].conj());
        }
    }
    DensityMatrix {
        mat,
        n_qubits: ops.n_qubits,
        n_max: ops.n_max,
    }
}

/// Scratch buffers for the master-equation right-hand side.
struct RhsWorkspace {
    tmp1: CMat,
    tmp2: CMat,
}

impl RhsWorkspace {
    fn new(dim: usize) -> Self {
        RhsWorkspace {
            tmp1: CMat::zeros(dim),
            tmp2: CMat::zeros(dim),
        }
    }
}

/// out = −i[H(λ), ρ] + κ(aρa† − ½{a†a, ρ}), with
/// H(λ) = ω a†a + ω₀ Jz + (2λ/√N)(a + a†)Jx.
fn lindblad_rhs_into(
    rho: &CMat,
    lambda_t: f64,
    ops: &OperatorSet,
    params: &ModelParams,
    ws: &mut RhsWorkspace,
    out: &mut CMat,
) {
    let one = c(1.0, 0.0);
    let g = c(2.0 * lambda_t / (ops.n_qubits as f64).sqrt(), 0.0);
    let n = rho.n;

    // tmp1 = Hρ
    ws.tmp1.fill_zero();
    ops.h_static.apply_left_add(one, rho, &mut ws.tmp1);
    if lambda_t != 0.0 {
        ops.h_coupling.apply_left_add(g, rho, &mut ws.tmp1);
    }
    // tmp2 = ρH
    ws.tmp2.fill_zero();
    ops.h_static.apply_right_add(one, rho, &mut ws.tmp2);
    if lambda_t != 0.0 {
        ops.h_coupling.apply_right_add(g, rho, &mut ws.tmp2);
    }
    // out = −i(tmp1 − tmp2)
    let minus_i = c(0.0, -1.0);
    for ((o, h_rho), rho_h) in out.data.iter_mut().zip(&ws.tmp1.data).zip(&ws.tmp2.data) {
        *o = minus_i * (h_rho - rho_h);
    }

    let kappa = c(params.kappa, 0.0);
    // out += κ a ρ a†
    ws.tmp1.fill_zero();
    ops.a.apply_left_add(one, rho, &mut ws.tmp1);
    ops.a_dag.apply_right_add(kappa, &ws.tmp1, out);
    // out −= κ/2 (nρ + ρn); n is diagonal with integer photon numbers.
    let dim_spin = ops.n_qubits + 1;
    let half_kappa = params.kappa / 2.0;
    for i in 0..n {
        let ni = (i / dim_spin) as f64;
        for j in 0..n {
            let nj = (j / dim_spin) as f64;
            out.data[i * n + j] -= c(half_kappa * (ni + nj), 0.0) * rho.data[i * n + j];
        }
    }
}

/// Master-equation right-hand side as a standalone operation.
pub fn lindblad_rhs(
    rho: &DensityMatrix,
    lambda_t: f64,
    ops: &OperatorSet,
    params: &ModelParams,
) -> CMat {
    let mut ws = RhsWorkspace::new(rho.mat.n);
    let mut out = CMat::zeros(rho.mat.n);
    lindblad_rhs_into(&rho.mat, lambda_t, ops, params, &mut ws, &mut out);
    out
}

/// Expectation-value record of a quantum evolution, sampled at every
/// half-period boundary.
#[derive(Debug, Clone)]
pub struct QuantumTrajectory {
    pub sample_times: Vec<f64>,
    /// ⟨Jx⟩/N, ⟨Jy⟩/N, ⟨Jz⟩/N per sample.
    pub jx: Vec<f64>,
    pub jy: Vec<f64>,
    pub jz: Vec<f64>,
    /// ⟨a†a⟩ per sample.
    pub n_photon: Vec<f64>,
    /// Population of the top two Fock levels per sample.
    pub tail_pop: Vec<f64>,
    pub period: f64,
    pub n_qubits: usize,
    pub n_max: usize,
}

impl QuantumTrajectory {
    pub fn max_tail(&self) -> f64 {
        self.tail_pop.iter().copied().fold(0.0, f64::max)
    }

    /// Writes the `t,jx,jy,jz,n_photon,tail_pop` CSV.
    pub fn write_csv<W: Write>(&self, mut w: W, time_in_periods: bool) -> Result<()> {
        writeln!(w, "t,jx,jy,jz,n_photon,tail_pop")?;
        for i in 0..self.sample_times.len() {
            let t = if time_in_periods {
                self.sample_times[i] / self.period
            } else {
                self.sample_times[i]
            };
            writeln!(
                w,
                "{},{},{},{},{},{}",
                t, self.jx[i], self.jy[i], self.jz[i], self.n_photon[i], self.tail_pop[i]
            )?;
        }
        Ok(())
    }
}

/// Knobs for [`evolve`]; defaults match the crate-wide conventions.
#[derive(Debug, Clone, Copy)]
pub struct EvolveOptions {
    /// Abort when |Tr ρ − 1| exceeds this.
    pub trace_tol: f64,
    /// Abort when the Fock-tail population exceeds this.
    pub tail_abort: f64,
    /// Abort when the Hermiticity defect exceeds this.
    pub hermiticity_tol: f64,
}

impl Default for EvolveOptions {
    fn default() -> Self {
        EvolveOptions {
            trace_tol: 1e-6,
            tail_abort: 1e-3,
            hermiticity_tol: 1e-8,
        }
    }
}

/// RK4 propagation of the master equation under the drive schedule,
/// recording expectations at every half-period and monitoring trace,
/// Hermiticity and Fock-tail population once per period.
pub fn evolve(
    rho0: &DensityMatrix,
    schedule: &Arc<DriveSchedule>,
    params: &ModelParams,
    n_periods: u64,
    dt_per_period: u64,
    ops: &OperatorSet,
    opts: &EvolveOptions,
) -> Result<QuantumTrajectory> {
    params.validate()?;
    if n_periods == 0 {
        return Err(TqcError::Config("n_periods must be >= 1".into()));
    }
    if dt_per_period == 0 || !dt_per_period.is_multiple_of(2) {
        return Err(TqcError::Config(format!(
            "dt_per_period must be a positive even integer, got {dt_per_period}"
        )));
    }
    debug_assert_eq!(rho0.mat.n, ops.dim);
    let period = schedule.period();
    let half = period / 2.0;
    let dt = period / dt_per_period as f64;
    let steps_per_half = dt_per_period / 2;
    schedule.precompute(n_periods + 1);

    let dim = ops.dim;
    let mut rho = rho0.clone();
    let mut ws = RhsWorkspace::new(dim);
    let mut k1 = CMat::zeros(dim);
    let mut k2 = CMat::zeros(dim);
    let mut k3 = CMat::zeros(dim);
    let mut k4 = CMat::zeros(dim);
    let mut stage = CMat::zeros(dim);

    let n_samples = 2 * n_periods as usize + 1;
    let mut traj = QuantumTrajectory {
        sample_times: Vec::with_capacity(n_samples),
        jx: Vec::with_capacity(n_samples),
        jy: Vec::with_capacity(n_samples),
        jz: Vec::with_capacity(n_samples),
        n_photon: Vec::with_capacity(n_samples),
        tail_pop: Vec::with_capacity(n_samples),
        period,
        n_qubits: ops.n_qubits,
        n_max: ops.n_max,
    };

    let n_f = ops.n_qubits as f64;
    let record = |t: f64, rho: &DensityMatrix, traj: &mut QuantumTrajectory| {
        traj.sample_times.push(t);
        traj.jx.push(ops.jx.expectation(&rho.mat).re / n_f);
        traj.jy.push(ops.jy.expectation(&rho.mat).re / n_f);
        traj.jz.push(ops.jz.expectation(&rho.mat).re / n_f);
        traj.n_photon.push(ops.n_op.expectation(&rho.mat).re);
        traj.tail_pop.push(rho.truncation_tail());
    };
    record(0.0, &rho, &mut traj);

    let half_dt = c(dt / 2.0, 0.0);
    let full_dt = c(dt, 0.0);
    let sixth = c(dt / 6.0, 0.0);
    let two = c(2.0, 0.0);

    let total_steps = n_periods * dt_per_period;
    for k in 0..total_steps {
        let hp = k / steps_per_half;
        let lambda = schedule.amplitude_for_half_period(hp);

        lindblad_rhs_into(&rho.mat, lambda, ops, params, &mut ws, &mut k1);
        stage.data.copy_from_slice(&rho.mat.data);
        stage.axpy(half_dt, &k1);
        lindblad_rhs_into(&stage, lambda, ops, params, &mut ws, &mut k2);
        stage.data.copy_from_slice(&rho.mat.data);
        stage.axpy(half_dt, &k2);
        lindblad_rhs_into(&stage, lambda, ops, params, &mut ws, &mut k3);
        stage.data.copy_from_slice(&rho.mat.data);
        stage.axpy(full_dt, &k3);
        lindblad_rhs_into(&stage, lambda, ops, params, &mut ws, &mut k4);

        for i in 0..rho.mat.data.len() {
            rho.mat.data[i] +=
                sixth * (k1.data[i] + two * k2.data[i] + two * k3.data[i] + k4.data[i]);
        }

        let step_done = k + 1;
        if step_done % steps_per_half == 0 {
            let m = step_done / steps_per_half;
            record(m as f64 * half, &rho, &mut traj);
        }
        if step_done % dt_per_period == 0 {
            let t_now = (step_done / dt_per_period) as f64 * period;
            if !rho.mat.is_finite() {
                return Err(TqcError::Integration {
                    time: t_now,
                    msg: "density matrix became non-finite".into(),
                });
            }
            let trace_drift = (rho.trace() - 1.0).abs();
            if trace_drift > opts.trace_tol {
                return Err(TqcError::Integration {
                    time: t_now,
                    msg: format!(
                        "trace drift {trace_drift:.3e} exceeds {:.1e}; reduce dt (dt_per_period)",
                        opts.trace_tol
                    ),
                });
            }
            let herm = rho.hermiticity_defect();
            if herm > opts.hermiticity_tol {
                return Err(TqcError::Integration {
                    time: t_now,
                    msg: format!(
                        "Hermiticity defect {herm:.3e} exceeds {:.1e}",
                        opts.hermiticity_tol
                    ),
                });
            }
            let tail = rho.truncation_tail();
            if tail > opts.tail_abort {
                return Err(TqcError::Integration {
                    time: t_now,
                    msg: format!(
                        "Fock-tail population {tail:.3e} exceeds {:.1e}; increase n_max (currently {})",
                        opts.tail_abort, ops.n_max
                    ),
                });
            }
        }
    }

    Ok(traj)
}

/// Result of the truncation-adequacy check.
#[derive(Debug, Clone)]
pub struct TruncationReport {
    pub pass: bool,
    pub max_tail: f64,
    pub threshold: f64,
    /// Populated on failure with re-run guidance.
    pub guidance: Option<String>,
}

/// Passes iff the maximum recorded Fock-tail population stays below the
/// threshold (default 1e-6).
pub fn check_truncation(traj: &QuantumTrajectory, threshold: f64) -> TruncationReport {
    let max_tail = traj.max_tail();
    let pass = max_tail < threshold;
    TruncationReport {
        pass,
        max_tail,
        threshold,
        guidance: if pass {
            None
        } else {
            Some(format!(
                "max tail population {max_tail:.3e} >= {threshold:.1e}; re-run with n_max >= {}",
                traj.n_max * 2
            ))
        },
    }
}

/// Default Fock cutoff for a given qubit count: the superradiant cavity
/// field carries roughly N photons at the default working point.
pub fn default_n_max(n_qubits: usize) -> usize {
    if n_qubits <= 6 {
        30
    } else {
        40
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ModelParams;
    use approx::assert_abs_diff_eq;

    fn params() -> ModelParams {
        ModelParams {
            n_qubits: Some(2),
            ..ModelParams::default()
        }
    }

    fn commutator_dense(a: &SparseMat, b: &SparseMat) -> CMat {
        let ad = a.to_dense();
        let bd = b.to_dense();
        let mut out = ad.matmul(&bd);
        let ba = bd.matmul(&ad);
        out.axpy(c(-1.0, 0.0), &ba);
        out
    }

    #[test]
    fn n2_jz_is_spin_one() {
        let ops = build_operators(2, 4, &params(), DEFAULT_MAX_DIM).unwrap();
        let jz = ops.jz_spin.to_dense();
        assert_eq!(jz.at(0, 0), c(1.0, 0.0));
        assert_eq!(jz.at(1, 1), c(0.0, 0.0));
        assert_eq!(jz.at(2, 2), c(-1.0, 0.0));
    }

    #[test]
    fn su2_algebra_holds_up_to_n8() {
        for n in 1..=8usize {
            let ops = build_operators(n, 4, &params(), DEFAULT_MAX_DIM).unwrap();
            let mut comm = commutator_dense(&ops.jx_spin, &ops.jy_spin);
            let jz = ops.jz_spin.to_dense();
            comm.axpy(c(0.0, -1.0), &jz); // [Jx, Jy] − iJz
            assert!(comm.max_abs() < 1e-12, "su(2) defect at N = {n}");
        }
    }

    #[test]
    fn number_operator_spectrum() {
        let ops = build_operators(1, 7, &params(), DEFAULT_MAX_DIM).unwrap();
        let nd = ops.n_fock.to_dense();
        for k in 0..=7 {
            assert_eq!(nd.at(k, k), c(k as f64, 0.0));
        }
        // a†a equals the diagonal number operator
        let prod = ops.adag_fock.to_dense().matmul(&ops.a_fock.to_dense());
        let mut diff = prod;
        diff.axpy(c(-1.0, 0.0), &nd);
        assert!(diff.max_abs() < 1e-12);
    }

    #[test]
    fn resource_cap_is_enforced() {
        let err = build_operators(100, 100, &params(), 500).unwrap_err();
        match err {
            TqcError::Resource(msg) => assert!(msg.contains("exceeds the cap")),
            other => panic!("expected resource error, got {other:?}"),
        }
    }

    #[test]
    fn build_rejects_degenerate_sizes() {
        assert!(build_operators(0, 10, &params(), DEFAULT_MAX_DIM).is_err());
        assert!(build_operators(2, 3, &params(), DEFAULT_MAX_DIM).is_err());
    }

    #[test]
    fn initial_state_expectations() {
        for n in [1usize, 2, 4] {
            let p = params();
            let ops = build_operators(n, 6, &p, DEFAULT_MAX_DIM).unwrap();
            let rho = initial_state_with_ops(&ops);
            assert_abs_diff_eq!(
                ops.jx.expectation(&rho.mat).re / n as f64,
                0.5,
                epsilon = 1e-12
            );
            assert_abs_diff_eq!(ops.jy.expectation(&rho.mat).re, 0.0, epsilon = 1e-12);
            assert_abs_diff_eq!(ops.jz.expectation(&rho.mat).re, 0.0, epsilon = 1e-12);
            assert_abs_diff_eq!(ops.n_op.expectation(&rho.mat).re, 0.0, epsilon = 1e-12);
            assert_abs_diff_eq!(rho.purity(), 1.0, epsilon = 1e-12);
            assert_abs_diff_eq!(rho.trace(), 1.0, epsilon = 1e-12);
        }
        // N = 1 amplitudes are (1/√2, 1/√2): check the spin-block entries.
        let p = params();
        let ops = build_operators(1, 4, &p, DEFAULT_MAX_DIM).unwrap();
        let rho = initial_state_with_ops(&ops);
        assert_abs_diff_eq!(rho.mat.at(0, 0).re, 0.5, epsilon = 1e-14);
        assert_abs_diff_eq!(rho.mat.at(0, 1).re, 0.5, epsilon = 1e-14);
        assert_abs_diff_eq!(rho.mat.at(1, 1).re, 0.5, epsilon = 1e-14);
    }

    fn random_hermitian(dim: usize, seed: &mut u64) -> CMat {
        let mut next = || {
            *seed = seed
                .wrapping_mul(6364136223846793005)
                .wrapping_add(1442695040888963407);
            (*seed >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        };
        let mut m = CMat::zeros(dim);
        for i in 0..dim {
            m.set(i, i, c(next(), 0.0));
            for j in (i + 1)..dim {
                let z = c(next(), next());
                m.set(i, j, z);
                m.set(j, i, z.conj());
            }
        }
        // normalize to unit trace so it resembles a state
        let tr = m.trace().re;
        if tr.abs() > 1e-9 {
            m.scale(c(1.0 / tr, 0.0));
        }
        m
    }

    #[test]
    fn rhs_is_traceless_and_hermiticity_preserving() {
        let p = params();
        let ops = build_operators(2, 5, &p, DEFAULT_MAX_DIM).unwrap();
        let mut seed = 42u64;
        for _ in 0..5 {
            let m = random_hermitian(ops.dim, &mut seed);
            let rho = DensityMatrix {
                mat: m,
                n_qubits: 2,
                n_max: 5,
            };
            let out = lindblad_rhs(&rho, 0.7, &ops, &p);
            assert!(out.trace().norm() < 1e-12, "trace = {}", out.trace());
            assert!(out.hermiticity_defect() < 1e-12);
        }
    }

    #[test]
    fn dark_state_is_stationary_at_zero_coupling() {
        // |↓…↓⟩⟨↓…↓| ⊗ |0⟩⟨0| is an energy eigenstate and the vacuum is dark
        // for the photon-loss dissipator.
        let p = params();
        let ops = build_operators(3, 5, &p, DEFAULT_MAX_DIM).unwrap();
        let dim_spin = 4;
        let mut mat = CMat::zeros(ops.dim);
        mat.set(dim_spin - 1, dim_spin - 1, c(1.0, 0.0)); // m = −J, vacuum block
        let rho = DensityMatrix {
            mat,
            n_qubits: 3,
            n_max: 5,
        };
        let out = lindblad_rhs(&rho, 0.0, &ops, &p);
        assert!(out.max_abs() < 1e-14);
    }

    #[test]
    fn ehrenfest_identity_for_photon_amplitude() {
        // d⟨a⟩/dt from the rhs must equal (−iω − κ/2)⟨a⟩ − (2iλ/√N)⟨Jx⟩.
        let p = params();
        let ops = build_operators(2, 6, &p, DEFAULT_MAX_DIM).unwrap();
        let dim_spin = 3;
        let mut seed = 7u64;
        for _ in 0..5 {
            let mut m = random_hermitian(ops.dim, &mut seed);
            // The identity is exact only away from the Fock cutoff, where
            // [a, a†] = 1 still holds; zero the top two photon levels.
            for i in 0..ops.dim {
                for j in 0..ops.dim {
                    if i / dim_spin >= 5 || j / dim_spin >= 5 {
                        m.set(i, j, c(0.0, 0.0));
                    }
                }
            }
            let rho = DensityMatrix {
                mat: m,
                n_qubits: 2,
                n_max: 6,
            };
            let lambda = 0.9;
            let rhs = lindblad_rhs(&rho, lambda, &ops, &p);
            let da_dt = ops.a.expectation(&rhs);
            let a_exp = ops.a.expectation(&rho.mat);
            let jx_exp = ops.jx.expectation(&rho.mat);
            let want = (c(0.0, -p.omega) - c(p.kappa / 2.0, 0.0)) * a_exp
                - c(0.0, 2.0 * lambda / (2.0f64).sqrt()) * jx_exp;
            assert!(
                (da_dt - want).norm() < 1e-10,
                "Ehrenfest mismatch: {da_dt} vs {want}"
            );
        }
    }

    #[test]
    fn coherent_state_decays_analytically() {
        // λ ≡ 0 with a small coherent photon amplitude:
        // ⟨a⟩(t) = ⟨a⟩(0) e^{(−iω − κ/2)t}.
        let p = params();
        let ops = build_operators(1, 12, &p, DEFAULT_MAX_DIM).unwrap();
        let alpha = c(0.6, 0.2);
        // coherent amplitudes on the Fock factor, spin fixed to |↓⟩
        let dim_spin = 2;
        let mut amps = vec![c(0.0, 0.0); ops.dim];
        let norm = (-alpha.norm_sqr() / 2.0).exp();
        let mut fact = 1.0f64;
        for n in 0..=12usize {
            if n > 0 {
                fact *= n as f64;
            }
            amps[n * dim_spin + 1] = c(norm, 0.0) * alpha.powu(n as u32) / fact.sqrt();
        }
        let mut mat = CMat::zeros(ops.dim);
        for i in 0..ops.dim {
            for j in 0..ops.dim {
                mat.set(i, j, amps[i] * amps[j].conj());
            }
        }
        let rho0 = DensityMatrix {
            mat,
            n_qubits: 1,
            n_max: 12,
        };
        let zero_drive = p;
        // Step the rhs directly with λ = 0 held for the whole run.
        let period = 2.0 * std::f64::consts::PI / zero_drive.omega0;
        let dt = period / 500.0;
        let steps = 500 * 5; // five periods
        let mut rho = rho0.clone();
        let mut ws = RhsWorkspace::new(ops.dim);
        let mut k1 = CMat::zeros(ops.dim);
        let mut k2 = CMat::zeros(ops.dim);
        let mut k3 = CMat::zeros(ops.dim);
        let mut k4 = CMat::zeros(ops.dim);
        let mut stage = CMat::zeros(ops.dim);
        for _ in 0..steps {
            lindblad_rhs_into(&rho.mat, 0.0, &ops, &zero_drive, &mut ws, &mut k1);
            stage.data.copy_from_slice(&rho.mat.data);
            stage.axpy(c(dt / 2.0, 0.0), &k1);
            lindblad_rhs_into(&stage, 0.0, &ops, &zero_drive, &mut ws, &mut k2);
            stage.data.copy_from_slice(&rho.mat.data);
            stage.axpy(c(dt / 2.0, 0.0), &k2);
            lindblad_rhs_into(&stage, 0.0, &ops, &zero_drive, &mut ws, &mut k3);
            stage.data.copy_from_slice(&rho.mat.data);
            stage.axpy(c(dt, 0.0), &k3);
            lindblad_rhs_into(&stage, 0.0, &ops, &zero_drive, &mut ws, &mut k4);
            for i in 0..rho.mat.data.len() {
                rho.mat.data[i] += c(dt / 6.0, 0.0)
                    * (k1.data[i] + c(2.0, 0.0) * (k2.data[i] + k3.data[i]) + k4.data[i]);
            }
        }
        let t_total = steps as f64 * dt;
        let decay = (c(0.0, -zero_drive.omega) - c(zero_drive.kappa / 2.0, 0.0)) * t_total;
        let want = alpha * decay.exp();
        let got = ops.a.expectation(&rho.mat);
        assert!((got - want).norm() < 1e-8, "got {got}, want {want}");
    }

    #[test]
    fn truncation_check_examples() {
        let traj = QuantumTrajectory {
            sample_times: vec![0.0, 1.0],
            jx: vec![0.5, 0.4],
            jy: vec![0.0, 0.0],
            jz: vec![0.0, 0.0],
            n_photon: vec![0.0, 0.0],
            tail_pop: vec![0.0, 0.0],
            period: 1.0,
            n_qubits: 2,
            n_max: 20,
        };
        let rep = check_truncation(&traj, 1e-6);
        assert!(rep.pass);
        assert_eq!(rep.max_tail, 0.0);

        let mut bad = traj.clone();
        bad.tail_pop = vec![0.0, 1e-3];
        let rep = check_truncation(&bad, 1e-6);
        assert!(!rep.pass);
        assert!(rep.guidance.unwrap().contains("n_max"));
    }
}
