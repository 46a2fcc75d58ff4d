//! Minimal dense/sparse complex matrix layer sized for the symmetric-sector
//! Lindblad problem: dimensions of a few hundred, operators with O(dim)
//! nonzeros applied to dense density matrices.

use num_complex::Complex64;

/// Dense row-major complex matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CMat {
    pub n: usize,
    pub data: Vec<Complex64>,
}

impl CMat {
    pub fn zeros(n: usize) -> Self {
        CMat {
            n,
            data: vec![Complex64::new(0.0, 0.0); n * n],
        }
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> Complex64 {
        self.data[i * self.n + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: Complex64) {
        self.data[i * self.n + j] = v;
    }

    pub fn trace(&self) -> Complex64 {
        (0..self.n).map(|i| self.at(i, i)).sum()
    }

    pub fn fill_zero(&mut self) {
        self.data.fill(Complex64::new(0.0, 0.0));
    }

    /// self += alpha * other
    pub fn axpy(&mut self, alpha: Complex64, other: &CMat) {
        debug_assert_eq!(self.n, other.n);
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += alpha * b;
        }
    }

    pub fn scale(&mut self, alpha: Complex64) {
        for a in self.data.iter_mut() {
            *a *= alpha;
        }
    }

    /// Largest |self[i][j] − conj(self[j][i])| over all entries.
    pub fn hermiticity_defect(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.n {
            for j in i..self.n {
                let d = (self.at(i, j) - self.at(j, i).conj()).norm();
                worst = worst.max(d);
            }
        }
        worst
    }

    pub fn adjoint(&self) -> CMat {
        let mut out = CMat::zeros(self.n);
        for i in 0..self.n {
            for j in 0..self.n {
                out.set(j, i, self.at(i, j).conj());
            }
        }
        out
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.data
            .iter()
            .all(|z| z.re.is_finite() && z.im.is_finite())
    }

    /// Naive dense product, for tests and operator construction only.
    pub fn matmul(&self, other: &CMat) -> CMat {
        debug_assert_eq!(self.n, other.n);
        let n = self.n;
        let mut out = CMat::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let a = self.at(i, k);
                if a.norm_sqr() == 0.0 {
                    continue;
                }
                for j in 0..n {
                    out.data[i * n + j] += a * other.at(k, j);
                }
            }
        }
        out
    }
}

/// Row-oriented sparse complex matrix (square).
#[derive(Debug, Clone)]
pub struct SparseMat {
    pub n: usize,
    /// rows[i] holds the (column, value) pairs of row i, column-sorted.
    pub rows: Vec<Vec<(usize, Complex64)>>,
}

impl SparseMat {
    pub fn zeros(n: usize) -> Self {
        SparseMat {
            n,
            rows: vec![Vec::new(); n],
        }
    }

    pub fn from_triplets(n: usize, triplets: &[(usize, usize, Complex64)]) -> Self {
        let mut m = SparseMat::zeros(n);
        for &(i, j, v) in triplets {
            if v.norm_sqr() != 0.0 {
                m.rows[i].push((j, v));
            }
        }
        for row in m.rows.iter_mut() {
            row.sort_by_key(|e| e.0);
        }
        m
    }

    pub fn diag(values: &[Complex64]) -> Self {
        let n = values.len();
        let mut m = SparseMat::zeros(n);
        for (i, &v) in values.iter().enumerate() {
            if v.norm_sqr() != 0.0 {
                m.rows[i].push((i, v));
            }
        }
        m
    }

    pub fn identity(n: usize) -> Self {
        SparseMat::diag(&vec![Complex64::new(1.0, 0.0); n])
    }

    pub fn nnz(&self) -> usize {
        self.rows.iter().map(|r| r.len()).sum()
    }

    pub fn adjoint(&self) -> SparseMat {
        let mut triplets = Vec::with_capacity(self.nnz());
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, v) in row {
                triplets.push((j, i, v.conj()));
            }
        }
        SparseMat::from_triplets(self.n, &triplets)
    }

    /// Entrywise linear combination alpha*self + beta*other.
    pub fn linear_combination(
        &self,
        alpha: Complex64,
        other: &SparseMat,
        beta: Complex64,
    ) -> SparseMat {
        debug_assert_eq!(self.n, other.n);
        let mut triplets = Vec::with_capacity(self.nnz() + other.nnz());
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, v) in row {
                triplets.push((i, j, alpha * v));
            }
        }
        for (i, row) in other.rows.iter().enumerate() {
            for &(j, v) in row {
                triplets.push((i, j, beta * v));
            }
        }
        // merge duplicates
        let mut m = SparseMat::zeros(self.n);
        for (i, j, v) in triplets {
            m.rows[i].push((j, v));
        }
        for row in m.rows.iter_mut() {
            row.sort_by_key(|e| e.0);
            let mut merged: Vec<(usize, Complex64)> = Vec::with_capacity(row.len());
            for &(j, v) in row.iter() {
                if let Some(last) = merged.last_mut() {
                    if last.0 == j {
                        last.1 += v;
                        continue;
                    }
                }
                merged.push((j, v));
            }
            merged.retain(|e| e.1.norm_sqr() != 0.0);
            *row = merged;
        }
        m
    }

    /// Kronecker product self ⊗ other.
    pub fn kron(&self, other: &SparseMat) -> SparseMat {
        let n = self.n * other.n;
        let mut m = SparseMat::zeros(n);
        for (ia, rowa) in self.rows.iter().enumerate() {
            for &(ja, va) in rowa {
                for (ib, rowb) in other.rows.iter().enumerate() {
                    let i = ia * other.n + ib;
                    for &(jb, vb) in rowb {
                        let j = ja * other.n + jb;
                        m.rows[i].push((j, va * vb));
                    }
                }
            }
        }
        for row in m.rows.iter_mut() {
            row.sort_by_key(|e| e.0);
        }
        m
    }

    /// out += alpha * self * rho
    pub fn apply_left_add(&self, alpha: Complex64, rho: &CMat, out: &mut CMat) {
        debug_assert_eq!(self.n, rho.n);
        let n = self.n;
        for (i, row) in self.rows.iter().enumerate() {
            let out_row = &mut out.data[i * n..(i + 1) * n];
            for &(j, v) in row {
                let av = alpha * v;
                let rho_row = &rho.data[j * n..(j + 1) * n];
                for (o, r) in out_row.iter_mut().zip(rho_row) {
                    *o += av * r;
                }
            }
        }
    }

    /// out += alpha * rho * self
    pub fn apply_right_add(&self, alpha: Complex64, rho: &CMat, out: &mut CMat) {
        debug_assert_eq!(self.n, rho.n);
        let n = self.n;
        for (j, row) in self.rows.iter().enumerate() {
            for &(k, v) in row {
                let av = alpha * v;
                for r in 0..n {
                    out.data[r * n + k] += av * rho.data[r * n + j];
                }
            }
        }
    }

    /// Tr(self · rho)
    pub fn expectation(&self, rho: &CMat) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, v) in row {
                acc += v * rho.at(j, i);
            }
        }
        acc
    }

    pub fn to_dense(&self) -> CMat {
        let mut m = CMat::zeros(self.n);
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, v) in row {
                m.data[i * self.n + j] += v;
            }
        }
        m
    }
}

/// Smallest eigenvalue of a Hermitian matrix, via cyclic Jacobi sweeps on
/// the real symmetric embedding [[Re, −Im], [Im, Re]]. Each eigenvalue of
/// the embedding appears twice; the minimum is unaffected. Intended for
/// occasional positivity checks, not for inner loops.
pub fn hermitian_min_eigenvalue(m: &CMat) -> f64 {
    let n = m.n;
    let dim = 2 * n;
    let mut a = vec![0.0f64; dim * dim];
    for i in 0..n {
        for j in 0..n {
            let z = m.at(i, j);
            a[i * dim + j] = z.re;
            a[i * dim + (j + n)] = -z.im;
            a[(i + n) * dim + j] = z.im;
            a[(i + n) * dim + (j + n)] = z.re;
        }
    }
    // symmetrize against roundoff
    for i in 0..dim {
        for j in (i + 1)..dim {
            let avg = 0.5 * (a[i * dim + j] + a[j * dim + i]);
            a[i * dim + j] = avg;
            a[j * dim + i] = avg;
        }
    }
    let max_sweeps = 30;
    for _ in 0..max_sweeps {
        let mut off = 0.0f64;
        for i in 0..dim {
            for j in (i + 1)..dim {
                off += a[i * dim + j] * a[i * dim + j];
            }
        }
        if off.sqrt() < 1e-12 {
            break;
        }
        for p in 0..dim {
            for q in (p + 1)..dim {
                let apq = a[p * dim + q];
                if apq.abs() < 1e-300 {
                    continue;
                }
                let app = a[p * dim + p];
                let aqq = a[q * dim + q];
                let theta = 0.5 * (aqq - app) / apq;
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..dim {
                    let akp = a[k * dim + p];
                    let akq = a[k * dim + q];
                    a[k * dim + p] = c * akp - s * akq;
                    a[k * dim + q] = s * akp + c * akq;
                }
                for k in 0..dim {
                    let apk = a[p * dim + k];
                    let aqk = a[q * dim + k];
                    a[p * dim + k] = c * apk - s * aqk;
                    a[q * dim + k] = s * apk + c * aqk;
                }
            }
        }
    }
    (0..dim)
        .map(|i| a[i * dim + i])
        .fold(f64::INFINITY, f64::min)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn sparse_apply_matches_dense() {
        let a = SparseMat::from_triplets(
            3,
            &[
                (0, 1, c(1.0, 0.5)),
                (1, 0, c(0.0, -2.0)),
                (2, 2, c(3.0, 0.0)),
            ],
        );
        let mut rho = CMat::zeros(3);
        let mut v = 1.0;
        for i in 0..3 {
            for j in 0..3 {
                rho.set(i, j, c(v, -v / 2.0));
                v += 1.0;
            }
        }
        let dense_a = a.to_dense();
        let want_left = dense_a.matmul(&rho);
        let mut got_left = CMat::zeros(3);
        a.apply_left_add(c(1.0, 0.0), &rho, &mut got_left);
        for (x, y) in got_left.data.iter().zip(&want_left.data) {
            assert!((x - y).norm() < 1e-14);
        }
        let want_right = rho.matmul(&dense_a);
        let mut got_right = CMat::zeros(3);
        a.apply_right_add(c(1.0, 0.0), &rho, &mut got_right);
        for (x, y) in got_right.data.iter().zip(&want_right.data) {
            assert!((x - y).norm() < 1e-14);
        }
        // expectation = trace of product
        let prod = dense_a.matmul(&rho);
        assert!((a.expectation(&rho) - prod.trace()).norm() < 1e-13);
    }

    #[test]
    fn kron_matches_definition() {
        let a = SparseMat::from_triplets(2, &[(0, 0, c(1.0, 0.0)), (0, 1, c(2.0, 0.0))]);
        let b = SparseMat::from_triplets(2, &[(1, 0, c(0.0, 1.0))]);
        let k = a.kron(&b).to_dense();
        assert!((k.at(1, 0) - c(0.0, 1.0)).norm() < 1e-15);
        assert!((k.at(1, 2) - c(0.0, 2.0)).norm() < 1e-15);
        assert_eq!(k.at(0, 0), c(0.0, 0.0));
    }

    #[test]
    fn jacobi_min_eigenvalue_of_known_matrix() {
        // Hermitian 2x2 with eigenvalues 1 ± |z| for diag(1,1), offdiag z.
        let mut m = CMat::zeros(2);
        m.set(0, 0, c(1.0, 0.0));
        m.set(1, 1, c(1.0, 0.0));
        m.set(0, 1, c(0.3, 0.4));
        m.set(1, 0, c(0.3, -0.4));
        let min = hermitian_min_eigenvalue(&m);
        assert!((min - 0.5).abs() < 1e-10, "min = {min}");
    }
}
