//! Symmetric Toeplitz matrices and FFT matrix-vector products by circulant embedding.

use std::fmt;
use std::sync::{Arc, Mutex};

use realfft::num_complex::Complex64;
use realfft::{ComplexToReal, RealFftPlanner, RealToComplex};

use crate::dense::{diff_dot, two_sum, DenseMatrix};
use crate::error::{Error, Result};

/// Symmetric Toeplitz matrix stored by its first row; entry `k` sits on the
/// `k`-th super- and sub-diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct SymToeplitz {
    first_row: Vec<f64>,
}

impl SymToeplitz {
    pub fn new(first_row: Vec<f64>) -> Result<Self> {
        if first_row.is_empty() {
            return Err(Error::Domain("Toeplitz matrix needs dimension >= 1".into()));
        }
        Ok(Self { first_row })
    }

    pub fn identity(dim: usize) -> Self {
        let mut first_row = vec![0.0; dim.max(1)];
        first_row[0] = 1.0;
        Self { first_row }
    }

    pub fn dim(&self) -> usize {
        self.first_row.len()
    }

    pub fn first_row(&self) -> &[f64] {
        &self.first_row
    }

    pub fn diagonal(&self) -> f64 {
        self.first_row[0]
    }

    #[inline]
    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.first_row[i.abs_diff(j)]
    }

    /// `self + scale * other`, entrywise on the first rows.
    pub fn add_scaled(&self, scale: f64, other: &SymToeplitz) -> Result<SymToeplitz> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: other.dim() });
        }
        let first_row = self
            .first_row
            .iter()
            .zip(&other.first_row)
            .map(|(a, b)| a + scale * b)
            .collect();
        Ok(SymToeplitz { first_row })
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let n = self.dim();
        DenseMatrix::from_fn(n, n, |i, j| self.entry(i, j))
    }

    /// Maximum absolute column sum.
    pub fn norm1(&self) -> f64 {
        let n = self.dim();
        let abs: Vec<f64> = self.first_row.iter().map(|v| v.abs()).collect();
        let mut prefix = vec![0.0; n + 1];
        for k in 0..n {
            prefix[k + 1] = prefix[k] + abs[k];
        }
        // column j sums |r_0| + sum_{k=1..j}|r_k| + sum_{k=1..n-1-j}|r_k|
        (0..n)
            .map(|j| prefix[j + 1] + prefix[n - j] - abs[0])
            .fold(0.0, f64::max)
    }

    /// Dense O(n^2) product, used as an oracle and for tiny systems.
    pub fn dense_matvec(&self, x: &[f64]) -> Vec<f64> {
        let n = self.dim();
        assert_eq!(x.len(), n);
        (0..n)
            .map(|i| (0..n).map(|j| self.entry(i, j) * x[j]).sum())
            .collect()
    }

    /// Row sums, accumulated in double-double.
    pub fn row_sums(&self) -> Vec<f64> {
        let n = self.dim();
        let r = &self.first_row;
        // prefix[k] = sum_{d=1..k} r_d as (hi, lo)
        let mut prefix = vec![(0.0, 0.0); n];
        for k in 1..n {
            let (hi, lo) = prefix[k - 1];
            let (s, e) = two_sum(hi, r[k]);
            prefix[k] = (s, lo + e);
        }
        (0..n)
            .map(|i| {
                let (a, b) = (prefix[i], prefix[n - 1 - i]);
                let (s1, e1) = two_sum(r[0], a.0);
                let (s2, e2) = two_sum(s1, b.0);
                s2 + (e1 + e2 + a.1 + b.1)
            })
            .collect()
    }

    /// `out = T x` by direct summation in difference form,
    /// `(T x)_i = s_i x_i + sum_{j != i} t_ij (x_j - x_i)` with `s_i` the row
    /// sum. For nearly row-sum-free rows and smooth `x` the terms are small,
    /// so the rounding error is far below that of the FFT product or of the
    /// plain sum. O(n^2).
    pub fn direct_matvec_into(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        let n = self.dim();
        if x.len() != n || out.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: x.len().min(out.len()) });
        }
        let r = &self.first_row;
        let sums = self.row_sums();
        // reversed[n - 1 - k] = r_k, so row i's left part is contiguous
        let reversed: Vec<f64> = r.iter().rev().copied().collect();
        for (i, o) in out.iter_mut().enumerate() {
            let xi = x[i];
            let left = diff_dot(&reversed[n - 1 - i..n - 1], &x[..i], xi);
            let right = diff_dot(&r[1..n - i], &x[i + 1..], xi);
            *o = sums[i] * xi + (left + right);
        }
        Ok(())
    }

    pub fn direct_matvec(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.dim()];
        self.direct_matvec_into(x, &mut out)?;
        Ok(out)
    }

    pub fn plan(&self) -> CirculantPlan {
        CirculantPlan::new(self)
    }
}

/// Real-input forward/inverse transform pair of one length.
#[derive(Clone)]
struct RealFft {
    size: usize,
    forward: Arc<dyn RealToComplex<f64>>,
    inverse: Arc<dyn ComplexToReal<f64>>,
}

impl RealFft {
    fn new(size: usize) -> Self {
        let mut planner = RealFftPlanner::<f64>::new();
        Self { size, forward: planner.plan_fft_forward(size), inverse: planner.plan_fft_inverse(size) }
    }

    fn buffers(&self) -> FftBuffers {
        let scratch = self.forward.get_scratch_len().max(self.inverse.get_scratch_len());
        FftBuffers {
            real: vec![0.0; self.size],
            spectrum: vec![Complex64::new(0.0, 0.0); self.size / 2 + 1],
            scratch: vec![Complex64::new(0.0, 0.0); scratch],
        }
    }

    /// Transform of `x` zero-padded to the full length.
    fn transform(&self, x: &[f64]) -> Vec<Complex64> {
        let mut w = self.buffers();
        w.real[..x.len()].copy_from_slice(x);
        self.forward
            .process_with_scratch(&mut w.real, &mut w.spectrum, &mut w.scratch)
            .expect("buffer lengths match the plan");
        w.spectrum
    }

    /// Linear convolution with a kernel given by its transform, pre-divided
    /// by the length; the result stays in `w.real`.
    fn convolve(&self, x: &[f64], kernel_hat: &[Complex64], w: &mut FftBuffers) {
        w.real[..x.len()].copy_from_slice(x);
        w.real[x.len()..].iter_mut().for_each(|v| *v = 0.0);
        self.forward
            .process_with_scratch(&mut w.real, &mut w.spectrum, &mut w.scratch)
            .expect("buffer lengths match the plan");
        for (b, k) in w.spectrum.iter_mut().zip(kernel_hat) {
            *b *= *k;
        }
        // the inverse of a real signal has real DC and Nyquist bins
        let last = w.spectrum.len() - 1;
        w.spectrum[0].im = 0.0;
        w.spectrum[last].im = 0.0;
        self.inverse
            .process_with_scratch(&mut w.spectrum, &mut w.real, &mut w.scratch)
            .expect("buffer lengths match the plan");
    }
}

#[derive(Debug, Clone)]
struct FftBuffers {
    real: Vec<f64>,
    spectrum: Vec<Complex64>,
    scratch: Vec<Complex64>,
}

/// Circulant embedding of a symmetric Toeplitz matrix with the transform of
/// its first column precomputed. Immutable after construction; concurrent
/// callers pass their own [`CirculantScratch`].
#[derive(Clone)]
pub struct CirculantPlan {
    dim: usize,
    fft: RealFft,
    /// Transform of the embedding column, pre-divided by the length.
    column_hat: Vec<Complex64>,
}

impl fmt::Debug for CirculantPlan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CirculantPlan")
            .field("dim", &self.dim)
            .field("size", &self.fft.size)
            .finish_non_exhaustive()
    }
}

/// Per-call work buffers for [`CirculantPlan::matvec_with`].
#[derive(Debug, Clone)]
pub struct CirculantScratch {
    buffers: FftBuffers,
}

impl CirculantPlan {
    pub fn new(matrix: &SymToeplitz) -> Self {
        let dim = matrix.dim();
        let size = (2 * dim - 1).next_power_of_two();
        let fft = RealFft::new(size);
        let row = matrix.first_row();
        let mut column = vec![0.0; size];
        column[0] = row[0];
        for k in 1..dim {
            column[k] = row[k];
            column[size - k] = row[k];
        }
        let mut column_hat = fft.transform(&column);
        // symmetric embedding: the spectrum is real up to rounding
        for c in &mut column_hat {
            *c = Complex64::new(c.re / size as f64, 0.0);
        }
        Self { dim, fft, column_hat }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Embedding length.
    pub fn size(&self) -> usize {
        self.fft.size
    }

    /// Eigenvalues of the embedding circulant, pre-divided by the length.
    pub fn spectrum(&self) -> Vec<f64> {
        let n = self.fft.size;
        (0..n).map(|k| self.column_hat[k.min(n - k)].re).collect()
    }

    pub fn scratch(&self) -> CirculantScratch {
        CirculantScratch { buffers: self.fft.buffers() }
    }

    pub fn matvec(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.dim];
        let mut scratch = self.scratch();
        self.matvec_with(x, &mut out, &mut scratch)?;
        Ok(out)
    }

    pub fn matvec_with(
        &self,
        x: &[f64],
        out: &mut [f64],
        scratch: &mut CirculantScratch,
    ) -> Result<()> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: x.len() });
        }
        if out.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: out.len() });
        }
        if scratch.buffers.real.len() != self.fft.size {
            *scratch = self.scratch();
        }
        self.fft.convolve(x, &self.column_hat, &mut scratch.buffers);
        out.copy_from_slice(&scratch.buffers.real[..self.dim]);
        Ok(())
    }
}

/// Rectangular Toeplitz block `B[i][j] = kernel[i + shift - j]` (zero outside
/// the kernel), applied by linear convolution with a precomputed transform.
pub struct ToeplitzBlock {
    rows: usize,
    cols: usize,
    shift: usize,
    fft: RealFft,
    kernel_hat: Vec<Complex64>,
    /// Reused across calls.
    work: Mutex<FftBuffers>,
}

impl Clone for ToeplitzBlock {
    fn clone(&self) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            shift: self.shift,
            fft: self.fft.clone(),
            kernel_hat: self.kernel_hat.clone(),
            work: Mutex::new(self.fft.buffers()),
        }
    }
}

impl fmt::Debug for ToeplitzBlock {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ToeplitzBlock")
            .field("rows", &self.rows)
            .field("cols", &self.cols)
            .field("shift", &self.shift)
            .finish_non_exhaustive()
    }
}

impl ToeplitzBlock {
    pub fn new(kernel: &[f64], rows: usize, cols: usize, shift: usize) -> Result<Self> {
        if rows == 0 || cols == 0 || kernel.is_empty() {
            return Err(Error::Domain("Toeplitz block needs nonzero sizes".into()));
        }
        let size = (kernel.len() + cols - 1).max(rows + shift).next_power_of_two();
        let fft = RealFft::new(size);
        let scaled: Vec<f64> = kernel.iter().map(|v| v / size as f64).collect();
        let kernel_hat = fft.transform(&scaled);
        let work = Mutex::new(fft.buffers());
        Ok(Self { rows, cols, shift, fft, kernel_hat, work })
    }

    /// Lower-triangular Toeplitz matrix with first column `column`.
    pub fn lower(column: &[f64]) -> Result<Self> {
        Self::new(column, column.len(), column.len(), 0)
    }

    /// The block of `t` with rows `r0, r0 + stride, ...` and columns
    /// `c0, c0 + stride, ...`.
    pub fn strided(
        t: &SymToeplitz,
        r0: usize,
        rows: usize,
        c0: usize,
        cols: usize,
        stride: usize,
    ) -> Result<Self> {
        // entry (i, j) depends on q = i - j only; kernel index q + cols - 1
        let kernel: Vec<f64> = (0..rows + cols - 1)
            .map(|p| {
                let q = p as i64 - (cols as i64 - 1);
                let d = (r0 as i64 - c0 as i64 + stride as i64 * q).unsigned_abs() as usize;
                t.first_row().get(d).copied().unwrap_or(0.0)
            })
            .collect();
        Self::new(&kernel, rows, cols, cols - 1)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.cols {
            return Err(Error::DimensionMismatch { expected: self.cols, got: x.len() });
        }
        let mut w = self.work.lock().unwrap_or_else(|e| e.into_inner());
        self.fft.convolve(x, &self.kernel_hat, &mut w);
        Ok(w.real[self.shift..self.shift + self.rows].to_vec())
    }
}

/// First column of the inverse of the lower-triangular Toeplitz matrix with
/// first column `column`, by forward substitution. O(n^2).
pub fn lower_inverse_column(column: &[f64]) -> Result<Vec<f64>> {
    let l0 = column.first().copied().unwrap_or(0.0);
    if l0 == 0.0 || !l0.is_finite() {
        return Err(Error::Domain("triangular Toeplitz matrix is singular".into()));
    }
    let n = column.len();
    let mut g = vec![0.0; n];
    g[0] = 1.0 / l0;
    for k in 1..n {
        let s: f64 = column[1..=k].iter().zip(g[..k].iter().rev()).map(|(a, b)| a * b).sum();
        g[k] = -s / l0;
    }
    Ok(g)
}

/// A Toeplitz matrix bundled with its FFT plan.
#[derive(Debug, Clone)]
pub struct ToeplitzOperator {
    matrix: SymToeplitz,
    plan: CirculantPlan,
}

impl ToeplitzOperator {
    pub fn new(matrix: SymToeplitz) -> Self {
        let plan = matrix.plan();
        Self { matrix, plan }
    }

    pub fn matrix(&self) -> &SymToeplitz {
        &self.matrix
    }

    pub fn plan(&self) -> &CirculantPlan {
        &self.plan
    }

    pub fn dim(&self) -> usize {
        self.matrix.dim()
    }

    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.plan.matvec(x)
    }

    pub fn apply_with(&self, x: &[f64], out: &mut [f64], scratch: &mut CirculantScratch) -> Result<()> {
        self.plan.matvec_with(x, out, scratch)
    }

    /// `b - A x`.
    pub fn residual(&self, b: &[f64], x: &[f64], scratch: &mut CirculantScratch) -> Result<Vec<f64>> {
        let mut r = vec![0.0; self.dim()];
        self.plan.matvec_with(x, &mut r, scratch)?;
        for (ri, bi) in r.iter_mut().zip(b) {
            *ri = bi - *ri;
        }
        Ok(r)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_by_one() {
        let t = SymToeplitz::new(vec![2.5]).unwrap();
        let plan = t.plan();
        assert_eq!(plan.size(), 1);
        assert!((plan.matvec(&[3.0]).unwrap()[0] - 7.5).abs() < 1e-15);
    }

    #[test]
    fn identity_is_identity() {
        let t = SymToeplitz::identity(37);
        let x: Vec<f64> = (0..37).map(|i| (i as f64).sin()).collect();
        let y = t.plan().matvec(&x).unwrap();
        for (a, b) in x.iter().zip(&y) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn dense_materialization_round_trips() {
        let row = vec![4.0, -1.0, 0.5, -0.25];
        let t = SymToeplitz::new(row.clone()).unwrap();
        let d = t.to_dense();
        assert!(d.is_symmetric());
        assert_eq!(d.row(0), &row[..]);
        for k in 0..4 {
            for i in 0..4 - k {
                assert_eq!(d[(i, i + k)], row[k]);
            }
        }
    }

    #[test]
    fn length_mismatch_is_error() {
        let plan = SymToeplitz::identity(4).plan();
        assert!(matches!(
            plan.matvec(&[1.0, 2.0]),
            Err(Error::DimensionMismatch { expected: 4, got: 2 })
        ));
    }

    #[test]
    fn alternating_vector_matches_dense() {
        let row: Vec<f64> = (0..300).map(|k| 1.0 / (1.0 + k as f64).powf(1.6)).collect();
        let t = SymToeplitz::new(row).unwrap();
        let x: Vec<f64> = (0..300).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
        let fast = t.plan().matvec(&x).unwrap();
        let slow = t.dense_matvec(&x);
        let scale = t.norm1();
        for (a, b) in fast.iter().zip(&slow) {
            assert!((a - b).abs() <= 1e-12 * scale);
        }
    }

    #[test]
    fn norm1_matches_dense() {
        let t = SymToeplitz::new(vec![3.0, -1.0, 0.5, -2.0, 0.1]).unwrap();
        let d = t.to_dense();
        let expect = (0..5)
            .map(|j| (0..5).map(|i| d[(i, j)].abs()).sum::<f64>())
            .fold(0.0, f64::max);
        assert!((t.norm1() - expect).abs() < 1e-14);
    }
}
