//! FFT-backed products with block Hankel matrices.
//!
//! `H_L(w)` has block `(i, j)` equal to `w_{i+j}`. Reversing its block rows
//! gives a block Toeplitz matrix, which is the leading `L x (N-L+1)` corner of
//! the block circulant `C` generated by the rotated signal
//! `c = (w_{L-1}, ..., w_{N-1}, w_0, ..., w_{L-2})`. `C` is diagonalized by the
//! DFT, `C = (F ⊗ I_d) Λ F^{-1}` with `Λ_k` the block DFT of `c`, so both
//! `H z` and `H^T y` cost `O(N d log N)` and only the signal and its spectrum
//! are ever stored.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::dft::DftProvider;
use crate::error::{check_len, Error, Result};

/// Default entry guard for [`dense_hankel`].
pub const DENSE_HANKEL_LIMIT: usize = 10_000_000;

/// Implicit `H_L(w)` for a `d x N` real signal.
#[derive(Debug, Clone)]
pub struct SpectralHankelOperator {
    signal: DMatrix<f64>,
    depth: usize,
    /// Half spectrum of the rotated generator, channel-major: `spectrum[c * half + k]`.
    /// Bins above `N/2` follow from `Λ_{N-k} = conj(Λ_k)`.
    spectrum: Vec<Complex64>,
    dft: DftProvider,
}

impl SpectralHankelOperator {
    /// Precomputes the block spectrum of `signal` (column `k` is `w_k`).
    pub fn new(signal: &DMatrix<f64>, depth: usize) -> Result<Self> {
        let (d, len) = signal.shape();
        if d == 0 || len == 0 {
            return Err(Error::InvalidArgument("signal must be non-empty".into()));
        }
        if depth == 0 || depth > len {
            return Err(Error::InvalidArgument(format!(
                "depth must satisfy 1 <= L <= N, got L={depth}, N={len}"
            )));
        }
        let dft = DftProvider::new(len);
        let half = dft.half_len();
        let mut spectrum = vec![Complex64::default(); d * half];
        let mut channel = vec![0.0; len];
        for c in 0..d {
            for (k, v) in channel.iter_mut().enumerate() {
                *v = signal[(c, (depth - 1 + k) % len)];
            }
            dft.real_forward(&mut channel, &mut spectrum[c * half..(c + 1) * half]);
        }
        Ok(Self {
            signal: signal.clone(),
            depth,
            spectrum,
            dft,
        })
    }

    pub fn signal(&self) -> &DMatrix<f64> {
        &self.signal
    }

    /// Block depth `L`.
    pub fn depth(&self) -> usize {
        self.depth
    }

    /// Block width `d`.
    pub fn block_width(&self) -> usize {
        self.signal.nrows()
    }

    /// Signal length `N`.
    pub fn signal_len(&self) -> usize {
        self.signal.ncols()
    }

    /// `d * L`
    pub fn row_dim(&self) -> usize {
        self.block_width() * self.depth
    }

    /// `N - L + 1`
    pub fn col_dim(&self) -> usize {
        self.signal_len() - self.depth + 1
    }

    /// The `d`-vector `Λ_k` for any `k < N`.
    pub fn block_spectrum(&self, k: usize) -> Vec<Complex64> {
        let len = self.signal_len();
        assert!(k < len);
        let half = self.dft.half_len();
        let (bin, conj) = if k < half { (k, false) } else { (len - k, true) };
        (0..self.block_width())
            .map(|c| {
                let v = self.spectrum[c * half + bin];
                if conj {
                    v.conj()
                } else {
                    v
                }
            })
            .collect()
    }

    /// Recomputes the full spectrum `(F ⊗ I_d) c` with complex transforms,
    /// as `N` consecutive `d`-blocks.
    pub fn recompute_block_spectrum(&self) -> Vec<Complex64> {
        let (d, len) = self.signal.shape();
        let mut rotated = Vec::with_capacity(d * len);
        for k in 0..len {
            let col = (self.depth - 1 + k) % len;
            rotated.extend(self.signal.column(col).iter().map(|&v| Complex64::new(v, 0.0)));
        }
        self.dft.block_forward(&rotated, d)
    }

    /// Scalars held by the operator: the signal plus the half spectrum.
    pub fn stored_scalars(&self) -> usize {
        self.signal.len() + 2 * self.spectrum.len()
    }

    pub fn memory_bytes(&self) -> usize {
        self.stored_scalars() * std::mem::size_of::<f64>()
    }

    /// `H_L(w) z`.
    pub fn matvec(&self, z: &[f64]) -> Result<Vec<f64>> {
        check_len("hankel matvec", self.col_dim(), z.len())?;
        let mut out = vec![0.0; self.row_dim()];
        self.matvec_into(z, &mut out);
        Ok(out)
    }

    /// `H_L(w)^T y`.
    pub fn rmatvec(&self, y: &[f64]) -> Result<Vec<f64>> {
        check_len("hankel rmatvec", self.row_dim(), y.len())?;
        let mut out = vec![0.0; self.col_dim()];
        self.rmatvec_into(y, &mut out);
        Ok(out)
    }

    /// Unchecked [`matvec`](Self::matvec) writing into `out` (length `d L`).
    pub fn matvec_into(&self, z: &[f64], out: &mut [f64]) {
        let (d, len, depth) = (self.block_width(), self.signal_len(), self.depth);
        let half = self.dft.half_len();
        debug_assert_eq!(z.len(), self.col_dim());
        debug_assert_eq!(out.len(), self.row_dim());

        // zero-padded input, then its spectrum
        let mut padded = vec![0.0; len];
        padded[..z.len()].copy_from_slice(z);
        let mut z_hat = vec![Complex64::default(); half];
        self.dft.real_forward(&mut padded, &mut z_hat);

        // row r of C v is the correlation sum_j c_{j-r} v_j, whose spectrum is
        // conj(Λ_k) * v_hat_k for a real generator
        let scale = 1.0 / len as f64;
        let mut product = vec![Complex64::default(); half];
        let mut rows = vec![0.0; len];
        for c in 0..d {
            let lam = &self.spectrum[c * half..(c + 1) * half];
            for ((p, l), v) in product.iter_mut().zip(lam).zip(&z_hat) {
                *p = l.conj() * v;
            }
            self.dft.real_inverse(&mut product, &mut rows);
            // keep the first L rows and undo the block-row reversal
            for r in 0..depth {
                out[(depth - 1 - r) * d + c] = rows[r] * scale;
            }
        }
    }

    /// Unchecked [`rmatvec`](Self::rmatvec) writing into `out` (length `N - L + 1`).
    pub fn rmatvec_into(&self, y: &[f64], out: &mut [f64]) {
        let (d, len, depth) = (self.block_width(), self.signal_len(), self.depth);
        let half = self.dft.half_len();
        debug_assert_eq!(y.len(), self.row_dim());
        debug_assert_eq!(out.len(), self.col_dim());

        // C^T = F^{-1} Λ^T (F ⊗ I_d): transform each channel, contract with Λ_k
        let mut acc = vec![Complex64::default(); half];
        let mut channel = vec![0.0; len];
        let mut channel_hat = vec![Complex64::default(); half];
        for c in 0..d {
            channel.iter_mut().for_each(|v| *v = 0.0);
            for r in 0..depth {
                channel[r] = y[(depth - 1 - r) * d + c];
            }
            self.dft.real_forward(&mut channel, &mut channel_hat);
            let lam = &self.spectrum[c * half..(c + 1) * half];
            for ((a, l), u) in acc.iter_mut().zip(lam).zip(&channel_hat) {
                *a += l * u;
            }
        }
        let mut full = vec![0.0; len];
        self.dft.real_inverse(&mut acc, &mut full);
        let scale = 1.0 / len as f64;
        for (o, v) in out.iter_mut().zip(&full) {
            *o = v * scale;
        }
    }

    /// `H z` through the complex pipeline `(F ⊗ I_d) Λ F^{-1}`, returning the
    /// real result together with the largest discarded imaginary part relative
    /// to the result norm.
    pub fn matvec_complex(&self, z: &[f64]) -> Result<(Vec<f64>, f64)> {
        check_len("hankel matvec", self.col_dim(), z.len())?;
        let (d, len, depth) = (self.block_width(), self.signal_len(), self.depth);
        let mut v = vec![Complex64::default(); len];
        for (vi, &zi) in v.iter_mut().zip(z) {
            vi.re = zi;
        }
        self.dft.inverse(&mut v);
        let lambda = self.recompute_block_spectrum();
        let mut scaled = vec![Complex64::default(); len * d];
        for k in 0..len {
            for c in 0..d {
                scaled[k * d + c] = lambda[k * d + c] * v[k];
            }
        }
        let cv = self.dft.block_forward(&scaled, d);
        let mut out = vec![0.0; self.row_dim()];
        let mut imag = 0.0_f64;
        for r in 0..depth {
            for c in 0..d {
                let value = cv[r * d + c];
                out[(depth - 1 - r) * d + c] = value.re;
                imag = imag.max(value.im.abs());
            }
        }
        Ok(finish_residue(out, imag))
    }

    /// `H^T y` through `F^{-1} Λ^T (F ⊗ I_d)` with complex transforms; see
    /// [`matvec_complex`](Self::matvec_complex).
    pub fn rmatvec_complex(&self, y: &[f64]) -> Result<(Vec<f64>, f64)> {
        check_len("hankel rmatvec", self.row_dim(), y.len())?;
        let (d, len, depth) = (self.block_width(), self.signal_len(), self.depth);
        let mut u = vec![Complex64::default(); len * d];
        for r in 0..depth {
            for c in 0..d {
                u[r * d + c].re = y[(depth - 1 - r) * d + c];
            }
        }
        let u_hat = self.dft.block_forward(&u, d);
        let lambda = self.recompute_block_spectrum();
        let mut contracted: Vec<Complex64> = (0..len)
            .map(|k| (0..d).map(|c| lambda[k * d + c] * u_hat[k * d + c]).sum())
            .collect();
        self.dft.inverse(&mut contracted);
        let mut imag = 0.0_f64;
        let out = contracted[..self.col_dim()]
            .iter()
            .map(|v| {
                imag = imag.max(v.im.abs());
                v.re
            })
            .collect();
        Ok(finish_residue(out, imag))
    }

    /// Product with the first block row restricted to `channels`:
    /// `sum_j w_j[channels] z_j`. Costs `O(|channels| (N - L + 1))`.
    pub fn first_block_row_matvec(&self, z: &[f64], channels: std::ops::Range<usize>) -> Result<Vec<f64>> {
        check_len("first block row matvec", self.col_dim(), z.len())?;
        assert!(channels.end <= self.block_width());
        let mut out = vec![0.0; channels.len()];
        for (j, &zj) in z.iter().enumerate() {
            if zj == 0.0 {
                continue;
            }
            let col = self.signal.column(j);
            for (o, c) in out.iter_mut().zip(channels.clone()) {
                *o += col[c] * zj;
            }
        }
        Ok(out)
    }

    /// Transpose of [`first_block_row_matvec`](Self::first_block_row_matvec).
    pub fn first_block_row_rmatvec(&self, v: &[f64], channels: std::ops::Range<usize>) -> Result<Vec<f64>> {
        check_len("first block row rmatvec", channels.len(), v.len())?;
        assert!(channels.end <= self.block_width());
        Ok((0..self.col_dim())
            .map(|j| {
                let col = self.signal.column(j);
                channels.clone().zip(v).map(|(c, vi)| col[c] * vi).sum()
            })
            .collect())
    }
}

fn finish_residue(out: Vec<f64>, imag: f64) -> (Vec<f64>, f64) {
    let norm = out.iter().map(|v| v * v).sum::<f64>().sqrt();
    let residue = if norm > 0.0 { imag / norm } else { imag };
    (out, residue)
}

/// Dense `H_L(w)` with the default size guard.
pub fn dense_hankel(signal: &DMatrix<f64>, depth: usize) -> Result<DMatrix<f64>> {
    dense_hankel_with_limit(signal, depth, DENSE_HANKEL_LIMIT)
}

/// Dense `H_L(w)`; block `(i, j)` is `w_{i+j}`. Fails above `limit` entries.
pub fn dense_hankel_with_limit(signal: &DMatrix<f64>, depth: usize, limit: usize) -> Result<DMatrix<f64>> {
    let (d, len) = signal.shape();
    if depth == 0 || depth > len {
        return Err(Error::InvalidArgument(format!(
            "depth must satisfy 1 <= L <= N, got L={depth}, N={len}"
        )));
    }
    let cols = len - depth + 1;
    let entries = d * depth * cols;
    if entries > limit {
        return Err(Error::TooLarge { entries, limit });
    }
    Ok(DMatrix::from_fn(d * depth, cols, |row, j| {
        signal[(row % d, row / d + j)]
    }))
}

/// Smallest integer `>= minimum` with no prime factor above `largest_prime`.
pub fn next_smooth_length(minimum: usize, largest_prime: usize) -> Result<usize> {
    if largest_prime < 2 {
        return Err(Error::InvalidArgument(format!(
            "largest prime must be at least 2, got {largest_prime}"
        )));
    }
    if minimum == 0 {
        return Err(Error::InvalidArgument("minimum length must be positive".into()));
    }
    let is_smooth = |mut x: usize| {
        for p in 2..=largest_prime {
            while x.is_multiple_of(p) {
                x /= p;
            }
        }
        x == 1
    };
    Ok((minimum..).find(|&x| is_smooth(x)).expect("powers of two are smooth"))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel_err(a: &[f64], b: &[f64]) -> f64 {
        let diff: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
        let scale: f64 = b.iter().map(|v| v * v).sum::<f64>().sqrt();
        diff / scale.max(f64::MIN_POSITIVE)
    }

    fn pseudo_random(rows: usize, cols: usize, seed: u64) -> DMatrix<f64> {
        let mut state = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        DMatrix::from_fn(rows, cols, |_, _| {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((state >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
        })
    }

    #[test]
    fn spectrum_of_constant_signal() {
        let op = SpectralHankelOperator::new(&DMatrix::from_element(1, 4, 1.0), 2).unwrap();
        let expected = [4.0, 0.0, 0.0, 0.0];
        for (k, e) in expected.iter().enumerate() {
            assert!((op.block_spectrum(k)[0] - Complex64::new(*e, 0.0)).norm() < 1e-14);
        }
    }

    #[test]
    fn spectrum_of_delta_signal() {
        let op = SpectralHankelOperator::new(&DMatrix::from_row_slice(1, 4, &[1.0, 0.0, 0.0, 0.0]), 1).unwrap();
        for k in 0..4 {
            assert!((op.block_spectrum(k)[0] - Complex64::new(1.0, 0.0)).norm() < 1e-14);
        }
    }

    #[test]
    fn half_and_full_spectrum_agree() {
        for &(d, len, depth) in &[(2, 6, 3), (3, 7, 1), (1, 9, 9), (4, 16, 5)] {
            let op = SpectralHankelOperator::new(&pseudo_random(d, len, 3), depth).unwrap();
            let full = op.recompute_block_spectrum();
            for k in 0..len {
                let lam = op.block_spectrum(k);
                for c in 0..d {
                    assert!((lam[c] - full[k * d + c]).norm() < 1e-12);
                }
                if k > 0 {
                    let mirror = op.block_spectrum(len - k);
                    for c in 0..d {
                        assert!((lam[c] - mirror[c].conj()).norm() < 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn factorization_reproduces_circulant_embedding() {
        // materialize (F ⊗ I_d) Λ F^{-1} column by column and compare against
        // the block circulant assembled from its definition
        let (d, len, depth) = (2, 6, 3);
        let signal = pseudo_random(d, len, 11);
        let op = SpectralHankelOperator::new(&signal, depth).unwrap();
        let lambda = op.recompute_block_spectrum();
        let dft = DftProvider::new(len);
        for col in 0..len {
            let mut e = vec![Complex64::default(); len];
            e[col] = Complex64::new(1.0, 0.0);
            dft.inverse(&mut e);
            let scaled: Vec<Complex64> = (0..len * d).map(|i| lambda[i] * e[i / d]).collect();
            let column = dft.block_forward(&scaled, d);
            for row in 0..len {
                for c in 0..d {
                    let direct = signal[(c, (depth - 1 + col + len - row) % len)];
                    assert!((column[row * d + c] - Complex64::new(direct, 0.0)).norm() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn matvec_on_constant_signal() {
        let op = SpectralHankelOperator::new(&DMatrix::from_element(1, 4, 1.0), 2).unwrap();
        let y = op.matvec(&[1.0, 1.0, 1.0]).unwrap();
        assert!(rel_err(&y, &[3.0, 3.0]) < 1e-14);
        let x = op.rmatvec(&[1.0, 1.0]).unwrap();
        assert!(rel_err(&x, &[2.0, 2.0, 2.0]) < 1e-14);
    }

    #[test]
    fn first_basis_vector_extracts_first_column() {
        let signal = pseudo_random(3, 12, 5);
        let op = SpectralHankelOperator::new(&signal, 4).unwrap();
        let mut e = vec![0.0; op.col_dim()];
        e[0] = 1.0;
        let y = op.matvec(&e).unwrap();
        let expected: Vec<f64> = (0..4).flat_map(|i| signal.column(i).iter().copied().collect::<Vec<_>>()).collect();
        assert!(rel_err(&y, &expected) < 1e-12);
    }

    #[test]
    fn matvecs_match_dense_oracle() {
        for &(d, len, depth, seed) in &[(3, 32, 5, 1), (2, 24, 6, 2), (1, 5, 5, 3), (4, 9, 1, 4)] {
            let signal = pseudo_random(d, len, seed);
            let op = SpectralHankelOperator::new(&signal, depth).unwrap();
            let dense = dense_hankel(&signal, depth).unwrap();
            let z = pseudo_random(op.col_dim(), 1, seed + 100);
            let y = pseudo_random(op.row_dim(), 1, seed + 200);
            assert!(rel_err(&op.matvec(z.as_slice()).unwrap(), (&dense * &z).as_slice()) < 1e-10);
            assert!(rel_err(&op.rmatvec(y.as_slice()).unwrap(), (dense.transpose() * &y).as_slice()) < 1e-10);
        }
    }

    #[test]
    fn complex_pipeline_is_real_and_agrees() {
        let signal = pseudo_random(3, 20, 9);
        let op = SpectralHankelOperator::new(&signal, 4).unwrap();
        let z = pseudo_random(op.col_dim(), 1, 10);
        let y = pseudo_random(op.row_dim(), 1, 12);
        let (hz, residue) = op.matvec_complex(z.as_slice()).unwrap();
        assert!(residue <= 1e-12);
        assert!(rel_err(&hz, &op.matvec(z.as_slice()).unwrap()) < 1e-12);
        let (hty, residue) = op.rmatvec_complex(y.as_slice()).unwrap();
        assert!(residue <= 1e-12);
        assert!(rel_err(&hty, &op.rmatvec(y.as_slice()).unwrap()) < 1e-12);
    }

    #[test]
    fn first_block_row_products() {
        let signal = pseudo_random(5, 15, 21);
        let op = SpectralHankelOperator::new(&signal, 3).unwrap();
        let dense = dense_hankel(&signal, 3).unwrap();
        let z = pseudo_random(op.col_dim(), 1, 22);
        let v = pseudo_random(2, 1, 23);
        let expected = dense.rows(1, 2) * &z;
        assert!(rel_err(&op.first_block_row_matvec(z.as_slice(), 1..3).unwrap(), expected.as_slice()) < 1e-13);
        let expected_t = dense.rows(1, 2).transpose() * &v;
        assert!(rel_err(&op.first_block_row_rmatvec(v.as_slice(), 1..3).unwrap(), expected_t.as_slice()) < 1e-13);
    }

    #[test]
    fn dimension_checks() {
        let op = SpectralHankelOperator::new(&pseudo_random(2, 10, 1), 3).unwrap();
        assert!(op.matvec(&[0.0; 7]).is_err());
        assert!(op.rmatvec(&[0.0; 5]).is_err());
        assert!(SpectralHankelOperator::new(&pseudo_random(2, 4, 1), 5).is_err());
        assert!(SpectralHankelOperator::new(&pseudo_random(2, 4, 1), 0).is_err());
    }

    #[test]
    fn memory_is_linear_in_signal() {
        let op = SpectralHankelOperator::new(&pseudo_random(3, 400, 1), 20).unwrap();
        let (d, len) = (3, 400);
        assert_eq!(op.stored_scalars(), d * len + 2 * d * (len / 2 + 1));
        assert!(op.stored_scalars() < op.col_dim() * op.col_dim());
    }

    #[test]
    fn dense_hankel_layout() {
        let signal = DMatrix::from_row_slice(1, 4, &[1.0, 2.0, 3.0, 4.0]);
        let h = dense_hankel(&signal, 2).unwrap();
        assert_eq!(h, DMatrix::from_row_slice(2, 3, &[1.0, 2.0, 3.0, 2.0, 3.0, 4.0]));
        let h = dense_hankel(&signal, 4).unwrap();
        assert_eq!(h, DMatrix::from_column_slice(4, 1, &[1.0, 2.0, 3.0, 4.0]));
        let wide = pseudo_random(2, 5, 4);
        assert_eq!(dense_hankel(&wide, 1).unwrap(), wide);
        assert!(matches!(
            dense_hankel_with_limit(&wide, 2, 10),
            Err(Error::TooLarge { .. })
        ));
    }

    #[test]
    fn smooth_lengths() {
        assert_eq!(next_smooth_length(8, 7).unwrap(), 8);
        assert_eq!(next_smooth_length(11, 7).unwrap(), 12);
        assert_eq!(next_smooth_length(1, 7).unwrap(), 1);
        assert_eq!(next_smooth_length(7649, 7).unwrap(), 7680);
        assert_eq!(next_smooth_length(9, 2).unwrap(), 16);
        assert!(next_smooth_length(10, 1).is_err());
    }
}
