//! Length-`N` discrete Fourier transforms.
//!
//! Conventions: `forward` computes `X_k = sum_j x_j e^{-2 pi i jk/N}` (the
//! Fourier matrix `F`), `inverse` computes `F^{-1} = F^* / N`. The real
//! transforms return/consume the half spectrum `k = 0..=N/2` and are
//! unnormalized in both directions.

use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use realfft::{ComplexToReal, RealFftPlanner, RealToComplex};
use rustfft::{Fft, FftPlanner};

#[derive(Clone)]
pub struct DftProvider {
    len: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    r2c: Arc<dyn RealToComplex<f64>>,
    c2r: Arc<dyn ComplexToReal<f64>>,
}

impl fmt::Debug for DftProvider {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DftProvider").field("len", &self.len).finish()
    }
}

impl DftProvider {
    pub fn new(len: usize) -> Self {
        assert!(len > 0, "transform length must be positive");
        let mut planner = FftPlanner::new();
        let mut real_planner = RealFftPlanner::new();
        Self {
            len,
            forward: planner.plan_fft_forward(len),
            inverse: planner.plan_fft_inverse(len),
            r2c: real_planner.plan_fft_forward(len),
            c2r: real_planner.plan_fft_inverse(len),
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Number of bins in a real half spectrum.
    pub fn half_len(&self) -> usize {
        self.len / 2 + 1
    }

    /// In-place `F x`.
    pub fn forward(&self, buf: &mut [Complex64]) {
        assert_eq!(buf.len(), self.len);
        self.forward.process(buf);
    }

    /// In-place `F^{-1} x`.
    pub fn inverse(&self, buf: &mut [Complex64]) {
        assert_eq!(buf.len(), self.len);
        self.inverse.process(buf);
        let scale = 1.0 / self.len as f64;
        buf.iter_mut().for_each(|v| *v *= scale);
    }

    /// `(F ⊗ I_d) x` for `x` made of `N` consecutive `d`-blocks.
    pub fn block_forward(&self, blocks: &[Complex64], d: usize) -> Vec<Complex64> {
        assert_eq!(blocks.len(), self.len * d);
        let mut out = vec![Complex64::default(); blocks.len()];
        let mut channel = vec![Complex64::default(); self.len];
        for c in 0..d {
            for (k, v) in channel.iter_mut().enumerate() {
                *v = blocks[k * d + c];
            }
            self.forward.process(&mut channel);
            for (k, v) in channel.iter().enumerate() {
                out[k * d + c] = *v;
            }
        }
        out
    }

    /// Half spectrum of a real signal. `input` is used as scratch.
    pub fn real_forward(&self, input: &mut [f64], output: &mut [Complex64]) {
        self.r2c
            .process(input, output)
            .expect("buffer lengths are fixed by the plan");
    }

    /// Real signal `N * F^{-1} X` from a Hermitian half spectrum. The imaginary
    /// parts of the DC and Nyquist bins are ignored. `spectrum` is used as scratch.
    pub fn real_inverse(&self, spectrum: &mut [Complex64], output: &mut [f64]) {
        spectrum[0].im = 0.0;
        if self.len.is_multiple_of(2) {
            spectrum[self.len / 2].im = 0.0;
        }
        self.c2r
            .process(spectrum, output)
            .expect("buffer lengths are fixed by the plan");
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive_dft(x: &[Complex64]) -> Vec<Complex64> {
        let n = x.len();
        (0..n)
            .map(|k| {
                x.iter()
                    .enumerate()
                    .map(|(j, v)| {
                        let angle = -2.0 * std::f64::consts::PI * ((j * k) % n) as f64 / n as f64;
                        v * Complex64::from_polar(1.0, angle)
                    })
                    .sum()
            })
            .collect()
    }

    fn sample(len: usize) -> Vec<Complex64> {
        (0..len)
            .map(|i| Complex64::new((i as f64 * 0.37).sin(), (i as f64 * 1.3).cos()))
            .collect()
    }

    #[test]
    fn forward_matches_fourier_matrix() {
        for len in [1, 2, 5, 12, 35] {
            let x = sample(len);
            let mut y = x.clone();
            DftProvider::new(len).forward(&mut y);
            for (a, b) in y.iter().zip(naive_dft(&x)) {
                assert!((a - b).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn inverse_undoes_forward() {
        for len in [3, 8, 49, 210] {
            let dft = DftProvider::new(len);
            let x = sample(len);
            let mut y = x.clone();
            dft.forward(&mut y);
            dft.inverse(&mut y);
            let scale: f64 = x.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
            for (a, b) in y.iter().zip(&x) {
                assert!((a - b).norm() <= len as f64 * f64::EPSILON * scale * 4.0);
            }
        }
    }

    #[test]
    fn block_forward_transforms_each_channel() {
        let (len, d) = (6, 3);
        let dft = DftProvider::new(len);
        let x = sample(len * d);
        let y = dft.block_forward(&x, d);
        for c in 0..d {
            let channel: Vec<_> = (0..len).map(|k| x[k * d + c]).collect();
            for (k, v) in naive_dft(&channel).iter().enumerate() {
                assert!((y[k * d + c] - v).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn real_transforms_agree_with_complex_ones() {
        for len in [4, 7, 30] {
            let dft = DftProvider::new(len);
            let x: Vec<f64> = (0..len).map(|i| (i as f64).sin() + 0.5).collect();
            let mut half = vec![Complex64::default(); dft.half_len()];
            dft.real_forward(&mut x.clone(), &mut half);
            let full = naive_dft(&x.iter().map(|&v| Complex64::new(v, 0.0)).collect::<Vec<_>>());
            for k in 0..dft.half_len() {
                assert!((half[k] - full[k]).norm() < 1e-12);
            }
            let mut back = vec![0.0; len];
            dft.real_inverse(&mut half, &mut back);
            for (a, b) in back.iter().zip(&x) {
                assert!((a / len as f64 - b).abs() < 1e-13);
            }
        }
    }
}
