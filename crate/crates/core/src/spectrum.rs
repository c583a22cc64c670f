//! One-sided periodogram on a fixed window length.

use std::sync::Arc;

use num_complex::Complex;
use rustfft::{Fft, FftPlanner};

pub struct Periodogram {
    n: usize,
    fft: Arc<dyn Fft<f64>>,
    buf: Vec<Complex<f64>>,
    scratch: Vec<Complex<f64>>,
}

impl Periodogram {
    pub fn new(n: usize) -> Self {
        let fft = FftPlanner::new().plan_fft_forward(n);
        let scratch = vec![Complex::default(); fft.get_inplace_scratch_len()];
        Periodogram {
            n,
            fft,
            buf: vec![Complex::default(); n],
            scratch,
        }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    /// One-sided power for bins `0..=n/2`, frequency `k * rate / n`.
    ///
    /// Bin `k` holds `c_k |X_k|^2 / n^2` with `c_k = 2` except at DC and
    /// Nyquist, so the bins sum to the mean square of the window.
    pub fn power<T: Copy + Into<f64>>(&mut self, x: &[T]) -> Vec<f64> {
        assert_eq!(x.len(), self.n, "window length");
        for (b, &v) in self.buf.iter_mut().zip(x) {
            *b = Complex::new(v.into(), 0.0);
        }
        self.fft
            .process_with_scratch(&mut self.buf, &mut self.scratch);
        let n = self.n;
        let norm = (n * n) as f64;
        (0..=n / 2)
            .map(|k| {
                let c = if k == 0 || 2 * k == n { 1.0 } else { 2.0 };
                c * self.buf[k].norm_sqr() / norm
            })
            .collect()
    }
}

/// Sum of one-sided bins with `lo <= f < hi`.
pub fn band_sum(power: &[f64], n: usize, rate_hz: f64, lo_hz: f64, hi_hz: f64) -> f64 {
    power
        .iter()
        .enumerate()
        .filter(|&(k, _)| {
            let f = k as f64 * rate_hz / n as f64;
            f >= lo_hz && f < hi_hz
        })
        .map(|(_, p)| p)
        .sum()
}
