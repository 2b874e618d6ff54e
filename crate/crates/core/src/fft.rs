//! FFT-based linear convolution helpers.

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use std::sync::Arc;

fn next_pow2(n: usize) -> usize {
    n.next_power_of_two()
}

/// Full linear convolution of two real sequences, length a+b-1.
pub(crate) fn convolve_full(a: &[f64], b: &[f64]) -> Vec<f64> {
    let out_len = a.len() + b.len() - 1;
    // small cases: direct sum is faster and exact
    if a.len().min(b.len()) <= 32 || out_len <= 256 {
        let mut out = vec![0.0; out_len];
        for (i, &ai) in a.iter().enumerate() {
            for (j, &bj) in b.iter().enumerate() {
                out[i + j] += ai * bj;
            }
        }
        return out;
    }
    let n = next_pow2(out_len);
    let mut planner = FftPlanner::new();
    let fft = planner.plan_fft_forward(n);
    let ifft = planner.plan_fft_inverse(n);
    let mut fa: Vec<Complex<f64>> = a.iter().map(|&v| Complex::new(v, 0.0)).collect();
    fa.resize(n, Complex::new(0.0, 0.0));
    let mut fb: Vec<Complex<f64>> = b.iter().map(|&v| Complex::new(v, 0.0)).collect();
    fb.resize(n, Complex::new(0.0, 0.0));
    fft.process(&mut fa);
    fft.process(&mut fb);
    for (x, y) in fa.iter_mut().zip(&fb) {
        *x *= y;
    }
    ifft.process(&mut fa);
    let scale = 1.0 / n as f64;
    fa[..out_len].iter().map(|c| c.re * scale).collect()
}

/// Repeated convolution of varying filters against one fixed signal.
///
/// The signal's transform is computed once; each `convolve` call then costs
/// two FFTs. Used by the MCMC kernels, which re-filter the same augmented
/// series thousands of times with new coefficient vectors.
pub(crate) struct FixedSignalConv {
    n: usize,
    signal_len: usize,
    max_filter_len: usize,
    fft: Arc<dyn Fft<f64>>,
    ifft: Arc<dyn Fft<f64>>,
    signal_f: Vec<Complex<f64>>,
    buf: Vec<Complex<f64>>,
}

impl FixedSignalConv {
    pub fn new(signal: &[f64], max_filter_len: usize) -> Self {
        let out_len = signal.len() + max_filter_len - 1;
        let n = next_pow2(out_len);
        let mut planner = FftPlanner::new();
        let fft = planner.plan_fft_forward(n);
        let ifft = planner.plan_fft_inverse(n);
        let mut signal_f: Vec<Complex<f64>> =
            signal.iter().map(|&v| Complex::new(v, 0.0)).collect();
        signal_f.resize(n, Complex::new(0.0, 0.0));
        fft.process(&mut signal_f);
        FixedSignalConv {
            n,
            signal_len: signal.len(),
            max_filter_len,
            fft,
            ifft,
            signal_f,
            buf: vec![Complex::new(0.0, 0.0); n],
        }
    }

    /// Linear convolution with `filter`, returning `out_len` values starting
    /// at output index `offset`.
    pub fn convolve(&mut self, filter: &[f64], offset: usize, out_len: usize) -> Vec<f64> {
        assert!(filter.len() <= self.max_filter_len, "filter longer than planned");
        assert!(offset + out_len <= self.signal_len + filter.len() - 1 + 1);
        for (i, c) in self.buf.iter_mut().enumerate() {
            *c = if i < filter.len() {
                Complex::new(filter[i], 0.0)
            } else {
                Complex::new(0.0, 0.0)
            };
        }
        self.fft.process(&mut self.buf);
        for (x, y) in self.buf.iter_mut().zip(&self.signal_f) {
            *x *= y;
        }
        self.ifft.process(&mut self.buf);
        let scale = 1.0 / self.n as f64;
        self.buf[offset..offset + out_len].iter().map(|c| c.re * scale).collect()
    }
}
