//! Filtering primitives shared by the pipeline stages: windowed-sinc FIR
//! design and zero-phase application via FFT convolution.
//!
//! Kernels are odd-length and symmetric (type-I linear phase); applying one
//! with centered alignment is exactly zero-phase. Signal edges are handled
//! by mirror reflection, so edge transients stay local to half a kernel.

use ndarray::Array2;
use rayon::prelude::*;
use rustfft::{num_complex::Complex, FftPlanner};
use std::f64::consts::PI;
use std::sync::Arc;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FirWindow {
    /// ~53 dB stopband, transition factor 3.3.
    Hamming,
    /// ~74 dB stopband, transition factor 5.5.
    Blackman,
}

impl FirWindow {
    fn transition_factor(self) -> f64 {
        match self {
            FirWindow::Hamming => 3.3,
            FirWindow::Blackman => 5.5,
        }
    }

    fn coeff(self, k: usize, order: usize) -> f64 {
        let x = 2.0 * PI * k as f64 / order as f64;
        match self {
            FirWindow::Hamming => 0.54 - 0.46 * x.cos(),
            FirWindow::Blackman => 0.42 - 0.5 * x.cos() + 0.08 * (2.0 * x).cos(),
        }
    }
}

/// Smallest even order >= factor * fs / transition_width; kernel length is
/// order + 1 (odd, symmetric).
pub fn fir_order(fs: f64, transition_hz: f64, window: FirWindow) -> usize {
    let raw = window.transition_factor() * fs / transition_hz;
    let mut order = raw.ceil() as usize;
    if order % 2 == 1 {
        order += 1;
    }
    order.max(2)
}

fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-12 {
        1.0
    } else {
        (PI * x).sin() / (PI * x)
    }
}

/// Windowed-sinc low-pass with unity DC gain and -6 dB at `cutoff_hz`.
pub fn lowpass_kernel(fs: f64, cutoff_hz: f64, transition_hz: f64, window: FirWindow) -> Vec<f64> {
    let order = fir_order(fs, transition_hz, window);
    lowpass_kernel_with_order(fs, cutoff_hz, order, window)
}

fn lowpass_kernel_with_order(fs: f64, cutoff_hz: f64, order: usize, window: FirWindow) -> Vec<f64> {
    let half = order / 2;
    let fc = cutoff_hz / fs;
    let mut h: Vec<f64> = (0..=order)
        .map(|k| {
            let m = k as f64 - half as f64;
            2.0 * fc * sinc(2.0 * fc * m) * window.coeff(k, order)
        })
        .collect();
    let sum: f64 = h.iter().sum();
    for v in &mut h {
        *v /= sum;
    }
    h
}

/// Band-pass as a difference of two unity-gain low-passes.
pub fn bandpass_kernel(fs: f64, lo_hz: f64, hi_hz: f64, transition_hz: f64, window: FirWindow) -> Vec<f64> {
    let order = fir_order(fs, transition_hz, window);
    let hi = lowpass_kernel_with_order(fs, hi_hz, order, window);
    let lo = lowpass_kernel_with_order(fs, lo_hz, order, window);
    hi.iter().zip(&lo).map(|(a, b)| a - b).collect()
}

/// Composite multi-notch: delta minus the sum of narrow band-passes, all
/// designed at a common length so one convolution applies every notch.
pub fn bandstop_composite_kernel(
    fs: f64,
    centers_hz: &[f64],
    bw_hz: f64,
    window: FirWindow,
) -> Vec<f64> {
    let transition = bw_hz / 2.0;
    let order = fir_order(fs, transition, window);
    let mut h = vec![0.0; order + 1];
    h[order / 2] = 1.0;
    for &c in centers_hz {
        let hi = lowpass_kernel_with_order(fs, c + bw_hz / 2.0, order, window);
        let lo = lowpass_kernel_with_order(fs, c - bw_hz / 2.0, order, window);
        for (v, (a, b)) in h.iter_mut().zip(hi.iter().zip(&lo)) {
            *v -= a - b;
        }
    }
    h
}

fn next_pow2(n: usize) -> usize {
    n.next_power_of_two()
}

/// Mirror-reflected sample for a virtual index that may run past the ends.
fn reflect_index(mut i: isize, n: isize) -> usize {
    loop {
        if i < 0 {
            i = -i - 1;
        } else if i >= n {
            i = 2 * n - 1 - i;
        } else {
            return i as usize;
        }
    }
}

/// Zero-phase "same"-length convolution with an odd symmetric kernel,
/// mirror-padding both ends by half a kernel.
pub fn convolve_same_reflect(x: &[f64], kernel: &[f64]) -> Vec<f64> {
    assert!(kernel.len() % 2 == 1, "kernel length must be odd");
    let n = x.len();
    if n == 0 {
        return Vec::new();
    }
    let pad = kernel.len() / 2;
    let padded_len = n + 2 * pad;
    let nfft = next_pow2(padded_len + kernel.len() - 1);

    let mut planner = FftPlanner::new();
    let fwd = planner.plan_fft_forward(nfft);
    let inv = planner.plan_fft_inverse(nfft);

    let mut xf = vec![Complex::new(0.0, 0.0); nfft];
    for (j, slot) in xf.iter_mut().enumerate().take(padded_len) {
        let src = reflect_index(j as isize - pad as isize, n as isize);
        *slot = Complex::new(x[src], 0.0);
    }
    let mut kf = vec![Complex::new(0.0, 0.0); nfft];
    for (slot, &v) in kf.iter_mut().zip(kernel) {
        *slot = Complex::new(v, 0.0);
    }
    fwd.process(&mut xf);
    fwd.process(&mut kf);
    for (a, b) in xf.iter_mut().zip(&kf) {
        *a *= b;
    }
    inv.process(&mut xf);
    let scale = 1.0 / nfft as f64;
    // full[i] aligns the kernel center at padded index i - pad; dropping the
    // padding means output i reads full[i + 2*pad].
    (0..n).map(|i| xf[i + 2 * pad].re * scale).collect()
}

/// Applies an FIR kernel to every channel row in parallel.
pub fn apply_fir(data: &Array2<f64>, kernel: &[f64]) -> Array2<f64> {
    let n = data.ncols();
    let rows: Vec<&[f64]> = data
        .outer_iter()
        .map(|row| row.to_slice().expect("contiguous row"))
        .collect();
    let filtered: Vec<Vec<f64>> = rows
        .par_iter()
        .map(|row| convolve_same_reflect(row, kernel))
        .collect();
    let mut out = Array2::zeros((data.nrows(), n));
    for (mut dst, src) in out.outer_iter_mut().zip(filtered) {
        for (d, s) in dst.iter_mut().zip(src) {
            *d = s;
        }
    }
    out
}

/// Magnitude response of a kernel on a dense grid, in dB.
pub fn kernel_response_db(kernel: &[f64], fs: f64, n_points: usize) -> Vec<(f64, f64)> {
    let nfft = next_pow2(n_points.max(kernel.len()) * 2);
    let mut buf = vec![Complex::new(0.0, 0.0); nfft];
    for (slot, &v) in buf.iter_mut().zip(kernel) {
        *slot = Complex::new(v, 0.0);
    }
    FftPlanner::new().plan_fft_forward(nfft).process(&mut buf);
    (0..=nfft / 2)
        .map(|k| {
            let f = k as f64 * fs / nfft as f64;
            let mag = buf[k].norm().max(1e-15);
            (f, 20.0 * mag.log10())
        })
        .collect()
}

pub fn hann_window(n: usize) -> Vec<f64> {
    (0..n)
        .map(|k| 0.5 * (1.0 - (2.0 * PI * k as f64 / n as f64).cos()))
        .collect()
}

/// Shared forward FFT plan usable across rayon workers.
pub fn plan_forward(n: usize) -> Arc<dyn rustfft::Fft<f64>> {
    FftPlanner::new().plan_fft_forward(n)
}

pub fn plan_inverse(n: usize) -> Arc<dyn rustfft::Fft<f64>> {
    FftPlanner::new().plan_fft_inverse(n)
}

/// Clamped power-to-dB conversion (floor -120 dB keeps diagnostics finite).
pub fn power_db(p: f64) -> f64 {
    10.0 * p.max(1e-12).log10()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tone(fs: f64, f: f64, n: usize) -> Vec<f64> {
        (0..n).map(|i| (2.0 * PI * f * i as f64 / fs).sin()).collect()
    }

    fn mid_rms(x: &[f64]) -> f64 {
        let lo = x.len() / 5;
        let hi = x.len() - lo;
        let s: f64 = x[lo..hi].iter().map(|v| v * v).sum();
        (s / (hi - lo) as f64).sqrt()
    }

    #[test]
    fn lowpass_passes_dc_exactly() {
        let k = lowpass_kernel(250.0, 30.0, 10.0, FirWindow::Hamming);
        let x = vec![3.5; 2000];
        let y = convolve_same_reflect(&x, &k);
        for v in &y {
            assert!((v - 3.5).abs() < 1e-9);
        }
    }

    #[test]
    fn bandpass_midband_within_one_percent() {
        let fs = 250.0;
        let k = bandpass_kernel(fs, 1.0, 70.0, 1.0, FirWindow::Hamming);
        let x = tone(fs, 10.0, 5000);
        let y = convolve_same_reflect(&x, &k);
        let ratio = mid_rms(&y) / mid_rms(&x);
        assert!((ratio - 1.0).abs() < 0.01, "midband gain {ratio}");
    }

    #[test]
    fn bandpass_rejects_slow_drift() {
        let fs = 250.0;
        let k = bandpass_kernel(fs, 1.0, 70.0, 1.0, FirWindow::Hamming);
        let x = tone(fs, 0.2, 20000);
        let y = convolve_same_reflect(&x, &k);
        let atten = 20.0 * (mid_rms(&y) / mid_rms(&x)).log10();
        assert!(atten < -40.0, "drift attenuation only {atten} dB");
    }

    #[test]
    fn zero_phase_no_lag_on_midband_tone() {
        let fs = 250.0;
        let k = bandpass_kernel(fs, 1.0, 70.0, 2.0, FirWindow::Hamming);
        let x = tone(fs, 8.0, 4000);
        let y = convolve_same_reflect(&x, &k);
        // cross-correlation peak over +/- 20 samples must land at lag 0
        let mut best = (0isize, f64::MIN);
        for lag in -20isize..=20 {
            let mut acc = 0.0;
            for i in 500..3500usize {
                let j = i as isize + lag;
                acc += x[i] * y[j as usize];
            }
            if acc > best.1 {
                best = (lag, acc);
            }
        }
        assert_eq!(best.0, 0);
    }

    #[test]
    fn notch_attenuates_center_passes_neighbors() {
        let fs = 250.0;
        let k = bandstop_composite_kernel(fs, &[19.5, 60.0], 1.0, FirWindow::Blackman);
        let at = |f: f64| {
            let x = tone(fs, f, 30000);
            let y = convolve_same_reflect(&x, &k);
            20.0 * (mid_rms(&y) / mid_rms(&x)).log10()
        };
        assert!(at(19.5) < -30.0, "19.5 Hz: {} dB", at(19.5));
        assert!(at(60.0) < -30.0, "60 Hz: {} dB", at(60.0));
        assert!(at(10.0).abs() < 0.09, "10 Hz gain off: {} dB", at(10.0));
    }

    #[test]
    fn filters_are_linear() {
        let fs = 250.0;
        let k = bandpass_kernel(fs, 1.0, 70.0, 2.0, FirWindow::Hamming);
        let x = tone(fs, 9.0, 3000);
        let y = tone(fs, 23.0, 3000);
        let mixed: Vec<f64> = x.iter().zip(&y).map(|(a, b)| 2.0 * a - 0.5 * b).collect();
        let fx = convolve_same_reflect(&x, &k);
        let fy = convolve_same_reflect(&y, &k);
        let fm = convolve_same_reflect(&mixed, &k);
        let scale: f64 = fm.iter().map(|v| v.abs()).fold(0.0, f64::max).max(1e-9);
        for i in 0..3000 {
            let expect = 2.0 * fx[i] - 0.5 * fy[i];
            assert!(
                (fm[i] - expect).abs() / scale < 1e-9,
                "nonlinear at {i}: {} vs {expect}",
                fm[i]
            );
        }
    }

    #[test]
    fn white_noise_psd_tracks_filter_response() {
        use rand::SeedableRng;
        let fs = 250.0;
        let k = bandpass_kernel(fs, 1.0, 70.0, 2.0, FirWindow::Hamming);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let x: Vec<f64> = (0..200_000).map(|_| crate::stats::randn(&mut rng)).collect();
        let y = convolve_same_reflect(&x, &k);
        let (fr, px) = crate::preclean::welch_psd(&x, fs, 1024, 0.5).unwrap();
        let (_, py) = crate::preclean::welch_psd(&y, fs, 1024, 0.5).unwrap();
        let resp = kernel_response_db(&k, fs, 4096);
        let mut diff_acc = 0.0;
        let mut count = 0usize;
        for (i, f) in fr.iter().enumerate() {
            // compare only well inside the passband
            if *f < 3.0 || *f > 65.0 {
                continue;
            }
            let h = resp
                .iter()
                .min_by(|a, b| (a.0 - f).abs().partial_cmp(&(b.0 - f).abs()).unwrap())
                .unwrap()
                .1;
            diff_acc += (py[i] - px[i] - h).abs();
            count += 1;
        }
        let mean_diff = diff_acc / count as f64;
        assert!(mean_diff < 1.0, "mean PSD deviation {mean_diff} dB");
    }
}
