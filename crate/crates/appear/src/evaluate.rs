//! Evaluation toolkit: Morse-wavelet scalograms, channel averaging, ERP
//! epoching / baseline correction / low-pass / trial rejection / amplitude
//! and SNR measures, and the dependent-samples t test.

use ndarray::{Array2, Array3};
use rustfft::num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::dsp::{self, FirWindow};
use crate::error::{Error, Result};
use crate::model::{ChannelInfo, Marker, Recording, RecordingKind};
use crate::stats;

// --- continuous wavelet transform ---

/// Magnitude scalogram on a log-spaced frequency axis.
#[derive(Debug, Clone)]
pub struct Scalogram {
    pub times_s: Vec<f64>,
    pub freqs_hz: Vec<f64>,
    /// freqs x samples.
    pub magnitude: Array2<f64>,
}

const MORSE_GAMMA: f64 = 3.0;
const MORSE_BETA: f64 = 20.0; // time-bandwidth product beta*gamma = 60
const VOICES_PER_OCTAVE: usize = 10;

/// Frequency-domain generalized Morse filter, peak-normalized to 2 so that a
/// unit-amplitude real tone produces unit ridge magnitude.
fn morse_filter(freq_ratio: f64) -> f64 {
    if freq_ratio <= 0.0 {
        return 0.0;
    }
    let ln_h = (2.0f64).ln() + MORSE_BETA * freq_ratio.ln()
        + (MORSE_BETA / MORSE_GAMMA) * (1.0 - freq_ratio.powf(MORSE_GAMMA));
    if ln_h < -700.0 {
        0.0
    } else {
        ln_h.exp()
    }
}

/// Analytic Morse-wavelet transform (gamma = 3, time-bandwidth 60) on a
/// filter bank of 10 voices per octave from 1 Hz up to Nyquist.
pub fn cwt_morse(signal: &[f64], fs: f64) -> Result<Scalogram> {
    let n = signal.len();
    if (n as f64) < 2.0 * fs {
        return Err(Error::InsufficientData(format!(
            "{n} samples is shorter than 2 s at {fs} S/s"
        )));
    }
    let mut freqs = Vec::new();
    let mut f = 1.0;
    while f < fs / 2.0 {
        freqs.push(f);
        f = 1.0 * 2f64.powf(freqs.len() as f64 / VOICES_PER_OCTAVE as f64);
    }

    let nfft = n.next_power_of_two();
    let fwd = dsp::plan_forward(nfft);
    let inv = dsp::plan_inverse(nfft);
    let mut spectrum = vec![Complex::new(0.0, 0.0); nfft];
    for (slot, &v) in spectrum.iter_mut().zip(signal) {
        *slot = Complex::new(v, 0.0);
    }
    fwd.process(&mut spectrum);

    let mut magnitude = Array2::<f64>::zeros((freqs.len(), n));
    for (row, &fc) in freqs.iter().enumerate() {
        let mut buf = vec![Complex::new(0.0, 0.0); nfft];
        for k in 1..=nfft / 2 {
            let fk = k as f64 * fs / nfft as f64;
            let h = morse_filter(fk / fc);
            if h > 0.0 {
                buf[k] = spectrum[k] * h;
            }
        }
        inv.process(&mut buf);
        let scale = 1.0 / nfft as f64;
        for t in 0..n {
            magnitude[[row, t]] = buf[t].norm() * scale;
        }
    }

    Ok(Scalogram {
        times_s: (0..n).map(|t| t as f64 / fs).collect(),
        freqs_hz: freqs,
        magnitude,
    })
}

/// Arithmetic mean across channels, kept as a single-channel recording.
pub fn channel_average(rec: &Recording) -> Recording {
    let n = rec.n_samples();
    let mut avg = vec![0.0; n];
    for row in rec.data.outer_iter() {
        for (a, v) in avg.iter_mut().zip(row.iter()) {
            *a += v;
        }
    }
    let scale = 1.0 / rec.n_channels().max(1) as f64;
    for a in avg.iter_mut() {
        *a *= scale;
    }
    Recording::new(
        Array2::from_shape_vec((1, n), avg).expect("shape"),
        rec.fs,
        vec![ChannelInfo {
            label: "avg".into(),
            position: None,
            is_ecg: false,
        }],
        rec.markers.clone(),
        RecordingKind::Eeg,
    )
    .expect("valid single-channel recording")
}

// --- event-related potentials ---

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RejectReason {
    /// Epoch window ran past the recording edge.
    Boundary,
    /// A sample-to-sample step exceeded the limit.
    Step,
    /// Peak-to-peak range within a 200 ms window exceeded the limit.
    Range,
    /// Peak-to-peak range within a 200 ms window fell below the flat-line
    /// floor.
    FlatLine,
}

/// Stimulus-locked epochs spanning -200..+800 ms (both endpoints included:
/// 251 samples at 250 S/s). Boundary-dropped trials keep a zero-filled slot
/// so the mask stays aligned with the input markers.
#[derive(Debug, Clone)]
pub struct ErpSet {
    /// trials x channels x samples.
    pub epochs: Array3<f64>,
    /// Reject reasons per trial; empty = accepted.
    pub reasons: Vec<Vec<RejectReason>>,
    pub fs: f64,
    pub channels: Vec<ChannelInfo>,
}

pub const ERP_PRE_S: f64 = 0.2;
pub const ERP_POST_S: f64 = 0.8;

impl ErpSet {
    pub fn n_trials(&self) -> usize {
        self.epochs.dim().0
    }

    pub fn epoch_len(&self) -> usize {
        self.epochs.dim().2
    }

    pub fn pre_samples(&self) -> usize {
        (ERP_PRE_S * self.fs).round() as usize
    }

    pub fn accepted(&self) -> Vec<usize> {
        self.reasons
            .iter()
            .enumerate()
            .filter(|(_, r)| r.is_empty())
            .map(|(i, _)| i)
            .collect()
    }

    pub fn time_ms(&self, sample: usize) -> f64 {
        (sample as f64 / self.fs - ERP_PRE_S) * 1000.0
    }

    fn window_indices(&self, lo_ms: f64, hi_ms: f64) -> Vec<usize> {
        (0..self.epoch_len())
            .filter(|&i| {
                let t = self.time_ms(i);
                t >= lo_ms && t <= hi_ms
            })
            .collect()
    }
}

/// Cuts stimulus-locked epochs; trials whose window would leave the
/// recording are kept as zero-filled slots flagged `Boundary`.
pub fn epoch_erp(rec: &Recording, stim_markers: &[Marker]) -> Result<ErpSet> {
    let pre = (ERP_PRE_S * rec.fs).round() as usize;
    let post = (ERP_POST_S * rec.fs).round() as usize;
    let len = pre + post + 1;
    let n_trials = stim_markers.len();
    if n_trials == 0 {
        return Err(Error::EmptyData("no stimulus markers".into()));
    }
    let mut epochs = Array3::<f64>::zeros((n_trials, rec.n_channels(), len));
    let mut reasons = vec![Vec::new(); n_trials];
    let mut usable = 0usize;
    for (trial, m) in stim_markers.iter().enumerate() {
        if m.sample < pre || m.sample + post >= rec.n_samples() {
            reasons[trial].push(RejectReason::Boundary);
            continue;
        }
        let start = m.sample - pre;
        for c in 0..rec.n_channels() {
            for t in 0..len {
                epochs[[trial, c, t]] = rec.data[[c, start + t]];
            }
        }
        usable += 1;
    }
    if usable == 0 {
        return Err(Error::EmptyData("every trial fell on a recording edge".into()));
    }
    Ok(ErpSet {
        epochs,
        reasons,
        fs: rec.fs,
        channels: rec.channels.clone(),
    })
}

/// Subtracts the mean of the 200 ms pre-stimulus window per trial/channel.
pub fn baseline_correct(set: &ErpSet) -> ErpSet {
    let mut out = set.clone();
    let pre = set.pre_samples();
    let (n_trials, n_ch, _) = set.epochs.dim();
    for trial in 0..n_trials {
        for c in 0..n_ch {
            let base: f64 = (0..pre).map(|t| set.epochs[[trial, c, t]]).sum::<f64>() / pre as f64;
            for t in 0..set.epoch_len() {
                out.epochs[[trial, c, t]] = set.epochs[[trial, c, t]] - base;
            }
        }
    }
    out
}

/// Zero-phase low-pass: -6 dB at the cutoff and at least 48 dB down one
/// octave above it.
pub fn erp_lowpass(set: &ErpSet, cutoff_hz: f64) -> Result<ErpSet> {
    if !(cutoff_hz > 0.0 && cutoff_hz < set.fs / 2.0) {
        return Err(Error::Argument(format!(
            "cutoff {cutoff_hz} outside (0, {})",
            set.fs / 2.0
        )));
    }
    // Blackman window reaches its -74 dB floor well inside the octave
    let transition = (cutoff_hz * 0.8).min(25.0);
    let kernel = dsp::lowpass_kernel(set.fs, cutoff_hz, transition, FirWindow::Blackman);
    let mut out = set.clone();
    let (n_trials, n_ch, len) = set.epochs.dim();
    for trial in 0..n_trials {
        for c in 0..n_ch {
            let row: Vec<f64> = (0..len).map(|t| set.epochs[[trial, c, t]]).collect();
            let filtered = dsp::convolve_same_reflect(&row, &kernel);
            for (t, v) in filtered.into_iter().enumerate() {
                out.epochs[[trial, c, t]] = v;
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy)]
pub struct RejectParams {
    pub step_uv: f64,
    pub range_uv: f64,
    pub flat_uv: f64,
    pub window_s: f64,
}

impl Default for RejectParams {
    fn default() -> Self {
        RejectParams {
            step_uv: 50.0,
            range_uv: 200.0,
            flat_uv: 0.5,
            window_s: 0.2,
        }
    }
}

/// Flags trials with amplitude steps, excessive sliding-window range, or
/// flat-lining on any channel. Reasons accumulate per trial.
pub fn reject_trials(set: &ErpSet, p: &RejectParams) -> ErpSet {
    let mut out = set.clone();
    let w = (p.window_s * set.fs).round() as usize;
    let (n_trials, n_ch, len) = set.epochs.dim();
    for trial in 0..n_trials {
        if out.reasons[trial].contains(&RejectReason::Boundary) {
            continue;
        }
        let mut step = false;
        let mut range = false;
        let mut flat = false;
        for c in 0..n_ch {
            let row: Vec<f64> = (0..len).map(|t| set.epochs[[trial, c, t]]).collect();
            for t in 1..len {
                if (row[t] - row[t - 1]).abs() > p.step_uv {
                    step = true;
                }
            }
            for s in 0..=len.saturating_sub(w) {
                let seg = &row[s..s + w];
                let max = seg.iter().cloned().fold(f64::MIN, f64::max);
                let min = seg.iter().cloned().fold(f64::MAX, f64::min);
                if max - min > p.range_uv {
                    range = true;
                }
                if max - min < p.flat_uv {
                    flat = true;
                }
            }
        }
        if step {
            out.reasons[trial].push(RejectReason::Step);
        }
        if range {
            out.reasons[trial].push(RejectReason::Range);
        }
        if flat {
            out.reasons[trial].push(RejectReason::FlatLine);
        }
    }
    out
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct PeakMeasure {
    pub amplitude_uv: f64,
    pub latency_ms: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ChannelErpMeasures {
    pub label: String,
    /// Largest negative deflection in 175-225 ms; absent at Pz.
    pub n2: Option<PeakMeasure>,
    pub n2_mean_uv: Option<f64>,
    /// Largest positive deflection in 300-500 ms.
    pub p3: PeakMeasure,
    pub p3_mean_uv: f64,
    /// Baseline peak-to-peak, clamped to 0.01 uV.
    pub noise_uv: f64,
    pub n2_snr_peak: Option<f64>,
    pub n2_snr_mean: Option<f64>,
    pub p3_snr_peak: f64,
    pub p3_snr_mean: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ErpMeasures {
    pub channels: Vec<ChannelErpMeasures>,
    pub n_accepted: usize,
    pub n_rejected: usize,
}

pub const ERP_NOISE_FLOOR_UV: f64 = 0.01;

/// Averages the accepted trials and measures N2/P3 peaks, window means,
/// baseline noise, and both SNR variants on the requested channels.
pub fn erp_measures(set: &ErpSet, channel_labels: &[&str]) -> Result<ErpMeasures> {
    let accepted = set.accepted();
    if accepted.is_empty() {
        return Err(Error::EmptyData("no accepted trials".into()));
    }
    let pre = set.pre_samples();
    let n2_win = set.window_indices(175.0, 225.0);
    let p3_win = set.window_indices(300.0, 500.0);

    let mut out = Vec::new();
    for &label in channel_labels {
        let Some(c) = set.channels.iter().position(|ch| ch.label == label) else {
            continue;
        };
        let len = set.epoch_len();
        let mut avg = vec![0.0; len];
        for &trial in &accepted {
            for (t, slot) in avg.iter_mut().enumerate() {
                *slot += set.epochs[[trial, c, t]];
            }
        }
        for v in avg.iter_mut() {
            *v /= accepted.len() as f64;
        }

        let base = &avg[..pre];
        let noise = (base.iter().cloned().fold(f64::MIN, f64::max)
            - base.iter().cloned().fold(f64::MAX, f64::min))
        .max(ERP_NOISE_FLOOR_UV);

        let (p3_idx, p3_amp) = p3_win
            .iter()
            .map(|&i| (i, avg[i]))
            .max_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
            .ok_or_else(|| Error::Argument("P3 window empty".into()))?;
        let p3_mean = stats::mean(&p3_win.iter().map(|&i| avg[i]).collect::<Vec<_>>());
        let p3 = PeakMeasure {
            amplitude_uv: p3_amp,
            latency_ms: set.time_ms(p3_idx),
        };

        let n2_fields = if label != "Pz" {
            let (n2_idx, n2_amp) = n2_win
                .iter()
                .map(|&i| (i, avg[i]))
                .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
                .ok_or_else(|| Error::Argument("N2 window empty".into()))?;
            let n2_mean = stats::mean(&n2_win.iter().map(|&i| avg[i]).collect::<Vec<_>>());
            Some((
                PeakMeasure {
                    amplitude_uv: n2_amp,
                    latency_ms: set.time_ms(n2_idx),
                },
                n2_mean,
            ))
        } else {
            None
        };

        out.push(ChannelErpMeasures {
            label: label.to_string(),
            n2: n2_fields.as_ref().map(|(p, _)| p.clone()),
            n2_mean_uv: n2_fields.as_ref().map(|(_, m)| *m),
            n2_snr_peak: n2_fields.as_ref().map(|(p, _)| p.amplitude_uv.abs() / noise),
            n2_snr_mean: n2_fields.as_ref().map(|(_, m)| m.abs() / noise),
            p3_snr_peak: p3.amplitude_uv.abs() / noise,
            p3_snr_mean: p3_mean.abs() / noise,
            p3,
            p3_mean_uv: p3_mean,
            noise_uv: noise,
        });
    }
    if out.is_empty() {
        return Err(Error::Argument("none of the requested channels exist".into()));
    }
    Ok(ErpMeasures {
        channels: out,
        n_accepted: accepted.len(),
        n_rejected: set.n_trials() - accepted.len(),
    })
}

// --- paired statistics ---

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct PairedStats {
    pub t: f64,
    pub df: f64,
    pub p: f64,
    pub cohen_d: f64,
}

/// Dependent-samples t test on the element-wise differences, two-sided p via
/// the regularized incomplete beta, and Cohen's d = mean(diff)/sd(diff).
pub fn paired_stats(a: &[f64], b: &[f64]) -> Result<PairedStats> {
    if a.len() != b.len() {
        return Err(Error::Argument("paired samples differ in length".into()));
    }
    let n = a.len();
    if n < 2 {
        return Err(Error::Argument(format!("need n >= 2 pairs, got {n}")));
    }
    let diffs: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    if diffs.iter().all(|&d| d == 0.0) {
        return Ok(PairedStats {
            t: 0.0,
            df: (n - 1) as f64,
            p: 1.0,
            cohen_d: 0.0,
        });
    }
    let mean = stats::mean(&diffs);
    let sd = stats::std_sample(&diffs);
    if sd == 0.0 {
        return Err(Error::Degenerate(
            "all differences identical and nonzero".into(),
        ));
    }
    let df = (n - 1) as f64;
    let t = mean / (sd / (n as f64).sqrt());
    Ok(PairedStats {
        t,
        df,
        p: stats::t_two_sided_p(t, df),
        cohen_d: mean / sd,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn tone(fs: f64, f: f64, n: usize) -> Vec<f64> {
        (0..n).map(|i| (2.0 * PI * f * i as f64 / fs).sin()).collect()
    }

    #[test]
    fn cwt_ridge_at_ten_hz() {
        let fs = 250.0;
        let x = tone(fs, 10.0, 2500);
        let sc = cwt_morse(&x, fs).unwrap();
        let mid = 1250;
        let ridge = sc
            .freqs_hz
            .iter()
            .enumerate()
            .max_by(|a, b| sc.magnitude[[a.0, mid]].partial_cmp(&sc.magnitude[[b.0, mid]]).unwrap())
            .map(|(i, f)| (i, *f))
            .unwrap();
        let voices_off = (ridge.1 / 10.0).log2().abs() * VOICES_PER_OCTAVE as f64;
        assert!(voices_off <= 0.5, "ridge at {} Hz", ridge.1);
        // unit tone -> unit ridge magnitude within 5%
        let mag = sc.magnitude[[ridge.0, mid]];
        assert!((mag - 1.0).abs() < 0.05, "ridge magnitude {mag}");
    }

    #[test]
    fn cwt_zero_and_superposition() {
        let fs = 250.0;
        let zero = vec![0.0; 1000];
        let sc = cwt_morse(&zero, fs).unwrap();
        assert!(sc.magnitude.iter().all(|&v| v == 0.0));

        let n = 4000;
        let a = tone(fs, 5.0, n);
        let b = tone(fs, 20.0, n);
        let sum: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x + y).collect();
        let sc_sum = cwt_morse(&sum, fs).unwrap();
        let row_at = |f_target: f64| {
            sc_sum
                .freqs_hz
                .iter()
                .enumerate()
                .min_by(|x, y| {
                    (x.1 - f_target)
                        .abs()
                        .partial_cmp(&(y.1 - f_target).abs())
                        .unwrap()
                })
                .unwrap()
                .0
        };
        let mid = n / 2;
        for f_target in [5.0, 20.0] {
            let mag = sc_sum.magnitude[[row_at(f_target), mid]];
            assert!((mag - 1.0).abs() < 0.10, "{f_target} Hz ridge {mag}");
        }
    }

    #[test]
    fn cwt_shift_equivariance() {
        let fs = 250.0;
        let n = 3000;
        let shift = 250usize;
        let pulse = |t: isize| -> f64 {
            let d = (t - 1000) as f64;
            (-d * d / 800.0).exp() * (2.0 * PI * 8.0 * t as f64 / fs).sin()
        };
        let x: Vec<f64> = (0..n as isize).map(pulse).collect();
        let y: Vec<f64> = (0..n as isize).map(|t| pulse(t - shift as isize)).collect();
        let sx = cwt_morse(&x, fs).unwrap();
        let sy = cwt_morse(&y, fs).unwrap();
        let row = sx
            .freqs_hz
            .iter()
            .position(|&f| (f / 8.0).log2().abs() < 0.05)
            .unwrap();
        for t in 800..1200usize {
            let a = sx.magnitude[[row, t]];
            let b = sy.magnitude[[row, t + shift]];
            assert!((a - b).abs() < 0.02 + 0.02 * a, "shift mismatch at {t}: {a} vs {b}");
        }
    }

    fn rec_rows(rows: Vec<Vec<f64>>, fs: f64, markers: Vec<Marker>) -> Recording {
        let n_ch = rows.len();
        let n = rows[0].len();
        let mut data = Array2::zeros((n_ch, n));
        for (c, r) in rows.into_iter().enumerate() {
            for (t, v) in r.into_iter().enumerate() {
                data[[c, t]] = v;
            }
        }
        let channels = (0..n_ch)
            .map(|c| ChannelInfo {
                label: ["Fz", "FCz", "Cz", "Pz"][c % 4].to_string() + if c >= 4 { "x" } else { "" },
                position: None,
                is_ecg: false,
            })
            .collect();
        Recording::new(data, fs, channels, markers, RecordingKind::Eeg).unwrap()
    }

    #[test]
    fn channel_average_cases() {
        let fs = 250.0;
        let s: Vec<f64> = tone(fs, 7.0, 500);
        let neg: Vec<f64> = s.iter().map(|v| -v).collect();
        let rec = rec_rows(vec![s.clone(), neg], fs, vec![]);
        let avg = channel_average(&rec);
        assert!(avg.data.iter().all(|v| v.abs() < 1e-12));

        let rec2 = rec_rows(vec![s.clone(), s.clone()], fs, vec![]);
        let avg2 = channel_average(&rec2);
        for (a, b) in avg2.data.iter().zip(&s) {
            assert!((a - b).abs() < 1e-12);
        }

        use rand::prelude::*;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let rows: Vec<Vec<f64>> = (0..3)
            .map(|_| (0..100).map(|_| crate::stats::randn(&mut rng)).collect())
            .collect();
        let expected: Vec<f64> = (0..100)
            .map(|t| (rows[0][t] + rows[1][t] + rows[2][t]) / 3.0)
            .collect();
        let avg3 = channel_average(&rec_rows(rows, fs, vec![]));
        for (a, b) in avg3.data.iter().zip(&expected) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    fn task_recording(n_trials: usize, fs: f64) -> (Recording, Vec<Marker>) {
        let spacing = (2.0 * fs) as usize;
        let n = spacing * (n_trials + 2);
        let rows = vec![vec![1.0; n]; 4]; // Fz, FCz, Cz, Pz
        let markers: Vec<Marker> = (0..n_trials)
            .map(|i| Marker::new("S1", spacing + i * spacing))
            .collect();
        (rec_rows(rows, fs, markers.clone()), markers)
    }

    /// Clean wiggle loud enough to dodge every rejection rule.
    fn fill_clean(set: &mut ErpSet) {
        let fs = set.fs;
        let (n_trials, n_ch, len) = set.epochs.dim();
        for trial in 0..n_trials {
            for c in 0..n_ch {
                for t in 0..len {
                    set.epochs[[trial, c, t]] =
                        10.0 * (2.0 * PI * 7.0 * t as f64 / fs + c as f64).sin();
                }
            }
        }
    }

    #[test]
    fn epoching_window_and_boundary() {
        let fs = 250.0;
        let (rec, markers) = task_recording(72, fs);
        let set = epoch_erp(&rec, &markers).unwrap();
        assert_eq!(set.n_trials(), 72);
        assert_eq!(set.epoch_len(), 251);
        assert_eq!(set.accepted().len(), 72);

        let mut with_edge = markers.clone();
        with_edge.insert(0, Marker::new("S1", 10));
        let set = epoch_erp(&rec, &with_edge).unwrap();
        assert_eq!(set.accepted().len(), 72);
        assert_eq!(set.reasons[0], vec![RejectReason::Boundary]);
    }

    #[test]
    fn baseline_correction_properties() {
        let fs = 250.0;
        let (rec, markers) = task_recording(4, fs);
        let mut set = epoch_erp(&rec, &markers).unwrap();
        // constant offset epoch -> zero after correction
        let corrected = baseline_correct(&set);
        assert!(corrected.epochs.iter().all(|v| v.abs() < 1e-12));

        use rand::prelude::*;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(8);
        for v in set.epochs.iter_mut() {
            *v = crate::stats::randn(&mut rng);
        }
        let corrected = baseline_correct(&set);
        let pre = corrected.pre_samples();
        for trial in 0..corrected.n_trials() {
            for c in 0..2 {
                let mean: f64 =
                    (0..pre).map(|t| corrected.epochs[[trial, c, t]]).sum::<f64>() / pre as f64;
                assert!(mean.abs() < 1e-9, "baseline mean {mean}");
            }
        }
        // idempotent
        let twice = baseline_correct(&corrected);
        for (a, b) in twice.epochs.iter().zip(corrected.epochs.iter()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn erp_lowpass_contract() {
        let fs = 250.0;
        let (rec, markers) = task_recording(2, fs);
        let mut set = epoch_erp(&rec, &markers).unwrap();
        let len = set.epoch_len();
        // trial 0: 10 Hz tone; trial 1: 60 Hz tone
        for t in 0..len {
            set.epochs[[0, 0, t]] = (2.0 * PI * 10.0 * t as f64 / fs).sin();
            set.epochs[[1, 0, t]] = (2.0 * PI * 60.0 * t as f64 / fs).sin();
        }
        let filtered = erp_lowpass(&set, 30.0).unwrap();
        let rms = |trial: usize| {
            let seg: Vec<f64> = (40..len - 40).map(|t| filtered.epochs[[trial, 0, t]]).collect();
            (seg.iter().map(|v| v * v).sum::<f64>() / seg.len() as f64).sqrt()
        };
        let in_rms = (0.5f64).sqrt();
        assert!((rms(0) / in_rms - 1.0).abs() < 0.02, "10 Hz gain {}", rms(0) / in_rms);
        let atten = 20.0 * (rms(1) / in_rms).log10();
        assert!(atten < -48.0, "60 Hz attenuation {atten} dB");

        // DC epoch unchanged
        let mut dc = epoch_erp(&rec, &markers).unwrap();
        for t in 0..len {
            dc.epochs[[0, 0, t]] = 3.25;
        }
        let f = erp_lowpass(&dc, 30.0).unwrap();
        for t in 0..len {
            assert!((f.epochs[[0, 0, t]] - 3.25).abs() < 1e-9);
        }
    }

    #[test]
    fn rejection_rules_fire_exactly() {
        let fs = 250.0;
        let (rec, markers) = task_recording(4, fs);
        let mut set = epoch_erp(&rec, &markers).unwrap();
        let len = set.epoch_len();
        fill_clean(&mut set);
        // trial 1: 300 uV swing within 100 ms on channel 0, steps of 24 uV
        for t in 0..len {
            let ramp = (t as f64 - 100.0).clamp(0.0, 12.5);
            set.epochs[[1, 0, t]] = 24.0 * ramp + 2.0 * (t as f64 * 0.9).sin();
        }
        // trial 2: flat 240 ms segment on channel 0
        for t in 100..160 {
            set.epochs[[2, 0, t]] = 5.0;
        }
        // trial 3: single > 50 uV step on channel 0, small range otherwise
        for t in 0..len {
            set.epochs[[3, 0, t]] = if t == 120 { 60.0 } else { 1.0 + (t as f64 * 0.8).sin() };
        }
        let out = reject_trials(&set, &RejectParams::default());
        assert!(out.reasons[0].is_empty(), "clean trial rejected: {:?}", out.reasons[0]);
        assert!(out.reasons[1].contains(&RejectReason::Range));
        assert!(!out.reasons[1].contains(&RejectReason::Step), "24 uV steps must not fire");
        assert!(out.reasons[2].contains(&RejectReason::FlatLine));
        assert!(out.reasons[3].contains(&RejectReason::Step));
        assert!(!out.reasons[3].contains(&RejectReason::Range));
    }

    #[test]
    fn rejection_monotone_under_scaling() {
        use rand::prelude::*;
        let fs = 250.0;
        let (rec, markers) = task_recording(12, fs);
        let mut set = epoch_erp(&rec, &markers).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(12);
        for v in set.epochs.iter_mut() {
            *v = 80.0 * crate::stats::randn(&mut rng);
        }
        let full = reject_trials(&set, &RejectParams::default());
        let mut scaled = set.clone();
        scaled.epochs.mapv_inplace(|v| v * 0.1);
        let small = reject_trials(&scaled, &RejectParams::default());
        for trial in 0..set.n_trials() {
            // step/range can only disappear when shrunk
            for reason in [RejectReason::Step, RejectReason::Range] {
                if small.reasons[trial].contains(&reason) {
                    assert!(full.reasons[trial].contains(&reason), "{reason:?} appeared when shrinking");
                }
            }
            // flat-lining can only appear when shrunk
            if full.reasons[trial].contains(&RejectReason::FlatLine) {
                assert!(small.reasons[trial].contains(&RejectReason::FlatLine));
            }
        }
    }

    #[test]
    fn measures_on_planted_peaks() {
        let fs = 250.0;
        let (rec, markers) = task_recording(6, fs);
        let mut set = epoch_erp(&rec, &markers).unwrap();
        let len = set.epoch_len();
        set.epochs.fill(0.0);
        // noiseless -5 uV bump at 200 ms on every trial, channel 0 (Fz)
        for trial in 0..set.n_trials() {
            for t in 0..len {
                let ms = set.time_ms(t);
                set.epochs[[trial, 0, t]] += -5.0 * (-((ms - 200.0) / 15.0).powi(2)).exp();
                set.epochs[[trial, 3, t]] += 4.0 * (-((ms - 400.0) / 40.0).powi(2)).exp();
            }
        }
        let m = erp_measures(&set, &["Fz", "Pz"]).unwrap();
        let fz = &m.channels[0];
        assert_eq!(fz.label, "Fz");
        let n2 = fz.n2.as_ref().unwrap();
        assert!((n2.amplitude_uv + 5.0).abs() < 1e-9);
        assert!((n2.latency_ms - 200.0).abs() <= 4.0);
        assert_eq!(fz.noise_uv, ERP_NOISE_FLOOR_UV);
        assert!(fz.n2_snr_peak.unwrap().is_finite());

        let pz = &m.channels[1];
        assert!(pz.n2.is_none(), "N2 must not be computed at Pz");
        assert!((pz.p3.amplitude_uv - 4.0).abs() < 1e-9);
    }

    #[test]
    fn p3_snr_from_constructed_baseline() {
        let fs = 250.0;
        let (rec, markers) = task_recording(1, fs);
        let mut set = epoch_erp(&rec, &markers).unwrap();
        let len = set.epoch_len();
        set.epochs.fill(0.0);
        let pre = set.pre_samples();
        for t in 0..len {
            let ms = set.time_ms(t);
            // baseline sawtooth peak-to-peak exactly 2 uV
            if t < pre {
                set.epochs[[0, 0, t]] = if t % 2 == 0 { 1.0 } else { -1.0 };
            }
            set.epochs[[0, 0, t]] += 10.0 * (-((ms - 400.0) / 30.0).powi(2)).exp();
        }
        let m = erp_measures(&set, &["Fz"]).unwrap();
        let fz = &m.channels[0];
        assert!((fz.noise_uv - 2.0).abs() < 1e-9);
        assert!((fz.p3_snr_peak - 5.0).abs() < 1e-6, "snr {}", fz.p3_snr_peak);
    }

    #[test]
    fn paired_stats_cases() {
        let a = [1.0, 2.0, 3.0, 4.0];
        let s = paired_stats(&a, &a).unwrap();
        assert_eq!(s.t, 0.0);
        assert_eq!(s.p, 1.0);
        assert_eq!(s.cohen_d, 0.0);

        let b = [0.0, 1.0, 2.0, 3.0];
        assert!(matches!(
            paired_stats(&a, &b),
            Err(Error::Degenerate(_))
        ));

        assert!(paired_stats(&[1.0], &[2.0]).is_err());

        let x = [2.1, 3.3, 1.8, 4.0, 2.2, 3.1, 2.8, 3.6];
        let y = [1.9, 3.0, 2.2, 3.1, 2.0, 2.6, 3.0, 3.2];
        let s = paired_stats(&x, &y).unwrap();
        assert!((s.df - 7.0).abs() < 1e-12);
        assert!(s.p > 0.0 && s.p < 1.0);
        // cross-check p against the CDF identity
        let p_ref = 2.0 * (1.0 - crate::stats::t_cdf(s.t.abs(), 7.0));
        assert!((s.p - p_ref).abs() < 1e-9);
    }
}
