//! Stage-A cleanup: volume-trigger derivation, sliding-template gradient
//! artifact subtraction (plain averaging or with a residual principal-
//! component fit), anti-aliased decimation, band-pass / band-reject
//! filtering, and the Welch PSD primitives reused downstream.

use ndarray::{Array1, Array2, ArrayView1};
use rayon::prelude::*;
use rustfft::num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::dsp::{self, FirWindow};
use crate::error::{Error, Result};
use crate::linalg;
use crate::model::{Marker, Recording};

/// One volume trigger at every `n_slices`-th slice trigger, starting at the
/// first. The slice-trigger count must divide evenly.
pub fn derive_volume_triggers(slice_markers: &[Marker], n_slices: usize) -> Result<Vec<Marker>> {
    if n_slices == 0 {
        return Err(Error::Argument("n_slices must be positive".into()));
    }
    if slice_markers.len() < n_slices {
        return Err(Error::Argument(format!(
            "need at least {n_slices} slice triggers, got {}",
            slice_markers.len()
        )));
    }
    let remainder = slice_markers.len() % n_slices;
    if remainder != 0 {
        return Err(Error::TriggerCount { remainder });
    }
    Ok(slice_markers
        .iter()
        .step_by(n_slices)
        .map(|m| Marker::new("Volume", m.sample))
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GradientMethod {
    /// Sliding-window average artifact subtraction.
    Aas,
    /// AAS plus least-squares removal of the leading residual principal
    /// components per channel.
    Obs,
}

/// The OBS residual basis is learned from residuals high-passed above this
/// corner, which keeps cardiac (2-7 Hz) and alpha (8-13 Hz) physiology out
/// of the subtraction while scanner-band variation (slice harmonics start at
/// 19.5 Hz) passes through.
pub const OBS_RESIDUAL_HIGHPASS_HZ: f64 = 15.0;

/// Diagnostic bundle from the gradient stage: the per-epoch templates that
/// were subtracted and the residual PCA basis per channel. Only materialized
/// on request; it is sized channels x epochs x epoch-length.
#[derive(Debug, Clone)]
pub struct GradientTemplateSet {
    /// One (epochs x epoch_len) template matrix per channel.
    pub templates: Vec<Array2<f64>>,
    /// One (epoch_len x n_pc) orthonormal basis per channel (empty for AAS).
    pub residual_basis: Vec<Array2<f64>>,
    pub epoch_len: usize,
    pub window_half_width: usize,
    pub n_pc: usize,
}

struct EpochGrid {
    starts: Vec<usize>,
    len: usize,
    fs: f64,
}

fn epoch_grid(rec: &Recording, vols: &[Marker]) -> Result<EpochGrid> {
    if vols.len() < 2 {
        return Err(Error::InsufficientEpochs(format!(
            "need at least 2 volume epochs, got {}",
            vols.len()
        )));
    }
    let starts: Vec<usize> = vols.iter().map(|m| m.sample).collect();
    let diffs: Vec<f64> = starts.windows(2).map(|w| (w[1] - w[0]) as f64).collect();
    let len = crate::stats::median(&diffs).round() as usize;
    if len == 0 {
        return Err(Error::Argument("zero-length volume epoch".into()));
    }
    for &s in &starts {
        if s + len > rec.n_samples() {
            return Err(Error::Bounds(format!(
                "volume epoch at {s} (+{len}) runs past {} samples",
                rec.n_samples()
            )));
        }
    }
    Ok(EpochGrid {
        starts,
        len,
        fs: rec.fs,
    })
}

/// Sliding mean window `[lo, lo + width)` for epoch `i`, shifted to stay in
/// range near the edges.
fn clamp_window(i: usize, n_epochs: usize, half_width: usize) -> (usize, usize) {
    let width = (2 * half_width + 1).min(n_epochs);
    let lo = (i as isize - half_width as isize)
        .clamp(0, (n_epochs - width) as isize) as usize;
    (lo, width)
}

fn channel_gradient_correct(
    row: ArrayView1<f64>,
    grid: &EpochGrid,
    method: GradientMethod,
    half_width: usize,
    n_pc: usize,
    collect_templates: bool,
) -> (Vec<f64>, Option<(Array2<f64>, Array2<f64>)>) {
    let n_ep = grid.starts.len();
    let len = grid.len;
    let mut out = row.to_vec();

    // epoch matrix and its prefix sums across epochs
    let mut epochs = Array2::<f64>::zeros((n_ep, len));
    for (e, &s) in grid.starts.iter().enumerate() {
        epochs
            .row_mut(e)
            .assign(&row.slice(ndarray::s![s..s + len]));
    }
    let mut prefix = Array2::<f64>::zeros((n_ep + 1, len));
    for e in 0..n_ep {
        let (prev, cur) = {
            let row_prev = prefix.row(e).to_owned();
            (row_prev, epochs.row(e).to_owned())
        };
        prefix.row_mut(e + 1).assign(&(&prev + &cur));
    }

    // sliding-mean templates
    let mut templates = Array2::<f64>::zeros((n_ep, len));
    for e in 0..n_ep {
        let (lo, width) = clamp_window(e, n_ep, half_width);
        let scale = 1.0 / width as f64;
        let sum = &prefix.row(lo + width) - &prefix.row(lo);
        templates.row_mut(e).assign(&(sum * scale));
    }

    let residuals = &epochs - &templates;

    let mut basis = Array2::<f64>::zeros((len, 0));
    let mut filtered_residuals = Array2::<f64>::zeros((0, 0));
    if method == GradientMethod::Obs && n_pc > 0 && n_ep > 1 {
        let k = n_pc.min(n_ep - 1);
        // learn the basis from artifact-band residuals only
        let fs_est = grid.fs;
        let hp = dsp::bandpass_kernel(
            fs_est,
            OBS_RESIDUAL_HIGHPASS_HZ,
            (0.45 * fs_est).min(fs_est / 2.0 - 1.0),
            5.0,
            FirWindow::Hamming,
        );
        filtered_residuals = dsp::apply_fir(&residuals, &hp);
        // thin PCA through the epoch-space Gram matrix
        let gram = filtered_residuals.dot(&filtered_residuals.t()); // n_ep x n_ep
        let (evals, evecs) = linalg::jacobi_eigh(&gram);
        let mut cols: Vec<Array1<f64>> = Vec::with_capacity(k);
        for j in 0..k {
            let lambda = evals[j];
            if lambda <= 1e-12 * evals[0].max(1e-300) {
                break;
            }
            let v = evecs.column(j);
            let u = filtered_residuals.t().dot(&v) / lambda.sqrt();
            cols.push(u);
        }
        if !cols.is_empty() {
            basis = Array2::zeros((len, cols.len()));
            for (j, c) in cols.iter().enumerate() {
                basis.column_mut(j).assign(c);
            }
        }
    }

    for e in 0..n_ep {
        let s = grid.starts[e];
        if basis.ncols() > 0 {
            let coeffs = basis.t().dot(&filtered_residuals.row(e));
            let fitted = basis.dot(&coeffs);
            for t in 0..len {
                out[s + t] = row[s + t] - templates[[e, t]] - fitted[t];
            }
        } else {
            for t in 0..len {
                out[s + t] = row[s + t] - templates[[e, t]];
            }
        }
    }

    let diag = if collect_templates {
        Some((templates, basis))
    } else {
        None
    };
    (out, diag)
}

/// Removes the periodic scanner artifact: per channel, each volume epoch
/// gets the mean of the surrounding `2W+1` epochs subtracted (window shifted
/// at the edges); OBS additionally regresses out the top `n_pc` principal
/// components of the per-epoch residuals. Samples outside every epoch are
/// left untouched.
pub fn gradient_subtract(
    rec: &Recording,
    vols: &[Marker],
    method: GradientMethod,
    half_width: usize,
    n_pc: usize,
) -> Result<Recording> {
    gradient_subtract_inner(rec, vols, method, half_width, n_pc, false).map(|(r, _)| r)
}

/// Same correction, also returning the subtracted templates and PCA bases.
pub fn gradient_subtract_with_templates(
    rec: &Recording,
    vols: &[Marker],
    method: GradientMethod,
    half_width: usize,
    n_pc: usize,
) -> Result<(Recording, GradientTemplateSet)> {
    let (rec, diag) = gradient_subtract_inner(rec, vols, method, half_width, n_pc, true)?;
    Ok((rec, diag.expect("templates requested")))
}

fn gradient_subtract_inner(
    rec: &Recording,
    vols: &[Marker],
    method: GradientMethod,
    half_width: usize,
    n_pc: usize,
    collect: bool,
) -> Result<(Recording, Option<GradientTemplateSet>)> {
    if half_width == 0 {
        return Err(Error::Argument("window half-width must be >= 1".into()));
    }
    let grid = epoch_grid(rec, vols)?;
    let rows: Vec<ArrayView1<f64>> = rec.data.outer_iter().collect();
    let results: Vec<(Vec<f64>, Option<(Array2<f64>, Array2<f64>)>)> = rows
        .into_par_iter()
        .map(|row| channel_gradient_correct(row, &grid, method, half_width, n_pc, collect))
        .collect();

    let mut data = Array2::zeros(rec.data.dim());
    let mut templates = Vec::new();
    let mut bases = Vec::new();
    for (c, (row, diag)) in results.into_iter().enumerate() {
        data.row_mut(c).assign(&Array1::from(row));
        if let Some((t, b)) = diag {
            templates.push(t);
            bases.push(b);
        }
    }
    let out = rec.with_data(data)?;
    let diag = collect.then(|| GradientTemplateSet {
        templates,
        residual_basis: bases,
        epoch_len: grid.len,
        window_half_width: half_width,
        n_pc,
    });
    Ok((out, diag))
}

/// Anti-aliased integer-factor downsampling. The low-pass cuts at
/// 0.4x the output rate; markers rescale by integer division.
pub fn decimate(rec: &Recording, factor: usize) -> Result<Recording> {
    if factor == 0 {
        return Err(Error::Argument("decimation factor must be positive".into()));
    }
    if factor == 1 {
        return Ok(rec.clone());
    }
    let new_fs = rec.fs / factor as f64;
    if (rec.fs / factor as f64 * factor as f64 - rec.fs).abs() > 1e-9
        || (rec.fs - (rec.fs / factor as f64).round() * factor as f64).abs() > 1e-6
    {
        return Err(Error::Argument(format!(
            "sampling rate {} not divisible by factor {factor}",
            rec.fs
        )));
    }
    let cutoff = 0.4 * new_fs;
    let transition = 0.1 * new_fs;
    let kernel = dsp::lowpass_kernel(rec.fs, cutoff, transition, FirWindow::Hamming);
    let filtered = dsp::apply_fir(&rec.data, &kernel);
    let n_out = (rec.n_samples() + factor - 1) / factor;
    let mut data = Array2::zeros((rec.n_channels(), n_out));
    for c in 0..rec.n_channels() {
        for (j, t) in (0..rec.n_samples()).step_by(factor).enumerate() {
            data[[c, j]] = filtered[[c, t]];
        }
    }
    let markers = rec
        .markers
        .iter()
        .map(|m| Marker {
            label: m.label.clone(),
            sample: (m.sample / factor).min(n_out - 1),
        })
        .collect();
    Recording::new(data, new_fs, rec.channels.clone(), markers, rec.kind)
}

/// Zero-phase windowed-sinc band-pass. `lo = 0` degenerates to a pure
/// low-pass. Transition width is `min(lo, 2 Hz)` (2 Hz for the low-pass case).
pub fn fir_bandpass(rec: &Recording, lo_hz: f64, hi_hz: f64) -> Result<Recording> {
    if !(lo_hz >= 0.0 && lo_hz < hi_hz && hi_hz < rec.fs / 2.0) {
        return Err(Error::Argument(format!(
            "invalid band edges ({lo_hz}, {hi_hz}) at fs {}",
            rec.fs
        )));
    }
    let transition = if lo_hz > 0.0 { lo_hz.min(2.0) } else { 2.0 };
    let kernel = if lo_hz > 0.0 {
        dsp::bandpass_kernel(rec.fs, lo_hz, hi_hz, transition, FirWindow::Hamming)
    } else {
        dsp::lowpass_kernel(rec.fs, hi_hz, transition, FirWindow::Hamming)
    };
    rec.with_data(dsp::apply_fir(&rec.data, &kernel))
}

/// Zero-phase notch cascade: every listed center is attenuated over a
/// `bw_hz`-wide stop band.
pub fn band_reject(rec: &Recording, centers_hz: &[f64], bw_hz: f64) -> Result<Recording> {
    if centers_hz.is_empty() {
        return Ok(rec.clone());
    }
    for &c in centers_hz {
        if !(c - bw_hz / 2.0 > 0.0 && c + bw_hz / 2.0 < rec.fs / 2.0) {
            return Err(Error::Argument(format!(
                "notch center {c} +/- {} outside (0, {})",
                bw_hz / 2.0,
                rec.fs / 2.0
            )));
        }
    }
    let kernel = dsp::bandstop_composite_kernel(rec.fs, centers_hz, bw_hz, FirWindow::Blackman);
    rec.with_data(dsp::apply_fir(&rec.data, &kernel))
}

/// Slice-frequency harmonics up to `min(harmonic_max_hz, Nyquist - bw)`,
/// plus the vibration and line frequencies.
pub fn reject_centers(
    slice_freq_hz: f64,
    vibration_hz: f64,
    line_hz: f64,
    fs: f64,
    bw_hz: f64,
    harmonic_max_hz: f64,
) -> Vec<f64> {
    let limit = harmonic_max_hz.min(fs / 2.0 - bw_hz);
    let mut centers = Vec::new();
    if slice_freq_hz > 0.0 {
        let mut k = 1;
        while slice_freq_hz * k as f64 <= limit {
            centers.push(slice_freq_hz * k as f64);
            k += 1;
        }
    }
    for &extra in &[vibration_hz, line_hz] {
        if extra > 0.0 && extra <= limit && !centers.iter().any(|c| (c - extra).abs() < 1e-9) {
            centers.push(extra);
        }
    }
    centers.sort_by(|a, b| a.partial_cmp(b).unwrap());
    centers
}

/// Averaged Hann-windowed periodogram per channel, in dB re 1 uV^2/Hz.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PsdEstimate {
    pub freqs: Vec<f64>,
    /// channels x frequency bins, dB (clamped at -120 dB).
    pub power_db: Vec<Vec<f64>>,
    pub win_s: f64,
    pub overlap: f64,
}

impl PsdEstimate {
    pub fn n_channels(&self) -> usize {
        self.power_db.len()
    }

    pub fn bin_width(&self) -> f64 {
        if self.freqs.len() > 1 {
            self.freqs[1] - self.freqs[0]
        } else {
            0.0
        }
    }

    /// Mean of dB values over bins with lo <= f < hi.
    pub fn band_mean_db(&self, channel: usize, lo: f64, hi: f64) -> Option<f64> {
        let vals: Vec<f64> = self
            .freqs
            .iter()
            .zip(&self.power_db[channel])
            .filter(|(f, _)| **f >= lo && **f < hi)
            .map(|(_, p)| *p)
            .collect();
        if vals.is_empty() {
            None
        } else {
            Some(crate::stats::mean(&vals))
        }
    }

    /// Mean linear power over bins with lo <= f < hi.
    pub fn band_mean_linear(&self, channel: usize, lo: f64, hi: f64) -> Option<f64> {
        let vals: Vec<f64> = self
            .freqs
            .iter()
            .zip(&self.power_db[channel])
            .filter(|(f, _)| **f >= lo && **f < hi)
            .map(|(_, p)| 10f64.powf(*p / 10.0))
            .collect();
        if vals.is_empty() {
            None
        } else {
            Some(crate::stats::mean(&vals))
        }
    }

    /// dB value at the bin nearest `f_hz`.
    pub fn db_at(&self, channel: usize, f_hz: f64) -> f64 {
        let i = self
            .freqs
            .iter()
            .enumerate()
            .min_by(|a, b| (a.1 - f_hz).abs().partial_cmp(&(b.1 - f_hz).abs()).unwrap())
            .map(|(i, _)| i)
            .unwrap_or(0);
        self.power_db[channel][i]
    }
}

/// One-sided Welch density of a single signal. Window length in samples.
pub fn welch_psd(x: &[f64], fs: f64, win: usize, overlap: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    if win == 0 || x.len() < win {
        return Err(Error::InsufficientData(format!(
            "signal of {} samples shorter than window {win}",
            x.len()
        )));
    }
    let hop = ((win as f64) * (1.0 - overlap)).round().max(1.0) as usize;
    let w = dsp::hann_window(win);
    let u: f64 = w.iter().map(|v| v * v).sum();
    let fft = dsp::plan_forward(win);
    let n_bins = win / 2 + 1;
    let mut acc = vec![0.0f64; n_bins];
    let mut n_seg = 0usize;
    let mut start = 0usize;
    while start + win <= x.len() {
        let mut buf: Vec<Complex<f64>> = (0..win)
            .map(|i| Complex::new(x[start + i] * w[i], 0.0))
            .collect();
        fft.process(&mut buf);
        for (k, slot) in acc.iter_mut().enumerate() {
            let scale = if k == 0 || (win % 2 == 0 && k == win / 2) {
                1.0
            } else {
                2.0
            };
            *slot += scale * buf[k].norm_sqr() / (fs * u);
        }
        n_seg += 1;
        start += hop;
    }
    for v in &mut acc {
        *v /= n_seg as f64;
    }
    let freqs = (0..n_bins).map(|k| k as f64 * fs / win as f64).collect();
    Ok((freqs, acc))
}

/// Welch PSD (linear) converted to clamped dB.
pub fn welch_psd_db(x: &[f64], fs: f64, win: usize, overlap: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    let (f, p) = welch_psd(x, fs, win, overlap)?;
    Ok((f, p.into_iter().map(dsp::power_db).collect()))
}

/// Moving-window FFT PSD for every channel of a recording.
pub fn compute_psd(rec: &Recording, win_s: f64, overlap: f64) -> Result<PsdEstimate> {
    let win = (win_s * rec.fs).round() as usize;
    if rec.n_samples() < win {
        return Err(Error::InsufficientData(format!(
            "recording of {:.2} s shorter than the {win_s} s PSD window",
            rec.duration_s()
        )));
    }
    let slices: Vec<&[f64]> = rec
        .data
        .outer_iter()
        .map(|row| row.to_slice().expect("contiguous"))
        .collect();
    let rows: Vec<Vec<f64>> = slices
        .par_iter()
        .map(|row| {
            let (_, p) = welch_psd_db(row, rec.fs, win, overlap).expect("length checked");
            p
        })
        .collect();
    let freqs = (0..win / 2 + 1)
        .map(|k| k as f64 * rec.fs / win as f64)
        .collect();
    Ok(PsdEstimate {
        freqs,
        power_db: rows,
        win_s,
        overlap,
    })
}

/// Per-channel mean of dB values across a band.
pub fn band_average(psd: &PsdEstimate, lo: f64, hi: f64) -> Result<Vec<f64>> {
    if !(lo < hi) {
        return Err(Error::Argument(format!("empty band [{lo}, {hi})")));
    }
    let mut out = Vec::with_capacity(psd.n_channels());
    for c in 0..psd.n_channels() {
        out.push(
            psd.band_mean_db(c, lo, hi)
                .ok_or_else(|| Error::Argument(format!("band [{lo}, {hi}) covers no bins")))?,
        );
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ChannelInfo, RecordingKind};
    use std::f64::consts::PI;

    fn rec_from_rows(rows: Vec<Vec<f64>>, fs: f64, markers: Vec<Marker>) -> Recording {
        let n_ch = rows.len();
        let n = rows[0].len();
        let mut data = Array2::zeros((n_ch, n));
        for (c, r) in rows.iter().enumerate() {
            for (t, v) in r.iter().enumerate() {
                data[[c, t]] = *v;
            }
        }
        let channels = (0..n_ch)
            .map(|c| ChannelInfo {
                label: format!("ch{c}"),
                position: None,
                is_ecg: false,
            })
            .collect();
        Recording::new(data, fs, channels, markers, RecordingKind::Eeg).unwrap()
    }

    #[test]
    fn volume_triggers_every_nth() {
        let slices: Vec<Marker> = (0..78).map(|i| Marker::new("R128", 100 + i * 10)).collect();
        let vols = derive_volume_triggers(&slices, 39).unwrap();
        assert_eq!(vols.len(), 2);
        assert_eq!(vols[0].sample, 100);
        assert_eq!(vols[1].sample, 100 + 39 * 10);

        let one = derive_volume_triggers(&slices[..39], 39).unwrap();
        assert_eq!(one.len(), 1);
        assert_eq!(one[0].sample, 100);

        match derive_volume_triggers(&slices[..40], 39) {
            Err(Error::TriggerCount { remainder }) => assert_eq!(remainder, 1),
            other => panic!("expected TriggerCount, got {other:?}"),
        }
    }

    #[test]
    fn aas_removes_perfectly_periodic_artifact() {
        let fs = 1000.0;
        let epoch = 200usize;
        let n_ep = 12usize;
        let n = epoch * n_ep + 100;
        let mut x = vec![0.0; n];
        for e in 0..n_ep {
            for t in 0..epoch {
                x[50 + e * epoch + t] = (2.0 * PI * 3.0 * t as f64 / epoch as f64).sin() * 500.0;
            }
        }
        let artifact_rms = (x.iter().map(|v| v * v).sum::<f64>() / n as f64).sqrt();
        let rec = rec_from_rows(vec![x], fs, vec![]);
        let vols: Vec<Marker> = (0..n_ep).map(|e| Marker::new("Volume", 50 + e * epoch)).collect();
        for w in [1usize, 3, 15] {
            let out = gradient_subtract(&rec, &vols, GradientMethod::Aas, w, 0).unwrap();
            let rms = (out.data.iter().map(|v| v * v).sum::<f64>() / n as f64).sqrt();
            assert!(rms <= 1e-6 * artifact_rms, "W={w}: residual {rms}");
        }
    }

    #[test]
    fn samples_outside_epochs_untouched() {
        let fs = 1000.0;
        let n = 1000;
        let x: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
        let rec = rec_from_rows(vec![x.clone()], fs, vec![]);
        let vols = vec![Marker::new("Volume", 100), Marker::new("Volume", 300)];
        let out = gradient_subtract(&rec, &vols, GradientMethod::Aas, 1, 0).unwrap();
        for t in (0..100).chain(500..n) {
            assert_eq!(out.data[[0, t]], x[t], "sample {t} changed");
        }
    }

    #[test]
    fn second_application_changes_nothing_on_periodic_artifact() {
        let fs = 1000.0;
        let epoch = 150usize;
        let n_ep = 10usize;
        let n = epoch * n_ep;
        let mut x = vec![0.0; n];
        for e in 0..n_ep {
            for t in 0..epoch {
                x[e * epoch + t] = ((t * 7 % 23) as f64 - 11.0) * 100.0;
            }
        }
        let scale = x.iter().map(|v| v.abs()).fold(0.0, f64::max);
        let rec = rec_from_rows(vec![x], fs, vec![]);
        let vols: Vec<Marker> = (0..n_ep).map(|e| Marker::new("Volume", e * epoch)).collect();
        let once = gradient_subtract(&rec, &vols, GradientMethod::Aas, 2, 0).unwrap();
        let twice = gradient_subtract(&once, &vols, GradientMethod::Aas, 2, 0).unwrap();
        for t in 0..n {
            assert!(
                (once.data[[0, t]] - twice.data[[0, t]]).abs() <= 1e-9 * scale,
                "not idempotent at {t}"
            );
        }
    }

    #[test]
    fn insufficient_epochs_rejected() {
        let rec = rec_from_rows(vec![vec![0.0; 100]], 100.0, vec![]);
        let vols = vec![Marker::new("Volume", 10)];
        assert!(matches!(
            gradient_subtract(&rec, &vols, GradientMethod::Aas, 1, 0),
            Err(Error::InsufficientEpochs(_))
        ));
    }

    #[test]
    fn decimate_rescales_markers_and_rate() {
        let fs = 5000.0;
        let n = 50_000;
        let x = vec![1.25f64; n];
        let rec = rec_from_rows(vec![x], fs, vec![Marker::new("R128", 5000)]);
        let out = decimate(&rec, 20).unwrap();
        assert_eq!(out.fs, 250.0);
        assert_eq!(out.n_samples(), 2500);
        assert_eq!(out.markers[0].sample, 250);
        for t in 0..out.n_samples() {
            assert!((out.data[[0, t]] - 1.25).abs() < 1e-9, "DC wobbled at {t}");
        }
    }

    #[test]
    fn decimate_preserves_in_band_tone() {
        let fs = 5000.0;
        let n = 100_000;
        let x: Vec<f64> = (0..n).map(|i| (2.0 * PI * 10.0 * i as f64 / fs).sin()).collect();
        let rec = rec_from_rows(vec![x], fs, vec![]);
        let out = decimate(&rec, 20).unwrap();
        let y = out.data.row(0).to_vec();
        let lo = y.len() / 5;
        let hi = y.len() - lo;
        let rms = (y[lo..hi].iter().map(|v| v * v).sum::<f64>() / (hi - lo) as f64).sqrt();
        let expect = (0.5f64).sqrt();
        assert!((rms / expect - 1.0).abs() < 0.01, "rms {rms} vs {expect}");
    }

    #[test]
    fn decimate_then_interpolate_recovers_band_limited_signal() {
        // band-limited below 0.4 * new_fs: 30 Hz < 100 Hz
        let fs = 1000.0;
        let n = 4096;
        let x: Vec<f64> = (0..n)
            .map(|i| (2.0 * PI * 30.0 * i as f64 / fs).sin() + 0.5 * (2.0 * PI * 7.0 * i as f64 / fs).cos())
            .collect();
        let rec = rec_from_rows(vec![x.clone()], fs, vec![]);
        let dec = decimate(&rec, 4).unwrap();
        // FFT zero-pad interpolation back to the original rate:
        // x_up[t] = (1/m) * sum_k padded[k] e^{+2 pi i k t / (4m)}
        let m = dec.n_samples();
        let fft = dsp::plan_forward(m);
        let mut buf: Vec<Complex<f64>> = dec.data.row(0).iter().map(|&v| Complex::new(v, 0.0)).collect();
        fft.process(&mut buf);
        let up = m * 4;
        let mut padded = vec![Complex::new(0.0, 0.0); up];
        for k in 0..=m / 2 {
            padded[k] = buf[k];
        }
        for k in 1..m / 2 {
            padded[up - k] = buf[m - k];
        }
        dsp::plan_inverse(up).process(&mut padded);
        let lo = n / 5;
        let hi = n - lo;
        let amp = 1.5; // peak amplitude of the composite test tone
        for t in lo..hi {
            let rebuilt = padded[t].re / m as f64;
            assert!(
                (rebuilt - x[t]).abs() < 0.01 * amp,
                "sample {t}: {rebuilt} vs {}",
                x[t]
            );
        }
    }

    #[test]
    fn bandpass_validates_edges() {
        let rec = rec_from_rows(vec![vec![0.0; 1000]], 250.0, vec![]);
        assert!(fir_bandpass(&rec, 70.0, 1.0).is_err());
        assert!(fir_bandpass(&rec, 1.0, 130.0).is_err());
        assert!(fir_bandpass(&rec, 1.0, 70.0).is_ok());
    }

    #[test]
    fn reject_centers_default_parameterization() {
        let centers = reject_centers(19.5, 26.0, 60.0, 250.0, 1.0, 120.0);
        assert_eq!(centers, vec![19.5, 26.0, 39.0, 58.5, 60.0, 78.0, 97.5, 117.0]);
    }

    #[test]
    fn psd_peak_in_nearest_bin_and_floor() {
        let fs = 250.0;
        let n = 30_000;
        let x: Vec<f64> = (0..n).map(|i| 10.0 * (2.0 * PI * 10.0 * i as f64 / fs).sin()).collect();
        let rec = rec_from_rows(vec![x, vec![0.0; n]], fs, vec![]);
        let psd = compute_psd(&rec, 4.096, 0.5).unwrap();
        assert!((psd.bin_width() - 0.244140625).abs() < 1e-9);
        let (peak_idx, _) = psd.power_db[0]
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .unwrap();
        let nearest = psd
            .freqs
            .iter()
            .enumerate()
            .min_by(|a, b| (a.1 - 10.0).abs().partial_cmp(&(b.1 - 10.0).abs()).unwrap())
            .unwrap()
            .0;
        assert_eq!(peak_idx, nearest);
        // zero channel sits on the clamp floor
        for v in &psd.power_db[1] {
            assert_eq!(*v, -120.0);
        }
    }

    #[test]
    fn psd_parseval_white_noise() {
        use rand::SeedableRng;
        let fs = 250.0;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let x: Vec<f64> = (0..500_000).map(|_| crate::stats::randn(&mut rng)).collect();
        let (f, p) = welch_psd(&x, fs, 1024, 0.5).unwrap();
        let df = f[1] - f[0];
        let integral: f64 = p.iter().sum::<f64>() * df;
        assert!((integral - 1.0).abs() < 0.01, "integral {integral}");
    }

    #[test]
    fn psd_sinusoid_total_power() {
        let fs = 250.0;
        let n = 250_000;
        let x: Vec<f64> = (0..n).map(|i| (2.0 * PI * 10.0 * i as f64 / fs).sin()).collect();
        let (f, p) = welch_psd(&x, fs, 1024, 0.5).unwrap();
        let df = f[1] - f[0];
        let integral: f64 = p.iter().sum::<f64>() * df;
        assert!((integral - 0.5).abs() < 0.005, "integral {integral}");
    }

    #[test]
    fn band_average_flat_and_single_bin() {
        let psd = PsdEstimate {
            freqs: vec![0.0, 1.0, 2.0, 3.0],
            power_db: vec![vec![-10.0, -10.0, -10.0, -10.0], vec![0.0, 5.0, 9.0, 1.0]],
            win_s: 4.0,
            overlap: 0.5,
        };
        assert_eq!(band_average(&psd, 0.0, 4.0).unwrap()[0], -10.0);
        assert_eq!(band_average(&psd, 2.0, 3.0).unwrap()[1], 9.0);
        assert!(band_average(&psd, 3.0, 3.0).is_err());
    }

    #[test]
    fn constructed_alpha_bump_beats_beta() {
        let fs = 250.0;
        let n = 60_000;
        let x: Vec<f64> = (0..n)
            .map(|i| {
                let t = i as f64 / fs;
                8.0 * (2.0 * PI * 10.0 * t).sin() + 0.5 * (2.0 * PI * 20.0 * t).sin()
            })
            .collect();
        let rec = rec_from_rows(vec![x], fs, vec![]);
        let psd = compute_psd(&rec, 4.096, 0.5).unwrap();
        let alpha = band_average(&psd, 8.0, 12.0).unwrap()[0];
        let beta = band_average(&psd, 13.0, 30.0).unwrap()[0];
        assert!(alpha > beta);
    }
}
