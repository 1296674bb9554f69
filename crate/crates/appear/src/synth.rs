//! Synthetic EEG-fMRI session generator with ground-truth constituents
//! (neural background, scanner gradient, BCG, blinks, muscle bursts, ECG,
//! oximetry), plus recovery scoring and a planted-component benchmark for
//! the classifier. Everything is deterministic for a fixed seed.

use ndarray::{Array1, Array2};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rustfft::num_complex::Complex;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::f64::consts::PI;

use crate::classify::IcLabel;
use crate::dsp;
use crate::error::{Error, Result};
use crate::ica::IcaDecomposition;
use crate::io::config::Mode;
use crate::layout;
use crate::linalg;
use crate::model::{
    excise_intervals, ChannelInfo, IntervalSet, Marker, Recording, RecordingKind,
};
use crate::preclean;
use crate::stats;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Constituent {
    Neural,
    Gradient,
    Bcg,
    Blink,
    Muscle,
    EcgWave,
}

impl Constituent {
    pub const ALL: [Constituent; 6] = [
        Constituent::Neural,
        Constituent::Gradient,
        Constituent::Bcg,
        Constituent::Blink,
        Constituent::Muscle,
        Constituent::EcgWave,
    ];

    pub fn stem(&self) -> &'static str {
        match self {
            Constituent::Neural => "neural",
            Constituent::Gradient => "gradient",
            Constituent::Bcg => "bcg",
            Constituent::Blink => "blink",
            Constituent::Muscle => "muscle",
            Constituent::EcgWave => "ecg_wave",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub duration_s: f64,
    pub fs_raw: f64,
    pub tr_s: f64,
    pub n_slices: usize,
    /// Scanner artifact peak amplitude (2 mV default).
    pub gradient_amp_uv: f64,
    /// Linear amplitude drift across the session (0.25 = +/-25% at the ends).
    pub gradient_drift: f64,
    pub hr_bpm: f64,
    pub rr_jitter_pct: f64,
    pub bcg_amp_uv: f64,
    pub bcg_delay_s: f64,
    pub blink_rate_per_min: f64,
    pub blink_amp_uv: f64,
    pub muscle_rate_per_min: f64,
    pub muscle_amp_uv: f64,
    pub muscle_channels: Vec<String>,
    pub alpha_amp_uv: f64,
    /// Background level; per-channel RMS lands near a third of this.
    pub neural_amp_uv: f64,
    pub noise_exponent: f64,
    pub sensor_noise_uv: f64,
    pub n_neural_sources: usize,
    pub mode: Mode,
    pub n_stimuli: usize,
    pub stim_spacing_s: f64,
    pub erp_n2_uv: f64,
    pub erp_p3_uv: f64,
    pub seed: u64,
    /// Constituents whose truth recordings are kept in memory; None = all.
    /// The raw sum always contains every constituent.
    pub retain: Option<Vec<Constituent>>,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            duration_s: 480.0,
            fs_raw: 5000.0,
            tr_s: 2.0,
            n_slices: 39,
            gradient_amp_uv: 2000.0,
            gradient_drift: 0.0,
            hr_bpm: 64.0,
            rr_jitter_pct: 3.0,
            bcg_amp_uv: 150.0,
            bcg_delay_s: 0.21,
            blink_rate_per_min: 12.0,
            blink_amp_uv: 100.0,
            muscle_rate_per_min: 4.0,
            muscle_amp_uv: 40.0,
            muscle_channels: vec!["T7".into(), "T8".into()],
            alpha_amp_uv: 20.0,
            neural_amp_uv: 50.0,
            noise_exponent: 1.0,
            sensor_noise_uv: 1.0,
            n_neural_sources: 20,
            mode: Mode::Rest,
            n_stimuli: 72,
            stim_spacing_s: 6.5,
            erp_n2_uv: -5.0,
            erp_p3_uv: 10.0,
            seed: 1,
            retain: None,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        if self.duration_s < 10.0 {
            return Err(Error::Argument(format!(
                "duration {} s below the 10 s minimum",
                self.duration_s
            )));
        }
        if self.fs_raw <= 0.0 || self.tr_s <= 0.0 || self.n_slices == 0 {
            return Err(Error::Argument("invalid acquisition geometry".into()));
        }
        if self.hr_bpm <= 20.0 || self.hr_bpm > 240.0 {
            return Err(Error::Argument(format!("heart rate {} bpm", self.hr_bpm)));
        }
        for v in [
            self.gradient_amp_uv,
            self.bcg_amp_uv,
            self.blink_rate_per_min,
            self.muscle_rate_per_min,
            self.alpha_amp_uv,
            self.neural_amp_uv,
            self.sensor_noise_uv,
        ] {
            if v < 0.0 {
                return Err(Error::Argument("amplitudes and rates must be >= 0".into()));
            }
        }
        Ok(())
    }

    fn retains(&self, c: Constituent) -> bool {
        match &self.retain {
            None => true,
            Some(list) => list.contains(&c),
        }
    }

    /// Flat `key=value` overrides on top of the defaults, mirroring the
    /// pipeline config format.
    pub fn from_str_contents(text: &str) -> Result<Self> {
        let mut spec = SynthSpec::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(Error::Parse(format!(
                    "line {}: expected key=value, got {line}",
                    lineno + 1
                )));
            };
            spec.set(key.trim(), value.trim())
                .map_err(|e| Error::Parse(format!("line {}: {e}", lineno + 1)))?;
        }
        spec.validate()?;
        Ok(spec)
    }

    pub fn from_file(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Parse(format!("cannot read {}: {e}", path.display())))?;
        Self::from_str_contents(&text)
    }

    fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn f(v: &str) -> Result<f64> {
            v.parse()
                .map_err(|_| Error::Parse(format!("bad number {v}")))
        }
        match key {
            "duration_s" => self.duration_s = f(value)?,
            "fs_raw" => self.fs_raw = f(value)?,
            "tr_s" => self.tr_s = f(value)?,
            "n_slices" => {
                self.n_slices = value
                    .parse()
                    .map_err(|_| Error::Parse(format!("bad integer {value}")))?
            }
            "gradient_amp_uv" => self.gradient_amp_uv = f(value)?,
            "gradient_drift" => self.gradient_drift = f(value)?,
            "hr_bpm" => self.hr_bpm = f(value)?,
            "rr_jitter_pct" => self.rr_jitter_pct = f(value)?,
            "bcg_amp_uv" => self.bcg_amp_uv = f(value)?,
            "bcg_delay_s" => self.bcg_delay_s = f(value)?,
            "blink_rate_per_min" => self.blink_rate_per_min = f(value)?,
            "blink_amp_uv" => self.blink_amp_uv = f(value)?,
            "muscle_rate_per_min" => self.muscle_rate_per_min = f(value)?,
            "muscle_amp_uv" => self.muscle_amp_uv = f(value)?,
            "muscle_channels" => {
                self.muscle_channels = value.split(',').map(|s| s.trim().to_string()).collect()
            }
            "alpha_amp_uv" => self.alpha_amp_uv = f(value)?,
            "neural_amp_uv" => self.neural_amp_uv = f(value)?,
            "noise_exponent" => self.noise_exponent = f(value)?,
            "sensor_noise_uv" => self.sensor_noise_uv = f(value)?,
            "n_neural_sources" => {
                self.n_neural_sources = value
                    .parse()
                    .map_err(|_| Error::Parse(format!("bad integer {value}")))?
            }
            "mode" => self.mode = value.parse()?,
            "n_stimuli" => {
                self.n_stimuli = value
                    .parse()
                    .map_err(|_| Error::Parse(format!("bad integer {value}")))?
            }
            "stim_spacing_s" => self.stim_spacing_s = f(value)?,
            "erp_n2_uv" => self.erp_n2_uv = f(value)?,
            "erp_p3_uv" => self.erp_p3_uv = f(value)?,
            "seed" => {
                self.seed = value
                    .parse()
                    .map_err(|_| Error::Parse(format!("bad seed {value}")))?
            }
            other => return Err(Error::Parse(format!("unknown spec key {other}"))),
        }
        Ok(())
    }
}

/// Generated session: the raw sum, retained ground-truth constituents, the
/// clean ECG trace, the oximetry waveform, and the true beat times.
#[derive(Debug, Clone)]
pub struct SynthSession {
    /// 31 scalp channels + 1 ECG channel.
    pub raw: Recording,
    pub truth: BTreeMap<Constituent, Recording>,
    pub ecg: Recording,
    pub oximetry: Recording,
    /// True R-peak sample indices at the raw rate.
    pub r_peaks: Vec<usize>,
    pub stim_markers: Vec<Marker>,
    pub spec: SynthSpec,
}

impl SynthSession {
    /// R-peak truth rescaled to a decimated rate.
    pub fn r_peaks_at(&self, fs: f64) -> Vec<usize> {
        let factor = self.spec.fs_raw / fs;
        self.r_peaks
            .iter()
            .map(|&p| (p as f64 / factor).round() as usize)
            .collect()
    }

    /// Left-fold sum of all retained constituents, in the canonical order
    /// used to build `raw`; bit-exact against `raw` when everything was
    /// retained.
    pub fn sum_truth(&self) -> Option<Array2<f64>> {
        if Constituent::ALL.iter().any(|c| !self.truth.contains_key(c)) {
            return None;
        }
        let mut acc = Array2::<f64>::zeros(self.raw.data.dim());
        for c in Constituent::ALL {
            acc += &self.truth[&c].data;
        }
        Some(acc)
    }
}

fn session_channels() -> Vec<ChannelInfo> {
    let mut channels: Vec<ChannelInfo> = layout::default_montage()
        .into_iter()
        .map(|l| ChannelInfo::scalp(l, layout::standard_position(l).unwrap()))
        .collect();
    channels.push(ChannelInfo::ecg("ECG"));
    channels
}

/// Clean synthetic ECG: P-QRS-T complexes on a jittered beat schedule, with
/// the R wave peaking exactly at the returned sample indices.
pub fn synthetic_ecg(
    hr_bpm: f64,
    rr_jitter_pct: f64,
    duration_s: f64,
    fs: f64,
    seed: u64,
) -> (Vec<f64>, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xEC6);
    let beats = beat_schedule(hr_bpm, rr_jitter_pct, duration_s, fs, &mut rng);
    let n = (duration_s * fs).round() as usize;
    let mut wave = vec![0.0; n];
    // (offset s, amplitude uV, sigma s)
    let parts: [(f64, f64, f64); 5] = [
        (-0.18, 80.0, 0.030),  // P
        (-0.040, -150.0, 0.012), // Q
        (0.0, 800.0, 0.008),   // R
        (0.035, -200.0, 0.012), // S
        (0.25, 200.0, 0.060),  // T
    ];
    for &p in &beats {
        for &(off, amp, sigma) in &parts {
            let center = p as f64 + off * fs;
            let half = (4.0 * sigma * fs) as isize;
            let c = center.round() as isize;
            for t in (c - half).max(0)..(c + half).min(n as isize) {
                let d = (t as f64 - center) / (sigma * fs);
                wave[t as usize] += amp * (-0.5 * d * d).exp();
            }
        }
    }
    for v in wave.iter_mut() {
        *v += 4.0 * stats::randn(&mut rng);
    }
    (wave, beats)
}

fn beat_schedule(
    hr_bpm: f64,
    rr_jitter_pct: f64,
    duration_s: f64,
    fs: f64,
    rng: &mut ChaCha8Rng,
) -> Vec<usize> {
    let rr0 = 60.0 / hr_bpm;
    let mut beats = Vec::new();
    let mut t = 0.5;
    while t + 0.5 < duration_s {
        beats.push((t * fs).round() as usize);
        let jitter = (rr_jitter_pct / 100.0 * stats::randn(rng)).clamp(-0.3, 0.3);
        t += rr0 * (1.0 + jitter);
    }
    beats
}

/// Spectrally shaped noise: 1/f^(exponent/2) amplitude up to 100 Hz with a
/// cosine roll-off to zero at 140 Hz, unit standard deviation.
fn shaped_noise(n: usize, fs: f64, exponent: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let mut spectrum = vec![Complex::new(0.0, 0.0); n];
    let half = n / 2;
    for k in 1..=half {
        let f = k as f64 * fs / n as f64;
        let mut amp = f.powf(-exponent / 2.0);
        if f > 140.0 {
            amp = 0.0;
        } else if f > 100.0 {
            let u = (f - 100.0) / 40.0;
            amp *= 0.5 * (1.0 + (PI * u).cos());
        }
        let phase = rng.gen_range(0.0..(2.0 * PI));
        let c = Complex::from_polar(amp, phase);
        spectrum[k] = c;
        if k != half || n % 2 == 1 {
            spectrum[n - k] = c.conj();
        }
    }
    let inv = dsp::plan_inverse(n);
    inv.process(&mut spectrum);
    let mut x: Vec<f64> = spectrum.iter().map(|c| c.re).collect();
    let sd = stats::std_pop(&x).max(1e-12);
    for v in x.iter_mut() {
        *v /= sd;
    }
    x
}

struct ConstituentBuilder {
    keep: bool,
    data: Array2<f64>,
}

impl ConstituentBuilder {
    fn new(n_ch: usize, n: usize, keep: bool) -> Self {
        ConstituentBuilder {
            keep,
            data: Array2::zeros(if keep { (n_ch, n) } else { (0, 0) }),
        }
    }
}

/// Builds the session. The raw recording is the exact left-fold sum of the
/// constituents in `Constituent::ALL` order.
pub fn generate(spec: &SynthSpec) -> Result<SynthSession> {
    spec.validate()?;
    let fs = spec.fs_raw;
    let n = (spec.duration_s * fs).round() as usize;
    let channels = session_channels();
    let n_ch = channels.len();
    let ecg_row = n_ch - 1;
    let positions: Vec<[f64; 2]> = channels
        .iter()
        .map(|c| c.position.unwrap_or([0.0, 0.0]))
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut raw = Array2::<f64>::zeros((n_ch, n));
    let mut truth: BTreeMap<Constituent, Recording> = BTreeMap::new();

    // --- beat schedule shared by ECG, BCG, oximetry ---
    let beats = beat_schedule(spec.hr_bpm, spec.rr_jitter_pct, spec.duration_s, fs, &mut rng);

    // --- volume/slice geometry ---
    let t0_samples = (0.2 * fs).round() as usize;
    let vol_len = (spec.tr_s * fs).round() as usize;
    let n_vol = ((spec.duration_s - 0.4) / spec.tr_s).floor() as usize;
    let mut markers: Vec<Marker> = Vec::new();
    for v in 0..n_vol {
        let v_start = t0_samples + v * vol_len;
        for s in 0..spec.n_slices {
            let at = v_start + (s as f64 * vol_len as f64 / spec.n_slices as f64).round() as usize;
            markers.push(Marker::new("R128", at));
        }
    }

    // --- stimulus schedule (task mode) ---
    let mut stim_markers: Vec<Marker> = Vec::new();
    if spec.mode == Mode::Task {
        let mut t = 5.0;
        for _ in 0..spec.n_stimuli {
            if t + 1.5 > spec.duration_s - 5.0 {
                break;
            }
            stim_markers.push(Marker::new("S1", (t * fs).round() as usize));
            t += spec.stim_spacing_s * (1.0 + 0.15 * rng.gen_range(-1.0..1.0));
        }
        markers.extend(stim_markers.iter().cloned());
    }
    markers.sort_by_key(|m| m.sample);

    let commit = |raw: &mut Array2<f64>,
                      builder: ConstituentBuilder,
                      which: Constituent,
                      truth: &mut BTreeMap<Constituent, Recording>,
                      channels: &[ChannelInfo]|
     -> Result<()> {
        if builder.keep {
            *raw += &builder.data;
            truth.insert(
                which,
                Recording::new(
                    builder.data,
                    fs,
                    channels.to_vec(),
                    vec![],
                    RecordingKind::Eeg,
                )?,
            );
        }
        Ok(())
    };

    // --- 1. neural: mixed 1/f sources + occipital alpha + sensor noise ---
    {
        let keep = spec.retains(Constituent::Neural);
        let mut b = ConstituentBuilder::new(n_ch, n, true);
        let n_src = spec.n_neural_sources.max(1);
        let target_rms = spec.neural_amp_uv / 3.0;
        let mut loadings = Array2::<f64>::zeros((n_ch - 1, n_src));
        for v in loadings.iter_mut() {
            *v = stats::randn(&mut rng);
        }
        // scale so a typical channel RMS lands near the target
        let row_norm: f64 = (loadings.row(0).iter().map(|v| v * v).sum::<f64>()).sqrt();
        let scale = target_rms / row_norm.max(1e-9);
        for s in 0..n_src {
            let src = shaped_noise(n, fs, spec.noise_exponent, &mut rng);
            for c in 0..n_ch - 1 {
                let g = loadings[[c, s]] * scale;
                if g.abs() < 1e-12 {
                    continue;
                }
                let row = b.data.row_mut(c).into_slice().expect("contiguous");
                for (t, v) in src.iter().enumerate() {
                    row[t] += g * v;
                }
            }
        }
        // occipital alpha
        if spec.alpha_amp_uv > 0.0 {
            let oz = layout::standard_position("Oz").unwrap();
            let phase: f64 = rng.gen_range(0.0..(2.0 * PI));
            let am_phase: f64 = rng.gen_range(0.0..(2.0 * PI));
            for c in 0..n_ch - 1 {
                let p = positions[c];
                let d2 = (p[0] - oz[0]).powi(2) + (p[1] - oz[1]).powi(2);
                let g = (-d2 / (2.0 * 0.35 * 0.35)).exp();
                if g < 0.02 {
                    continue;
                }
                let row = b.data.row_mut(c).into_slice().expect("contiguous");
                for (t, slot) in row.iter_mut().enumerate() {
                    let tt = t as f64 / fs;
                    let am = 0.6 + 0.4 * (2.0 * PI * 0.08 * tt + am_phase).sin();
                    *slot += spec.alpha_amp_uv * g * am * (2.0 * PI * 10.0 * tt + phase).sin();
                }
            }
        }
        // event-related responses in task mode
        if spec.mode == Mode::Task {
            let n2_sites = ["Fz", "FCz", "Cz"];
            let p3_sites = ["Fz", "FCz", "Cz", "Pz"];
            for m in &stim_markers {
                for (sites, amp, delay, sigma) in [
                    (&n2_sites[..], spec.erp_n2_uv, 0.2, 0.015),
                    (&p3_sites[..], spec.erp_p3_uv, 0.4, 0.040),
                ] {
                    for site in sites {
                        let c = channels.iter().position(|ch| &ch.label == site).unwrap();
                        let center = m.sample as f64 + delay * fs;
                        let half = (4.0 * sigma * fs) as isize;
                        let cc = center.round() as isize;
                        let row = b.data.row_mut(c).into_slice().expect("contiguous");
                        for t in (cc - half).max(0)..(cc + half).min(n as isize) {
                            let d = (t as f64 - center) / (sigma * fs);
                            row[t as usize] += amp * (-0.5 * d * d).exp();
                        }
                    }
                }
            }
        }
        // per-channel sensor noise
        if spec.sensor_noise_uv > 0.0 {
            for c in 0..n_ch - 1 {
                let row = b.data.row_mut(c).into_slice().expect("contiguous");
                for v in row.iter_mut() {
                    *v += spec.sensor_noise_uv * stats::randn(&mut rng);
                }
            }
        }
        if !keep {
            // raw still needs the data; commit then drop from the map
            raw += &b.data;
        } else {
            commit(&mut raw, b, Constituent::Neural, &mut truth, &channels)?;
        }
    }

    // --- 2. gradient: harmonic stack of the slice frequency inside volumes ---
    {
        let keep = spec.retains(Constituent::Gradient);
        let mut b = ConstituentBuilder::new(n_ch, n, true);
        if spec.gradient_amp_uv > 0.0 && n_vol > 0 {
            let slice_freq = spec.n_slices as f64 / spec.tr_s;
            let n_harm = 12usize;
            let coeffs: Vec<(f64, f64)> = (1..=n_harm)
                .map(|h| {
                    let a = rng.gen_range(0.5..1.0) * (h as f64).powf(-0.3);
                    let phi = rng.gen_range(0.0..(2.0 * PI));
                    (a, phi)
                })
                .collect();
            // one volume-epoch waveform, tiled over every volume
            let mut epoch = vec![0.0; vol_len];
            for (t, slot) in epoch.iter_mut().enumerate() {
                let tt = t as f64 / fs;
                for (h, &(a, phi)) in coeffs.iter().enumerate() {
                    *slot += a * (2.0 * PI * slice_freq * (h + 1) as f64 * tt + phi).sin();
                }
            }
            let peak = epoch.iter().map(|v| v.abs()).fold(0.0, f64::max).max(1e-12);
            for v in epoch.iter_mut() {
                *v *= spec.gradient_amp_uv / peak;
            }
            let gains: Vec<f64> = (0..n_ch).map(|_| rng.gen_range(0.6..1.4)).collect();
            for c in 0..n_ch {
                let row = b.data.row_mut(c).into_slice().expect("contiguous");
                for v in 0..n_vol {
                    let start = t0_samples + v * vol_len;
                    for (t, &w) in epoch.iter().enumerate() {
                        let global_t = start + t;
                        let drift =
                            1.0 + spec.gradient_drift * (2.0 * global_t as f64 / n as f64 - 1.0);
                        row[global_t] += gains[c] * w * drift;
                    }
                }
            }
        }
        if !keep {
            raw += &b.data;
        } else {
            commit(&mut raw, b, Constituent::Gradient, &mut truth, &channels)?;
        }
    }

    // --- 3. BCG: per-beat damped oscillation, left/right antisymmetric ---
    {
        let keep = spec.retains(Constituent::Bcg);
        let mut b = ConstituentBuilder::new(n_ch, n, true);
        if spec.bcg_amp_uv > 0.0 {
            let dur = 0.7;
            let len = (dur * fs) as usize;
            let template: Vec<f64> = (0..len)
                .map(|t| {
                    let tt = t as f64 / fs;
                    (2.0 * PI * 4.0 * tt).sin() * (-tt / 0.22).exp()
                })
                .collect();
            let beat_amps: Vec<f64> = beats.iter().map(|_| rng.gen_range(0.9..1.1)).collect();
            for c in 0..n_ch - 1 {
                let g = positions[c][0] * spec.bcg_amp_uv;
                if g.abs() < 1e-9 {
                    continue;
                }
                let row = b.data.row_mut(c).into_slice().expect("contiguous");
                for (&p, &amp) in beats.iter().zip(&beat_amps) {
                    let start = p + (spec.bcg_delay_s * fs) as usize;
                    for (t, &w) in template.iter().enumerate() {
                        if start + t >= n {
                            break;
                        }
                        row[start + t] += g * amp * w;
                    }
                }
            }
        }
        if !keep {
            raw += &b.data;
        } else {
            commit(&mut raw, b, Constituent::Bcg, &mut truth, &channels)?;
        }
    }

    // --- 4. blinks: raised-cosine pulses on frontal channels ---
    {
        let keep = spec.retains(Constituent::Blink);
        let mut b = ConstituentBuilder::new(n_ch, n, true);
        if spec.blink_rate_per_min > 0.0 && spec.blink_amp_uv > 0.0 {
            let mean_gap = 60.0 / spec.blink_rate_per_min;
            let dur = 0.3;
            let len = (dur * fs) as usize;
            let pulse: Vec<f64> = (0..len)
                .map(|t| 0.5 * (1.0 - (2.0 * PI * t as f64 / len as f64).cos()))
                .collect();
            let front = [0.0, 1.0];
            let gains: Vec<f64> = positions
                .iter()
                .take(n_ch - 1)
                .map(|p| {
                    let d2 = (p[0] - front[0]).powi(2) + (p[1] - front[1]).powi(2);
                    (-d2 / (2.0 * 0.35 * 0.35)).exp()
                })
                .collect();
            let mut t = 2.0 + rng.gen_range(0.0..mean_gap);
            while t + dur + 1.0 < spec.duration_s {
                let start = (t * fs) as usize;
                for c in 0..n_ch - 1 {
                    if gains[c] < 0.02 {
                        continue;
                    }
                    let row = b.data.row_mut(c).into_slice().expect("contiguous");
                    for (k, &w) in pulse.iter().enumerate() {
                        row[start + k] += spec.blink_amp_uv * gains[c] * w;
                    }
                }
                let u: f64 = rng.gen_range(1e-9..1.0);
                t += mean_gap * (-u.ln()).max(0.1);
            }
        }
        if !keep {
            raw += &b.data;
        } else {
            commit(&mut raw, b, Constituent::Blink, &mut truth, &channels)?;
        }
    }

    // --- 5. muscle: 30-60 Hz bursts on the target channels ---
    {
        let keep = spec.retains(Constituent::Muscle);
        let mut b = ConstituentBuilder::new(n_ch, n, true);
        if spec.muscle_rate_per_min > 0.0 && spec.muscle_amp_uv > 0.0 {
            let mean_gap = 60.0 / spec.muscle_rate_per_min;
            for target in &spec.muscle_channels {
                let Some(c) = channels.iter().position(|ch| &ch.label == target) else {
                    continue;
                };
                let mut t = 3.0 + rng.gen_range(0.0..mean_gap);
                while t + 2.0 < spec.duration_s {
                    let dur = rng.gen_range(0.4..0.8);
                    let len = (dur * fs) as usize;
                    let n_tones = 24;
                    let tones: Vec<(f64, f64)> = (0..n_tones)
                        .map(|_| (rng.gen_range(30.0..60.0), rng.gen_range(0.0..(2.0 * PI))))
                        .collect();
                    let amp = spec.muscle_amp_uv * (2.0 / n_tones as f64).sqrt() * 1.414;
                    let start = (t * fs) as usize;
                    let row = b.data.row_mut(c).into_slice().expect("contiguous");
                    for k in 0..len {
                        let tt = k as f64 / fs;
                        let env = 0.5 * (1.0 - (2.0 * PI * k as f64 / len as f64).cos());
                        let mut v = 0.0;
                        for &(f, phi) in &tones {
                            v += (2.0 * PI * f * tt + phi).sin();
                        }
                        row[start + k] += amp * env * v / (n_tones as f64).sqrt();
                    }
                    let u: f64 = rng.gen_range(1e-9..1.0);
                    t += mean_gap * (-u.ln()).max(0.2) + dur;
                }
            }
        }
        if !keep {
            raw += &b.data;
        } else {
            commit(&mut raw, b, Constituent::Muscle, &mut truth, &channels)?;
        }
    }

    // --- 6. ECG channel waveform ---
    let ecg_clean;
    {
        let keep = spec.retains(Constituent::EcgWave);
        let mut b = ConstituentBuilder::new(n_ch, n, true);
        let (wave, _) = {
            // rebuild on the shared schedule so R peaks match `beats`
            let mut wave = vec![0.0; n];
            let parts: [(f64, f64, f64); 5] = [
                (-0.18, 80.0, 0.030),
                (-0.040, -150.0, 0.012),
                (0.0, 800.0, 0.008),
                (0.035, -200.0, 0.012),
                (0.25, 200.0, 0.060),
            ];
            for &p in &beats {
                for &(off, amp, sigma) in &parts {
                    let center = p as f64 + off * fs;
                    let half = (4.0 * sigma * fs) as isize;
                    let cc = center.round() as isize;
                    for t in (cc - half).max(0)..(cc + half).min(n as isize) {
                        let d = (t as f64 - center) / (sigma * fs);
                        wave[t as usize] += amp * (-0.5 * d * d).exp();
                    }
                }
            }
            for v in wave.iter_mut() {
                *v += 4.0 * stats::randn(&mut rng);
            }
            (wave, ())
        };
        ecg_clean = wave.clone();
        let row = b.data.row_mut(ecg_row).into_slice().expect("contiguous");
        row.copy_from_slice(&wave);
        if !keep {
            raw += &b.data;
        } else {
            commit(&mut raw, b, Constituent::EcgWave, &mut truth, &channels)?;
        }
    }

    // --- oximetry at 40 S/s, pulses delayed 0.3 s from each beat ---
    let oxi_fs = 40.0;
    let oxi_n = (spec.duration_s * oxi_fs).round() as usize;
    let mut oxi = vec![0.0; oxi_n];
    for &p in &beats {
        let t_beat = p as f64 / fs + 0.3;
        let start = (t_beat * oxi_fs) as usize;
        let len = (0.45 * oxi_fs) as usize;
        for k in 0..len {
            if start + k >= oxi_n {
                break;
            }
            let u = k as f64 / len as f64;
            oxi[start + k] += (PI * u).sin().powi(2) * (-(u) / 0.8).exp();
        }
    }
    for v in oxi.iter_mut() {
        *v += 0.01 * stats::randn(&mut rng);
    }

    let raw_rec = Recording::new(raw, fs, channels.clone(), markers, RecordingKind::Eeg)?;
    let ecg_rec = Recording::new(
        Array2::from_shape_vec((1, n), ecg_clean).expect("shape"),
        fs,
        vec![ChannelInfo::ecg("ECG")],
        vec![],
        RecordingKind::Ecg,
    )?;
    let oxi_rec = Recording::new(
        Array2::from_shape_vec((1, oxi_n), oxi).expect("shape"),
        oxi_fs,
        vec![ChannelInfo {
            label: "PULSE".into(),
            position: None,
            is_ecg: false,
        }],
        vec![],
        RecordingKind::Oximetry,
    )?;

    Ok(SynthSession {
        raw: raw_rec,
        truth,
        ecg: ecg_rec,
        oximetry: oxi_rec,
        r_peaks: beats,
        stim_markers,
        spec: spec.clone(),
    })
}

/// Recovery score for a cleaned session against the neural ground truth:
/// excise the bad intervals from both, band-pass 1-70 Hz, and correlate per
/// channel.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RecoveryMetrics {
    pub per_channel_corr: Vec<f64>,
    pub mean_corr: f64,
    pub residual_rms_uv: f64,
}

pub fn score_recovery(
    cleaned: &Recording,
    truth_neural: &Recording,
    bad: &IntervalSet,
) -> Result<RecoveryMetrics> {
    if cleaned.n_channels() != truth_neural.n_channels()
        || cleaned.n_samples() != truth_neural.n_samples()
        || (cleaned.fs - truth_neural.fs).abs() > 1e-9
    {
        return Err(Error::Argument(
            "cleaned and truth recordings have different shapes".into(),
        ));
    }
    let (c_cut, _) = excise_intervals(cleaned, bad)?;
    let (t_cut, _) = excise_intervals(truth_neural, bad)?;
    let hi = (70.0f64).min(cleaned.fs / 2.0 - 5.0);
    let c_f = preclean::fir_bandpass(&c_cut, 1.0, hi)?;
    let t_f = preclean::fir_bandpass(&t_cut, 1.0, hi)?;
    let mut per_channel = Vec::with_capacity(cleaned.n_channels());
    let mut residual_sq = 0.0;
    let mut count = 0usize;
    for c in 0..cleaned.n_channels() {
        let a = c_f.data.row(c).to_vec();
        let b = t_f.data.row(c).to_vec();
        per_channel.push(stats::pearson(&a, &b));
        for (x, y) in a.iter().zip(&b) {
            residual_sq += (x - y) * (x - y);
            count += 1;
        }
    }
    Ok(RecoveryMetrics {
        mean_corr: stats::mean(&per_channel),
        per_channel_corr: per_channel,
        residual_rms_uv: (residual_sq / count.max(1) as f64).sqrt(),
    })
}

/// Beat-locked band power: band-pass, epoch around each beat
/// (`[-0.3, +0.7] x` median RR), average the epochs, and return the mean
/// square of the resulting template across channels. Time-locked averaging
/// suppresses everything not phase-locked to the heartbeat.
pub fn beat_locked_band_power(
    rec: &Recording,
    beats: &[usize],
    band_lo: f64,
    band_hi: f64,
) -> Result<f64> {
    if beats.len() < 3 {
        return Err(Error::InsufficientEvents("need >= 3 beats".into()));
    }
    let filtered = preclean::fir_bandpass(rec, band_lo, band_hi)?;
    let rrs: Vec<f64> = beats.windows(2).map(|w| (w[1] - w[0]) as f64).collect();
    let rr = stats::median(&rrs);
    let len = rr.round() as usize;
    let pre = (0.3 * rr).round() as usize;
    let m = rec.n_samples();
    let mut power = 0.0;
    for c in 0..rec.n_channels() {
        let row = filtered.data.row(c);
        let mut template = vec![0.0; len];
        let mut count = 0usize;
        for &p in beats {
            if p < pre || p - pre + len > m {
                continue;
            }
            let s = p - pre;
            for (t, slot) in template.iter_mut().enumerate() {
                *slot += row[s + t];
            }
            count += 1;
        }
        if count == 0 {
            continue;
        }
        for v in template.iter_mut() {
            *v /= count as f64;
        }
        power += template.iter().map(|v| v * v).sum::<f64>() / len as f64;
    }
    Ok(power / rec.n_channels() as f64)
}

// --- planted-component benchmark ---

/// A hand-built decomposition with known component labels, for exercising
/// the classifier in isolation.
#[derive(Debug, Clone)]
pub struct PlantedBenchmark {
    pub x: Recording,
    pub decomp: IcaDecomposition,
    pub sources: Array2<f64>,
    pub labels: Vec<IcLabel>,
    /// Indices of the occipital-alpha components (guard targets).
    pub alpha_ics: Vec<usize>,
}

fn gauss_map(positions: &[[f64; 2]], center: [f64; 2], sigma: f64) -> Vec<f64> {
    positions
        .iter()
        .map(|p| {
            let d2 = (p[0] - center[0]).powi(2) + (p[1] - center[1]).powi(2);
            (-d2 / (2.0 * sigma * sigma)).exp()
        })
        .collect()
}

fn normalize(col: &mut [f64]) {
    let norm = col.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-12);
    for v in col.iter_mut() {
        *v /= norm;
    }
}

/// Builds a 31-component session (60 s at 250 S/s) with one planted BCG,
/// blink, saccade, single-channel, and muscle component plus two occipital
/// alpha components; everything else is blob-topography 1/f background.
pub fn planted_benchmark(seed: u64) -> Result<PlantedBenchmark> {
    let fs = 250.0;
    let k = (60.0 * fs) as usize;
    let channels: Vec<ChannelInfo> = layout::default_montage()
        .into_iter()
        .map(|l| ChannelInfo::scalp(l, layout::standard_position(l).unwrap()))
        .collect();
    let n = channels.len();
    let positions: Vec<[f64; 2]> = channels.iter().map(|c| c.position.unwrap()).collect();

    for attempt in 0..8 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(attempt * 0x9E3779B9));
        let mut cols: Vec<Vec<f64>> = Vec::with_capacity(n);
        let mut rows: Vec<Vec<f64>> = Vec::with_capacity(n);
        let mut labels: Vec<IcLabel> = Vec::with_capacity(n);
        let mut alpha_ics: Vec<usize> = Vec::new();

        // 1. BCG: lateral antisymmetric topography, damped-oscillation beats
        {
            let mut col: Vec<f64> = positions.iter().map(|p| p[0]).collect();
            normalize(&mut col);
            let hr = rng.gen_range(58.0..78.0);
            let rr = 60.0 / hr;
            let mut s = vec![0.0; k];
            let mut t = 0.4;
            while t + 0.8 < 60.0 {
                let start = (t * fs) as usize;
                let amp = rng.gen_range(0.9..1.1) * 80.0;
                for j in 0..(0.7 * fs) as usize {
                    let tt = j as f64 / fs;
                    if start + j < k {
                        s[start + j] += amp * (2.0 * PI * 4.0 * tt).sin() * (-tt / 0.22).exp();
                    }
                }
                t += rr * (1.0 + 0.03 * stats::randn(&mut rng));
            }
            for v in s.iter_mut() {
                *v += 0.5 * stats::randn(&mut rng);
            }
            cols.push(col);
            rows.push(s);
            labels.push(IcLabel::Bcg);
        }

        // 2. blink: frontal blob, sparse raised-cosine pulses
        {
            let mut col = gauss_map(&positions, [0.0, 0.98], 0.35);
            normalize(&mut col);
            let mut s = vec![0.0; k];
            let mut t = 1.0;
            while t + 1.0 < 60.0 {
                let start = (t * fs) as usize;
                let len = (0.3 * fs) as usize;
                for j in 0..len {
                    s[start + j] += 120.0 * 0.5 * (1.0 - (2.0 * PI * j as f64 / len as f64).cos());
                }
                let u: f64 = rng.gen_range(1e-9..1.0);
                t += 4.0 * (-u.ln()).max(0.15) + 0.3;
            }
            for v in s.iter_mut() {
                *v += 0.5 * stats::randn(&mut rng);
            }
            cols.push(col);
            rows.push(s);
            labels.push(IcLabel::Blink);
        }

        // 3. saccade: opposite-polarity F7/F8 pair, smoothed telegraph steps
        {
            let f7 = layout::standard_position("F7").unwrap();
            let f8 = layout::standard_position("F8").unwrap();
            let a = gauss_map(&positions, f7, 0.30);
            let b = gauss_map(&positions, f8, 0.30);
            let mut col: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x - y).collect();
            normalize(&mut col);
            let mut s = vec![0.0; k];
            let mut level = 0.0;
            let mut t = 0usize;
            while t < k {
                let hold = rng.gen_range((0.8 * fs) as usize..(3.0 * fs) as usize);
                let target = rng.gen_range(-40.0..40.0);
                for j in 0..hold.min(k - t) {
                    // 50 ms saccadic transition
                    let u = (j as f64 / (0.05 * fs)).min(1.0);
                    s[t + j] = level + (target - level) * u;
                }
                level = target;
                t += hold;
            }
            for v in s.iter_mut() {
                *v += 0.5 * stats::randn(&mut rng);
            }
            cols.push(col);
            rows.push(s);
            labels.push(IcLabel::Saccade);
        }

        // 4. single channel: one-hot T7 with slow pops and beta chirps
        {
            let t7 = channels.iter().position(|c| c.label == "T7").unwrap();
            let mut col: Vec<f64> = (0..n).map(|_| 0.03 * rng.gen_range(-1.0..1.0)).collect();
            col[t7] = 1.0;
            normalize(&mut col);
            let mut s = vec![0.0; k];
            let mut t = 0.5;
            while t + 0.8 < 60.0 {
                let start = (t * fs) as usize;
                let sign = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
                let amp = sign * rng.gen_range(60.0..100.0);
                // slow pop: energy in delta/theta, little left by alpha
                for j in 0..(0.4 * fs) as usize {
                    s[start + j] += amp * (-(j as f64) / (0.1 * fs)).exp();
                }
                // beta chirp rider keeps 13-30 Hz above the alpha dip
                let f = rng.gen_range(20.0..28.0);
                for j in 0..(0.35 * fs) as usize {
                    let tt = j as f64 / fs;
                    let env = (PI * j as f64 / (0.35 * fs)).sin();
                    s[start + j] += 45.0 * env * (2.0 * PI * f * tt).sin();
                }
                let u: f64 = rng.gen_range(1e-9..1.0);
                t += 0.9 * (-u.ln()).max(0.1) + 0.4;
            }
            for v in s.iter_mut() {
                *v += 0.4 * stats::randn(&mut rng);
            }
            cols.push(col);
            rows.push(s);
            labels.push(IcLabel::SingleChannel);
        }

        // 5. muscle: temporal blob, continuous 30-60 Hz noise
        {
            let t8 = layout::standard_position("T8").unwrap();
            let mut col = gauss_map(&positions, t8, 0.30);
            normalize(&mut col);
            let tones: Vec<(f64, f64, f64)> = (0..40)
                .map(|_| {
                    (
                        rng.gen_range(30.0..60.0),
                        rng.gen_range(0.0..(2.0 * PI)),
                        rng.gen_range(0.5..1.0),
                    )
                })
                .collect();
            let mut s = vec![0.0; k];
            for (t, slot) in s.iter_mut().enumerate() {
                let tt = t as f64 / fs;
                for &(f, phi, a) in &tones {
                    *slot += a * (2.0 * PI * f * tt + phi).sin();
                }
            }
            let sd = stats::std_pop(&s);
            for v in s.iter_mut() {
                *v = *v / sd * 35.0 + 0.3 * stats::randn(&mut rng);
            }
            cols.push(col);
            rows.push(s);
            labels.push(IcLabel::Muscle);
        }

        // 6-7. occipital alpha (guard targets)
        for side in [-0.12, 0.12] {
            let mut col = gauss_map(&positions, [side, -0.9], 0.38);
            normalize(&mut col);
            let phase: f64 = rng.gen_range(0.0..(2.0 * PI));
            let mut s = vec![0.0; k];
            for (t, slot) in s.iter_mut().enumerate() {
                let tt = t as f64 / fs;
                let am = 0.6 + 0.4 * (2.0 * PI * 0.1 * tt + phase).sin();
                *slot = 45.0 * am * (2.0 * PI * 10.0 * tt + phase).sin() + 1.0 * stats::randn(&mut rng);
            }
            alpha_ics.push(cols.len());
            cols.push(col);
            rows.push(s);
            labels.push(IcLabel::Neural);
        }

        // remaining: blob-topography 1/f background away from the frontal
        // sector (frontal blobs are genuinely ambiguous with ocular maps)
        let mut centers: Vec<[f64; 2]> = Vec::new();
        while cols.len() < n {
            let mut center = [0.0, -0.3];
            for tries in 0..10_000 {
                let x = rng.gen_range(-0.75..0.75);
                let y = rng.gen_range(-0.75..0.2);
                if x * x + y * y > 0.8 * 0.8 {
                    continue;
                }
                let min_sep = if tries < 5_000 { 0.16 } else { 0.08 };
                let ok = centers
                    .iter()
                    .all(|c| (c[0] - x).powi(2) + (c[1] - y).powi(2) > min_sep * min_sep);
                if ok {
                    center = [x, y];
                    break;
                }
            }
            centers.push(center);
            let sigma = rng.gen_range(0.28..0.42);
            let mut col = gauss_map(&positions, center, sigma);
            normalize(&mut col);
            let mut s = shaped_noise(k, fs, 1.0, &mut rng);
            let amp = rng.gen_range(20.0..40.0);
            for v in s.iter_mut() {
                *v *= amp;
            }
            cols.push(col);
            rows.push(s);
            labels.push(IcLabel::Neural);
        }

        let mut mixing = Array2::<f64>::zeros((n, n));
        for (j, col) in cols.iter().enumerate() {
            for (i, &v) in col.iter().enumerate() {
                mixing[[i, j]] = v;
            }
        }
        let Ok(unmixing) = linalg::invert(&mixing) else {
            continue; // re-draw the blob geometry
        };
        let mut sources = Array2::<f64>::zeros((n, k));
        for (i, row) in rows.iter().enumerate() {
            for (t, &v) in row.iter().enumerate() {
                sources[[i, t]] = v;
            }
        }
        let x = mixing.dot(&sources);
        let rec = Recording::new(x, fs, channels.clone(), vec![], RecordingKind::Eeg)?;
        let decomp = IcaDecomposition {
            mixing,
            unmixing,
            sources_short: sources.clone(),
            channel_means: Array1::zeros(n),
            index_map: crate::model::IndexMap::identity(k),
            channels: channels.clone(),
            fs,
            seed,
            iterations: 0,
            converged: true,
        };
        return Ok(PlantedBenchmark {
            x: rec,
            decomp,
            sources,
            labels,
            alpha_ics,
        });
    }
    Err(Error::SingularMatrix(
        "could not build an invertible planted mixing matrix".into(),
    ))
}
