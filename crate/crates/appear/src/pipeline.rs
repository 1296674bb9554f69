//! End-to-end orchestration: gradient correction, decimation, filtering,
//! cardiac detection and method selection, BCG subtraction, bad-interval
//! excision, ICA, classification, and artifact-free reconstruction, with
//! per-stage wall-clock accounting.

use std::time::Instant;

use crate::cardiac::{self, BadIntervalParams, CardiacMethod};
use crate::classify::{self, ClassifyParams};
use crate::error::{Error, Result};
use crate::ica::{self, InfomaxParams};
use crate::io::config::PipelineConfig;
use crate::io::report::{QrsSummary, RunReport, StageTime, REPORT_SCHEMA_VERSION};
use crate::model::{Recording, RecordingKind};
use crate::preclean;

/// Stage outputs retained only on request (sessions are large).
#[derive(Debug, Clone)]
pub struct Intermediates {
    pub gradient_corrected: Recording,
    pub decimated: Recording,
    pub filtered: Recording,
    pub post_bcg: Recording,
}

#[derive(Debug, Clone)]
pub struct PipelineOutput {
    /// Full-length artifact-reduced scalp recording.
    pub corrected: Recording,
    pub report: RunReport,
    pub intermediates: Option<Intermediates>,
}

fn infomax_params(cfg: &PipelineConfig) -> InfomaxParams {
    InfomaxParams {
        max_sweeps: cfg.ica_max_sweeps,
        tol: cfg.ica_tol,
        block: cfg.ica_block,
        lrate: cfg.ica_lrate,
        min_samples_per_channel: cfg.ica_min_samples_per_channel,
        ..InfomaxParams::default()
    }
}

fn bad_params(cfg: &PipelineConfig) -> BadIntervalParams {
    BadIntervalParams {
        window_s: cfg.bad_window_s,
        step_s: cfg.bad_step_s,
        band_lo_hz: cfg.bad_band_lo_hz,
        band_hi_hz: cfg.bad_band_hi_hz,
        power_db: cfg.bad_power_db,
        amplitude_uv: cfg.bad_amplitude_uv,
        pad_s: cfg.bad_pad_s,
        max_fraction: cfg.bad_max_fraction,
    }
}

/// BCG-candidate components of a decomposition: those passing the spectral
/// conditions on their scale-fixed activation spectrum.
fn bcg_candidates(
    decomp: &ica::IcaDecomposition,
    params: &ClassifyParams,
) -> Result<Vec<usize>> {
    let win = (params.psd_win_s * decomp.fs).round() as usize;
    let mut out = Vec::new();
    for ic in 0..decomp.n_components() {
        let norm = decomp.column_norm(ic);
        let s: Vec<f64> = decomp
            .sources_short
            .row(ic)
            .iter()
            .map(|v| v * norm)
            .collect();
        let (freqs, psd) = preclean::welch_psd_db(&s, decomp.fs, win, params.psd_overlap)?;
        let (pass, _) = classify::bcg_spectral_test(&freqs, &psd, params)?;
        if pass {
            out.push(ic);
        }
    }
    Ok(out)
}

/// Runs the full two-pass pipeline on a raw acquisition-rate session.
/// `oximetry` enables the agreement-based method selection; without it the
/// ECG route is used directly.
pub fn run_preprocess(
    raw: &Recording,
    oximetry: Option<&Recording>,
    cfg: &PipelineConfig,
    keep_intermediates: bool,
) -> Result<PipelineOutput> {
    cfg.validate()?;
    let total_start = Instant::now();
    let mut stages: Vec<StageTime> = Vec::new();
    let mut timer = Instant::now();
    let lap = |name: &str, stages: &mut Vec<StageTime>, timer: &mut Instant| {
        stages.push(StageTime {
            name: name.to_string(),
            seconds: timer.elapsed().as_secs_f64(),
        });
        *timer = Instant::now();
    };

    // --- gradient artifact ---
    let slice_markers = raw.markers_labeled(&cfg.slice_trigger_label);
    let vols = preclean::derive_volume_triggers(&slice_markers, cfg.n_slices_per_volume)?;
    let gradient_corrected = preclean::gradient_subtract(
        raw,
        &vols,
        cfg.gradient_method,
        cfg.aas_window_volumes,
        cfg.obs_n_pc,
    )?;
    lap("gradient", &mut stages, &mut timer);

    // --- decimation ---
    let factor = (raw.fs / cfg.target_fs_hz).round() as usize;
    if factor == 0 || (raw.fs - cfg.target_fs_hz * factor as f64).abs() > 1e-6 {
        return Err(Error::Argument(format!(
            "acquisition rate {} not an integer multiple of target {}",
            raw.fs, cfg.target_fs_hz
        )));
    }
    let decimated = preclean::decimate(&gradient_corrected, factor)?;
    lap("decimate", &mut stages, &mut timer);

    // --- split scalp/ECG and filter ---
    let scalp_idx: Vec<usize> = decimated
        .channels
        .iter()
        .enumerate()
        .filter(|(_, c)| !c.is_ecg)
        .map(|(i, _)| i)
        .collect();
    let ecg_idx: Vec<usize> = decimated
        .channels
        .iter()
        .enumerate()
        .filter(|(_, c)| c.is_ecg)
        .map(|(i, _)| i)
        .collect();
    let eeg = decimated.select_channels(&scalp_idx, RecordingKind::Eeg)?;
    let ecg = match ecg_idx.first() {
        Some(&i) => Some(decimated.select_channels(&[i], RecordingKind::Ecg)?),
        None => None,
    };

    let (lo, hi) = cfg.bandpass();
    let bandpassed = preclean::fir_bandpass(&eeg, lo, hi)?;
    let centers = preclean::reject_centers(
        cfg.slice_freq_hz,
        cfg.vibration_freq_hz,
        cfg.line_freq_hz,
        bandpassed.fs,
        cfg.band_reject_bw_hz,
        cfg.harmonic_max_hz,
    );
    let filtered = preclean::band_reject(&bandpassed, &centers, cfg.band_reject_bw_hz)?;
    lap("filter", &mut stages, &mut timer);

    // --- cardiac timing: ECG route, component route, oximetry reference ---
    let classify_params = ClassifyParams::from(cfg);
    let ecg_events = match &ecg {
        Some(rec) => cardiac::detect_r_peaks_ecg(rec).map(Some).or_else(|e| match e {
            Error::NoPeaks(_) | Error::InsufficientData(_) => Ok(None),
            other => Err(other),
        })?,
        None => None,
    };

    let mut qrs_note: Option<String> = None;
    let train_samples = ((cfg.qrs_ica_train_seconds * filtered.fs) as usize)
        .min(filtered.n_samples());
    let prelim = {
        let window = Recording::new(
            filtered
                .data
                .slice(ndarray::s![.., ..train_samples])
                .to_owned(),
            filtered.fs,
            filtered.channels.clone(),
            vec![],
            filtered.kind,
        )?;
        ica::infomax_decompose(
            &window,
            crate::model::IndexMap::identity(train_samples),
            cfg.seed.wrapping_add(1),
            &infomax_params(cfg),
        )
        .map(Some)
        .or_else(|e| match e {
            Error::InsufficientData(_) => {
                qrs_note = Some(format!("component route skipped: {e}"));
                Ok(None)
            }
            other => Err(other),
        })?
    };

    let mut ica_full_peaks: Option<Vec<usize>> = None;
    let ica_events = match &prelim {
        Some(d) => {
            let candidates = bcg_candidates(d, &classify_params)?;
            match cardiac::detect_r_peaks_ica(d, &candidates) {
                Ok(ev) => {
                    // extend the winning component across the whole session
                    let strongest = cardiac::strongest_candidate(d, &candidates)
                        .expect("candidates nonempty when detection succeeded");
                    let full = ica::project_full(d, &filtered)?;
                    let norm = d.column_norm(strongest);
                    let activation: Vec<f64> = full
                        .activations
                        .row(strongest)
                        .iter()
                        .map(|v| v * norm)
                        .collect();
                    match cardiac::multiscale_peaks(&activation, filtered.fs) {
                        Ok((peaks, _, _)) => ica_full_peaks = Some(peaks),
                        Err(_) => ica_full_peaks = Some(
                            ev.peaks.clone(), // fall back to the training window
                        ),
                    }
                    Some(ev)
                }
                Err(Error::NoCandidate(msg)) | Err(Error::Unreliable(msg)) | Err(Error::NoPeaks(msg)) => {
                    qrs_note = Some(format!("component route unavailable: {msg}"));
                    None
                }
                Err(other) => return Err(other),
            }
        }
        None => None,
    };

    let oxi_events = match oximetry {
        Some(rec) => Some(cardiac::detect_pulse_peaks(rec)?),
        None => None,
    };

    let (selected, events) = match (&ecg_events, &ica_events, &oxi_events) {
        (Some(e), Some(i), Some(o)) => {
            let sel = cardiac::select_cardiac_source(e.mean_hr_bpm, i.mean_hr_bpm, o.mean_hr_bpm)?;
            match sel.chosen {
                CardiacMethod::Ica => {
                    let peaks = ica_full_peaks.clone().expect("set alongside ica_events");
                    let ev = cardiac::CardiacEvents::from_peaks(peaks, filtered.fs, CardiacMethod::Ica)?;
                    ("ICA".to_string(), ev)
                }
                _ => ("ECG".to_string(), (*e).clone()),
            }
        }
        (Some(e), _, None) | (Some(e), None, _) => ("ECG".to_string(), (*e).clone()),
        (None, Some(_), _) => {
            let peaks = ica_full_peaks.clone().expect("set alongside ica_events");
            let ev = cardiac::CardiacEvents::from_peaks(peaks, filtered.fs, CardiacMethod::Ica)?;
            ("ICA".to_string(), ev)
        }
        (None, None, _) => {
            return Err(Error::NoPeaks(
                "no usable cardiac timing from either route".into(),
            ))
        }
    };
    if oxi_events.is_none() && qrs_note.is_none() {
        qrs_note = Some("no oximetry reference: defaulted to the ECG route".into());
    }
    lap("qrs", &mut stages, &mut timer);

    // --- BCG subtraction ---
    let post_bcg = cardiac::bcg_aas(&filtered, &events, cfg.bcg_template_beats)?;
    lap("bcg", &mut stages, &mut timer);

    // --- bad intervals and excision ---
    let bad = cardiac::detect_bad_intervals(&post_bcg, &bad_params(cfg))?;
    let (short, index_map) = crate::model::excise_intervals(&post_bcg, &bad)?;
    lap("bad_intervals", &mut stages, &mut timer);

    // --- decomposition ---
    let decomp = ica::infomax_decompose(&short, index_map, cfg.seed, &infomax_params(cfg))?;
    lap("ica", &mut stages, &mut timer);

    // --- classification ---
    let verdicts = classify::classify_ics(&short, &decomp, &decomp.sources_short, &classify_params)?;
    let removed: Vec<usize> = verdicts
        .iter()
        .filter(|v| v.label != classify::IcLabel::Neural)
        .map(|v| v.index)
        .collect();
    lap("classify", &mut stages, &mut timer);

    // --- full-session projection and reconstruction ---
    let sources_full = ica::project_full(&decomp, &post_bcg)?;
    let corrected = ica::reconstruct_without(&decomp, &sources_full, &removed, &post_bcg)?;
    lap("reconstruct", &mut stages, &mut timer);

    let report = RunReport {
        schema_version: REPORT_SCHEMA_VERSION,
        mode: cfg.mode,
        seed: cfg.seed,
        bandpass_lo_hz: lo,
        bandpass_hi_hz: hi,
        qrs: QrsSummary {
            selected,
            hr_ecg_bpm: ecg_events.as_ref().map(|e| e.mean_hr_bpm),
            hr_ica_bpm: ica_events.as_ref().map(|e| e.mean_hr_bpm),
            hr_oximetry_bpm: oxi_events.as_ref().map(|e| e.mean_hr_bpm),
            note: qrs_note,
        },
        bad_intervals: bad.intervals().to_vec(),
        bad_fraction: bad.total_len() as f64 / post_bcg.n_samples() as f64,
        ica_converged: decomp.converged,
        ica_iterations: decomp.iterations,
        removed_ics: removed,
        ics: verdicts,
        stage_seconds: stages,
        total_seconds: total_start.elapsed().as_secs_f64(),
        config: cfg.clone(),
    };

    Ok(PipelineOutput {
        corrected,
        report,
        intermediates: keep_intermediates.then(|| Intermediates {
            gradient_corrected,
            decimated,
            filtered,
            post_bcg,
        }),
    })
}

/// Canonical resting-band edges used by the evaluation subcommand.
pub const EVAL_BANDS: [(&str, f64, f64); 4] = [
    ("delta", 1.0, 4.0),
    ("theta", 4.0, 8.0),
    ("alpha", 8.0, 12.0),
    ("beta", 13.0, 30.0),
];

/// Exit-code classification for the CLI: 2 = unusable input, 3 = the
/// pipeline gave up on usable input.
pub fn exit_code_for(e: &Error) -> i32 {
    match e {
        Error::Parse(_)
        | Error::Format(_)
        | Error::Io(_)
        | Error::Argument(_)
        | Error::EmptyData(_)
        | Error::Bounds(_)
        | Error::Layout(_)
        | Error::TriggerCount { .. } => 2,
        _ => 3,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::io::config::PipelineConfig;
    use crate::synth::{self, SynthSpec};

    /// Small end-to-end smoke run; the full-scale version lives in the
    /// acceptance suite.
    #[test]
    fn short_session_runs_end_to_end() {
        let spec = SynthSpec {
            duration_s: 70.0,
            fs_raw: 1000.0,
            seed: 11,
            retain: Some(vec![synth::Constituent::Neural]),
            ..SynthSpec::default()
        };
        let session = synth::generate(&spec).unwrap();
        let cfg = PipelineConfig {
            qrs_ica_train_seconds: 40.0,
            ica_max_sweeps: 80,
            ..PipelineConfig::default()
        };
        let out = run_preprocess(&session.raw, Some(&session.oximetry), &cfg, false).unwrap();
        assert_eq!(out.corrected.n_channels(), 31);
        assert_eq!(out.corrected.fs, 250.0);
        assert_eq!(
            out.corrected.n_samples(),
            (70.0 * 250.0) as usize,
            "reconstruction must span the full uncut session"
        );
        assert_eq!(out.report.ics.len(), 31);
        let stage_sum: f64 = out.report.stage_seconds.iter().map(|s| s.seconds).sum();
        assert!(
            (stage_sum - out.report.total_seconds).abs() <= 0.05 * out.report.total_seconds,
            "stages {stage_sum} vs total {}",
            out.report.total_seconds
        );
        assert!(out.report.qrs.hr_oximetry_bpm.is_some());
    }
}
