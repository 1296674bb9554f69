//! Pipeline configuration: flat `key=value` text with `#` comments. Every
//! field has a default matching the reference parameterization, so an empty
//! file (or no file) runs the standard setup.

use serde::{Deserialize, Serialize};
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::preclean::GradientMethod;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Rest,
    Task,
}

impl std::str::FromStr for Mode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "rest" => Ok(Mode::Rest),
            "task" => Ok(Mode::Task),
            other => Err(Error::Parse(format!("unknown mode {other} (rest|task)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub mode: Mode,

    // acquisition geometry
    pub n_slices_per_volume: usize,
    pub tr_seconds: f64,
    pub slice_freq_hz: f64,
    pub vibration_freq_hz: f64,
    pub line_freq_hz: f64,
    pub slice_trigger_label: String,
    pub stimulus_label: String,

    // filtering
    pub bandpass_lo_rest_hz: f64,
    pub bandpass_hi_rest_hz: f64,
    pub bandpass_lo_task_hz: f64,
    pub bandpass_hi_task_hz: f64,
    pub band_reject_bw_hz: f64,
    pub harmonic_max_hz: f64,
    pub target_fs_hz: f64,

    // gradient stage
    pub gradient_method: GradientMethod,
    pub aas_window_volumes: usize,
    pub obs_n_pc: usize,

    // cardiac stage
    pub bcg_template_beats: usize,
    pub qrs_ica_train_seconds: f64,
    pub oximetry_fs_hz: f64,

    // bad-interval screening
    pub bad_window_s: f64,
    pub bad_step_s: f64,
    pub bad_band_lo_hz: f64,
    pub bad_band_hi_hz: f64,
    pub bad_power_db: f64,
    pub bad_amplitude_uv: f64,
    pub bad_pad_s: f64,
    pub bad_max_fraction: f64,

    // decomposition
    pub seed: u64,
    pub ica_max_sweeps: usize,
    pub ica_tol: f64,
    pub ica_block: usize,
    pub ica_lrate: f64,
    pub ica_min_samples_per_channel: usize,

    // spectra
    pub psd_win_s: f64,
    pub psd_overlap: f64,

    // component classification
    pub topo_threshold: f64,
    pub boundary_band_width: f64,
    pub secondary_min_area: f64,
    pub secondary_min_arc: f64,
    pub occipital_overlap_unipolar: f64,
    pub occipital_overlap_bipolar: f64,
    pub occipital_template_radius: f64,
    pub frontal_sector_y: f64,
    pub blink_anterior_fraction: f64,
    pub saccade_min_separation: f64,
    pub single_channel_ratio_2: f64,
    pub single_channel_ratio_3: f64,
    pub kurtosis_threshold: f64,
    pub contribution_mean_ratio: f64,
    pub contribution_min_ratio: f64,
    pub bcg_rise_fraction: f64,
    pub bcg_rn_fraction: f64,
    pub bcg_db_margin: f64,

    // evaluation
    pub erp_lowpass_hz: f64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            mode: Mode::Rest,
            n_slices_per_volume: 39,
            tr_seconds: 2.0,
            slice_freq_hz: 19.5,
            vibration_freq_hz: 26.0,
            line_freq_hz: 60.0,
            slice_trigger_label: "R128".into(),
            stimulus_label: "S1".into(),
            bandpass_lo_rest_hz: 1.0,
            bandpass_hi_rest_hz: 70.0,
            bandpass_lo_task_hz: 0.1,
            bandpass_hi_task_hz: 70.0,
            band_reject_bw_hz: 1.0,
            harmonic_max_hz: 120.0,
            target_fs_hz: 250.0,
            gradient_method: GradientMethod::Obs,
            aas_window_volumes: 15,
            obs_n_pc: 4,
            bcg_template_beats: 21,
            qrs_ica_train_seconds: 120.0,
            oximetry_fs_hz: 40.0,
            bad_window_s: 1.0,
            bad_step_s: 0.5,
            bad_band_lo_hz: 20.0,
            bad_band_hi_hz: 40.0,
            bad_power_db: 10.0,
            bad_amplitude_uv: 250.0,
            bad_pad_s: 0.25,
            bad_max_fraction: 0.5,
            seed: 1,
            ica_max_sweeps: 512,
            ica_tol: 1e-6,
            ica_block: 128,
            ica_lrate: 0.02,
            ica_min_samples_per_channel: 20,
            psd_win_s: 4.096,
            psd_overlap: 0.5,
            topo_threshold: 0.2,
            boundary_band_width: 0.2,
            secondary_min_area: 0.05,
            secondary_min_arc: 0.10,
            occipital_overlap_unipolar: 0.4,
            occipital_overlap_bipolar: 0.91,
            occipital_template_radius: 0.25,
            frontal_sector_y: 0.33,
            blink_anterior_fraction: 0.6,
            saccade_min_separation: 0.5,
            single_channel_ratio_2: 5.0,
            single_channel_ratio_3: 10.0,
            kurtosis_threshold: 4.0,
            contribution_mean_ratio: 0.97,
            contribution_min_ratio: 0.95,
            bcg_rise_fraction: 0.2,
            bcg_rn_fraction: 0.33,
            bcg_db_margin: 3.0,
            erp_lowpass_hz: 30.0,
        }
    }
}

impl PipelineConfig {
    /// Band-pass edges for the active mode.
    pub fn bandpass(&self) -> (f64, f64) {
        match self.mode {
            Mode::Rest => (self.bandpass_lo_rest_hz, self.bandpass_hi_rest_hz),
            Mode::Task => (self.bandpass_lo_task_hz, self.bandpass_hi_task_hz),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_slices_per_volume > 0 && self.tr_seconds > 0.0 {
            let implied = self.n_slices_per_volume as f64 / self.tr_seconds;
            if (implied - self.slice_freq_hz).abs() > 1e-6 {
                return Err(Error::Argument(format!(
                    "slice_freq_hz {} inconsistent with n_slices/tr = {implied}",
                    self.slice_freq_hz
                )));
            }
        }
        for (lo, hi) in [
            (self.bandpass_lo_rest_hz, self.bandpass_hi_rest_hz),
            (self.bandpass_lo_task_hz, self.bandpass_hi_task_hz),
        ] {
            if !(lo < hi) {
                return Err(Error::Argument(format!("band edges out of order: ({lo}, {hi})")));
            }
        }
        if !(self.bad_max_fraction > 0.0 && self.bad_max_fraction <= 1.0) {
            return Err(Error::Argument("bad_max_fraction must be in (0, 1]".into()));
        }
        Ok(())
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Parse(format!("cannot read {}: {e}", path.display())))?;
        Self::from_str_contents(&text)
    }

    pub fn from_str_contents(text: &str) -> Result<Self> {
        let mut cfg = PipelineConfig::default();
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
            cfg.set(key.trim(), value.trim())
                .map_err(|e| Error::Parse(format!("line {}: {e}", lineno + 1)))?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn f(v: &str) -> Result<f64> {
            v.parse()
                .map_err(|_| Error::Parse(format!("bad number {v}")))
        }
        fn u(v: &str) -> Result<usize> {
            v.parse()
                .map_err(|_| Error::Parse(format!("bad integer {v}")))
        }
        match key {
            "mode" => self.mode = value.parse()?,
            "n_slices_per_volume" => self.n_slices_per_volume = u(value)?,
            "tr_seconds" => self.tr_seconds = f(value)?,
            "slice_freq_hz" => self.slice_freq_hz = f(value)?,
            "vibration_freq_hz" => self.vibration_freq_hz = f(value)?,
            "line_freq_hz" => self.line_freq_hz = f(value)?,
            "slice_trigger_label" => self.slice_trigger_label = value.to_string(),
            "stimulus_label" => self.stimulus_label = value.to_string(),
            "bandpass_lo_rest_hz" => self.bandpass_lo_rest_hz = f(value)?,
            "bandpass_hi_rest_hz" => self.bandpass_hi_rest_hz = f(value)?,
            "bandpass_lo_task_hz" => self.bandpass_lo_task_hz = f(value)?,
            "bandpass_hi_task_hz" => self.bandpass_hi_task_hz = f(value)?,
            "band_reject_bw_hz" => self.band_reject_bw_hz = f(value)?,
            "harmonic_max_hz" => self.harmonic_max_hz = f(value)?,
            "target_fs_hz" => self.target_fs_hz = f(value)?,
            "gradient_method" => {
                self.gradient_method = match value.to_ascii_lowercase().as_str() {
                    "aas" => GradientMethod::Aas,
                    "obs" => GradientMethod::Obs,
                    other => return Err(Error::Parse(format!("unknown gradient method {other}"))),
                }
            }
            "aas_window_volumes" => self.aas_window_volumes = u(value)?,
            "obs_n_pc" => self.obs_n_pc = u(value)?,
            "bcg_template_beats" => self.bcg_template_beats = u(value)?,
            "qrs_ica_train_seconds" => self.qrs_ica_train_seconds = f(value)?,
            "oximetry_fs_hz" => self.oximetry_fs_hz = f(value)?,
            "bad_window_s" => self.bad_window_s = f(value)?,
            "bad_step_s" => self.bad_step_s = f(value)?,
            "bad_band_lo_hz" => self.bad_band_lo_hz = f(value)?,
            "bad_band_hi_hz" => self.bad_band_hi_hz = f(value)?,
            "bad_power_db" => self.bad_power_db = f(value)?,
            "bad_amplitude_uv" => self.bad_amplitude_uv = f(value)?,
            "bad_pad_s" => self.bad_pad_s = f(value)?,
            "bad_max_fraction" => self.bad_max_fraction = f(value)?,
            "seed" => {
                self.seed = value
                    .parse()
                    .map_err(|_| Error::Parse(format!("bad seed {value}")))?
            }
            "ica_max_sweeps" => self.ica_max_sweeps = u(value)?,
            "ica_tol" => self.ica_tol = f(value)?,
            "ica_block" => self.ica_block = u(value)?,
            "ica_lrate" => self.ica_lrate = f(value)?,
            "ica_min_samples_per_channel" => self.ica_min_samples_per_channel = u(value)?,
            "psd_win_s" => self.psd_win_s = f(value)?,
            "psd_overlap" => self.psd_overlap = f(value)?,
            "topo_threshold" => self.topo_threshold = f(value)?,
            "boundary_band_width" => self.boundary_band_width = f(value)?,
            "secondary_min_area" => self.secondary_min_area = f(value)?,
            "secondary_min_arc" => self.secondary_min_arc = f(value)?,
            "occipital_overlap_unipolar" => self.occipital_overlap_unipolar = f(value)?,
            "occipital_overlap_bipolar" => self.occipital_overlap_bipolar = f(value)?,
            "occipital_template_radius" => self.occipital_template_radius = f(value)?,
            "frontal_sector_y" => self.frontal_sector_y = f(value)?,
            "blink_anterior_fraction" => self.blink_anterior_fraction = f(value)?,
            "saccade_min_separation" => self.saccade_min_separation = f(value)?,
            "single_channel_ratio_2" => self.single_channel_ratio_2 = f(value)?,
            "single_channel_ratio_3" => self.single_channel_ratio_3 = f(value)?,
            "kurtosis_threshold" => self.kurtosis_threshold = f(value)?,
            "contribution_mean_ratio" => self.contribution_mean_ratio = f(value)?,
            "contribution_min_ratio" => self.contribution_min_ratio = f(value)?,
            "bcg_rise_fraction" => self.bcg_rise_fraction = f(value)?,
            "bcg_rn_fraction" => self.bcg_rn_fraction = f(value)?,
            "bcg_db_margin" => self.bcg_db_margin = f(value)?,
            "erp_lowpass_hz" => self.erp_lowpass_hz = f(value)?,
            other => return Err(Error::Parse(format!("unknown config key {other}"))),
        }
        Ok(())
    }
}
