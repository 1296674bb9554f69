//! Rule-based labeling of independent components as neural activity or one
//! of five artifact families: BCG, blink, saccade, single-channel, muscle.
//!
//! Spectral diagnostics run on the scale-fixed activation `|A[:,i]| * s_i`
//! (the back-projected magnitude), so every verdict is invariant to the
//! usual ICA scale/sign indeterminacy. All spectral-rise arithmetic is in
//! dB; band comparisons use mean linear power.

use ndarray::{Array2, ArrayView1};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ica::IcaDecomposition;
use crate::io::config::PipelineConfig;
use crate::model::Recording;
use crate::preclean;
use crate::stats;
use crate::topo::{self, PolarityRegions, TopoMap};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum IcLabel {
    Neural,
    Bcg,
    Blink,
    Saccade,
    SingleChannel,
    Muscle,
}

#[derive(Debug, Clone, Copy)]
pub struct ClassifyParams {
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
    pub psd_win_s: f64,
    pub psd_overlap: f64,
}

impl Default for ClassifyParams {
    fn default() -> Self {
        ClassifyParams {
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
            psd_win_s: 4.096,
            psd_overlap: 0.5,
        }
    }
}

impl From<&PipelineConfig> for ClassifyParams {
    fn from(c: &PipelineConfig) -> Self {
        ClassifyParams {
            topo_threshold: c.topo_threshold,
            boundary_band_width: c.boundary_band_width,
            secondary_min_area: c.secondary_min_area,
            secondary_min_arc: c.secondary_min_arc,
            occipital_overlap_unipolar: c.occipital_overlap_unipolar,
            occipital_overlap_bipolar: c.occipital_overlap_bipolar,
            occipital_template_radius: c.occipital_template_radius,
            frontal_sector_y: c.frontal_sector_y,
            blink_anterior_fraction: c.blink_anterior_fraction,
            saccade_min_separation: c.saccade_min_separation,
            single_channel_ratio_2: c.single_channel_ratio_2,
            single_channel_ratio_3: c.single_channel_ratio_3,
            kurtosis_threshold: c.kurtosis_threshold,
            contribution_mean_ratio: c.contribution_mean_ratio,
            contribution_min_ratio: c.contribution_min_ratio,
            bcg_rise_fraction: c.bcg_rise_fraction,
            bcg_rn_fraction: c.bcg_rn_fraction,
            bcg_db_margin: c.bcg_db_margin,
            psd_win_s: c.psd_win_s,
            psd_overlap: c.psd_overlap,
        }
    }
}

/// One qualified peak in the cardioballistic (2-7 Hz) range.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct CbPeak {
    pub freq_hz: f64,
    pub rise_db: f64,
    pub power_db: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct BcgSpectralDiag {
    /// Neuronal-range (8-12 Hz) peak frequency.
    pub f_p_hz: f64,
    /// Local minimum immediately below 8 Hz, when one exists.
    pub f_lmin_hz: Option<f64>,
    /// Rise of the neuronal peak above the valley floor (dB).
    pub r_n_db: f64,
    /// Power at the neuronal peak (dB).
    pub s_n_db: f64,
    /// Baseline minimum below the neuronal peak (dB).
    pub s_min_db: f64,
    /// Mean power across 2-7 Hz (dB).
    pub s_ave_db: f64,
    pub cb_peaks: Vec<CbPeak>,
    pub condition_peak: bool,
    pub condition_s3: bool,
    pub condition_s4: bool,
    pub condition_s5: bool,
    pub passed: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ContributionDiag {
    /// Symmetric ratio r_j per channel; None where a polarity mean was zero.
    pub channel_ratios: Vec<Option<f64>>,
    pub min_mean_ratio: f64,
    pub min_individual_ratio: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct SingleChannelDiag {
    pub max1: f64,
    pub max2: f64,
    pub max3: f64,
    pub ratios_pass: bool,
    pub kurtosis: f64,
    pub alpha_lowest: bool,
    pub passed: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct TopoDiag {
    pub regions: PolarityRegions,
    pub occipital_overlap: f64,
    pub bipolar: bool,
    pub passed: bool,
}

/// Mean linear band power of the component activation spectrum.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct BandMeans {
    pub delta_1_4: f64,
    pub theta_4_8: f64,
    pub alpha_8_12: f64,
    pub alpha_7_13: f64,
    pub beta_13_30: f64,
    pub gamma_30_60: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct IcVerdict {
    pub index: usize,
    pub label: IcLabel,
    /// Names of the rules that fired, in evaluation order.
    pub trace: Vec<String>,
    pub alpha_guard: bool,
    pub kurtosis: f64,
    /// Spectrum argmax (over bins >= 1 Hz).
    pub psd_peak_hz: f64,
    pub band_means: BandMeans,
    pub spectral: BcgSpectralDiag,
    pub topo: TopoDiag,
    pub contribution: ContributionDiag,
    pub single_channel: SingleChannelDiag,
}

impl IcVerdict {
    /// Neutral record for serialization tests and report scaffolding.
    pub fn placeholder(index: usize) -> IcVerdict {
        IcVerdict {
            index,
            label: IcLabel::Neural,
            trace: vec![],
            alpha_guard: false,
            kurtosis: 3.0,
            psd_peak_hz: 10.0,
            band_means: BandMeans {
                delta_1_4: 0.0,
                theta_4_8: 0.0,
                alpha_8_12: 0.0,
                alpha_7_13: 0.0,
                beta_13_30: 0.0,
                gamma_30_60: 0.0,
            },
            spectral: BcgSpectralDiag {
                f_p_hz: 10.0,
                f_lmin_hz: None,
                r_n_db: 0.0,
                s_n_db: 0.0,
                s_min_db: 0.0,
                s_ave_db: 0.0,
                cb_peaks: vec![],
                condition_peak: false,
                condition_s3: false,
                condition_s4: false,
                condition_s5: false,
                passed: false,
            },
            topo: TopoDiag {
                regions: PolarityRegions {
                    primary: None,
                    secondary: None,
                    neutral_count: 0,
                    primary_sign_count: 0,
                    neutral_arc_frac: 1.0,
                    regions: vec![],
                },
                occipital_overlap: 0.0,
                bipolar: false,
                passed: false,
            },
            contribution: ContributionDiag {
                channel_ratios: vec![],
                min_mean_ratio: 1.0,
                min_individual_ratio: 1.0,
                passed: false,
            },
            single_channel: SingleChannelDiag {
                max1: 0.0,
                max2: 0.0,
                max3: 0.0,
                ratios_pass: false,
                kurtosis: 3.0,
                alpha_lowest: false,
                passed: false,
            },
        }
    }
}

fn bins_in(freqs: &[f64], lo: f64, hi_inclusive: f64) -> Vec<usize> {
    freqs
        .iter()
        .enumerate()
        .filter(|(_, f)| **f >= lo && **f <= hi_inclusive)
        .map(|(i, _)| i)
        .collect()
}

/// Cardioballistic-vs-neuronal spectrum conditions, all in dB.
///
/// Passes iff a 2-7 Hz peak rises more than `0.2 * S_ave` above its left
/// valley, and either the neuronal rise is small (`R_N <= 0.33 * S_ave`) or
/// the cardioballistic peaks are comparable to it (max rise within 3 dB of
/// `R_N`, or the 2-7 Hz mean sits well above baseline with peak power within
/// 3 dB of the neuronal peak).
pub fn bcg_spectral_test(
    freqs: &[f64],
    psd_db: &[f64],
    p: &ClassifyParams,
) -> Result<(bool, BcgSpectralDiag)> {
    if freqs.len() != psd_db.len() || freqs.is_empty() {
        return Err(Error::Argument("frequency/power length mismatch".into()));
    }
    let neuronal = bins_in(freqs, 8.0, 12.0);
    let cardiac = bins_in(freqs, 2.0, 7.0);
    let base = bins_in(freqs, 1.0, 12.0);
    if neuronal.is_empty() || cardiac.is_empty() || base.is_empty() {
        return Err(Error::Argument(
            "PSD must cover the 1-30 Hz range for the spectral test".into(),
        ));
    }

    let fp_idx = *neuronal
        .iter()
        .max_by(|&&a, &&b| psd_db[a].partial_cmp(&psd_db[b]).unwrap())
        .unwrap();
    let s_n = psd_db[fp_idx];

    // local minimum immediately below 8 Hz (non-strict; nearest first)
    let lb = base[0];
    let below8: Vec<usize> = base.iter().cloned().filter(|&i| freqs[i] < 8.0).collect();
    let mut f_lmin_idx: Option<usize> = None;
    for &i in below8.iter().rev() {
        if i > lb && i + 1 < psd_db.len() && psd_db[i] <= psd_db[i - 1] && psd_db[i] <= psd_db[i + 1]
        {
            f_lmin_idx = Some(i);
            break;
        }
    }

    let range_start = f_lmin_idx.unwrap_or_else(|| {
        *base
            .iter()
            .find(|&&i| freqs[i] >= 8.0)
            .unwrap_or(&fp_idx)
    });
    let valley_floor = (range_start..=fp_idx)
        .map(|i| psd_db[i])
        .fold(f64::INFINITY, f64::min);
    let r_n = (s_n - valley_floor).max(0.0);

    let s_min = base
        .iter()
        .filter(|&&i| i < fp_idx)
        .map(|&i| psd_db[i])
        .fold(f64::INFINITY, f64::min)
        .min(s_n);
    let s_ave = stats::mean(&cardiac.iter().map(|&i| psd_db[i]).collect::<Vec<_>>());

    // qualified 2-7 Hz peaks: local maxima whose rise above the adjacent
    // left valley exceeds the S_ave fraction
    let mut cb_peaks = Vec::new();
    for &i in &cardiac {
        if i == 0 || i + 1 >= psd_db.len() {
            continue;
        }
        if !(psd_db[i] > psd_db[i - 1] && psd_db[i] >= psd_db[i + 1]) {
            continue;
        }
        let mut j = i;
        while j > lb && psd_db[j - 1] <= psd_db[j] {
            j -= 1;
        }
        let left_min = psd_db[j];
        let rise = psd_db[i] - left_min;
        if rise > p.bcg_rise_fraction * s_ave && rise > 0.0 {
            cb_peaks.push(CbPeak {
                freq_hz: freqs[i],
                rise_db: rise,
                power_db: psd_db[i],
            });
        }
    }

    let condition_peak = !cb_peaks.is_empty();
    let condition_s3 = r_n <= p.bcg_rn_fraction * s_ave;
    let max_rise = cb_peaks.iter().map(|c| c.rise_db).fold(f64::NEG_INFINITY, f64::max);
    let max_power = cb_peaks.iter().map(|c| c.power_db).fold(f64::NEG_INFINITY, f64::max);
    let condition_s4 = condition_peak && max_rise > r_n - p.bcg_db_margin;
    let condition_s5 =
        condition_peak && (s_ave - s_min > p.bcg_rn_fraction * r_n) && max_power > s_n - p.bcg_db_margin;
    let passed = condition_peak && (condition_s3 || condition_s4 || condition_s5);

    Ok((
        passed,
        BcgSpectralDiag {
            f_p_hz: freqs[fp_idx],
            f_lmin_hz: f_lmin_idx.map(|i| freqs[i]),
            r_n_db: r_n,
            s_n_db: s_n,
            s_min_db: s_min,
            s_ave_db: s_ave,
            cb_peaks,
            condition_peak,
            condition_s3,
            condition_s4,
            condition_s5,
            passed,
        },
    ))
}

/// Topographic BCG signature: one primary polarity region with a boundary
/// arc, at most one leftover region, and an opposite-sign secondary region
/// on the other lateral half with enough area and arc.
pub fn bcg_topo_test(regions: &PolarityRegions, p: &ClassifyParams) -> bool {
    let Some(primary) = &regions.primary else {
        return false;
    };
    if regions.neutral_count > 1 {
        return false;
    }
    if regions.primary_sign_count != 1 || primary.arc_frac <= 0.0 {
        return false;
    }
    let Some(secondary) = &regions.secondary else {
        return false;
    };
    if primary.centroid[0] * secondary.centroid[0] >= 0.0 {
        return false;
    }
    secondary.area_frac >= p.secondary_min_area && secondary.arc_frac >= p.secondary_min_arc
}

/// Signal-contribution check: removing the component must shrink the mean
/// positive/negative magnitudes of at least one channel below the thresholds.
pub fn bcg_contribution_test(
    x: &Array2<f64>,
    a_col: ArrayView1<f64>,
    s_row: ArrayView1<f64>,
    p: &ClassifyParams,
) -> Result<(bool, ContributionDiag)> {
    let n = x.nrows();
    let m = x.ncols();
    if a_col.len() != n || s_row.len() != m {
        return Err(Error::Argument("contribution shapes mismatch".into()));
    }
    let mut channel_ratios = vec![None; n];
    let mut min_mean = f64::INFINITY;
    let mut min_individual = f64::INFINITY;
    let mut any = false;
    for j in 0..n {
        let mut pos_sum = 0.0;
        let mut pos_n = 0usize;
        let mut neg_sum = 0.0;
        let mut neg_n = 0usize;
        let mut pos_sum_r = 0.0;
        let mut neg_sum_r = 0.0;
        let aj = a_col[j];
        for t in 0..m {
            let v = x[[j, t]];
            let vr = v - aj * s_row[t];
            if v > 0.0 {
                pos_sum += v;
                pos_n += 1;
                pos_sum_r += vr.max(0.0).abs();
            } else if v < 0.0 {
                neg_sum += -v;
                neg_n += 1;
                neg_sum_r += vr.min(0.0).abs();
            }
        }
        if pos_n == 0 || neg_n == 0 || pos_sum <= 0.0 || neg_sum <= 0.0 {
            continue;
        }
        // mean magnitudes computed over the original samples' polarity sets
        let alpha_pos = pos_sum / pos_n as f64;
        let alpha_neg = neg_sum / neg_n as f64;
        let alpha_pos_r = pos_sum_r / pos_n as f64;
        let alpha_neg_r = neg_sum_r / neg_n as f64;
        let rp = alpha_pos_r / alpha_pos;
        let rn = alpha_neg_r / alpha_neg;
        let r = 0.5 * (rp + rn);
        channel_ratios[j] = Some(r);
        min_mean = min_mean.min(r);
        min_individual = min_individual.min(rp.min(rn));
        any = true;
    }
    if !any {
        return Err(Error::Argument(
            "every channel had a zero polarity mean".into(),
        ));
    }
    let passed = min_mean < p.contribution_mean_ratio && min_individual < p.contribution_min_ratio;
    Ok((
        passed,
        ContributionDiag {
            channel_ratios,
            min_mean_ratio: min_mean,
            min_individual_ratio: min_individual,
            passed,
        },
    ))
}

/// Occipital-alpha protection: strong overlap between the suprathreshold map
/// and the occipital template, plus alpha dominance in the spectrum. A true
/// guard forces the Neural label before any artifact test runs.
pub fn alpha_guard(
    map: &TopoMap,
    regions: &PolarityRegions,
    freqs: &[f64],
    psd_db: &[f64],
    band_means: &BandMeans,
    p: &ClassifyParams,
) -> (bool, f64) {
    let overlap = topo::occipital_overlap(map, p.topo_threshold, p.occipital_template_radius);
    let bipolar = regions
        .secondary
        .as_ref()
        .map(|s| s.area_frac >= p.secondary_min_area)
        .unwrap_or(false);
    let needed = if bipolar {
        p.occipital_overlap_bipolar
    } else {
        p.occipital_overlap_unipolar
    };
    if overlap <= needed {
        return (false, overlap);
    }
    let peak = spectrum_argmax_hz(freqs, psd_db);
    let peak_in_alpha = (7.0..=13.0).contains(&peak);
    let alpha_dominant = band_means.alpha_7_13 > band_means.delta_1_4
        && band_means.alpha_7_13 > band_means.theta_4_8
        && band_means.alpha_7_13 > band_means.beta_13_30;
    (peak_in_alpha || alpha_dominant, overlap)
}

/// Blink signature: one dominant unipolar region, centroid in the frontal
/// sector, with most of its area anterior.
pub fn blink_test(map: &TopoMap, regions: &PolarityRegions, p: &ClassifyParams) -> bool {
    let Some(primary) = &regions.primary else {
        return false;
    };
    if primary.area_frac < p.secondary_min_area {
        return false;
    }
    // unipolar with no other significant region
    let others_significant = regions
        .regions
        .iter()
        .filter(|r| r.area_frac >= p.secondary_min_area)
        .count();
    if others_significant != 1 {
        return false;
    }
    if primary.centroid[1] <= p.frontal_sector_y {
        return false;
    }
    // anterior share of the suprathreshold cells of the primary sign
    let mut total = 0usize;
    let mut anterior = 0usize;
    for i in 0..topo::GRID_N {
        for j in 0..topo::GRID_N {
            if let Some(v) = map.value(i, j) {
                let on = match primary.sign {
                    1 => v > p.topo_threshold,
                    _ => v < -p.topo_threshold,
                };
                if on {
                    total += 1;
                    if TopoMap::cell_center(i, j)[1] > p.frontal_sector_y {
                        anterior += 1;
                    }
                }
            }
        }
    }
    total > 0 && anterior as f64 / total as f64 >= p.blink_anterior_fraction
}

/// Saccade signature: exactly two dominant opposite-sign frontal regions,
/// laterally separated.
pub fn saccade_test(regions: &PolarityRegions, p: &ClassifyParams) -> bool {
    let (Some(primary), Some(secondary)) = (&regions.primary, &regions.secondary) else {
        return false;
    };
    let significant = regions
        .regions
        .iter()
        .filter(|r| r.area_frac >= p.secondary_min_area)
        .count();
    if significant != 2 {
        return false;
    }
    if primary.area_frac < p.secondary_min_area || secondary.area_frac < p.secondary_min_area {
        return false;
    }
    if primary.centroid[1] <= p.frontal_sector_y || secondary.centroid[1] <= p.frontal_sector_y {
        return false;
    }
    (primary.centroid[0] - secondary.centroid[0]).abs() >= p.saccade_min_separation
}

/// Single-channel signature, evaluated on the session rebuilt from this
/// component alone. The per-channel total PSD power of a rank-one
/// reconstruction reduces exactly to `A[j,i]^2 * mean(s_i^2)`, which is what
/// gets sorted here.
pub fn single_channel_test(
    a_col: ArrayView1<f64>,
    s_row: ArrayView1<f64>,
    band_means: &BandMeans,
    p: &ClassifyParams,
) -> SingleChannelDiag {
    let ms: f64 = s_row.iter().map(|v| v * v).sum::<f64>() / s_row.len().max(1) as f64;
    let mut powers: Vec<f64> = a_col.iter().map(|a| a * a * ms).collect();
    powers.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let (max1, max2, max3) = if powers.len() >= 3 {
        (powers[0], powers[1], powers[2])
    } else {
        (0.0, 0.0, 0.0)
    };
    let ratios_pass = powers.len() >= 3
        && max1 > p.single_channel_ratio_2 * max2
        && max1 > p.single_channel_ratio_3 * max3;
    let kurt = stats::kurtosis(&s_row.to_vec());
    let alpha_lowest = band_means.alpha_8_12 < band_means.delta_1_4
        && band_means.alpha_8_12 < band_means.theta_4_8
        && band_means.alpha_8_12 < band_means.beta_13_30;
    let passed = ratios_pass && kurt > p.kurtosis_threshold && alpha_lowest;
    SingleChannelDiag {
        max1,
        max2,
        max3,
        ratios_pass,
        kurtosis: kurt,
        alpha_lowest,
        passed,
    }
}

/// Muscle signature: gamma (30-60 Hz) mean linear power strictly above every
/// canonical band mean.
pub fn muscle_test(band_means: &BandMeans) -> bool {
    band_means.gamma_30_60 > band_means.delta_1_4
        && band_means.gamma_30_60 > band_means.theta_4_8
        && band_means.gamma_30_60 > band_means.alpha_8_12
        && band_means.gamma_30_60 > band_means.beta_13_30
}

fn spectrum_argmax_hz(freqs: &[f64], psd_db: &[f64]) -> f64 {
    freqs
        .iter()
        .zip(psd_db)
        .filter(|(f, _)| **f >= 1.0)
        .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
        .map(|(f, _)| *f)
        .unwrap_or(0.0)
}

fn band_mean_linear(freqs: &[f64], psd_db: &[f64], lo: f64, hi: f64) -> f64 {
    let vals: Vec<f64> = freqs
        .iter()
        .zip(psd_db)
        .filter(|(f, _)| **f >= lo && **f < hi)
        .map(|(_, p)| 10f64.powf(*p / 10.0))
        .collect();
    stats::mean(&vals)
}

fn classify_one(
    ic: usize,
    x: &Array2<f64>,
    decomp: &IcaDecomposition,
    sources: &Array2<f64>,
    p: &ClassifyParams,
) -> Result<IcVerdict> {
    let a_col = decomp.mixing.column(ic);
    let s_row = sources.row(ic);
    let col_norm = a_col.iter().map(|v| v * v).sum::<f64>().sqrt();

    // scale-fixed diagnostic activation
    let s_diag: Vec<f64> = s_row.iter().map(|v| v * col_norm).collect();
    let win = (p.psd_win_s * decomp.fs).round() as usize;
    let (freqs, psd_db) = preclean::welch_psd_db(&s_diag, decomp.fs, win, p.psd_overlap)?;

    let band_means = BandMeans {
        delta_1_4: band_mean_linear(&freqs, &psd_db, 1.0, 4.0),
        theta_4_8: band_mean_linear(&freqs, &psd_db, 4.0, 8.0),
        alpha_8_12: band_mean_linear(&freqs, &psd_db, 8.0, 12.0),
        alpha_7_13: band_mean_linear(&freqs, &psd_db, 7.0, 13.0),
        beta_13_30: band_mean_linear(&freqs, &psd_db, 13.0, 30.0),
        gamma_30_60: band_mean_linear(&freqs, &psd_db, 30.0, 60.0),
    };
    let kurt = stats::kurtosis(&s_diag);
    let psd_peak_hz = spectrum_argmax_hz(&freqs, &psd_db);

    let map = topo::interp_topomap(&a_col.to_vec(), &decomp.channels)?;
    let regions = topo::extract_polarity_regions(&map, p.topo_threshold, p.boundary_band_width);

    let (spectral_pass, spectral) = bcg_spectral_test(&freqs, &psd_db, p)?;
    let topo_pass = bcg_topo_test(&regions, p);
    let (contrib_pass, contribution) = bcg_contribution_test(x, a_col, s_row, p)?;
    let (guard, overlap) = alpha_guard(&map, &regions, &freqs, &psd_db, &band_means, p);
    let bipolar = regions
        .secondary
        .as_ref()
        .map(|s| s.area_frac >= p.secondary_min_area)
        .unwrap_or(false);
    let single = single_channel_test(a_col, s_row, &band_means, p);

    let mut trace = Vec::new();
    let label = if guard {
        trace.push("alpha_guard".into());
        IcLabel::Neural
    } else if blink_test(&map, &regions, p) {
        trace.push("blink".into());
        IcLabel::Blink
    } else if saccade_test(&regions, p) {
        trace.push("saccade".into());
        IcLabel::Saccade
    } else if single.passed {
        trace.push("single_channel".into());
        IcLabel::SingleChannel
    } else if muscle_test(&band_means) {
        trace.push("muscle".into());
        IcLabel::Muscle
    } else if spectral_pass && topo_pass && contrib_pass {
        trace.push("bcg_spectral".into());
        trace.push("bcg_topo".into());
        trace.push("bcg_contribution".into());
        IcLabel::Bcg
    } else {
        IcLabel::Neural
    };

    Ok(IcVerdict {
        index: ic,
        label,
        trace,
        alpha_guard: guard,
        kurtosis: kurt,
        psd_peak_hz,
        band_means,
        spectral,
        topo: TopoDiag {
            regions,
            occipital_overlap: overlap,
            bipolar,
            passed: topo_pass,
        },
        contribution,
        single_channel: single,
    })
}

/// Labels every component. Precedence: the alpha guard wins outright, then
/// blink, saccade, single-channel, muscle; BCG runs last because it needs
/// its three tests to agree. `x` and `sources` must be the matched pair the
/// decomposition was fit on (the excised session).
pub fn classify_ics(
    x: &Recording,
    decomp: &IcaDecomposition,
    sources: &Array2<f64>,
    params: &ClassifyParams,
) -> Result<Vec<IcVerdict>> {
    let n = decomp.n_components();
    if x.n_channels() != n || sources.nrows() != n || sources.ncols() != x.n_samples() {
        return Err(Error::Argument(
            "recording/decomposition/source shapes disagree".into(),
        ));
    }
    (0..n)
        .into_par_iter()
        .map(|ic| classify_one(ic, &x.data, decomp, sources, params))
        .collect()
}
