use appear::io::config::PipelineConfig;
use appear::model::{IntervalSet, RecordingKind};
use appear::pipeline::run_preprocess;
use appear::preclean;
use appear::synth::{self, Constituent, SynthSpec};
use std::time::Instant;

fn main() {
    let duration: f64 = std::env::args()
        .nth(1)
        .and_then(|s| s.parse().ok())
        .unwrap_or(480.0);
    let spec = SynthSpec {
        duration_s: duration,
        retain: Some(vec![Constituent::Neural]),
        seed: 42,
        ..SynthSpec::default()
    };
    let t0 = Instant::now();
    let session = synth::generate(&spec).unwrap();
    println!("generate: {:.1} s", t0.elapsed().as_secs_f64());

    let cfg = PipelineConfig::default();
    let t0 = Instant::now();
    let out = run_preprocess(&session.raw, Some(&session.oximetry), &cfg, false).unwrap();
    println!("pipeline total: {:.1} s", t0.elapsed().as_secs_f64());
    for s in &out.report.stage_seconds {
        println!("  {}: {:.1} s", s.name, s.seconds);
    }
    println!(
        "qrs: selected {} ecg {:?} ica {:?} oxi {:?} note {:?}",
        out.report.qrs.selected,
        out.report.qrs.hr_ecg_bpm,
        out.report.qrs.hr_ica_bpm,
        out.report.qrs.hr_oximetry_bpm,
        out.report.qrs.note
    );
    println!(
        "bad fraction {:.4}, ica converged {} in {} sweeps",
        out.report.bad_fraction, out.report.ica_converged, out.report.ica_iterations
    );
    let mut label_counts = std::collections::BTreeMap::new();
    for v in &out.report.ics {
        *label_counts.entry(format!("{:?}", v.label)).or_insert(0usize) += 1;
    }
    println!("labels: {:?}", label_counts);
    println!("removed: {:?}", out.report.removed_ics);

    // recovery scoring at 250 S/s
    let scalp: Vec<usize> = (0..31).collect();
    let factor = (spec.fs_raw / 250.0) as usize;
    let truth = session.truth[&Constituent::Neural]
        .select_channels(&scalp, RecordingKind::Eeg)
        .unwrap();
    let truth250 = preclean::decimate(&truth, factor).unwrap();
    let raw_scalp = session
        .raw
        .select_channels(&scalp, RecordingKind::Eeg)
        .unwrap();
    let raw250 = preclean::decimate(&raw_scalp, factor).unwrap();
    let bad = IntervalSet::new(out.report.bad_intervals.clone()).unwrap();

    let cleaned_score = synth::score_recovery(&out.corrected, &truth250, &bad).unwrap();
    let raw_score = synth::score_recovery(&raw250, &truth250, &bad).unwrap();
    println!(
        "corr cleaned {:.4} raw {:.4} delta {:.4}",
        cleaned_score.mean_corr,
        raw_score.mean_corr,
        cleaned_score.mean_corr - raw_score.mean_corr
    );

    let beats = session.r_peaks_at(250.0);
    let p_raw = synth::beat_locked_band_power(&raw250, &beats, 2.0, 7.0).unwrap();
    let p_clean = synth::beat_locked_band_power(&out.corrected, &beats, 2.0, 7.0).unwrap();
    println!(
        "beat-locked 2-7 Hz power: raw {:.3} clean {:.5} reduction {:.1} dB",
        p_raw,
        p_clean,
        10.0 * (p_raw / p_clean).log10()
    );
}
