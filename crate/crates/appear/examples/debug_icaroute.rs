use appear::classify::{bcg_spectral_test, ClassifyParams};
use appear::ica::{infomax_decompose, InfomaxParams};
use appear::io::config::PipelineConfig;
use appear::model::{IndexMap, RecordingKind};
use appear::preclean;
use appear::stats;
use appear::synth::{self, Constituent, SynthSpec};

fn main() {
    let spec = SynthSpec {
        duration_s: 150.0,
        retain: Some(vec![Constituent::Neural, Constituent::Bcg]),
        seed: 42,
        ..SynthSpec::default()
    };
    let session = synth::generate(&spec).unwrap();
    let cfg = PipelineConfig::default();

    // replicate the pipeline front end
    let slices = session.raw.markers_labeled("R128");
    let vols = preclean::derive_volume_triggers(&slices, 39).unwrap();
    let g = preclean::gradient_subtract(
        &session.raw,
        &vols,
        cfg.gradient_method,
        cfg.aas_window_volumes,
        cfg.obs_n_pc,
    )
    .unwrap();
    let d = preclean::decimate(&g, 20).unwrap();
    let scalp: Vec<usize> = (0..31).collect();
    let eeg = d.select_channels(&scalp, RecordingKind::Eeg).unwrap();
    let bp = preclean::fir_bandpass(&eeg, 1.0, 70.0).unwrap();
    let centers = preclean::reject_centers(19.5, 26.0, 60.0, 250.0, 1.0, 120.0);
    let filtered = preclean::band_reject(&bp, &centers, 1.0).unwrap();

    let train = (120.0 * 250.0) as usize;
    let window = appear::model::Recording::new(
        filtered.data.slice(ndarray::s![.., ..train]).to_owned(),
        250.0,
        filtered.channels.clone(),
        vec![],
        RecordingKind::Eeg,
    )
    .unwrap();
    let decomp = infomax_decomposition(&window);

    let params = ClassifyParams::default();
    let mut best: Option<(usize, f64)> = None;
    for ic in 0..decomp.n_components() {
        let norm = decomp.column_norm(ic);
        let s: Vec<f64> = decomp.sources_short.row(ic).iter().map(|v| v * norm).collect();
        let (fr, psd) = preclean::welch_psd_db(&s, 250.0, 1024, 0.5).unwrap();
        let (pass, diag) = bcg_spectral_test(&fr, &psd, &params).unwrap();
        let rms = (s.iter().map(|v| v * v).sum::<f64>() / s.len() as f64).sqrt();
        if pass {
            println!(
                "candidate ic {ic}: back-rms {rms:.2} s_ave {:.1} r_n {:.1} peaks {:?}",
                diag.s_ave_db,
                diag.r_n_db,
                diag.cb_peaks.iter().map(|p| p.freq_hz).collect::<Vec<_>>()
            );
            if best.as_ref().map(|b| rms > b.1).unwrap_or(true) {
                best = Some((ic, rms));
            }
        }
    }
    let (_ic_rms, _) = best.expect("some candidate");
    let all: Vec<usize> = (0..decomp.n_components()).collect();
    let ic = appear::cardiac::strongest_candidate(&decomp, &all).unwrap();
    println!("strongest candidate by 2-7 Hz power: ic {ic}");

    // which IC is truly most beat-locked? correlate envelopes with the comb
    let beats_all = session.r_peaks_at(250.0);
    let mut comb = vec![0.0; train];
    for &b in &beats_all {
        let center = b + (0.21 * 250.0) as usize + 40;
        for t in center.saturating_sub(45)..(center + 45).min(train) {
            comb[t] = 1.0;
        }
    }
    let mut best_lock = (0usize, -1.0f64);
    for c in 0..decomp.n_components() {
        let env: Vec<f64> = decomp.sources_short.row(c).iter().map(|v| v.abs()).collect();
        let r = stats::pearson(&env, &comb);
        if r > best_lock.1 {
            best_lock = (c, r);
        }
    }
    println!(
        "most beat-locked ic {} (envelope corr {:.3}); candidate-vs-locked same: {}",
        best_lock.0,
        best_lock.1,
        best_lock.0 == ic
    );
    // correlate every IC activation with the true BCG time course (T8 row of
    // the truth constituent, put through the same front end)
    let bcg_truth = session.truth[&Constituent::Bcg]
        .select_channels(&scalp, RecordingKind::Eeg)
        .unwrap();
    let bcg_dec = preclean::decimate(&bcg_truth, 20).unwrap();
    let t8 = bcg_dec
        .channels
        .iter()
        .position(|c| c.label == "T8")
        .unwrap();
    let bcg_course: Vec<f64> = bcg_dec.data.row(t8).iter().take(train).cloned().collect();
    let mut best_bcg = (0usize, 0.0f64);
    for c in 0..decomp.n_components() {
        let a: Vec<f64> = decomp.sources_short.row(c).to_vec();
        let r = stats::pearson(&a, &bcg_course).abs();
        if r > best_bcg.1 {
            best_bcg = (c, r);
        }
    }
    println!(
        "best IC vs true BCG course: ic {} corr {:.3} (candidate ic {})",
        best_bcg.0, best_bcg.1, ic
    );

    let s_raw: Vec<f64> = decomp.sources_short.row(ic).iter().cloned().collect();
    let kernel = appear::dsp::bandpass_kernel(250.0, 2.0, 7.0, 2.0, appear::dsp::FirWindow::Hamming);
    let s = appear::dsp::convolve_same_reflect(&s_raw, &kernel);
    println!("-- after 2-7 Hz bandpass of candidate activation --");
    let beats = session.r_peaks_at(250.0);
    // CV per scale, replicating multiscale internals
    for scale in [0.05, 0.1, 0.2, 0.4] {
        let w = (scale * 250.0) as usize;
        let env: Vec<f64> = s.iter().map(|v| v.abs()).collect();
        let mut smooth = vec![0.0; env.len()];
        let mut acc = 0.0;
        for i in 0..env.len() {
            acc += env[i];
            if i >= w {
                acc -= env[i - w];
            }
            smooth[i] = acc / w as f64;
        }
        let level = stats::mean(&smooth) + stats::std_pop(&smooth);
        let mut peaks = vec![];
        let mut seg: Option<usize> = None;
        for i in 0..smooth.len() {
            if smooth[i] > level {
                if seg.is_none() {
                    seg = Some(i);
                }
            } else if let Some(st) = seg.take() {
                let p = (st..i).max_by(|&a, &b| smooth[a].partial_cmp(&smooth[b]).unwrap()).unwrap();
                peaks.push(p);
            }
        }
        let rrs: Vec<f64> = peaks.windows(2).map(|x| (x[1] - x[0]) as f64).collect();
        let cv = stats::std_pop(&rrs) / stats::mean(&rrs).max(1e-12);
        println!(
            "scale {scale}: {} peaks (true beats in window: {}), cv {cv:.3}",
            peaks.len(),
            beats.iter().filter(|&&b| b < train).count()
        );
    }
}

fn infomax_decomposition(window: &appear::model::Recording) -> appear::ica::IcaDecomposition {
    infomax_decompose(
        window,
        IndexMap::identity(window.n_samples()),
        2,
        &InfomaxParams::default(),
    )
    .unwrap()
}
