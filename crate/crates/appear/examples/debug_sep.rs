use appear::ica::{infomax_decompose, InfomaxParams};
use appear::io::config::PipelineConfig;
use appear::model::{IndexMap, RecordingKind};
use appear::preclean;
use appear::stats;
use appear::synth::{self, Constituent, SynthSpec};

fn main() {
    let spec = SynthSpec {
        duration_s: 150.0,
        retain: Some(vec![Constituent::Bcg]),
        seed: 42,
        ..SynthSpec::default()
    };
    let session = synth::generate(&spec).unwrap();
    let cfg = PipelineConfig::default();
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

    // put the truth course through the same linear tail of the front end
    let bcg_truth = session.truth[&Constituent::Bcg]
        .select_channels(&scalp, RecordingKind::Eeg)
        .unwrap();
    let bcg_dec = preclean::decimate(&bcg_truth, 20).unwrap();
    let bcg_bp = preclean::fir_bandpass(&bcg_dec, 1.0, 70.0).unwrap();
    let bcg_f = preclean::band_reject(&bcg_bp, &centers, 1.0).unwrap();
    let t8 = bcg_f.channels.iter().position(|c| c.label == "T8").unwrap();
    let course: Vec<f64> = bcg_f.data.row(t8).iter().take(train).cloned().collect();

    for lr in [0.04] {
        for sweeps in [512usize] {
            let params = InfomaxParams {
                lrate: lr,
                max_sweeps: sweeps,
                ..InfomaxParams::default()
            };
            let t0 = std::time::Instant::now();
            let decomp =
                infomax_decompose(&window, IndexMap::identity(train), 2, &params).unwrap();
            let mut best = 0.0f64;
            for c in 0..decomp.n_components() {
                let a: Vec<f64> = decomp.sources_short.row(c).to_vec();
                let r = stats::pearson(&a, &course).abs();
                best = best.max(r);
            }
            println!(
                "lr {lr} sweeps {sweeps}: bcg corr {best:.3} converged {} iters {} ({:.0} s)",
                decomp.converged,
                decomp.iterations,
                t0.elapsed().as_secs_f64()
            );
        }
    }
}
