use appear::model::{ChannelInfo, Recording, RecordingKind};
use appear::{cardiac, synth};
use ndarray::Array2;

fn single(x: Vec<f64>, fs: f64, kind: RecordingKind) -> Recording {
    let n = x.len();
    Recording::new(
        Array2::from_shape_vec((1, n), x).unwrap(),
        fs,
        vec![ChannelInfo {
            label: "ECG".into(),
            position: None,
            is_ecg: true,
        }],
        vec![],
        kind,
    )
    .unwrap()
}

fn main() {
    let fs = 250.0;
    let (mut ecg, truth) = synth::synthetic_ecg(65.0, 2.0, 120.0, fs, 7);
    for (i, v) in ecg.iter_mut().enumerate() {
        *v += 400.0 * (2.0 * std::f64::consts::PI * 19.5 * i as f64 / fs).sin();
    }
    let rec = single(ecg, fs, RecordingKind::Ecg);
    let ev = cardiac::detect_r_peaks_ecg(&rec).unwrap();
    println!("truth beats {} detected {}", truth.len(), ev.peaks.len());
    let tol = (0.05 * fs) as isize;
    let mut missed = vec![];
    for &t in &truth {
        if !ev
            .peaks
            .iter()
            .any(|&p| (p as isize - t as isize).abs() <= tol)
        {
            missed.push(t);
        }
    }
    println!("missed {:?}", &missed[..missed.len().min(12)]);
    if missed.len() >= 2 {
        let diffs: Vec<isize> = missed.windows(2).map(|w| w[1] as isize - w[0] as isize).collect();
        println!("missed spacing {:?}", &diffs[..diffs.len().min(10)]);
    }
    // nearest detected peak for first few missed
    for &m in missed.iter().take(5) {
        let nearest = ev
            .peaks
            .iter()
            .min_by_key(|&&p| (p as isize - m as isize).abs())
            .unwrap();
        println!("missed {m}: nearest detection {nearest} (delta {})", *nearest as isize - m as isize);
    }

    // pulse case
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
    let fs = 40.0;
    let n = (60.0 * fs) as usize;
    let mut x = vec![0.0; n];
    let rr = 60.0 / 66.0;
    let mut t = 0.2;
    let mut pulse_starts = vec![];
    while t + 0.5 < 60.0 {
        let start = (t * fs) as usize;
        pulse_starts.push(start);
        let len = (0.45 * fs) as usize;
        for k in 0..len {
            let u = k as f64 / len as f64;
            x[start + k] += (std::f64::consts::PI * u).sin().powi(2) * (-u / 0.8).exp();
        }
        t += rr;
    }
    let sig_pow = x.iter().map(|v| v * v).sum::<f64>() / n as f64;
    let sigma = (sig_pow / 10.0).sqrt();
    for v in x.iter_mut() {
        *v += sigma * appear::stats::randn(&mut rng);
    }
    let rec = single(x, fs, RecordingKind::Oximetry);
    let ev = cardiac::detect_pulse_peaks(&rec).unwrap();
    println!(
        "pulses {} detected {} hr {}",
        pulse_starts.len(),
        ev.peaks.len(),
        ev.mean_hr_bpm
    );
}
