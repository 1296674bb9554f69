use appear::ica::{infomax_decompose, InfomaxParams};
use appear::model::{ChannelInfo, IndexMap, Recording, RecordingKind};
use appear::stats;
use ndarray::Array2;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

fn dimension_scan() {
    let fs = 250.0;
    let k = 30_000;
    for n in [2usize, 4, 8, 16, 31] {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let course = bcg_course(k, fs, &mut rng);
        let crms = (course.iter().map(|v| v * v).sum::<f64>() / k as f64).sqrt();
        println!("kurt(course) = {:.2}", stats::kurtosis(&course));
        let mut s = Array2::<f64>::zeros((n, k));
        for (t, v) in course.iter().enumerate() {
            s[[0, t]] = v / crms * 3.0;
        }
        for i in 1..n {
            for t in 0..k {
                s[[i, t]] = stats::randn(&mut rng);
            }
        }
        let mut a = Array2::<f64>::zeros((n, n));
        for v in a.iter_mut() {
            *v = rng.gen_range(-1.0..1.0);
        }
        for i in 0..n {
            a[[i, i]] += 1.5;
        }
        let x = a.dot(&s);
        let channels = (0..n)
            .map(|c| ChannelInfo {
                label: format!("c{c}"),
                position: None,
                is_ecg: false,
            })
            .collect();
        let rec = Recording::new(x, fs, channels, vec![], RecordingKind::Eeg).unwrap();
        let d = infomax_decompose(
            &rec,
            IndexMap::identity(k),
            9,
            &InfomaxParams::default(),
        )
        .unwrap();
        let mut best = 0.0f64;
        for c in 0..n {
            let act: Vec<f64> = d.sources_short.row(c).to_vec();
            best = best.max(stats::pearson(&act, &course).abs());
        }
        println!(
            "n = {n}: bcg corr {best:.3} converged {} iters {}",
            d.converged, d.iterations
        );
    }
}

fn bcg_course(k: usize, fs: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let mut s = vec![0.0; k];
    let mut t = 0.3;
    while t + 0.8 < k as f64 / fs {
        let start = (t * fs) as usize;
        let amp = rng.gen_range(0.9..1.1);
        for j in 0..(0.7 * fs) as usize {
            let tt = j as f64 / fs;
            s[start + j] += amp
                * (2.0 * std::f64::consts::PI * 4.0 * tt).sin()
                * (-tt / 0.22).exp();
        }
        t += 0.94 * (1.0 + 0.03 * stats::randn(rng));
    }
    s
}

fn main() {
    dimension_scan();
    let fs = 250.0;
    let k = 30_000;
    let n = 31;
    let case = |lr: f64, sweeps: usize| InfomaxParams {
        lrate: lr,
        max_sweeps: sweeps,
        ..InfomaxParams::default()
    };
    for (name, filler, params) in [
        ("gauss lr 2e-3 x512", 0usize, case(0.002, 512)),
        ("gauss lr 4e-3 x512", 0, case(0.004, 512)),
        ("gauss lr 8e-3 x512", 0, case(0.008, 512)),
        ("gauss lr 4e-3 x1024", 0, case(0.004, 1024)),
        ("gauss lr 0.02 x512", 0, case(0.02, 512)),
    ] {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut s = Array2::<f64>::zeros((n, k));
        let course = bcg_course(k, fs, &mut rng);
        let crms = (course.iter().map(|v| v * v).sum::<f64>() / k as f64).sqrt();
        for (t, v) in course.iter().enumerate() {
            s[[0, t]] = v / crms * 3.0; // BCG 3x the unit background
        }
        for i in 1..n {
            for t in 0..k {
                let g = stats::randn(&mut rng);
                s[[i, t]] = if filler == 0 { g } else { rng.gen_range(-1.7..1.7) };
            }
        }
        let mut a = Array2::<f64>::zeros((n, n));
        for v in a.iter_mut() {
            *v = rng.gen_range(-1.0..1.0);
        }
        let x = a.dot(&s);
        let channels = (0..n)
            .map(|c| ChannelInfo {
                label: format!("c{c}"),
                position: None,
                is_ecg: false,
            })
            .collect();
        let rec = Recording::new(x, fs, channels, vec![], RecordingKind::Eeg).unwrap();
        let d = infomax_decompose(&rec, IndexMap::identity(k), 9, &params).unwrap();
        let mut best = 0.0f64;
        let mut best_kurt = 0.0f64;
        for c in 0..n {
            let act: Vec<f64> = d.sources_short.row(c).to_vec();
            let r = stats::pearson(&act, &course).abs();
            if r > best {
                best = r;
                best_kurt = stats::kurtosis(&act);
            }
        }
        let max_kurt = (0..n)
            .map(|c| stats::kurtosis(&d.sources_short.row(c).to_vec()))
            .fold(0.0f64, f64::max);
        println!(
            "{name}: bcg corr {best:.3} (kurt {best_kurt:.1}; max IC kurt {max_kurt:.1}) amari {:.3} converged {} iters {}",
            appear::ica::amari_index(&d.unmixing, &a),
            d.converged,
            d.iterations
        );
    }
}
