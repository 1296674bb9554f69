use appear::ica::{amari_index, infomax_decompose, InfomaxParams};
use appear::model::{ChannelInfo, IndexMap, Recording, RecordingKind};
use appear::stats;
use ndarray::Array2;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

fn four_source_problem(seed: u64, k: usize) -> (Recording, Array2<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut s = Array2::<f64>::zeros((4, k));
    // super-Gaussian pulse train
    let mut t = 0usize;
    while t < k {
        t += rng.gen_range(50..120);
        if t + 8 >= k {
            break;
        }
        let a = rng.gen_range(5.0..9.0);
        for j in 0..8 {
            s[[0, t + j]] = a * (-(j as f64) / 2.5).exp();
        }
    }
    // Laplacian
    for j in 0..k {
        let u: f64 = rng.gen_range(-0.5..0.5);
        s[[1, j]] = -u.signum() * (1.0 - 2.0 * u.abs()).ln();
    }
    // sub-Gaussian sine
    for j in 0..k {
        s[[2, j]] = (2.0 * std::f64::consts::PI * 0.013 * j as f64 + seed as f64).sin() * 1.4;
    }
    // sub-Gaussian uniform
    for j in 0..k {
        s[[3, j]] = rng.gen_range(-1.7..1.7);
    }
    let mut a = Array2::<f64>::zeros((4, 4));
    loop {
        for v in a.iter_mut() {
            *v = rng.gen_range(-1.0..1.0);
        }
        // keep it reasonably conditioned
        let mut ok = true;
        for j in 0..4 {
            let norm: f64 = (0..4).map(|i| a[[i, j]] * a[[i, j]]).sum::<f64>().sqrt();
            if norm < 0.4 {
                ok = false;
            }
        }
        if ok {
            break;
        }
    }
    let x = a.dot(&s);
    let channels = (0..4)
        .map(|c| ChannelInfo {
            label: format!("ch{c}"),
            position: None,
            is_ecg: false,
        })
        .collect();
    (
        Recording::new(x, 250.0, channels, vec![], RecordingKind::Eeg).unwrap(),
        a,
    )
}

fn main() {
    let k = 10_000;
    let mut scores = Vec::new();
    let mut iters = Vec::new();
    for seed in 0..100u64 {
        let (rec, a_true) = four_source_problem(seed, k);
        let d = infomax_decompose(
            &rec,
            IndexMap::identity(k),
            seed.wrapping_mul(7) + 1,
            &InfomaxParams::default(),
        )
        .unwrap();
        scores.push(amari_index(&d.unmixing, &a_true));
        iters.push(d.iterations as f64);
    }
    scores.sort_by(|a, b| a.partial_cmp(b).unwrap());
    println!(
        "amari median {:.4} p90 {:.4} max {:.4}",
        scores[50], scores[90], scores[99]
    );
    println!(
        "iterations median {} max {}",
        stats::median(&iters),
        iters.iter().cloned().fold(0.0, f64::max)
    );
}
