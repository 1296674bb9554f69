use appear::classify::{classify_ics, ClassifyParams, IcLabel};
use appear::synth::planted_benchmark;

fn main() {
    let params = ClassifyParams::default();
    for seed in 0..5u64 {
        let b = planted_benchmark(seed).unwrap();
        let verdicts = classify_ics(&b.x, &b.decomp, &b.sources, &params).unwrap();
        for (v, truth) in verdicts.iter().zip(&b.labels) {
            if *truth == IcLabel::SingleChannel {
                let d = &v.single_channel;
                println!(
                    "seed {seed}: got {:?} | ratios_pass {} (max1 {:.1} max2 {:.1} max3 {:.1}) kurt {:.2} alpha_lowest {}",
                    v.label, d.ratios_pass, d.max1, d.max2, d.max3, d.kurtosis, d.alpha_lowest
                );
                println!(
                    "   bands: delta {:.2} theta {:.2} alpha {:.2} beta {:.2} gamma {:.2}",
                    v.band_means.delta_1_4,
                    v.band_means.theta_4_8,
                    v.band_means.alpha_8_12,
                    v.band_means.beta_13_30,
                    v.band_means.gamma_30_60
                );
            }
        }
    }
}
