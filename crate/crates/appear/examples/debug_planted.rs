use appear::classify::{classify_ics, ClassifyParams, IcLabel};
use appear::synth::planted_benchmark;
use std::collections::BTreeMap;

fn main() {
    let params = ClassifyParams::default();
    let mut correct = 0usize;
    let mut total = 0usize;
    let mut confusion: BTreeMap<(String, String), usize> = BTreeMap::new();
    let mut alpha_to_bcg = 0usize;
    let n_seeds = 30u64;
    for seed in 0..n_seeds {
        let b = planted_benchmark(seed).unwrap();
        let verdicts = classify_ics(&b.x, &b.decomp, &b.sources, &params).unwrap();
        for (v, truth) in verdicts.iter().zip(&b.labels) {
            total += 1;
            if v.label == *truth {
                correct += 1;
            } else {
                *confusion
                    .entry((format!("{truth:?}"), format!("{:?}", v.label)))
                    .or_default() += 1;
            }
        }
        for &ic in &b.alpha_ics {
            if verdicts[ic].label == IcLabel::Bcg {
                alpha_to_bcg += 1;
            }
        }
    }
    println!(
        "accuracy {:.4} ({} / {})",
        correct as f64 / total as f64,
        correct,
        total
    );
    println!("alpha ICs labeled BCG: {alpha_to_bcg}");
    for ((truth, got), count) in confusion {
        println!("  {truth} -> {got}: {count}");
    }
}
