//! Extended-Infomax independent component analysis: PCA whitening, natural-
//! gradient updates with kurtosis-sign switching in shuffled blocks,
//! full-session source projection, and artifact-free reconstruction by
//! column-zeroing the mixing matrix.

use ndarray::{Array1, Array2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg;
use crate::model::{ChannelInfo, IndexMap, Recording};

#[derive(Debug, Clone, Copy)]
pub struct InfomaxParams {
    pub max_sweeps: usize,
    /// Stop when the Frobenius norm of the per-sweep weight change drops
    /// below this.
    pub tol: f64,
    pub block: usize,
    pub lrate: f64,
    /// Learning-rate multiplier applied when successive weight-change
    /// directions differ by more than 60 degrees.
    pub anneal: f64,
    /// Requires K > this many samples per channel.
    pub min_samples_per_channel: usize,
}

impl Default for InfomaxParams {
    fn default() -> Self {
        InfomaxParams {
            max_sweeps: 512,
            tol: 1e-6,
            block: 128,
            lrate: 0.02,
            anneal: 0.9,
            min_samples_per_channel: 20,
        }
    }
}

/// Result of the decomposition on bad-interval-excised data.
///
/// `mixing * unmixing = I` within 1e-6; `sources_short` are the activations
/// of the excised session; `channel_means` were removed before whitening and
/// are never restored (inputs arrive high-passed).
#[derive(Debug, Clone)]
pub struct IcaDecomposition {
    pub mixing: Array2<f64>,
    pub unmixing: Array2<f64>,
    pub sources_short: Array2<f64>,
    pub channel_means: Array1<f64>,
    pub index_map: IndexMap,
    pub channels: Vec<ChannelInfo>,
    pub fs: f64,
    pub seed: u64,
    pub iterations: usize,
    pub converged: bool,
}

impl IcaDecomposition {
    pub fn n_components(&self) -> usize {
        self.mixing.nrows()
    }

    /// Euclidean norm of one mixing column; the back-projected scale of an IC.
    pub fn column_norm(&self, ic: usize) -> f64 {
        self.mixing
            .column(ic)
            .iter()
            .map(|v| v * v)
            .sum::<f64>()
            .sqrt()
    }
}

/// Full-session activations (components x samples).
#[derive(Debug, Clone)]
pub struct SourceMatrix {
    pub activations: Array2<f64>,
}

pub fn infomax_decompose(
    rec: &Recording,
    index_map: IndexMap,
    seed: u64,
    params: &InfomaxParams,
) -> Result<IcaDecomposition> {
    let n = rec.n_channels();
    let k = rec.n_samples();
    if n == 0 || k == 0 {
        return Err(Error::EmptyData("cannot decompose an empty recording".into()));
    }
    if k <= params.min_samples_per_channel * n {
        return Err(Error::InsufficientData(format!(
            "{k} samples for {n} channels; need more than {} per channel",
            params.min_samples_per_channel
        )));
    }

    let means = rec
        .data
        .mean_axis(Axis(1))
        .expect("non-empty rows");
    let mut x = rec.data.clone();
    for (mut row, &m) in x.outer_iter_mut().zip(means.iter()) {
        row.mapv_inplace(|v| v - m);
    }

    // PCA whitening (symmetric sphering keeps channels interpretable)
    let cov = x.dot(&x.t()) / k as f64;
    let (evals, evecs) = linalg::jacobi_eigh(&cov);
    let max_eval = evals[0].max(1e-300);
    if evals[n - 1] <= 1e-12 * max_eval {
        return Err(Error::SingularMatrix(format!(
            "rank-deficient data: smallest covariance eigenvalue {:.3e}",
            evals[n - 1]
        )));
    }
    let mut dinv = Array2::<f64>::zeros((n, n));
    for i in 0..n {
        dinv[[i, i]] = 1.0 / evals[i].sqrt();
    }
    let sphering = evecs.dot(&dinv).dot(&evecs.t());
    let xw = sphering.dot(&x);

    let mut w = Array2::<f64>::eye(n);
    let eye = Array2::<f64>::eye(n);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut lr = params.lrate;
    let mut signs = vec![1.0f64; n];
    let mut converged = false;
    let mut iterations = 0usize;

    // The annealing angle is measured between aggregated weight changes
    // (ANGLE_SPAN sweeps apart): single-sweep changes under block updates
    // are stochastic and would read as spurious > 60-degree turns.
    const ANGLE_SPAN: usize = 16;
    let mut w_marks: Vec<Array2<f64>> = vec![w.clone()];
    let mut prev_span_delta: Option<Array2<f64>> = None;

    for _sweep in 0..params.max_sweeps {
        iterations += 1;
        let mut perm: Vec<usize> = (0..k).collect();
        perm.shuffle(&mut rng);
        let w_before = w.clone();
        let mut m2 = vec![0.0f64; n];
        let mut m4 = vec![0.0f64; n];
        let mut blew_up = false;

        for chunk in perm.chunks(params.block) {
            let b = chunk.len();
            let mut xb = Array2::<f64>::zeros((n, b));
            for (j, &idx) in chunk.iter().enumerate() {
                xb.column_mut(j).assign(&xw.column(idx));
            }
            let u = w.dot(&xb);
            let y = u.mapv(f64::tanh);
            for i in 0..n {
                for j in 0..b {
                    let v = u[[i, j]];
                    let v2 = v * v;
                    m2[i] += v2;
                    m4[i] += v2 * v2;
                }
            }
            let yut = y.dot(&u.t()) / b as f64;
            let uut = u.dot(&u.t()) / b as f64;
            let mut g = eye.clone();
            for i in 0..n {
                for j in 0..n {
                    g[[i, j]] -= signs[i] * yut[[i, j]] + uut[[i, j]];
                }
            }
            let dw = g.dot(&w) * lr;
            w += &dw;
            let max_abs = w.iter().map(|v| v.abs()).fold(0.0, f64::max);
            if !max_abs.is_finite() || max_abs > 1e9 {
                blew_up = true;
                break;
            }
        }

        if blew_up {
            w = Array2::eye(n);
            lr *= 0.5;
            w_marks = vec![w.clone()];
            prev_span_delta = None;
            continue;
        }

        // kurtosis-sign switching for the next sweep; sources hovering near
        // Gaussian keep their previous sign so the fixed point stays put
        for i in 0..n {
            let ex2 = m2[i] / k as f64;
            let ex4 = m4[i] / k as f64;
            let kurt = if ex2 > 0.0 { ex4 / (ex2 * ex2) - 3.0 } else { 0.0 };
            if kurt > 0.05 {
                signs[i] = 1.0;
            } else if kurt < -0.05 {
                signs[i] = -1.0;
            }
        }

        let dnorm = (&w - &w_before).iter().map(|v| v * v).sum::<f64>().sqrt();

        w_marks.push(w.clone());
        let mut angle = -1.0f64;
        if w_marks.len() > ANGLE_SPAN {
            let span_delta = &w - &w_marks[w_marks.len() - 1 - ANGLE_SPAN];
            if let Some(prev) = &prev_span_delta {
                let dn = span_delta.iter().map(|v| v * v).sum::<f64>().sqrt();
                let pn = prev.iter().map(|v| v * v).sum::<f64>().sqrt();
                if dn > 0.0 && pn > 0.0 {
                    let dot: f64 = span_delta.iter().zip(prev.iter()).map(|(a, b)| a * b).sum();
                    let cos = (dot / (dn * pn)).clamp(-1.0, 1.0);
                    angle = cos.acos().to_degrees();
                    if angle > 60.0 {
                        lr *= params.anneal;
                    }
                }
            }
            prev_span_delta = Some(span_delta);
            w_marks.remove(0);
        }

        if std::env::var_os("APPEAR_ICA_TRACE").is_some() && iterations % 16 == 0 {
            eprintln!("sweep {iterations}: delta {dnorm:.3e} lr {lr:.3e} span-angle {angle:.0}");
        }
        if dnorm < params.tol {
            converged = true;
            break;
        }
    }

    let unmixing = w.dot(&sphering);
    let mixing = linalg::invert(&unmixing)?;
    let sources_short = unmixing.dot(&x);

    Ok(IcaDecomposition {
        mixing,
        unmixing,
        sources_short,
        channel_means: means,
        index_map,
        channels: rec.channels.clone(),
        fs: rec.fs,
        seed,
        iterations,
        converged,
    })
}

/// Projects the decomposition onto the whole uncut session:
/// activations = unmixing * (x - channel means of the fit data).
pub fn project_full(decomp: &IcaDecomposition, x_full: &Recording) -> Result<SourceMatrix> {
    let n = decomp.n_components();
    if x_full.n_channels() != n {
        return Err(Error::Argument(format!(
            "recording has {} channels, decomposition has {n}",
            x_full.n_channels()
        )));
    }
    if decomp.mixing.iter().any(|v| !v.is_finite()) {
        return Err(Error::SingularMatrix("non-finite mixing matrix".into()));
    }
    let mut x = x_full.data.clone();
    for (mut row, &m) in x.outer_iter_mut().zip(decomp.channel_means.iter()) {
        row.mapv_inplace(|v| v - m);
    }
    Ok(SourceMatrix {
        activations: decomp.unmixing.dot(&x),
    })
}

/// Zeroes the mixing columns of the removed ICs and re-mixes. Output keeps
/// the shape, rate, channels, and markers of `like`.
pub fn reconstruct_without(
    decomp: &IcaDecomposition,
    sources: &SourceMatrix,
    removed: &[usize],
    like: &Recording,
) -> Result<Recording> {
    let n = decomp.n_components();
    for &ic in removed {
        if ic >= n {
            return Err(Error::Argument(format!("component index {ic} out of range (N = {n})")));
        }
    }
    if sources.activations.nrows() != n {
        return Err(Error::Argument("source row count mismatch".into()));
    }
    let mut pruned = decomp.mixing.clone();
    for &ic in removed {
        pruned.column_mut(ic).fill(0.0);
    }
    let data = pruned.dot(&sources.activations);
    Recording::new(
        data,
        like.fs,
        like.channels.clone(),
        like.markers.clone(),
        like.kind,
    )
}

/// Normalized Amari index in [0, 1] between an estimated unmixing matrix and
/// a true mixing matrix; 0 means perfect separation up to scale/permutation.
pub fn amari_index(unmixing: &Array2<f64>, true_mixing: &Array2<f64>) -> f64 {
    let p = unmixing.dot(true_mixing);
    let n = p.nrows();
    let mut total = 0.0;
    for i in 0..n {
        let row_max = p.row(i).iter().map(|v| v.abs()).fold(0.0, f64::max).max(1e-300);
        let row_sum: f64 = p.row(i).iter().map(|v| v.abs()).sum();
        total += row_sum / row_max - 1.0;
    }
    for j in 0..n {
        let col_max = p.column(j).iter().map(|v| v.abs()).fold(0.0, f64::max).max(1e-300);
        let col_sum: f64 = p.column(j).iter().map(|v| v.abs()).sum();
        total += col_sum / col_max - 1.0;
    }
    total / (2.0 * n as f64 * (n as f64 - 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::RecordingKind;
    use crate::stats;
    use rand::Rng;

    fn rec_from(data: Array2<f64>, fs: f64) -> Recording {
        let channels = (0..data.nrows())
            .map(|c| ChannelInfo {
                label: format!("ch{c}"),
                position: None,
                is_ecg: false,
            })
            .collect();
        Recording::new(data, fs, channels, vec![], RecordingKind::Eeg).unwrap()
    }

    fn two_source_mix(seed: u64, k: usize) -> (Array2<f64>, Array2<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut s = Array2::<f64>::zeros((2, k));
        // super-Gaussian pulse train
        let mut t = 0usize;
        while t < k {
            let gap = rng.gen_range(40..90);
            t += gap;
            if t + 10 >= k {
                break;
            }
            for j in 0..10 {
                s[[0, t + j]] = 8.0 * (-(j as f64) / 3.0).exp();
            }
        }
        // Laplacian noise
        for j in 0..k {
            let u: f64 = rng.gen_range(-0.5..0.5);
            s[[1, j]] = -u.signum() * (1.0 - 2.0 * u.abs()).ln();
        }
        let a = ndarray::array![[1.0, 0.6], [-0.4, 1.2]];
        let x = a.dot(&s);
        (x, s)
    }

    #[test]
    fn two_source_separation() {
        let (x, s_true) = two_source_mix(3, 12_000);
        let rec = rec_from(x, 250.0);
        let d = infomax_decompose(&rec, IndexMap::identity(12_000), 7, &InfomaxParams::default())
            .unwrap();
        // greedy one-to-one matching on |corr|
        let mut corr = [[0.0f64; 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                corr[i][j] = stats::pearson(
                    &d.sources_short.row(i).to_vec(),
                    &s_true.row(j).to_vec(),
                )
                .abs();
            }
        }
        let (best_a, best_b) = if corr[0][0] + corr[1][1] >= corr[0][1] + corr[1][0] {
            (corr[0][0], corr[1][1])
        } else {
            (corr[0][1], corr[1][0])
        };
        assert!(best_a >= 0.95 && best_b >= 0.95, "corr {best_a}, {best_b}");
    }

    #[test]
    fn identity_and_scaled_projection() {
        let k = 500;
        let data = Array2::from_shape_fn((3, k), |(c, t)| ((c + 1) as f64 * t as f64 * 0.01).sin());
        let rec = rec_from(data.clone(), 250.0);
        let mut d = IcaDecomposition {
            mixing: Array2::eye(3),
            unmixing: Array2::eye(3),
            sources_short: data.clone(),
            channel_means: Array1::zeros(3),
            index_map: IndexMap::identity(k),
            channels: rec.channels.clone(),
            fs: 250.0,
            seed: 0,
            iterations: 0,
            converged: true,
        };
        let s = project_full(&d, &rec).unwrap();
        assert!(s
            .activations
            .iter()
            .zip(rec.data.iter())
            .all(|(a, b)| (a - b).abs() < 1e-12));

        // A = 2 I  =>  S = x / 2
        d.mixing = Array2::eye(3) * 2.0;
        d.unmixing = Array2::eye(3) * 0.5;
        let s = project_full(&d, &rec).unwrap();
        assert!(s
            .activations
            .iter()
            .zip(rec.data.iter())
            .all(|(a, b)| (a - b / 2.0).abs() < 1e-12));
    }

    #[test]
    fn single_channel_is_scale_sign_identifiable() {
        let k = 3000;
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let data = Array2::from_shape_fn((1, k), |_| stats::randn(&mut rng) * 3.0);
        let rec = rec_from(data.clone(), 250.0);
        let d = infomax_decompose(&rec, IndexMap::identity(k), 1, &InfomaxParams::default()).unwrap();
        let c = d.mixing[[0, 0]];
        assert!(c.is_finite() && c != 0.0);
        for t in 0..k {
            let rebuilt = c * d.sources_short[[0, t]] + d.channel_means[0];
            assert!((rebuilt - data[[0, t]]).abs() < 1e-8);
        }
    }

    #[test]
    fn determinism_same_seed_bit_identical() {
        let (x, _) = two_source_mix(11, 6000);
        let rec = rec_from(x, 250.0);
        let p = InfomaxParams {
            max_sweeps: 60,
            ..InfomaxParams::default()
        };
        let d1 = infomax_decompose(&rec, IndexMap::identity(6000), 9, &p).unwrap();
        let d2 = infomax_decompose(&rec, IndexMap::identity(6000), 9, &p).unwrap();
        assert_eq!(d1.mixing, d2.mixing);
        assert_eq!(d1.iterations, d2.iterations);
    }

    #[test]
    fn insufficient_data_rejected() {
        let data = Array2::zeros((4, 50));
        let rec = rec_from(data, 250.0);
        assert!(matches!(
            infomax_decompose(&rec, IndexMap::identity(50), 1, &InfomaxParams::default()),
            Err(Error::InsufficientData(_))
        ));
    }

    #[test]
    fn whitened_covariance_is_identity() {
        // check through the public surface: unmixing * cov * unmixing^T of the
        // whitening alone is exercised implicitly; here verify A W = I.
        let (x, _) = two_source_mix(2, 8000);
        let rec = rec_from(x, 250.0);
        let d = infomax_decompose(&rec, IndexMap::identity(8000), 3, &InfomaxParams::default())
            .unwrap();
        let eye = d.mixing.dot(&d.unmixing);
        for i in 0..2 {
            for j in 0..2 {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((eye[[i, j]] - expect).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn reconstruct_round_trip_and_zeroing() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let n = 3;
        let k = 400;
        let mut a = Array2::<f64>::zeros((n, n));
        for v in a.iter_mut() {
            *v = rng.gen_range(-1.0..1.0);
        }
        for i in 0..n {
            a[[i, i]] += 2.0;
        }
        let s_true = Array2::from_shape_fn((n, k), |_| stats::randn(&mut rng));
        let x = a.dot(&s_true);
        let rec = rec_from(x.clone(), 250.0);
        let d = IcaDecomposition {
            unmixing: linalg::invert(&a).unwrap(),
            mixing: a.clone(),
            sources_short: s_true.clone(),
            channel_means: Array1::zeros(n),
            index_map: IndexMap::identity(k),
            channels: rec.channels.clone(),
            fs: 250.0,
            seed: 0,
            iterations: 0,
            converged: true,
        };
        let s = project_full(&d, &rec).unwrap();
        let scale = x.iter().map(|v| v.abs()).fold(0.0, f64::max);

        // removed = {} -> identity
        let full = reconstruct_without(&d, &s, &[], &rec).unwrap();
        for (u, v) in full.data.iter().zip(x.iter()) {
            assert!((u - v).abs() < 1e-8 * scale);
        }

        // removed = all -> zero
        let none = reconstruct_without(&d, &s, &[0, 1, 2], &rec).unwrap();
        assert!(none.data.iter().all(|v| v.abs() < 1e-8 * scale));

        // removing one IC equals the oracle re-mix of the others
        let got = reconstruct_without(&d, &s, &[2], &rec).unwrap();
        let mut s_zero = s_true.clone();
        s_zero.row_mut(2).fill(0.0);
        let oracle = a.dot(&s_zero);
        for (u, v) in got.data.iter().zip(oracle.iter()) {
            assert!((u - v).abs() < 1e-8 * scale);
        }

        // column-zeroing equivalence: A' S == x - A[:,j] s_j
        let mut rank1 = Array2::<f64>::zeros((n, k));
        for i in 0..n {
            for t in 0..k {
                rank1[[i, t]] = a[[i, 2]] * s_true[[2, t]];
            }
        }
        let subtracted = &x - &rank1;
        for (u, v) in got.data.iter().zip(subtracted.iter()) {
            assert!((u - v).abs() < 1e-9 * scale);
        }

        assert!(matches!(
            reconstruct_without(&d, &s, &[9], &rec),
            Err(Error::Argument(_))
        ));
    }

    #[test]
    fn short_restriction_matches_full_projection() {
        let (x, _) = two_source_mix(21, 9000);
        let full_rec = rec_from(x, 250.0);
        let bad = crate::model::IntervalSet::new(vec![(1000, 1500), (4000, 4300)]).unwrap();
        let (short_rec, map) = crate::model::excise_intervals(&full_rec, &bad).unwrap();
        let d = infomax_decompose(&short_rec, map, 13, &InfomaxParams::default()).unwrap();
        let s_full = project_full(&d, &full_rec).unwrap();
        for k in 0..short_rec.n_samples() {
            let m = d.index_map.map_short_to_full(k).unwrap();
            for i in 0..2 {
                assert!(
                    (d.sources_short[[i, k]] - s_full.activations[[i, m]]).abs() < 1e-8,
                    "mismatch at short {k} full {m}"
                );
            }
        }
    }
}
