//! Batch CLI: `preprocess` runs the full artifact-reduction pipeline,
//! `synth` writes a ground-truth session, `evaluate` computes PSD/CWT/ERP
//! comparisons. Exit codes: 0 success, 2 unusable input, 3 pipeline failure.

use clap::{Args, Parser, Subcommand};
use serde_json::json;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use appear::error::{Error, Result};
use appear::io::{self, config::Mode, PipelineConfig};
use appear::model::{IntervalSet, Recording, RecordingKind};
use appear::pipeline::{self, exit_code_for, EVAL_BANDS};
use appear::{evaluate, preclean, synth};

#[derive(Parser)]
#[command(
    name = "appear",
    about = "Automated artifact reduction for EEG recorded during fMRI",
    version
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run the full pipeline on one session (or a list of sessions).
    Preprocess(PreprocessArgs),
    /// Generate a synthetic session with ground-truth constituents.
    Synth(SynthArgs),
    /// Compute evaluation metrics on corrected recordings.
    Evaluate(EvaluateArgs),
}

#[derive(Args)]
struct PreprocessArgs {
    /// BrainVision header of the raw session.
    #[arg(long)]
    vhdr: Option<PathBuf>,
    /// Plain-text pulse-oximetry waveform (one sample per line).
    #[arg(long)]
    oximetry: Option<PathBuf>,
    /// rest | task (overrides the config file).
    #[arg(long, value_parser = parse_mode)]
    mode: Option<Mode>,
    /// key=value config file; APPEAR_CONFIG is the fallback.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Decomposition seed (overrides the config file).
    #[arg(long)]
    seed: Option<u64>,
    /// Persist per-stage recordings next to the corrected output.
    #[arg(long)]
    keep_intermediates: bool,
    /// Text file with one session per line: `path.vhdr[,oximetry.txt]`.
    #[arg(long)]
    list: Option<PathBuf>,
    /// Parallel workers for --list runs.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, default_value = "synth_out")]
    out: PathBuf,
    /// key=value generator spec file.
    #[arg(long)]
    spec: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    duration: Option<f64>,
    #[arg(long, value_parser = parse_mode)]
    mode: Option<Mode>,
}

#[derive(Args)]
struct EvaluateArgs {
    /// Corrected BrainVision header.
    #[arg(long)]
    input: PathBuf,
    /// Ground-truth neural BrainVision header (enables recovery metrics).
    #[arg(long)]
    truth: Option<PathBuf>,
    /// Run report from preprocess; its bad intervals gate the comparison.
    #[arg(long)]
    report: Option<PathBuf>,
    /// Second corrected recording for paired band statistics.
    #[arg(long)]
    compare: Option<PathBuf>,
    #[arg(long, default_value = "rest", value_parser = parse_mode)]
    mode: Mode,
    /// Display window `lo,hi` in seconds for the scalogram export.
    #[arg(long)]
    segment: Option<String>,
    /// Write the channel-average scalogram as CSV.
    #[arg(long)]
    scalogram_csv: Option<PathBuf>,
    /// Write the time x channel trial-average matrix as CSV (task mode).
    #[arg(long)]
    erp_csv: Option<PathBuf>,
    /// Output JSON path (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_mode(s: &str) -> std::result::Result<Mode, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.cmd {
        Cmd::Preprocess(args) => cmd_preprocess(args),
        Cmd::Synth(args) => cmd_synth(args),
        Cmd::Evaluate(args) => cmd_evaluate(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code_for(&e) as u8)
        }
    }
}

fn load_config(
    args_config: Option<&Path>,
    mode: Option<Mode>,
    seed: Option<u64>,
) -> Result<PipelineConfig> {
    let mut cfg = match args_config {
        Some(p) => PipelineConfig::from_file(p)?,
        None => match std::env::var_os("APPEAR_CONFIG") {
            Some(p) => PipelineConfig::from_file(Path::new(&p))?,
            None => PipelineConfig::default(),
        },
    };
    if let Some(m) = mode {
        cfg.mode = m;
    }
    if let Some(s) = seed {
        cfg.seed = s;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn session_stem(vhdr: &Path) -> String {
    vhdr.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "session".into())
}

fn preprocess_one(
    vhdr: &Path,
    oximetry: Option<&Path>,
    cfg: &PipelineConfig,
    out_dir: &Path,
    keep: bool,
) -> Result<()> {
    let raw = io::read_brainvision(vhdr)?;
    let oxi = oximetry
        .map(|p| io::read_oximetry(p, cfg.oximetry_fs_hz))
        .transpose()?;
    let output = pipeline::run_preprocess(&raw, oxi.as_ref(), cfg, keep)?;
    std::fs::create_dir_all(out_dir)?;
    let stem = session_stem(vhdr);
    io::write_brainvision(&output.corrected, out_dir, &format!("{stem}_corrected"))?;
    io::write_report(&output.report, &out_dir.join(format!("{stem}_report.json")))?;
    if let Some(inter) = &output.intermediates {
        io::write_brainvision(&inter.gradient_corrected, out_dir, &format!("{stem}_gradient"))?;
        io::write_brainvision(&inter.decimated, out_dir, &format!("{stem}_decimated"))?;
        io::write_brainvision(&inter.filtered, out_dir, &format!("{stem}_filtered"))?;
        io::write_brainvision(&inter.post_bcg, out_dir, &format!("{stem}_postbcg"))?;
    }
    Ok(())
}

fn cmd_preprocess(args: PreprocessArgs) -> Result<()> {
    let cfg = load_config(args.config.as_deref(), args.mode, args.seed)?;

    if let Some(list_path) = &args.list {
        let text = std::fs::read_to_string(list_path)?;
        let sessions: Vec<(PathBuf, Option<PathBuf>)> = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .map(|l| {
                let mut parts = l.splitn(2, ',');
                let vhdr = PathBuf::from(parts.next().unwrap().trim());
                let oxi = parts.next().map(|s| PathBuf::from(s.trim()));
                (vhdr, oxi)
            })
            .collect();
        if sessions.is_empty() {
            return Err(Error::EmptyData("session list is empty".into()));
        }
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(args.jobs.max(1))
            .build()
            .map_err(|e| Error::Argument(format!("cannot build worker pool: {e}")))?;
        let results: Vec<(String, Result<()>)> = pool.install(|| {
            use rayon::prelude::*;
            sessions
                .par_iter()
                .map(|(vhdr, oxi)| {
                    let stem = session_stem(vhdr);
                    let out = args.out.join(&stem);
                    let r =
                        preprocess_one(vhdr, oxi.as_deref(), &cfg, &out, args.keep_intermediates);
                    (stem, r)
                })
                .collect()
        });
        let mut worst: Option<Error> = None;
        for (stem, r) in results {
            match r {
                Ok(()) => eprintln!("{stem}: ok"),
                Err(e) => {
                    eprintln!("{stem}: failed: {e}");
                    let replace = worst
                        .as_ref()
                        .map(|w| exit_code_for(&e) < exit_code_for(w))
                        .unwrap_or(true);
                    if replace {
                        worst = Some(e);
                    }
                }
            }
        }
        return match worst {
            None => Ok(()),
            Some(e) => Err(e),
        };
    }

    let vhdr = args
        .vhdr
        .ok_or_else(|| Error::Argument("either --vhdr or --list is required".into()))?;
    preprocess_one(
        &vhdr,
        args.oximetry.as_deref(),
        &cfg,
        &args.out,
        args.keep_intermediates,
    )
}

fn cmd_synth(args: SynthArgs) -> Result<()> {
    let mut spec = match &args.spec {
        Some(p) => synth::SynthSpec::from_file(p)?,
        None => synth::SynthSpec::default(),
    };
    if let Some(seed) = args.seed {
        spec.seed = seed;
    }
    if let Some(d) = args.duration {
        spec.duration_s = d;
    }
    if let Some(m) = args.mode {
        spec.mode = m;
    }
    let session = synth::generate(&spec)?;
    std::fs::create_dir_all(&args.out)?;
    io::write_brainvision(&session.raw, &args.out, "session")?;
    io::oximetry::write_oximetry(&session.oximetry, &args.out.join("oximetry.txt"))?;
    for (kind, rec) in &session.truth {
        io::write_brainvision(rec, &args.out, &format!("truth_{}", kind.stem()))?;
    }
    let truth_json = json!({
        "seed": spec.seed,
        "hr_bpm": spec.hr_bpm,
        "r_peaks_raw": session.r_peaks,
        "stimulus_samples_raw": session.stim_markers.iter().map(|m| m.sample).collect::<Vec<_>>(),
        "spec": spec,
    });
    std::fs::write(
        args.out.join("truth.json"),
        serde_json::to_string_pretty(&truth_json).expect("serializable"),
    )?;
    Ok(())
}

fn band_table(rec: &Recording, psd_win_s: f64) -> Result<serde_json::Value> {
    let psd = preclean::compute_psd(rec, psd_win_s, 0.5)?;
    let mut bands = serde_json::Map::new();
    for (name, lo, hi) in EVAL_BANDS {
        let per_channel = preclean::band_average(&psd, lo, hi)?;
        bands.insert(
            name.to_string(),
            json!({
                "per_channel_db": per_channel,
                "mean_db": per_channel.iter().sum::<f64>() / per_channel.len() as f64,
            }),
        );
    }
    Ok(serde_json::Value::Object(bands))
}

fn scalp_only(rec: &Recording) -> Result<Recording> {
    let idx: Vec<usize> = rec
        .channels
        .iter()
        .enumerate()
        .filter(|(_, c)| !c.is_ecg)
        .map(|(i, _)| i)
        .collect();
    rec.select_channels(&idx, RecordingKind::Eeg)
}

fn align_to(input_fs: f64, truth: Recording) -> Result<Recording> {
    if (truth.fs - input_fs).abs() < 1e-9 {
        return Ok(truth);
    }
    let factor = truth.fs / input_fs;
    if factor.fract().abs() > 1e-9 || factor < 1.0 {
        return Err(Error::Argument(format!(
            "cannot align truth at {} S/s to {} S/s",
            truth.fs, input_fs
        )));
    }
    preclean::decimate(&truth, factor as usize)
}

fn cmd_evaluate(args: EvaluateArgs) -> Result<()> {
    let input = io::read_brainvision(&args.input)?;
    let input = scalp_only(&input)?;
    let cfg = PipelineConfig::default();
    let mut doc = serde_json::Map::new();
    doc.insert("input".into(), json!(args.input.display().to_string()));
    doc.insert("psd_bands".into(), band_table(&input, cfg.psd_win_s)?);

    if args.mode == Mode::Task {
        let stim = input.markers_labeled(&cfg.stimulus_label);
        if stim.is_empty() {
            return Err(Error::EmptyData(format!(
                "task mode but no '{}' markers present",
                cfg.stimulus_label
            )));
        }
        let set = evaluate::epoch_erp(&input, &stim)?;
        let set = evaluate::baseline_correct(&set);
        let set = evaluate::erp_lowpass(&set, cfg.erp_lowpass_hz)?;
        let set = evaluate::reject_trials(&set, &evaluate::RejectParams::default());
        let measures = evaluate::erp_measures(&set, &["Fz", "FCz", "Cz", "Pz"])?;
        doc.insert(
            "erp".into(),
            serde_json::to_value(&measures).expect("serializable"),
        );

        if let Some(path) = &args.erp_csv {
            let accepted = set.accepted();
            let mut csv = String::from("time_ms");
            for ch in &set.channels {
                csv.push(',');
                csv.push_str(&ch.label);
            }
            csv.push('\n');
            for t in 0..set.epoch_len() {
                csv.push_str(&format!("{:.3}", set.time_ms(t)));
                for c in 0..set.channels.len() {
                    let mean: f64 = accepted
                        .iter()
                        .map(|&trial| set.epochs[[trial, c, t]])
                        .sum::<f64>()
                        / accepted.len().max(1) as f64;
                    csv.push_str(&format!(",{mean:.6}"));
                }
                csv.push('\n');
            }
            std::fs::write(path, csv)?;
        }
    }

    if let Some(truth_path) = &args.truth {
        let truth = io::read_brainvision(truth_path)?;
        let truth = scalp_only(&truth)?;
        let truth = align_to(input.fs, truth)?;
        if truth.n_samples() != input.n_samples() || truth.n_channels() != input.n_channels() {
            return Err(Error::Argument(format!(
                "truth shape {}x{} != input shape {}x{}",
                truth.n_channels(),
                truth.n_samples(),
                input.n_channels(),
                input.n_samples()
            )));
        }
        let bad = match &args.report {
            Some(p) => IntervalSet::new(io::read_report(p)?.bad_intervals)?,
            None => IntervalSet::empty(),
        };
        let metrics = synth::score_recovery(&input, &truth, &bad)?;
        doc.insert(
            "recovery".into(),
            serde_json::to_value(&metrics).expect("serializable"),
        );
    }

    if let Some(compare_path) = &args.compare {
        let other = io::read_brainvision(compare_path)?;
        let other = scalp_only(&other)?;
        let psd_a = preclean::compute_psd(&input, cfg.psd_win_s, 0.5)?;
        let psd_b = preclean::compute_psd(&other, cfg.psd_win_s, 0.5)?;
        let mut stats_out = serde_json::Map::new();
        for (name, lo, hi) in EVAL_BANDS {
            let a = preclean::band_average(&psd_a, lo, hi)?;
            let b = preclean::band_average(&psd_b, lo, hi)?;
            if a.len() != b.len() {
                return Err(Error::Argument(
                    "channel counts differ between inputs".into(),
                ));
            }
            let s = evaluate::paired_stats(&a, &b)?;
            stats_out.insert(
                name.to_string(),
                serde_json::to_value(s).expect("serializable"),
            );
        }
        doc.insert("band_comparison".into(), serde_json::Value::Object(stats_out));
    }

    if let Some(path) = &args.scalogram_csv {
        let avg = evaluate::channel_average(&input);
        let sc = evaluate::cwt_morse(avg.data.row(0).as_slice().expect("contiguous"), avg.fs)?;
        let (lo_s, hi_s) = match &args.segment {
            Some(seg) => {
                let (a, b) = seg
                    .split_once(',')
                    .ok_or_else(|| Error::Argument("--segment wants lo,hi seconds".into()))?;
                (
                    a.trim()
                        .parse::<f64>()
                        .map_err(|_| Error::Argument(format!("bad segment bound {a}")))?,
                    b.trim()
                        .parse::<f64>()
                        .map_err(|_| Error::Argument(format!("bad segment bound {b}")))?,
                )
            }
            None => (0.0, avg.duration_s()),
        };
        if !(lo_s < hi_s) {
            return Err(Error::Argument("segment bounds out of order".into()));
        }
        let mut csv = String::from("freq_hz");
        let cols: Vec<usize> = (0..sc.times_s.len())
            .filter(|&t| sc.times_s[t] >= lo_s && sc.times_s[t] < hi_s)
            .collect();
        for &t in &cols {
            csv.push_str(&format!(",{:.4}", sc.times_s[t]));
        }
        csv.push('\n');
        for (row, f) in sc.freqs_hz.iter().enumerate() {
            csv.push_str(&format!("{f:.4}"));
            for &t in &cols {
                csv.push_str(&format!(",{:.6}", sc.magnitude[[row, t]]));
            }
            csv.push('\n');
        }
        std::fs::write(path, csv)?;
        doc.insert("scalogram_csv".into(), json!(path.display().to_string()));
    }

    let rendered =
        serde_json::to_string_pretty(&serde_json::Value::Object(doc)).expect("serializable");
    match &args.out {
        Some(p) => std::fs::write(p, rendered)?,
        None => println!("{rendered}"),
    }
    Ok(())
}
