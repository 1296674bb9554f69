//! BrainVision triplet reader/writer.
//!
//! Header (`.vhdr`): INI-like sections Common Infos / Binary Infos /
//! Channel Infos. Data (`.eeg`): raw little-endian multiplexed binary,
//! `INT_16` (counts x resolution = uV) or `IEEE_FLOAT_32` (uV directly).
//! Markers (`.vmrk`): `Mk<n>=<type>,<label>,<sample>,<size>,<chan>` lines
//! with 0-based sample indices.

use ndarray::Array2;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::layout;
use crate::model::{ChannelInfo, Marker, Recording, RecordingKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinaryFormat {
    Int16,
    Float32,
}

#[derive(Debug, Clone)]
pub struct BrainVisionHeader {
    pub n_channels: usize,
    /// Sampling interval in microseconds.
    pub sampling_interval_us: f64,
    pub format: BinaryFormat,
    /// Per-channel resolution in uV per count.
    pub resolutions: Vec<f64>,
    pub labels: Vec<String>,
    pub data_file: String,
    pub marker_file: String,
}

#[derive(Debug, Clone)]
pub struct TripletPaths {
    pub header: PathBuf,
    pub data: PathBuf,
    pub markers: PathBuf,
}

fn parse_header(text: &str, dir: &Path) -> Result<BrainVisionHeader> {
    let mut section = String::new();
    let mut n_channels = None;
    let mut sampling_interval = None;
    let mut format = None;
    let mut data_file = None;
    let mut marker_file = None;
    let mut chans: Vec<(usize, String, f64)> = Vec::new();

    for raw in text.lines() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with(';') || line.starts_with("Brain Vision") {
            continue;
        }
        if line.starts_with('[') && line.ends_with(']') {
            section = line[1..line.len() - 1].to_ascii_lowercase();
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            continue;
        };
        let key = key.trim();
        let value = value.trim();
        match section.as_str() {
            "common infos" => match key {
                "NumberOfChannels" => {
                    n_channels = Some(value.parse::<usize>().map_err(|_| {
                        Error::Parse(format!("bad NumberOfChannels: {value}"))
                    })?)
                }
                "SamplingInterval" => {
                    sampling_interval = Some(value.parse::<f64>().map_err(|_| {
                        Error::Parse(format!("bad SamplingInterval: {value}"))
                    })?)
                }
                "DataFile" => data_file = Some(value.to_string()),
                "MarkerFile" => marker_file = Some(value.to_string()),
                "DataOrientation" => {
                    if !value.eq_ignore_ascii_case("MULTIPLEXED") {
                        return Err(Error::Format(format!(
                            "unsupported DataOrientation {value}"
                        )));
                    }
                }
                _ => {}
            },
            "binary infos" => {
                if key == "BinaryFormat" {
                    format = Some(match value {
                        "INT_16" => BinaryFormat::Int16,
                        "IEEE_FLOAT_32" => BinaryFormat::Float32,
                        other => {
                            return Err(Error::Format(format!("unsupported BinaryFormat {other}")))
                        }
                    });
                }
            }
            "channel infos" => {
                if let Some(idx_str) = key.strip_prefix("Ch") {
                    let idx: usize = idx_str
                        .parse()
                        .map_err(|_| Error::Parse(format!("bad channel key {key}")))?;
                    let fields: Vec<&str> = value.split(',').collect();
                    if fields.is_empty() || fields[0].is_empty() {
                        return Err(Error::Parse(format!("channel {key} has no label")));
                    }
                    let label = fields[0].to_string();
                    let res = fields
                        .get(2)
                        .filter(|s| !s.is_empty())
                        .map(|s| {
                            s.parse::<f64>()
                                .map_err(|_| Error::Parse(format!("bad resolution {s}")))
                        })
                        .transpose()?
                        .unwrap_or(1.0);
                    if res <= 0.0 {
                        return Err(Error::Format(format!("resolution must be > 0, got {res}")));
                    }
                    chans.push((idx, label, res));
                }
            }
            _ => {}
        }
    }

    let n_channels =
        n_channels.ok_or_else(|| Error::Parse("header missing NumberOfChannels".into()))?;
    let sampling_interval_us =
        sampling_interval.ok_or_else(|| Error::Parse("header missing SamplingInterval".into()))?;
    if sampling_interval_us <= 0.0 {
        return Err(Error::Format("SamplingInterval must be > 0".into()));
    }
    let format = format.ok_or_else(|| Error::Parse("header missing BinaryFormat".into()))?;
    let data_file = data_file.ok_or_else(|| Error::Parse("header missing DataFile".into()))?;
    let marker_file = marker_file.ok_or_else(|| Error::Parse("header missing MarkerFile".into()))?;

    chans.sort_by_key(|c| c.0);
    if chans.len() != n_channels {
        return Err(Error::Format(format!(
            "header declares {n_channels} channels but lists {}",
            chans.len()
        )));
    }
    for (i, c) in chans.iter().enumerate() {
        if c.0 != i + 1 {
            return Err(Error::Format(format!("channel indices not contiguous at Ch{}", c.0)));
        }
    }

    let _ = dir;
    Ok(BrainVisionHeader {
        n_channels,
        sampling_interval_us,
        format,
        resolutions: chans.iter().map(|c| c.2).collect(),
        labels: chans.iter().map(|c| c.1.clone()).collect(),
        data_file,
        marker_file,
    })
}

fn parse_markers(text: &str) -> Result<Vec<Marker>> {
    let mut markers = Vec::new();
    for raw in text.lines() {
        let line = raw.trim();
        if !line.starts_with("Mk") {
            continue;
        }
        let Some((_, value)) = line.split_once('=') else {
            continue;
        };
        let fields: Vec<&str> = value.split(',').collect();
        if fields.len() < 3 {
            return Err(Error::Parse(format!("malformed marker line: {line}")));
        }
        let label = fields[1].to_string();
        let sample: usize = fields[2]
            .trim()
            .parse()
            .map_err(|_| Error::Parse(format!("bad marker sample in: {line}")))?;
        markers.push(Marker { label, sample });
    }
    markers.sort_by_key(|m| m.sample);
    Ok(markers)
}

/// Reads a header/data/marker triplet into a Recording (amplitudes in uV).
/// Channel positions come from the built-in 10-20 table; a label that is
/// neither a known scalp site nor `ECG` is rejected.
pub fn read_brainvision(header_path: &Path) -> Result<Recording> {
    let text = fs::read_to_string(header_path)
        .map_err(|e| Error::Parse(format!("cannot read {}: {e}", header_path.display())))?;
    let dir = header_path.parent().unwrap_or(Path::new("."));
    let header = parse_header(&text, dir)?;

    let data_path = dir.join(&header.data_file);
    let bytes = fs::read(&data_path)
        .map_err(|e| Error::Parse(format!("cannot read {}: {e}", data_path.display())))?;
    let sample_bytes = match header.format {
        BinaryFormat::Int16 => 2,
        BinaryFormat::Float32 => 4,
    };
    let frame = header.n_channels * sample_bytes;
    if frame == 0 || bytes.len() % frame != 0 {
        return Err(Error::Format(format!(
            "data file size {} not a multiple of the {}-byte frame",
            bytes.len(),
            frame
        )));
    }
    let n_samples = bytes.len() / frame;
    if n_samples == 0 {
        return Err(Error::EmptyData("data file holds zero samples".into()));
    }

    let mut data = Array2::<f64>::zeros((header.n_channels, n_samples));
    match header.format {
        BinaryFormat::Int16 => {
            for t in 0..n_samples {
                for c in 0..header.n_channels {
                    let off = (t * header.n_channels + c) * 2;
                    let raw = i16::from_le_bytes([bytes[off], bytes[off + 1]]);
                    data[[c, t]] = raw as f64 * header.resolutions[c];
                }
            }
        }
        BinaryFormat::Float32 => {
            for t in 0..n_samples {
                for c in 0..header.n_channels {
                    let off = (t * header.n_channels + c) * 4;
                    let raw = f32::from_le_bytes([
                        bytes[off],
                        bytes[off + 1],
                        bytes[off + 2],
                        bytes[off + 3],
                    ]);
                    data[[c, t]] = raw as f64 * header.resolutions[c];
                }
            }
        }
    }

    let marker_path = dir.join(&header.marker_file);
    let marker_text = fs::read_to_string(&marker_path)
        .map_err(|e| Error::Parse(format!("cannot read {}: {e}", marker_path.display())))?;
    let markers = parse_markers(&marker_text)?;

    let mut channels = Vec::with_capacity(header.n_channels);
    for label in &header.labels {
        if label.eq_ignore_ascii_case("ECG") {
            channels.push(ChannelInfo::ecg(label));
        } else if let Some(pos) = layout::standard_position(label) {
            channels.push(ChannelInfo::scalp(label, pos));
        } else {
            return Err(Error::Format(format!(
                "unknown channel label {label}: no standard 10-20 position"
            )));
        }
    }

    let fs = 1e6 / header.sampling_interval_us;
    Recording::new(data, fs, channels, markers, RecordingKind::Eeg)
}

/// Writes `stem.vhdr/.eeg/.vmrk` as IEEE_FLOAT_32 (resolution 1).
pub fn write_brainvision(rec: &Recording, out_dir: &Path, stem: &str) -> Result<TripletPaths> {
    write_with(rec, out_dir, stem, BinaryFormat::Float32, 1.0)
}

/// Writes the triplet as INT_16 counts of the given resolution (uV/count).
pub fn write_brainvision_int16(
    rec: &Recording,
    out_dir: &Path,
    stem: &str,
    resolution: f64,
) -> Result<TripletPaths> {
    if resolution <= 0.0 {
        return Err(Error::Argument("resolution must be > 0".into()));
    }
    write_with(rec, out_dir, stem, BinaryFormat::Int16, resolution)
}

fn write_with(
    rec: &Recording,
    out_dir: &Path,
    stem: &str,
    format: BinaryFormat,
    resolution: f64,
) -> Result<TripletPaths> {
    fs::create_dir_all(out_dir)?;
    let paths = TripletPaths {
        header: out_dir.join(format!("{stem}.vhdr")),
        data: out_dir.join(format!("{stem}.eeg")),
        markers: out_dir.join(format!("{stem}.vmrk")),
    };

    let mut vhdr = String::new();
    vhdr.push_str("Brain Vision Data Exchange Header File Version 1.0\n\n");
    vhdr.push_str("[Common Infos]\n");
    vhdr.push_str(&format!("DataFile={stem}.eeg\n"));
    vhdr.push_str(&format!("MarkerFile={stem}.vmrk\n"));
    vhdr.push_str("DataFormat=BINARY\n");
    vhdr.push_str("DataOrientation=MULTIPLEXED\n");
    vhdr.push_str(&format!("NumberOfChannels={}\n", rec.n_channels()));
    vhdr.push_str(&format!("SamplingInterval={}\n\n", 1e6 / rec.fs));
    vhdr.push_str("[Binary Infos]\n");
    vhdr.push_str(match format {
        BinaryFormat::Int16 => "BinaryFormat=INT_16\n\n",
        BinaryFormat::Float32 => "BinaryFormat=IEEE_FLOAT_32\n\n",
    });
    vhdr.push_str("[Channel Infos]\n");
    for (i, ch) in rec.channels.iter().enumerate() {
        vhdr.push_str(&format!("Ch{}={},,{},µV\n", i + 1, ch.label, resolution));
    }
    fs::write(&paths.header, vhdr)?;

    let n = rec.n_samples();
    let c = rec.n_channels();
    match format {
        BinaryFormat::Float32 => {
            let mut bytes = Vec::with_capacity(n * c * 4);
            for t in 0..n {
                for ch in 0..c {
                    let v = (rec.data[[ch, t]] / resolution) as f32;
                    bytes.extend_from_slice(&v.to_le_bytes());
                }
            }
            fs::write(&paths.data, bytes)?;
        }
        BinaryFormat::Int16 => {
            let mut bytes = Vec::with_capacity(n * c * 2);
            for t in 0..n {
                for ch in 0..c {
                    let counts = (rec.data[[ch, t]] / resolution).round();
                    let v = counts.clamp(i16::MIN as f64, i16::MAX as f64) as i16;
                    bytes.extend_from_slice(&v.to_le_bytes());
                }
            }
            fs::write(&paths.data, bytes)?;
        }
    }

    let mut vmrk = fs::File::create(&paths.markers)?;
    writeln!(vmrk, "Brain Vision Data Exchange Marker File, Version 1.0\n")?;
    writeln!(vmrk, "[Common Infos]")?;
    writeln!(vmrk, "DataFile={stem}.eeg\n")?;
    writeln!(vmrk, "[Marker Infos]")?;
    for (i, m) in rec.markers.iter().enumerate() {
        writeln!(vmrk, "Mk{}=Stimulus,{},{},1,0", i + 1, m.label, m.sample)?;
    }
    Ok(paths)
}
