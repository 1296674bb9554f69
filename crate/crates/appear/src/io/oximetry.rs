//! Plain-text pulse-oximetry ingest: one decimal sample per line.

use std::fs;
use std::path::Path;

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::model::{ChannelInfo, Recording, RecordingKind};

/// Reads a one-column waveform; default sampling rate is 40 S/s.
pub fn read_oximetry(path: &Path, fs: f64) -> Result<Recording> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::Parse(format!("cannot read {}: {e}", path.display())))?;
    let mut values = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let v: f64 = line
            .parse()
            .map_err(|_| Error::Parse(format!("non-numeric oximetry value at line {}: {line}", i + 1)))?;
        values.push(v);
    }
    if values.is_empty() {
        return Err(Error::EmptyData(format!(
            "oximetry file {} holds no samples",
            path.display()
        )));
    }
    let n = values.len();
    let data = Array2::from_shape_vec((1, n), values).expect("shape matches");
    Recording::new(
        data,
        fs,
        vec![ChannelInfo {
            label: "PULSE".into(),
            position: None,
            is_ecg: false,
        }],
        vec![],
        RecordingKind::Oximetry,
    )
}

/// Writes the single-channel waveform back out, one sample per line.
pub fn write_oximetry(rec: &Recording, path: &Path) -> Result<()> {
    let mut out = String::with_capacity(rec.n_samples() * 12);
    for v in rec.data.row(0).iter() {
        out.push_str(&format!("{v:.6}\n"));
    }
    fs::write(path, out)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use tempfile::TempDir;

    #[test]
    fn sixty_seconds_at_forty_hz() {
        let dir = TempDir::new().unwrap();
        let p = dir.path().join("oxi.txt");
        let text: String = (0..2400).map(|i| format!("{}\n", i as f64 * 0.1)).collect();
        fs::write(&p, text).unwrap();
        let rec = read_oximetry(&p, 40.0).unwrap();
        assert_eq!(rec.n_samples(), 2400);
        assert!((rec.duration_s() - 60.0).abs() < 1e-9);
        assert_eq!(rec.kind, RecordingKind::Oximetry);
    }

    #[test]
    fn empty_file_is_empty_data() {
        let dir = TempDir::new().unwrap();
        let p = dir.path().join("empty.txt");
        fs::write(&p, "").unwrap();
        assert!(matches!(read_oximetry(&p, 40.0), Err(Error::EmptyData(_))));
    }

    #[test]
    fn garbage_is_parse_error() {
        let dir = TempDir::new().unwrap();
        let p = dir.path().join("bad.txt");
        fs::write(&p, "1.0\nnot-a-number\n").unwrap();
        assert!(matches!(read_oximetry(&p, 40.0), Err(Error::Parse(_))));
    }
}
