//! Shared domain types: recordings, markers, bad-interval sets, and the
//! short-to-full index bookkeeping that bridges bad-interval excision.
//!
//! All amplitudes are microvolts, all sample indices are 0-based, and all
//! ranges are half-open `[start, end)`. Values are immutable after
//! construction; operations return new values.

use ndarray::{Array2, Axis};
use serde::{Deserialize, Serialize};
use std::collections::HashSet;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RecordingKind {
    Eeg,
    Ecg,
    Oximetry,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelInfo {
    /// 10-20 label, e.g. `Fz`, `O1`, or `ECG` for the back electrode.
    pub label: String,
    /// Head-disc coordinates in the unit-radius projection (nose = +y).
    /// `None` for off-scalp channels (the ECG electrode).
    pub position: Option<[f64; 2]>,
    pub is_ecg: bool,
}

impl ChannelInfo {
    pub fn scalp(label: &str, position: [f64; 2]) -> Self {
        ChannelInfo {
            label: label.to_string(),
            position: Some(position),
            is_ecg: false,
        }
    }

    pub fn ecg(label: &str) -> Self {
        ChannelInfo {
            label: label.to_string(),
            position: None,
            is_ecg: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Marker {
    pub label: String,
    pub sample: usize,
}

impl Marker {
    pub fn new(label: &str, sample: usize) -> Self {
        Marker {
            label: label.to_string(),
            sample,
        }
    }
}

/// Multichannel time series in microvolts: one row per channel.
#[derive(Debug, Clone)]
pub struct Recording {
    pub data: Array2<f64>,
    /// Sampling rate in samples/second.
    pub fs: f64,
    pub channels: Vec<ChannelInfo>,
    /// Sorted by sample index.
    pub markers: Vec<Marker>,
    pub kind: RecordingKind,
}

impl Recording {
    pub fn new(
        data: Array2<f64>,
        fs: f64,
        channels: Vec<ChannelInfo>,
        markers: Vec<Marker>,
        kind: RecordingKind,
    ) -> Result<Self> {
        if !(fs > 0.0) {
            return Err(Error::Argument(format!("sampling rate must be > 0, got {fs}")));
        }
        if data.nrows() != channels.len() {
            return Err(Error::Format(format!(
                "data has {} rows but {} channels described",
                data.nrows(),
                channels.len()
            )));
        }
        let mut seen = HashSet::new();
        for ch in &channels {
            if !seen.insert(ch.label.as_str()) {
                return Err(Error::Format(format!("duplicate channel label {}", ch.label)));
            }
        }
        let n = data.ncols();
        let mut last = 0usize;
        for (i, m) in markers.iter().enumerate() {
            if m.sample >= n {
                return Err(Error::Bounds(format!(
                    "marker {} at sample {} outside recording of {} samples",
                    m.label, m.sample, n
                )));
            }
            if i > 0 && m.sample < last {
                return Err(Error::Format("markers not sorted by sample".into()));
            }
            last = m.sample;
        }
        Ok(Recording {
            data,
            fs,
            channels,
            markers,
            kind,
        })
    }

    pub fn n_channels(&self) -> usize {
        self.data.nrows()
    }

    pub fn n_samples(&self) -> usize {
        self.data.ncols()
    }

    pub fn duration_s(&self) -> f64 {
        self.n_samples() as f64 / self.fs
    }

    pub fn channel_index(&self, label: &str) -> Option<usize> {
        self.channels.iter().position(|c| c.label == label)
    }

    /// Same metadata, new sample data (must keep the channel count; the
    /// sample count may change only if all markers stay in range).
    pub fn with_data(&self, data: Array2<f64>) -> Result<Recording> {
        Recording::new(
            data,
            self.fs,
            self.channels.clone(),
            self.markers.clone(),
            self.kind,
        )
    }

    pub fn select_channels(&self, indices: &[usize], kind: RecordingKind) -> Result<Recording> {
        for &i in indices {
            if i >= self.n_channels() {
                return Err(Error::Bounds(format!("channel index {i} out of range")));
            }
        }
        let data = self.data.select(Axis(0), indices);
        let channels = indices.iter().map(|&i| self.channels[i].clone()).collect();
        Recording::new(data, self.fs, channels, self.markers.clone(), kind)
    }

    /// Markers whose label matches exactly.
    pub fn markers_labeled(&self, label: &str) -> Vec<Marker> {
        self.markers
            .iter()
            .filter(|m| m.label == label)
            .cloned()
            .collect()
    }
}

/// Non-overlapping sorted half-open sample ranges marking bad data.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IntervalSet {
    intervals: Vec<(usize, usize)>,
}

impl IntervalSet {
    pub fn empty() -> Self {
        IntervalSet { intervals: vec![] }
    }

    /// Validates ordering, non-overlap, and start < end.
    pub fn new(mut intervals: Vec<(usize, usize)>) -> Result<Self> {
        intervals.sort_unstable();
        let mut prev_end = 0usize;
        for (i, &(s, e)) in intervals.iter().enumerate() {
            if s >= e {
                return Err(Error::Argument(format!("empty or inverted interval [{s}, {e})")));
            }
            if i > 0 && s < prev_end {
                return Err(Error::Argument(format!(
                    "interval [{s}, {e}) overlaps previous ending at {prev_end}"
                )));
            }
            prev_end = e;
        }
        Ok(IntervalSet { intervals })
    }

    /// Sorts and merges overlapping or touching raw ranges.
    pub fn from_unmerged(mut intervals: Vec<(usize, usize)>) -> Self {
        intervals.retain(|&(s, e)| s < e);
        intervals.sort_unstable();
        let mut merged: Vec<(usize, usize)> = Vec::with_capacity(intervals.len());
        for (s, e) in intervals {
            match merged.last_mut() {
                Some(last) if s <= last.1 => last.1 = last.1.max(e),
                _ => merged.push((s, e)),
            }
        }
        IntervalSet { intervals: merged }
    }

    pub fn intervals(&self) -> &[(usize, usize)] {
        &self.intervals
    }

    pub fn is_empty(&self) -> bool {
        self.intervals.is_empty()
    }

    pub fn total_len(&self) -> usize {
        self.intervals.iter().map(|&(s, e)| e - s).sum()
    }

    pub fn contains(&self, sample: usize) -> bool {
        self.intervals
            .binary_search_by(|&(s, e)| {
                if sample < s {
                    std::cmp::Ordering::Greater
                } else if sample >= e {
                    std::cmp::Ordering::Less
                } else {
                    std::cmp::Ordering::Equal
                }
            })
            .is_ok()
    }

    pub fn validate_against(&self, n_samples: usize) -> Result<()> {
        if let Some(&(_, e)) = self.intervals.last() {
            if e > n_samples {
                return Err(Error::Bounds(format!(
                    "interval ends at {e} beyond {n_samples} samples"
                )));
            }
        }
        Ok(())
    }

    /// Kept ranges: the complement within `[0, n_samples)`.
    pub fn complement(&self, n_samples: usize) -> Vec<(usize, usize)> {
        let mut kept = Vec::new();
        let mut cursor = 0usize;
        for &(s, e) in &self.intervals {
            if s > cursor {
                kept.push((cursor, s));
            }
            cursor = e;
        }
        if cursor < n_samples {
            kept.push((cursor, n_samples));
        }
        kept
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct KeptRange {
    pub short_start: usize,
    pub full_start: usize,
    pub len: usize,
}

/// Monotone injective map from excised (short) sample indices back to the
/// original (full) indices.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IndexMap {
    kept: Vec<KeptRange>,
    short_len: usize,
}

impl IndexMap {
    pub fn identity(n: usize) -> Self {
        IndexMap {
            kept: if n == 0 {
                vec![]
            } else {
                vec![KeptRange {
                    short_start: 0,
                    full_start: 0,
                    len: n,
                }]
            },
            short_len: n,
        }
    }

    pub fn from_kept_ranges(ranges: &[(usize, usize)]) -> Self {
        let mut kept = Vec::with_capacity(ranges.len());
        let mut short = 0usize;
        for &(s, e) in ranges {
            kept.push(KeptRange {
                short_start: short,
                full_start: s,
                len: e - s,
            });
            short += e - s;
        }
        IndexMap {
            kept,
            short_len: short,
        }
    }

    pub fn short_len(&self) -> usize {
        self.short_len
    }

    pub fn kept_ranges(&self) -> &[KeptRange] {
        &self.kept
    }

    pub fn map_short_to_full(&self, k: usize) -> Result<usize> {
        if k >= self.short_len {
            return Err(Error::Bounds(format!(
                "short index {k} out of range (K = {})",
                self.short_len
            )));
        }
        let idx = self
            .kept
            .partition_point(|r| r.short_start + r.len <= k)
            .min(self.kept.len() - 1);
        let r = &self.kept[idx];
        Ok(r.full_start + (k - r.short_start))
    }

    /// Inverse lookup; `None` when the full index fell inside a bad interval.
    pub fn map_full_to_short(&self, m: usize) -> Option<usize> {
        for r in &self.kept {
            if m >= r.full_start && m < r.full_start + r.len {
                return Some(r.short_start + (m - r.full_start));
            }
        }
        None
    }
}

/// Removes the bad intervals from a recording, concatenating the kept spans
/// in order. Markers inside bad intervals are dropped; the rest are remapped.
pub fn excise_intervals(rec: &Recording, bad: &IntervalSet) -> Result<(Recording, IndexMap)> {
    bad.validate_against(rec.n_samples())?;
    let kept = bad.complement(rec.n_samples());
    let map = IndexMap::from_kept_ranges(&kept);
    let k_total = map.short_len();
    if k_total == 0 {
        return Err(Error::EmptyData(
            "all samples fall inside bad intervals".into(),
        ));
    }
    let mut data = Array2::<f64>::zeros((rec.n_channels(), k_total));
    for r in map.kept_ranges() {
        data.slice_mut(ndarray::s![.., r.short_start..r.short_start + r.len])
            .assign(&rec.data.slice(ndarray::s![.., r.full_start..r.full_start + r.len]));
    }
    let markers = rec
        .markers
        .iter()
        .filter_map(|m| {
            map.map_full_to_short(m.sample).map(|s| Marker {
                label: m.label.clone(),
                sample: s,
            })
        })
        .collect();
    let short = Recording::new(data, rec.fs, rec.channels.clone(), markers, rec.kind)?;
    Ok((short, map))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::layout;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn toy_recording(n_ch: usize, n_samp: usize) -> Recording {
        let labels = layout::default_montage();
        let channels: Vec<ChannelInfo> = labels
            .iter()
            .take(n_ch)
            .map(|l| ChannelInfo::scalp(l, layout::standard_position(l).unwrap()))
            .collect();
        let data = Array2::from_shape_fn((n_ch, n_samp), |(c, t)| (c * 1000 + t) as f64);
        Recording::new(data, 250.0, channels, vec![], RecordingKind::Eeg).unwrap()
    }

    #[test]
    fn excise_empty_set_is_identity() {
        let rec = toy_recording(3, 100);
        let (short, map) = excise_intervals(&rec, &IntervalSet::empty()).unwrap();
        assert_eq!(short.n_samples(), 100);
        assert_eq!(short.data, rec.data);
        for k in [0usize, 42, 99] {
            assert_eq!(map.map_short_to_full(k).unwrap(), k);
        }
    }

    #[test]
    fn excise_prefix_cut() {
        let rec = toy_recording(2, 100);
        let bad = IntervalSet::new(vec![(0, 10)]).unwrap();
        let (short, map) = excise_intervals(&rec, &bad).unwrap();
        assert_eq!(short.n_samples(), 90);
        assert_eq!(map.map_short_to_full(0).unwrap(), 10);
    }

    #[test]
    fn map_after_interior_cut() {
        let map = IndexMap::from_kept_ranges(&[(0, 50), (60, 100)]);
        // brute-force walk over surviving indices
        let mut survivors = Vec::new();
        for m in 0..100usize {
            if !(50..60).contains(&m) {
                survivors.push(m);
            }
        }
        assert_eq!(map.map_short_to_full(55).unwrap(), survivors[55]);
        assert_eq!(map.map_short_to_full(55).unwrap(), 65);
        assert!(map.map_short_to_full(90).is_err());
    }

    #[test]
    fn excise_out_of_bounds_rejected() {
        let rec = toy_recording(2, 50);
        let bad = IntervalSet::new(vec![(40, 60)]).unwrap();
        assert!(matches!(
            excise_intervals(&rec, &bad),
            Err(Error::Bounds(_))
        ));
    }

    #[test]
    fn excise_everything_is_empty_error() {
        let rec = toy_recording(2, 50);
        let bad = IntervalSet::new(vec![(0, 50)]).unwrap();
        assert!(matches!(
            excise_intervals(&rec, &bad),
            Err(Error::EmptyData(_))
        ));
    }

    #[test]
    fn markers_remap_and_drop() {
        let mut rec = toy_recording(2, 100);
        rec.markers = vec![Marker::new("a", 5), Marker::new("b", 55), Marker::new("c", 70)];
        let bad = IntervalSet::new(vec![(50, 60)]).unwrap();
        let (short, _) = excise_intervals(&rec, &bad).unwrap();
        assert_eq!(short.markers.len(), 2);
        assert_eq!(short.markers[0].sample, 5);
        assert_eq!(short.markers[1].sample, 60); // 70 - 10 excised
    }

    #[test]
    fn random_excisions_match_direct_indexing() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..50 {
            let n = rng.gen_range(20..200);
            let rec = toy_recording(3, n);
            let mut cuts = Vec::new();
            let mut cursor = 0usize;
            while cursor + 4 < n && cuts.len() < 5 {
                let s = cursor + rng.gen_range(0..4);
                let e = (s + 1 + rng.gen_range(0..5)).min(n);
                if s < e {
                    cuts.push((s, e));
                }
                cursor = e + rng.gen_range(1..6);
            }
            let bad = IntervalSet::new(cuts.clone()).unwrap();
            if bad.total_len() >= n {
                continue;
            }
            let (short, map) = excise_intervals(&rec, &bad).unwrap();
            assert_eq!(short.n_samples() + bad.total_len(), n);
            for k in 0..short.n_samples() {
                let m = map.map_short_to_full(k).unwrap();
                for c in 0..3 {
                    assert_eq!(short.data[[c, k]], rec.data[[c, m]]);
                }
            }
        }
    }

    #[test]
    fn interval_set_rejects_overlap() {
        assert!(IntervalSet::new(vec![(0, 10), (5, 15)]).is_err());
        assert!(IntervalSet::new(vec![(3, 3)]).is_err());
        assert!(IntervalSet::new(vec![(0, 10), (10, 15)]).is_ok());
    }

    #[test]
    fn from_unmerged_merges_touching() {
        let set = IntervalSet::from_unmerged(vec![(10, 20), (0, 5), (18, 30), (5, 7)]);
        assert_eq!(set.intervals(), &[(0, 7), (10, 30)]);
        assert!(set.contains(0));
        assert!(!set.contains(7));
        assert!(set.contains(29));
        assert!(!set.contains(30));
    }
}
