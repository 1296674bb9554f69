//! Scalp topography: thin-plate-spline interpolation of a mixing column
//! over the unit head disc, and polarity-region analysis of the result.

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::model::ChannelInfo;

pub const GRID_N: usize = 64;

/// Interpolated map over the unit disc, normalized to max |value| = 1.
/// Cells outside the disc are NaN.
#[derive(Debug, Clone)]
pub struct TopoMap {
    pub grid: Array2<f64>,
    pub ic_index: Option<usize>,
}

impl TopoMap {
    pub fn cell_center(i: usize, j: usize) -> [f64; 2] {
        let step = 2.0 / GRID_N as f64;
        [-1.0 + (j as f64 + 0.5) * step, -1.0 + (i as f64 + 0.5) * step]
    }

    pub fn inside(i: usize, j: usize) -> bool {
        let [x, y] = Self::cell_center(i, j);
        x * x + y * y <= 1.0
    }

    pub fn value(&self, i: usize, j: usize) -> Option<f64> {
        let v = self.grid[[i, j]];
        if v.is_nan() {
            None
        } else {
            Some(v)
        }
    }
}

fn tps_basis(r2: f64) -> f64 {
    if r2 < 1e-300 {
        0.0
    } else {
        0.5 * r2 * r2.ln()
    }
}

/// Thin-plate-spline interpolation of one mixing column onto the disc grid,
/// using the positioned channels only. Needs >= 8 sites with spread-out,
/// non-collinear positions.
pub fn interp_topomap(column: &[f64], channels: &[ChannelInfo]) -> Result<TopoMap> {
    if column.len() != channels.len() {
        return Err(Error::Argument(format!(
            "column has {} entries for {} channels",
            column.len(),
            channels.len()
        )));
    }
    let sites: Vec<([f64; 2], f64)> = channels
        .iter()
        .zip(column)
        .filter_map(|(ch, &v)| ch.position.map(|p| (p, v)))
        .collect();
    let n = sites.len();
    if n < 8 {
        return Err(Error::Layout(format!(
            "need at least 8 positioned channels, got {n}"
        )));
    }

    // collinearity check on the 2x2 position covariance
    let mx = sites.iter().map(|(p, _)| p[0]).sum::<f64>() / n as f64;
    let my = sites.iter().map(|(p, _)| p[1]).sum::<f64>() / n as f64;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for (p, _) in &sites {
        sxx += (p[0] - mx) * (p[0] - mx);
        sxy += (p[0] - mx) * (p[1] - my);
        syy += (p[1] - my) * (p[1] - my);
    }
    let tr = sxx + syy;
    let det = sxx * syy - sxy * sxy;
    let disc = (tr * tr / 4.0 - det).max(0.0).sqrt();
    let min_eig = tr / 2.0 - disc;
    if min_eig < 1e-6 * tr.max(1e-300) {
        return Err(Error::Layout("channel positions are collinear".into()));
    }

    // TPS system: [K P; P^T 0] [w; a] = [v; 0]
    let dim = n + 3;
    let mut a = Array2::<f64>::zeros((dim, dim));
    let mut b = Array1::<f64>::zeros(dim);
    for i in 0..n {
        for j in 0..n {
            let dx = sites[i].0[0] - sites[j].0[0];
            let dy = sites[i].0[1] - sites[j].0[1];
            a[[i, j]] = tps_basis(dx * dx + dy * dy);
        }
        a[[i, n]] = 1.0;
        a[[i, n + 1]] = sites[i].0[0];
        a[[i, n + 2]] = sites[i].0[1];
        a[[n, i]] = 1.0;
        a[[n + 1, i]] = sites[i].0[0];
        a[[n + 2, i]] = sites[i].0[1];
        b[i] = sites[i].1;
    }
    let coeffs = linalg::solve(&a, &b)
        .map_err(|e| Error::Layout(format!("interpolation system singular: {e}")))?;

    let mut grid = Array2::<f64>::from_elem((GRID_N, GRID_N), f64::NAN);
    let mut max_abs = 0.0f64;
    for i in 0..GRID_N {
        for j in 0..GRID_N {
            if !TopoMap::inside(i, j) {
                continue;
            }
            let [x, y] = TopoMap::cell_center(i, j);
            let mut v = coeffs[n] + coeffs[n + 1] * x + coeffs[n + 2] * y;
            for (s, (p, _)) in sites.iter().enumerate() {
                let dx = x - p[0];
                let dy = y - p[1];
                v += coeffs[s] * tps_basis(dx * dx + dy * dy);
            }
            grid[[i, j]] = v;
            max_abs = max_abs.max(v.abs());
        }
    }
    if max_abs > 0.0 {
        grid.mapv_inplace(|v| v / max_abs);
    }
    Ok(TopoMap {
        grid,
        ic_index: None,
    })
}

/// Summary of one thresholded polarity region.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct RegionInfo {
    /// +1 or -1.
    pub sign: i8,
    /// Cells / inside-disc cells.
    pub area_frac: f64,
    pub centroid: [f64; 2],
    /// Share of the outer boundary band covered by this region.
    pub arc_frac: f64,
    /// Peak |value| inside the region.
    pub peak_abs: f64,
}

/// Primary/secondary polarity structure of a map: connected components of
/// `{v > thr}` and `{v < -thr}`, ranked by peak magnitude.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct PolarityRegions {
    pub primary: Option<RegionInfo>,
    pub secondary: Option<RegionInfo>,
    /// Thresholded components that are neither primary nor secondary.
    pub neutral_count: usize,
    /// Number of components sharing the primary's sign.
    pub primary_sign_count: usize,
    /// Boundary-band share not covered by any region.
    pub neutral_arc_frac: f64,
    pub regions: Vec<RegionInfo>,
}

pub fn extract_polarity_regions(map: &TopoMap, threshold: f64, band_width: f64) -> PolarityRegions {
    let n = GRID_N;
    let mut label = vec![vec![-1isize; n]; n];
    let mut regions: Vec<RegionInfo> = Vec::new();
    let mut inside_count = 0usize;
    let mut band_count = 0usize;
    let band_r = 1.0 - band_width;

    let in_band = |i: usize, j: usize| {
        let [x, y] = TopoMap::cell_center(i, j);
        let r = (x * x + y * y).sqrt();
        r >= band_r && r <= 1.0
    };

    for i in 0..n {
        for j in 0..n {
            if TopoMap::inside(i, j) {
                inside_count += 1;
                if in_band(i, j) {
                    band_count += 1;
                }
            }
        }
    }

    let cell_sign = |i: usize, j: usize| -> i8 {
        match map.value(i, j) {
            Some(v) if v > threshold => 1,
            Some(v) if v < -threshold => -1,
            _ => 0,
        }
    };

    for si in 0..n {
        for sj in 0..n {
            let sign = cell_sign(si, sj);
            if sign == 0 || label[si][sj] >= 0 {
                continue;
            }
            let id = regions.len() as isize;
            let mut stack = vec![(si, sj)];
            label[si][sj] = id;
            let mut cells = Vec::new();
            while let Some((i, j)) = stack.pop() {
                cells.push((i, j));
                let push = |ni: usize, nj: usize, label: &mut Vec<Vec<isize>>, stack: &mut Vec<(usize, usize)>| {
                    if label[ni][nj] < 0 && cell_sign(ni, nj) == sign {
                        label[ni][nj] = id;
                        stack.push((ni, nj));
                    }
                };
                if i > 0 {
                    push(i - 1, j, &mut label, &mut stack);
                }
                if i + 1 < n {
                    push(i + 1, j, &mut label, &mut stack);
                }
                if j > 0 {
                    push(i, j - 1, &mut label, &mut stack);
                }
                if j + 1 < n {
                    push(i, j + 1, &mut label, &mut stack);
                }
            }
            let mut cx = 0.0;
            let mut cy = 0.0;
            let mut peak = 0.0f64;
            let mut band_cells = 0usize;
            for &(i, j) in &cells {
                let [x, y] = TopoMap::cell_center(i, j);
                cx += x;
                cy += y;
                peak = peak.max(map.value(i, j).unwrap_or(0.0).abs());
                if in_band(i, j) {
                    band_cells += 1;
                }
            }
            regions.push(RegionInfo {
                sign,
                area_frac: cells.len() as f64 / inside_count.max(1) as f64,
                centroid: [cx / cells.len() as f64, cy / cells.len() as f64],
                arc_frac: band_cells as f64 / band_count.max(1) as f64,
                peak_abs: peak,
            });
        }
    }

    let rank = |r: &RegionInfo| (r.peak_abs, r.area_frac);
    let primary_idx = regions
        .iter()
        .enumerate()
        .max_by(|a, b| rank(a.1).partial_cmp(&rank(b.1)).unwrap())
        .map(|(i, _)| i);
    let primary = primary_idx.map(|i| regions[i].clone());
    let secondary = primary.as_ref().and_then(|p| {
        regions
            .iter()
            .filter(|r| r.sign == -p.sign)
            .max_by(|a, b| rank(a).partial_cmp(&rank(b)).unwrap())
            .cloned()
    });
    let primary_sign_count = primary
        .as_ref()
        .map(|p| regions.iter().filter(|r| r.sign == p.sign).count())
        .unwrap_or(0);
    let mut neutral_count = regions.len();
    if primary.is_some() {
        neutral_count -= 1;
    }
    if secondary.is_some() {
        neutral_count -= 1;
    }
    let covered_arc: f64 = regions.iter().map(|r| r.arc_frac).sum();
    PolarityRegions {
        primary,
        secondary,
        neutral_count,
        primary_sign_count,
        neutral_arc_frac: (1.0 - covered_arc).max(0.0),
        regions,
    }
}

/// Fraction of the occipital template (union of discs of `radius` around the
/// O1/Oz/O2 sites) covered by the |v| > threshold level set.
pub fn occipital_overlap(map: &TopoMap, threshold: f64, radius: f64) -> f64 {
    let centers: Vec<[f64; 2]> = ["O1", "Oz", "O2"]
        .iter()
        .filter_map(|l| crate::layout::standard_position(l))
        .collect();
    let mut template = 0usize;
    let mut hit = 0usize;
    for i in 0..GRID_N {
        for j in 0..GRID_N {
            if !TopoMap::inside(i, j) {
                continue;
            }
            let [x, y] = TopoMap::cell_center(i, j);
            let in_template = centers
                .iter()
                .any(|c| (x - c[0]).powi(2) + (y - c[1]).powi(2) <= radius * radius);
            if in_template {
                template += 1;
                if map.value(i, j).map(|v| v.abs() > threshold).unwrap_or(false) {
                    hit += 1;
                }
            }
        }
    }
    if template == 0 {
        0.0
    } else {
        hit as f64 / template as f64
    }
}

/// Builds a map directly from a closure over disc coordinates (planted-
/// benchmark support; normalization matches `interp_topomap`).
pub fn map_from_fn<F: Fn(f64, f64) -> f64>(f: F) -> TopoMap {
    let mut grid = Array2::<f64>::from_elem((GRID_N, GRID_N), f64::NAN);
    let mut max_abs = 0.0f64;
    for i in 0..GRID_N {
        for j in 0..GRID_N {
            if TopoMap::inside(i, j) {
                let [x, y] = TopoMap::cell_center(i, j);
                let v = f(x, y);
                grid[[i, j]] = v;
                max_abs = max_abs.max(v.abs());
            }
        }
    }
    if max_abs > 0.0 {
        grid.mapv_inplace(|v| v / max_abs);
    }
    TopoMap {
        grid,
        ic_index: None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::layout;

    fn montage_channels() -> Vec<ChannelInfo> {
        layout::default_montage()
            .into_iter()
            .map(|l| ChannelInfo::scalp(l, layout::standard_position(l).unwrap()))
            .collect()
    }

    #[test]
    fn all_equal_column_gives_uniform_unit_map() {
        let channels = montage_channels();
        let column = vec![2.5; channels.len()];
        let map = interp_topomap(&column, &channels).unwrap();
        for i in 0..GRID_N {
            for j in 0..GRID_N {
                if let Some(v) = map.value(i, j) {
                    assert!((v - 1.0).abs() < 1e-6, "cell {i},{j} = {v}");
                }
            }
        }
    }

    #[test]
    fn o1_o2_dipole_is_antisymmetric() {
        let channels = montage_channels();
        let mut column = vec![0.0; channels.len()];
        for (i, ch) in channels.iter().enumerate() {
            if ch.label == "O1" {
                column[i] = 1.0;
            }
            if ch.label == "O2" {
                column[i] = -1.0;
            }
        }
        let map = interp_topomap(&column, &channels).unwrap();
        let mut err = 0.0;
        let mut norm = 0.0;
        for i in 0..GRID_N {
            for j in 0..GRID_N {
                let jm = GRID_N - 1 - j;
                if let (Some(v), Some(vm)) = (map.value(i, j), map.value(i, jm)) {
                    err += (v + vm) * (v + vm);
                    norm += v * v;
                }
            }
        }
        let rel = (err / norm.max(1e-12)).sqrt();
        assert!(rel < 0.05, "asymmetry {rel}");
    }

    #[test]
    fn peak_at_fp1_localizes() {
        let channels = montage_channels();
        let fp1 = layout::standard_position("Fp1").unwrap();
        let column: Vec<f64> = channels
            .iter()
            .map(|ch| {
                let p = ch.position.unwrap();
                let d2 = (p[0] - fp1[0]).powi(2) + (p[1] - fp1[1]).powi(2);
                (-d2 / (2.0 * 0.4 * 0.4)).exp()
            })
            .collect();
        let map = interp_topomap(&column, &channels).unwrap();
        let mut best = (0, 0, f64::MIN);
        for i in 0..GRID_N {
            for j in 0..GRID_N {
                if let Some(v) = map.value(i, j) {
                    if v > best.2 {
                        best = (i, j, v);
                    }
                }
            }
        }
        let [x, y] = TopoMap::cell_center(best.0, best.1);
        let d = ((x - fp1[0]).powi(2) + (y - fp1[1]).powi(2)).sqrt();
        assert!(d < 0.15, "argmax {d} from Fp1");
    }

    #[test]
    fn collinear_layout_rejected() {
        let channels: Vec<ChannelInfo> = (0..10)
            .map(|i| ChannelInfo::scalp(&format!("C{i}"), [i as f64 * 0.1 - 0.5, 0.0]))
            .collect();
        let column = vec![1.0; 10];
        assert!(matches!(
            interp_topomap(&column, &channels),
            Err(Error::Layout(_))
        ));
    }

    #[test]
    fn too_few_sites_rejected() {
        let channels: Vec<ChannelInfo> = ["Fz", "Cz", "Pz", "Oz"]
            .iter()
            .map(|l| ChannelInfo::scalp(l, layout::standard_position(l).unwrap()))
            .collect();
        assert!(matches!(
            interp_topomap(&[1.0, 0.5, 0.2, 0.1], &channels),
            Err(Error::Layout(_))
        ));
    }

    #[test]
    fn uniform_map_single_primary_region() {
        let map = map_from_fn(|_, _| 0.9);
        let regions = extract_polarity_regions(&map, 0.2, 0.2);
        assert!(regions.primary.is_some());
        assert!(regions.secondary.is_none());
        assert_eq!(regions.neutral_count, 0);
        assert_eq!(regions.primary_sign_count, 1);
        assert!((regions.primary.as_ref().unwrap().area_frac - 1.0).abs() < 1e-9);
        assert!((regions.primary.as_ref().unwrap().arc_frac - 1.0).abs() < 1e-9);
    }

    #[test]
    fn lateral_dipole_two_opposite_regions() {
        let map = map_from_fn(|x, _| 0.9 * x);
        let regions = extract_polarity_regions(&map, 0.2, 0.2);
        let p = regions.primary.as_ref().unwrap();
        let s = regions.secondary.as_ref().unwrap();
        assert_eq!(p.sign, -s.sign);
        assert!(p.centroid[0] * s.centroid[0] < 0.0, "centroids on same side");
        assert!(p.arc_frac > 0.1 && s.arc_frac > 0.1);
        assert_eq!(regions.neutral_count, 0);
    }

    #[test]
    fn subthreshold_map_has_no_regions() {
        // raw values never exceed the 0.2 threshold after bypassing
        // normalization
        let mut map = map_from_fn(|x, y| (x + y).max(-1.0).min(1.0));
        map.grid.mapv_inplace(|v| if v.is_nan() { v } else { v * 0.15 });
        let regions = extract_polarity_regions(&map, 0.2, 0.2);
        assert!(regions.primary.is_none());
        assert!(regions.regions.is_empty());
        assert!((regions.neutral_arc_frac - 1.0).abs() < 1e-9);
    }

    #[test]
    fn occipital_blob_overlaps_template() {
        let oz = layout::standard_position("Oz").unwrap();
        let map = map_from_fn(|x, y| (-((x - oz[0]).powi(2) + (y - oz[1]).powi(2)) / 0.18).exp());
        let overlap = occipital_overlap(&map, 0.2, 0.25);
        assert!(overlap > 0.4, "overlap {overlap}");
        let frontal = map_from_fn(|x, y| (-(x * x + (y - 0.9).powi(2)) / 0.1).exp());
        assert!(occipital_overlap(&frontal, 0.2, 0.25) < 0.05);
    }
}
