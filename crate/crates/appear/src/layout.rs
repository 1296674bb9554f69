//! Built-in 10-20 electrode coordinates on the unit head disc.
//!
//! Positions are derived geodesically: electrodes live on a unit sphere with
//! the vertex (Cz) on top and the nose at azimuth 0. The circumferential
//! 10-20 ring sits at 72 degrees of inclination; in-between electrodes are
//! spherical-arc interpolations along their rows. The 2-D map is the
//! azimuthal-equidistant projection with the ring normalized to radius 1
//! (nose = +y, right ear = +x). Sub-ring electrodes (TP9/TP10) are clamped
//! onto the rim so every scalp position stays within the unit disc.

use std::collections::HashMap;
use std::sync::OnceLock;

const RING_DEG: f64 = 72.0;

fn sphere(incl_deg: f64, az_deg: f64) -> [f64; 3] {
    let incl = incl_deg.to_radians();
    let az = az_deg.to_radians();
    [incl.sin() * az.sin(), incl.sin() * az.cos(), incl.cos()]
}

/// Spherical linear interpolation from `a` (t = 0) to `b` (t = 1).
fn slerp(a: [f64; 3], b: [f64; 3], t: f64) -> [f64; 3] {
    let dot = (a[0] * b[0] + a[1] * b[1] + a[2] * b[2]).clamp(-1.0, 1.0);
    let omega = dot.acos();
    if omega < 1e-12 {
        return a;
    }
    let (sa, sb) = (((1.0 - t) * omega).sin(), (t * omega).sin());
    let s = omega.sin();
    [
        (sa * a[0] + sb * b[0]) / s,
        (sa * a[1] + sb * b[1]) / s,
        (sa * a[2] + sb * b[2]) / s,
    ]
}

fn project(p: [f64; 3]) -> [f64; 2] {
    let incl = p[2].clamp(-1.0, 1.0).acos().to_degrees();
    let r = (incl / RING_DEG).min(1.0);
    let az = p[0].atan2(p[1]);
    [r * az.sin(), r * az.cos()]
}

fn build_table() -> HashMap<&'static str, [f64; 2]> {
    let mut t = HashMap::new();

    // Circumferential ring, 18-degree steps from the nose (positive = right).
    let ring: &[(&str, f64)] = &[
        ("Fpz", 0.0),
        ("Fp2", 18.0),
        ("AF8", 36.0),
        ("F8", 54.0),
        ("FT8", 72.0),
        ("T8", 90.0),
        ("TP8", 108.0),
        ("P8", 126.0),
        ("PO8", 144.0),
        ("O2", 162.0),
        ("Oz", 180.0),
        ("O1", -162.0),
        ("PO7", -144.0),
        ("P7", -126.0),
        ("TP7", -108.0),
        ("T7", -90.0),
        ("FT7", -72.0),
        ("F7", -54.0),
        ("AF7", -36.0),
        ("Fp1", -18.0),
    ];
    for &(label, az) in ring {
        t.insert(label, project(sphere(RING_DEG, az)));
    }

    // Sagittal midline at 18-degree steps.
    let midline: &[(&str, f64, f64)] = &[
        ("AFz", 54.0, 0.0),
        ("Fz", 36.0, 0.0),
        ("FCz", 18.0, 0.0),
        ("Cz", 0.0, 0.0),
        ("CPz", 18.0, 180.0),
        ("Pz", 36.0, 180.0),
        ("POz", 54.0, 180.0),
    ];
    for &(label, incl, az) in midline {
        t.insert(label, project(sphere(incl, az)));
    }

    // Coronal (ear-to-ear) arc through Cz.
    for &(label, incl, az) in &[("C3", 36.0, -90.0), ("C4", 36.0, 90.0)] {
        t.insert(label, project(sphere(incl, az)));
    }

    // Row arcs from the ring electrode to the midline electrode; fractions
    // follow the 10-10 subdivision of each half-row.
    let rows: &[(&str, &str, &[(&str, f64)])] = &[
        ("F7", "Fz", &[("F5", 0.25), ("F3", 0.5), ("F1", 0.75)]),
        ("F8", "Fz", &[("F6", 0.25), ("F4", 0.5), ("F2", 0.75)]),
        ("FT7", "FCz", &[("FC5", 0.25), ("FC3", 0.5), ("FC1", 0.75)]),
        ("FT8", "FCz", &[("FC6", 0.25), ("FC4", 0.5), ("FC2", 0.75)]),
        ("TP7", "CPz", &[("CP5", 0.25), ("CP3", 0.5), ("CP1", 0.75)]),
        ("TP8", "CPz", &[("CP6", 0.25), ("CP4", 0.5), ("CP2", 0.75)]),
        ("P7", "Pz", &[("P5", 0.25), ("P3", 0.5), ("P1", 0.75)]),
        ("P8", "Pz", &[("P6", 0.25), ("P4", 0.5), ("P2", 0.75)]),
    ];
    let ring_map: HashMap<&str, f64> = ring.iter().cloned().collect();
    let mid_map: HashMap<&str, (f64, f64)> = midline
        .iter()
        .map(|&(l, incl, az)| (l, (incl, az)))
        .collect();
    for &(from, to, points) in rows {
        let a = sphere(RING_DEG, ring_map[from]);
        let (incl, az) = mid_map[to];
        let b = sphere(incl, az);
        for &(label, frac) in points {
            t.insert(label, project(slerp(a, b, frac)));
        }
    }

    // Mastoid-adjacent electrodes sit 18 degrees below the ring; the
    // projection clamps them onto the rim.
    t.insert("TP9", project(sphere(90.0, -108.0)));
    t.insert("TP10", project(sphere(90.0, 108.0)));

    t
}

fn table() -> &'static HashMap<&'static str, [f64; 2]> {
    static TABLE: OnceLock<HashMap<&'static str, [f64; 2]>> = OnceLock::new();
    TABLE.get_or_init(build_table)
}

/// Disc coordinates for a known scalp label; `None` for unknown labels.
pub fn standard_position(label: &str) -> Option<[f64; 2]> {
    table().get(label).copied()
}

/// The 31-channel scalp montage used by the default session layout
/// (the raw acquisition adds one ECG back-electrode channel).
pub fn default_montage() -> Vec<&'static str> {
    vec![
        "Fp1", "Fp2", "F7", "F3", "Fz", "F4", "F8", "FC5", "FC1", "FCz", "FC2", "FC6", "T7", "C3",
        "Cz", "C4", "T8", "TP9", "CP5", "CP1", "CP2", "CP6", "TP10", "P7", "P3", "Pz", "P4", "P8",
        "O1", "Oz", "O2",
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn montage_positions_all_known_and_inside_disc() {
        for label in default_montage() {
            let p = standard_position(label).unwrap_or_else(|| panic!("missing {label}"));
            let r = (p[0] * p[0] + p[1] * p[1]).sqrt();
            assert!(r <= 1.0 + 1e-12, "{label} at radius {r}");
        }
    }

    #[test]
    fn key_sites_are_where_expected() {
        let cz = standard_position("Cz").unwrap();
        assert!(cz[0].abs() < 1e-12 && cz[1].abs() < 1e-12);

        let fp1 = standard_position("Fp1").unwrap();
        assert!(fp1[1] > 0.9, "Fp1 should be far anterior: {fp1:?}");
        assert!(fp1[0] < 0.0, "Fp1 is on the left");

        let o1 = standard_position("O1").unwrap();
        assert!(o1[1] < -0.9, "O1 should be far posterior: {o1:?}");

        let t7 = standard_position("T7").unwrap();
        assert!((t7[0] + 1.0).abs() < 1e-9 && t7[1].abs() < 1e-9);

        // Left/right mirror symmetry.
        for (l, r) in [("F3", "F4"), ("FC5", "FC6"), ("P7", "P8"), ("O1", "O2")] {
            let pl = standard_position(l).unwrap();
            let pr = standard_position(r).unwrap();
            assert!((pl[0] + pr[0]).abs() < 1e-9);
            assert!((pl[1] - pr[1]).abs() < 1e-9);
        }
    }

    #[test]
    fn frontal_channels_in_anterior_third() {
        for label in ["Fp1", "Fp2", "F7", "F8", "F3", "F4", "Fz"] {
            let p = standard_position(label).unwrap();
            assert!(p[1] > 0.33, "{label} y = {}", p[1]);
        }
    }

    #[test]
    fn unknown_label_is_none() {
        assert!(standard_position("XX9").is_none());
    }
}
