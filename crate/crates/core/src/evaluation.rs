//! Error statistics against a ground-truth map and color-transfer export.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;

use crate::assignment::Permutation;
use crate::error::{Error, Result};
use crate::geometry::{write_ply_colored, TriMesh};
use crate::metric::MetricSpace;

/// Thresholds `0, 0.0025, …, 0.25`.
pub fn default_thresholds() -> Vec<f64> {
    (0..=100).map(|k| k as f64 / 400.0).collect()
}

/// `d_Y(map[i], truth[i]) / diameter` for every `i`.
///
/// `map` need not be a bijection. Distance columns are computed at whichever
/// of the two target sets has fewer distinct vertices among the disagreeing
/// rows.
pub fn geodesic_errors(map: &[usize], truth: &[usize], space_y: &MetricSpace, diameter: f64) -> Result<Vec<f64>> {
    if map.len() != truth.len() {
        return Err(Error::Validation(format!(
            "map has {} entries but the ground truth has {}",
            map.len(),
            truth.len()
        )));
    }
    if !(diameter > 0.0 && diameter.is_finite()) {
        return Err(Error::InvalidArgument(format!("diameter must be positive, got {diameter}")));
    }
    let n = space_y.len();
    if let Some(&v) = map.iter().chain(truth).find(|&&v| v >= n) {
        return Err(Error::Validation(format!("target {v} is out of range for {n} points")));
    }
    let mut by_truth: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    let mut by_map: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for i in 0..map.len() {
        if map[i] != truth[i] {
            by_truth.entry(truth[i]).or_default().push(i);
            by_map.entry(map[i]).or_default().push(i);
        }
    }
    let (groups, other) = if by_truth.len() <= by_map.len() {
        (by_truth, map)
    } else {
        (by_map, truth)
    };
    let mut errors = vec![0.0; map.len()];
    for (source, rows) in groups {
        let col = space_y.distance_column_uncached(source)?;
        for i in rows {
            errors[i] = col[other[i]] / diameter;
        }
    }
    Ok(errors)
}

/// Cumulative fraction of errors at or below each threshold.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ErrorCurve {
    pub thresholds: Vec<f64>,
    pub fractions: Vec<f64>,
}

impl ErrorCurve {
    /// Two columns with a `threshold,fraction` header.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("threshold,fraction\n");
        for (t, f) in self.thresholds.iter().zip(&self.fractions) {
            let _ = writeln!(s, "{t},{f}");
        }
        s
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }

    /// Fraction at the first threshold `>= t`, if any.
    pub fn fraction_at(&self, t: f64) -> Option<f64> {
        let k = self.thresholds.iter().position(|&x| x >= t)?;
        Some(self.fractions[k])
    }
}

pub fn error_curve(errors: &[f64], thresholds: &[f64]) -> Result<ErrorCurve> {
    if thresholds.iter().any(|t| !(*t >= 0.0)) || thresholds.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidArgument("thresholds must be non-negative and increasing".into()));
    }
    if errors.is_empty() {
        return Err(Error::InvalidArgument("no errors to summarize".into()));
    }
    let mut sorted = errors.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let fractions = thresholds
        .iter()
        .map(|&t| sorted.partition_point(|&e| e <= t) as f64 / n)
        .collect();
    Ok(ErrorCurve {
        thresholds: thresholds.to_vec(),
        fractions,
    })
}

/// Mean and median of a list of errors.
pub fn summarize(errors: &[f64]) -> (f64, f64) {
    let mut s = errors.to_vec();
    s.sort_by(f64::total_cmp);
    let mean = s.iter().sum::<f64>() / s.len() as f64;
    let mid = s.len() / 2;
    let median = if s.len() % 2 == 1 { s[mid] } else { 0.5 * (s[mid - 1] + s[mid]) };
    (mean, median)
}

/// RGB of each vertex from its position in the mesh's bounding box.
pub fn position_colors(mesh: &TriMesh) -> Vec<[u8; 3]> {
    let (lo, hi) = mesh.bounding_box();
    mesh.vertices()
        .iter()
        .map(|v| {
            let mut c = [0u8; 3];
            for a in 0..3 {
                let extent = hi[a] - lo[a];
                let u = if extent > 0.0 { (v[a] - lo[a]) / extent } else { 0.5 };
                c[a] = (u.clamp(0.0, 1.0) * 255.0).round() as u8;
            }
            c
        })
        .collect()
}

/// Write `mesh_y` as a colored PLY where vertex `j` carries the position
/// color of the X vertex mapped onto it.
pub fn color_transfer_export(mesh_x: &TriMesh, mesh_y: &TriMesh, map: &Permutation, out: impl AsRef<Path>) -> Result<()> {
    if map.len() != mesh_x.n_vertices() || map.len() != mesh_y.n_vertices() {
        return Err(Error::Validation(format!(
            "map has {} entries for meshes with {} and {} vertices",
            map.len(),
            mesh_x.n_vertices(),
            mesh_y.n_vertices()
        )));
    }
    let source = position_colors(mesh_x);
    let colors: Vec<[u8; 3]> = map.inverse().iter().map(|&i| source[i]).collect();
    write_ply_colored(mesh_y, &colors, out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{load_ply_with_colors, torus_grid};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn exact_map_has_zero_error() {
        let c = MetricSpace::circle(8, 8.0).unwrap();
        let id: Vec<usize> = (0..8).collect();
        assert!(geodesic_errors(&id, &id, &c, 4.0).unwrap().iter().all(|&e| e == 0.0));
    }

    #[test]
    fn shifted_circle() {
        let c = MetricSpace::circle(8, 8.0).unwrap();
        let truth: Vec<usize> = (0..8).collect();
        let shifted: Vec<usize> = (0..8).map(|i| (i + 1) % 8).collect();
        let e = geodesic_errors(&shifted, &truth, &c, 4.0).unwrap();
        assert!(e.iter().all(|&x| x == 0.25));
    }

    #[test]
    fn antipode_has_unit_error() {
        let c = MetricSpace::circle(8, 8.0).unwrap();
        let truth: Vec<usize> = (0..8).collect();
        let mut m = truth.clone();
        m[2] = 6;
        let e = geodesic_errors(&m, &truth, &c, 4.0).unwrap();
        assert_eq!(e.iter().filter(|&&x| x == 1.0).count(), 1);
        assert_eq!(e.iter().filter(|&&x| x == 0.0).count(), 7);
    }

    #[test]
    fn size_mismatch_names_both() {
        let c = MetricSpace::circle(8, 8.0).unwrap();
        let err = geodesic_errors(&[0, 1], &[0, 1, 2], &c, 4.0).unwrap_err().to_string();
        assert!(err.contains('2') && err.contains('3'), "{err}");
    }

    #[test]
    fn curve_examples() {
        let c = error_curve(&[0.0; 4], &default_thresholds()).unwrap();
        assert!(c.fractions.iter().all(|&f| f == 1.0));
        let c = error_curve(&[0.0, 0.5, 1.0], &[0.25, 0.75, 1.0]).unwrap();
        assert_eq!(c.fractions, vec![1.0 / 3.0, 2.0 / 3.0, 1.0]);
        assert!(error_curve(&[0.1], &[0.5, 0.2]).is_err());
        assert_eq!(c.to_csv().lines().next(), Some("threshold,fraction"));
        assert_eq!(default_thresholds().len(), 101);
        assert_eq!(default_thresholds()[100], 0.25);
    }

    #[test]
    fn curve_matches_sort_and_scan() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let errors: Vec<f64> = (0..500).map(|_| rng.gen::<f64>() * 0.3).collect();
        let t = default_thresholds();
        let c = error_curve(&errors, &t).unwrap();
        let mut s = errors.clone();
        s.sort_by(f64::total_cmp);
        let mut k = 0;
        for (ti, &th) in t.iter().enumerate() {
            while k < s.len() && s[k] <= th {
                k += 1;
            }
            assert_eq!(c.fractions[ti], k as f64 / 500.0);
        }
        assert!(c.fractions.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn color_transfer() {
        let mesh = torus_grid(6, 8, 2.0, 0.5);
        let n = mesh.n_vertices();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("id.ply");
        color_transfer_export(&mesh, &mesh, &Permutation::identity(n), &path).unwrap();
        let (back, colors) = load_ply_with_colors(&path).unwrap();
        assert_eq!(back.n_vertices(), n);
        assert_eq!(colors.unwrap(), position_colors(&mesh));

        let rev = Permutation::new((0..n).rev().collect()).unwrap();
        let path = dir.path().join("rev.ply");
        color_transfer_export(&mesh, &mesh, &rev, &path).unwrap();
        let (_, colors) = load_ply_with_colors(&path).unwrap();
        let mut expect = position_colors(&mesh);
        expect.reverse();
        assert_eq!(colors.unwrap(), expect);
    }

    #[test]
    fn summary_statistics() {
        assert_eq!(summarize(&[3.0, 1.0, 2.0]), (2.0, 2.0));
        assert_eq!(summarize(&[0.0, 0.0, 1.0, 3.0]), (1.0, 0.5));
    }
}
