//! Geometric classification of relaxed ion crystals.
//!
//! Reports whether a configuration is a linear chain, a flat (single-plane)
//! crystal, a zigzag ladder in or out of the crystal plane, or a genuinely
//! three-dimensional cluster, along with shell occupancies, nearest-neighbor
//! spacing statistics, and driven-motion amplitude estimates. All thresholds
//! scale with the mean nearest-neighbor spacing so the classifier is
//! insensitive to absolute trap size.

use nalgebra::{Matrix3, SymmetricEigen, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::physics::micromotion_amplitude;
use crate::scalar::{count, lit, Real};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Category {
    /// Straight chain; includes any two-ion crystal.
    Linear,
    /// Flat to within the planarity threshold.
    Planar,
    /// Quasi-1D ladder alternating within the crystal plane.
    PlanarZigzag,
    /// Quasi-1D ladder alternating along the trap axis.
    OutOfPlaneZigzag,
    ThreeDimensional,
}

impl Category {
    pub fn is_planar(self) -> bool {
        matches!(self, Category::Planar | Category::PlanarZigzag | Category::Linear)
    }

    pub fn is_zigzag(self) -> bool {
        matches!(self, Category::PlanarZigzag | Category::OutOfPlaneZigzag)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ClassifyOptions {
    /// Flatness threshold as a fraction of the mean neighbor spacing.
    pub planarity_eta: f64,
    /// Radial gap (fraction of median neighbor spacing) that separates
    /// shells.
    pub shell_gap_factor: f64,
    /// Minimum fraction of adjacent sign alternations for a zigzag verdict.
    pub zigzag_flip_fraction: f64,
}

impl Default for ClassifyOptions {
    fn default() -> Self {
        Self {
            planarity_eta: 0.05,
            shell_gap_factor: 0.5,
            zigzag_flip_fraction: 0.75,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound(
    serialize = "T: Serialize",
    deserialize = "T: serde::de::DeserializeOwned"
))]
pub struct SpacingStats<T> {
    pub min: T,
    pub max: T,
    pub mean: T,
    pub std_dev: T,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(bound(
    serialize = "T: Serialize",
    deserialize = "T: serde::de::DeserializeOwned"
))]
pub struct StructureReport<T> {
    pub category: Category,
    /// Ions per concentric shell, innermost first.
    pub shell_occupancies: Vec<usize>,
    /// Nearest-neighbor statistics; absent for a single ion.
    pub nn_spacing: Option<SpacingStats<T>>,
    /// RMS extents along the two widest principal axes.
    pub planar_extent: [T; 2],
    /// Largest deviation from the median crystal plane.
    pub max_abs_z: T,
}

impl<T: Real> StructureReport<T> {
    /// Direct flatness test against the median plane. Unlike
    /// [`Category::is_planar`], this rejects a chain standing along z.
    pub fn is_flat(&self, opts: &ClassifyOptions) -> bool {
        match &self.nn_spacing {
            None => true,
            Some(s) => self.max_abs_z <= lit::<T>(opts.planarity_eta) * s.mean,
        }
    }
}

/// Distance from each ion to its nearest neighbor.
pub fn nearest_neighbor_distances<T: Real>(positions: &[Vector3<T>]) -> Result<Vec<T>> {
    if positions.len() < 2 {
        return Err(Error::TooFewIons {
            need: 2,
            got: positions.len(),
        });
    }
    Ok(positions
        .iter()
        .enumerate()
        .map(|(i, p)| {
            positions
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != i)
                .map(|(_, q)| (p - q).norm())
                .fold(T::max_value().unwrap_or_else(T::one), |a, b| if b < a { b } else { a })
        })
        .collect())
}

pub fn spacing_stats<T: Real>(positions: &[Vector3<T>]) -> Result<SpacingStats<T>> {
    let d = nearest_neighbor_distances(positions)?;
    let n: T = count(d.len());
    let mean = d.iter().copied().sum::<T>() / n;
    let var = d
        .iter()
        .map(|&x| (x - mean) * (x - mean))
        .sum::<T>()
        / n;
    let mut min = d[0];
    let mut max = d[0];
    for &x in &d[1..] {
        if x < min {
            min = x;
        }
        if x > max {
            max = x;
        }
    }
    Ok(SpacingStats {
        min,
        max,
        mean,
        std_dev: var.sqrt(),
    })
}

fn median<T: Real>(values: &[T]) -> T {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).expect("finite values"));
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) * lit::<T>(0.5)
    }
}

/// Groups sorted radial distances into shells wherever the gap between
/// consecutive radii exceeds `gap`. Returns occupancies, innermost first.
pub fn shell_decomposition<T: Real>(radii: &[T], gap: T) -> Vec<usize> {
    if radii.is_empty() {
        return Vec::new();
    }
    let mut sorted = radii.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite radii"));
    let mut shells = vec![1usize];
    for w in sorted.windows(2) {
        if w[1] - w[0] > gap {
            shells.push(1);
        } else {
            *shells.last_mut().expect("nonempty") += 1;
        }
    }
    shells
}

/// Alternation test along a chain: `minor` are transverse coordinates in
/// chain order. Ions with tiny displacement (chain ends sitting on the axis)
/// are ignored for the sign-flip count.
fn is_zigzag<T: Real>(minor: &[T], eta: T, flip_fraction: f64) -> bool {
    let amp = minor
        .iter()
        .fold(T::zero(), |a, &b| if b.abs() > a { b.abs() } else { a });
    if amp <= eta {
        return false;
    }
    let floor = amp * lit::<T>(0.1);
    let strong: Vec<T> = minor.iter().copied().filter(|m| m.abs() > floor).collect();
    if strong.len() < 3 {
        return false;
    }
    let flips = strong
        .windows(2)
        .filter(|w| w[0] * w[1] < T::zero())
        .count();
    (flips as f64) >= flip_fraction * ((strong.len() - 1) as f64)
}

struct Principal<T> {
    axes: [Vector3<T>; 3],
    /// RMS extents, descending.
    rms: [T; 3],
    centroid: Vector3<T>,
}

fn principal_axes<T: Real>(positions: &[Vector3<T>]) -> Principal<T> {
    let n: T = count(positions.len());
    let centroid = positions.iter().fold(Vector3::zeros(), |a, p| a + p) / n;
    let mut cov = Matrix3::zeros();
    for p in positions {
        let d = p - centroid;
        cov += d * d.transpose();
    }
    cov /= n;
    let eig = SymmetricEigen::new(cov);
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .partial_cmp(&eig.eigenvalues[a])
            .expect("finite eigenvalues")
    });
    let mut axes = [Vector3::zeros(); 3];
    let mut rms = [T::zero(); 3];
    for (slot, &i) in order.iter().enumerate() {
        axes[slot] = eig.eigenvectors.column(i).into_owned();
        rms[slot] = eig.eigenvalues[i].max(T::zero()).sqrt();
    }
    Principal {
        axes,
        rms,
        centroid,
    }
}

pub fn classify<T: Real>(
    positions: &[Vector3<T>],
    opts: &ClassifyOptions,
) -> Result<StructureReport<T>> {
    if positions.is_empty() {
        return Err(Error::TooFewIons { need: 1, got: 0 });
    }
    if positions.len() == 1 {
        return Ok(StructureReport {
            category: Category::Planar,
            shell_occupancies: vec![1],
            nn_spacing: None,
            planar_extent: [T::zero(); 2],
            max_abs_z: T::zero(),
        });
    }

    let stats = spacing_stats(positions)?;
    let eta: T = lit::<T>(opts.planarity_eta) * stats.mean;
    let pca = principal_axes(positions);

    let zs: Vec<T> = positions.iter().map(|p| p[2]).collect();
    let z_med = median(&zs);
    let max_abs_z = zs
        .iter()
        .fold(T::zero(), |a, &z| {
            let d = (z - z_med).abs();
            if d > a {
                d
            } else {
                a
            }
        });
    let planar_z = max_abs_z <= eta;

    let category = if pca.rms[1] <= eta {
        Category::Linear
    } else {
        // Zigzag is a quasi-1D pattern: only test elongated crystals, so a
        // round 2D lattice with degenerate axes is never probed.
        let elongated = pca.rms[0] > lit::<T>(2.0) * pca.rms[1];
        let zig = if elongated && pca.rms[2] <= eta && positions.len() >= 3 {
            let mut along: Vec<(T, T)> = positions
                .iter()
                .map(|p| {
                    let d = p - pca.centroid;
                    (d.dot(&pca.axes[0]), d.dot(&pca.axes[1]))
                })
                .collect();
            along.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite"));
            let minor: Vec<T> = along.iter().map(|t| t.1).collect();
            is_zigzag(&minor, eta, opts.zigzag_flip_fraction)
        } else {
            false
        };
        if zig {
            // Which way does the ladder alternate? Compare the transverse
            // axis with vertical.
            if pca.axes[1][2].abs() > lit(0.7) {
                Category::OutOfPlaneZigzag
            } else {
                Category::PlanarZigzag
            }
        } else if planar_z {
            Category::Planar
        } else {
            Category::ThreeDimensional
        }
    };

    // Shell radii: in-plane for flat crystals, full 3D otherwise.
    let radii: Vec<T> = positions
        .iter()
        .map(|p| {
            let d = p - pca.centroid;
            if category.is_planar() {
                (d[0] * d[0] + d[1] * d[1]).sqrt()
            } else {
                d.norm()
            }
        })
        .collect();
    let gap = lit::<T>(opts.shell_gap_factor) * median(&nearest_neighbor_distances(positions)?);
    let shell_occupancies = shell_decomposition(&radii, gap);

    Ok(StructureReport {
        category,
        shell_occupancies,
        nn_spacing: Some(stats),
        planar_extent: [pca.rms[0], pca.rms[1]],
        max_abs_z,
    })
}

/// Driven-motion amplitude of each ion, from its in-plane offset to the RF
/// null line.
pub fn micromotion_amplitudes<T: Real>(
    positions: &[Vector3<T>],
    rf_null: &Vector3<T>,
    q_radial: T,
) -> Result<Vec<T>> {
    positions
        .iter()
        .map(|p| {
            let dx = p[0] - rf_null[0];
            let dy = p[1] - rf_null[1];
            micromotion_amplitude(q_radial, (dx * dx + dy * dy).sqrt())
        })
        .collect()
}

/// Amplitude difference of the driven motion between two ions; depends only
/// on their in-plane separation, not on where the null sits.
pub fn differential_micromotion<T: Real>(
    a: &Vector3<T>,
    b: &Vector3<T>,
    q_radial: T,
) -> Result<T> {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    micromotion_amplitude(q_radial, (dx * dx + dy * dy).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn p(x: f64, y: f64, z: f64) -> Vector3<f64> {
        Vector3::new(x, y, z)
    }

    fn hex7(s: f64) -> Vec<Vector3<f64>> {
        let mut v = vec![p(0.0, 0.0, 0.0)];
        for k in 0..6 {
            let a = std::f64::consts::TAU * (k as f64) / 6.0 + 0.3;
            v.push(p(s * a.cos(), s * a.sin(), 0.0));
        }
        v
    }

    #[test]
    fn hexagon_with_center_is_planar_with_two_shells() {
        let r = classify(&hex7(9.0e-6), &ClassifyOptions::default()).unwrap();
        assert_eq!(r.category, Category::Planar);
        assert_eq!(r.shell_occupancies, vec![1, 6]);
        let nn = r.nn_spacing.unwrap();
        assert_relative_eq!(nn.mean, 9.0e-6, max_relative = 1e-9);
        assert!(nn.std_dev < 1e-12);
        assert_eq!(r.max_abs_z, 0.0);
    }

    #[test]
    fn chain_is_linear() {
        let ions: Vec<_> = (0..5).map(|i| p(i as f64 * 8.0e-6, 0.0, 0.0)).collect();
        let r = classify(&ions, &ClassifyOptions::default()).unwrap();
        assert_eq!(r.category, Category::Linear);
        assert_eq!(r.shell_occupancies.iter().sum::<usize>(), 5);
    }

    #[test]
    fn two_ions_are_linear() {
        let r = classify(
            &[p(-5.0e-6, 0.0, 0.0), p(5.0e-6, 0.0, 0.0)],
            &ClassifyOptions::default(),
        )
        .unwrap();
        assert_eq!(r.category, Category::Linear);
    }

    #[test]
    fn in_plane_ladder_is_planar_zigzag() {
        let s = 8.0e-6;
        let amp = 1.5e-6;
        let ions: Vec<_> = (0..9)
            .map(|i| p(i as f64 * s, if i % 2 == 0 { amp } else { -amp }, 0.0))
            .collect();
        let r = classify(&ions, &ClassifyOptions::default()).unwrap();
        assert_eq!(r.category, Category::PlanarZigzag);
        assert!(r.category.is_planar());
        assert!(r.category.is_zigzag());
    }

    #[test]
    fn vertical_ladder_is_out_of_plane_zigzag() {
        let s = 8.0e-6;
        let amp = 1.5e-6;
        let ions: Vec<_> = (0..9)
            .map(|i| p(i as f64 * s, 0.0, if i % 2 == 0 { amp } else { -amp }))
            .collect();
        let r = classify(&ions, &ClassifyOptions::default()).unwrap();
        assert_eq!(r.category, Category::OutOfPlaneZigzag);
        assert!(!r.category.is_planar());
    }

    #[test]
    fn two_layer_cluster_is_three_dimensional() {
        let s = 9.0e-6;
        let mut ions = hex7(s);
        for q in hex7(s) {
            ions.push(q + p(0.5 * s, 0.3 * s, 0.8 * s));
        }
        let r = classify(&ions, &ClassifyOptions::default()).unwrap();
        assert_eq!(r.category, Category::ThreeDimensional);
    }

    #[test]
    fn classification_is_invariant_under_rotation_about_z() {
        let base = hex7(9.0e-6);
        let r0 = classify(&base, &ClassifyOptions::default()).unwrap();
        for angle in [0.4, 1.1, 2.9] {
            let (s, c) = f64::sin_cos(angle);
            let rotated: Vec<_> = base
                .iter()
                .map(|q| p(c * q[0] - s * q[1], s * q[0] + c * q[1], q[2]))
                .collect();
            let r = classify(&rotated, &ClassifyOptions::default()).unwrap();
            assert_eq!(r.category, r0.category);
            assert_eq!(r.shell_occupancies, r0.shell_occupancies);
        }
    }

    #[test]
    fn single_ion_report() {
        let r = classify(&[p(1.0e-6, 2.0e-6, 3.0e-6)], &ClassifyOptions::default()).unwrap();
        assert_eq!(r.category, Category::Planar);
        assert_eq!(r.shell_occupancies, vec![1]);
        assert!(r.nn_spacing.is_none());
    }

    #[test]
    fn shell_split_follows_radial_gaps() {
        let radii = [0.0, 9.0, 9.2, 9.1, 17.8, 18.0];
        let shells = shell_decomposition(&radii[..], 4.0);
        assert_eq!(shells, vec![1, 3, 2]);
        assert_eq!(shell_decomposition::<f64>(&[], 1.0), Vec::<usize>::new());
    }

    #[test]
    fn micromotion_reference_values() {
        // Stability parameter 0.102: 27 um from the null gives 1.377 um of
        // driven motion; a 54 um in-plane pair differs by 2.754 um.
        let q = 0.102;
        let a = p(-27.0e-6, 0.0, 5.0e-6);
        let b = p(27.0e-6, 0.0, -2.0e-6);
        let amps =
            micromotion_amplitudes(&[a, b], &Vector3::zeros(), q).unwrap();
        assert_relative_eq!(amps[0], 1.377e-6, max_relative = 1e-12);
        assert_relative_eq!(amps[1], 1.377e-6, max_relative = 1e-12);
        let diff = differential_micromotion(&a, &b, q).unwrap();
        assert_relative_eq!(diff, 2.754e-6, max_relative = 1e-12);
        // Within 2 percent of 2.8 um.
        assert!((diff - 2.8e-6).abs() / 2.8e-6 < 0.02);
        // Per-micron sensitivity at this operating point.
        let per_um = differential_micromotion(&p(0.0, 0.0, 0.0), &p(1.0e-6, 0.0, 0.0), q)
            .unwrap();
        assert_relative_eq!(per_um, 0.051e-6, max_relative = 1e-12);
    }
}
