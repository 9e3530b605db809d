//! Uniform Cartesian grids over the trap enclosure.
//!
//! Node `(i, j, k)` sits at `origin + spacing * (i, j, k)`; values are stored
//! x-fastest (`idx = i + nx * (j + ny * k)`). Grids are centered on the trap
//! with an odd node count per axis so the trap center is exactly a node and
//! the grid-preserving symmetries (90 deg rotations, axis and diagonal
//! mirrors, z mirror) map nodes onto nodes.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::geometry::{BasisId, Electrode, ElectrodeGeometry};
use crate::scalar::Real;

/// Mask label: vacuum node, free to relax.
pub const LABEL_FREE: u8 = 0;
/// Mask labels 1..=8: ring sectors.
pub const LABEL_SECTOR_BASE: u8 = 1;
pub const LABEL_ENDCAP_TOP: u8 = 9;
pub const LABEL_ENDCAP_BOTTOM: u8 = 10;
/// Grounded enclosure face.
pub const LABEL_ENCLOSURE: u8 = 11;

/// Placement of a uniform grid: origin of node (0,0,0), spacing, node counts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridLayout {
    /// Position of node (0, 0, 0), m.
    pub origin: [f64; 3],
    /// Node spacing, m (isotropic).
    pub spacing: f64,
    /// Node counts per axis.
    pub dims: [usize; 3],
}

impl GridLayout {
    /// Cube of side `box_side` centered on the origin. The node count per
    /// axis is forced odd (rounding the half-width down) so a node lands
    /// exactly on the center.
    pub fn centered_cube(box_side: f64, spacing: f64) -> Result<Self> {
        if !(spacing > 0.0 && spacing.is_finite() && box_side > 2.0 * spacing) {
            return Err(Error::InvalidParameter(format!(
                "bad grid extent: box {box_side} m, spacing {spacing} m"
            )));
        }
        let half = (box_side / 2.0 / spacing).round() as usize;
        let n = 2 * half + 1;
        let o = -(half as f64) * spacing;
        Ok(Self {
            origin: [o, o, o],
            spacing,
            dims: [n, n, n],
        })
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.dims[0] * self.dims[1] * self.dims[2]
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn idx(&self, i: usize, j: usize, k: usize) -> usize {
        i + self.dims[0] * (j + self.dims[1] * k)
    }

    #[inline]
    pub fn coords(&self, idx: usize) -> [usize; 3] {
        let i = idx % self.dims[0];
        let j = (idx / self.dims[0]) % self.dims[1];
        let k = idx / (self.dims[0] * self.dims[1]);
        [i, j, k]
    }

    /// Physical position of a node, m.
    ///
    /// Evaluated about the central node, so on centered grids each coordinate
    /// is a single product `signed_offset * spacing`. Mirrored node indices
    /// then yield exactly negated positions and the grid motions (axis and
    /// diagonal mirrors, 90 deg rotations, z mirror) permute node positions
    /// without rounding drift, which keeps electrode classification of nodes
    /// lying exactly on a surface consistent across symmetric images.
    #[inline]
    pub fn pos(&self, i: usize, j: usize, k: usize) -> [f64; 3] {
        let c = self.center();
        let h = self.spacing;
        let axis = |n: usize, a: usize| {
            (n as f64 - c[a] as f64) * h + (self.origin[a] + c[a] as f64 * h)
        };
        [axis(i, 0), axis(j, 1), axis(k, 2)]
    }

    /// Index triple of the central node (dims are odd by construction).
    pub fn center(&self) -> [usize; 3] {
        [self.dims[0] / 2, self.dims[1] / 2, self.dims[2] / 2]
    }

    /// True on any face of the bounding cube.
    #[inline]
    pub fn on_boundary(&self, i: usize, j: usize, k: usize) -> bool {
        i == 0
            || j == 0
            || k == 0
            || i == self.dims[0] - 1
            || j == self.dims[1] - 1
            || k == self.dims[2] - 1
    }
}

/// Fractional arm lengths from near-surface free nodes to the electrode
/// surface, as a fraction of the spacing, in stencil order
/// (-x, +x, -y, +y, -z, +z). Only nodes with at least one shortened arm
/// appear; absent nodes relax on full-length arms.
///
/// Arms let the relaxation place each Dirichlet surface at its true sub-node
/// position instead of rounding it to the nearest lattice plane, which would
/// otherwise move every surface by up to half a spacing depending on where
/// the grid happens to fall.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct BoundaryArms {
    map: std::collections::HashMap<u32, [f64; 6]>,
}

impl BoundaryArms {
    #[inline]
    pub fn get(&self, idx: usize) -> Option<&[f64; 6]> {
        self.map.get(&u32::try_from(idx).ok()?)
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }
}

/// Rasterized electrode occupancy: one label byte per node.
#[derive(Debug, Clone, PartialEq)]
pub struct MaskGrid {
    pub layout: GridLayout,
    pub labels: Vec<u8>,
    /// Sub-node surface positions for free nodes bordering an electrode;
    /// empty for synthetic masks, which then use full-length arms throughout.
    pub arms: BoundaryArms,
    /// Hash of the generating [`ElectrodeGeometry`]; keys basis caches.
    pub geometry_hash: [u8; 32],
}

impl MaskGrid {
    #[inline]
    pub fn label(&self, idx: usize) -> u8 {
        self.labels[idx]
    }

    #[inline]
    pub fn is_free(&self, idx: usize) -> bool {
        self.labels[idx] == LABEL_FREE
    }

    pub fn label_of(e: Electrode) -> u8 {
        match e {
            Electrode::Sector(k) => LABEL_SECTOR_BASE + k - 1,
            Electrode::EndcapTop => LABEL_ENDCAP_TOP,
            Electrode::EndcapBottom => LABEL_ENDCAP_BOTTOM,
        }
    }

    pub fn electrode_of(label: u8) -> Option<Electrode> {
        match label {
            l if (LABEL_SECTOR_BASE..LABEL_SECTOR_BASE + 8).contains(&l) => {
                Some(Electrode::Sector(l - LABEL_SECTOR_BASE + 1))
            }
            LABEL_ENDCAP_TOP => Some(Electrode::EndcapTop),
            LABEL_ENDCAP_BOTTOM => Some(Electrode::EndcapBottom),
            _ => None,
        }
    }

    /// Imposed unit-basis voltage of a labeled node for the given basis,
    /// `None` for free nodes.
    #[inline]
    pub fn basis_voltage(&self, idx: usize, basis: BasisId) -> Option<f64> {
        let l = self.labels[idx];
        if l == LABEL_FREE {
            return None;
        }
        let v = match basis {
            BasisId::Dc(e) => (l == Self::label_of(e)) as u8,
            BasisId::Rf => (l == LABEL_ENDCAP_TOP || l == LABEL_ENDCAP_BOTTOM) as u8,
            BasisId::Enclosure => (l == LABEL_ENCLOSURE) as u8,
        };
        Some(f64::from(v))
    }

    pub fn node_count(&self, label: u8) -> usize {
        self.labels.iter().filter(|&&l| l == label).count()
    }
}

/// Free nodes closer to a surface than this fraction of the spacing are
/// folded onto the electrode itself rather than given a nearly degenerate
/// relaxation weight.
const SNAP_FRACTION: f64 = 0.05;

/// Rasterizes the electrode geometry onto a centered cubic grid.
///
/// Requires at least four nodes across the endcap gap so the trap interior is
/// resolved at all.
pub fn rasterize(geometry: &ElectrodeGeometry, spacing: f64) -> Result<Arc<MaskGrid>> {
    geometry.validate()?;
    let layout = GridLayout::centered_cube(geometry.bounding_box, spacing)?;
    rasterize_onto(geometry, layout)
}

/// Rasterizes onto a caller-supplied layout; grid-placement robustness tests
/// use this to shift the lattice by a fraction of the spacing.
///
/// Every node inside an electrode solid gets that electrode's label and
/// enclosure faces get [`LABEL_ENCLOSURE`]; free nodes bordering metal get
/// fractional arms to the actual surface position.
pub fn rasterize_onto(geometry: &ElectrodeGeometry, layout: GridLayout) -> Result<Arc<MaskGrid>> {
    geometry.validate()?;
    if layout.spacing > geometry.endcap_separation / 4.0 {
        return Err(Error::SpacingTooCoarse {
            spacing: layout.spacing,
            gap: geometry.endcap_separation,
        });
    }
    let mut labels = vec![LABEL_FREE; layout.len()];
    let [nx, ny, nz] = layout.dims;
    for k in 0..nz {
        for j in 0..ny {
            for i in 0..nx {
                let idx = layout.idx(i, j, k);
                if layout.on_boundary(i, j, k) {
                    labels[idx] = LABEL_ENCLOSURE;
                    continue;
                }
                if let Some(e) = geometry.classify(layout.pos(i, j, k))? {
                    labels[idx] = MaskGrid::label_of(e);
                }
            }
        }
    }

    // Fractional arms for free nodes bordering metal. Nodes essentially on a
    // surface become part of it. Both the arm lengths and the snap decision
    // come from exactly symmetric classification arithmetic, so symmetric
    // grids stay exactly symmetric.
    let mut arms = BoundaryArms::default();
    let mut snapped: Vec<(usize, u8)> = Vec::new();
    let stride = [1usize, nx, nx * ny];
    for k in 1..nz - 1 {
        for j in 1..ny - 1 {
            for i in 1..nx - 1 {
                let idx = layout.idx(i, j, k);
                if labels[idx] != LABEL_FREE {
                    continue;
                }
                let p = layout.pos(i, j, k);
                let mut a = [1.0f64; 6];
                let mut shortened = false;
                let mut min_theta = 1.0f64;
                let mut min_label = LABEL_FREE;
                for axis in 0..3 {
                    for (side, sign) in [(0usize, -1.0f64), (1, 1.0)] {
                        let nb = match side {
                            0 => idx - stride[axis],
                            _ => idx + stride[axis],
                        };
                        let l = labels[nb];
                        if l == LABEL_FREE || l == LABEL_ENCLOSURE {
                            continue;
                        }
                        let theta = surface_fraction(geometry, p, axis, sign * layout.spacing)?;
                        if theta < 1.0 - 1e-9 {
                            a[2 * axis + side] = theta;
                            shortened = true;
                            if theta < min_theta {
                                min_theta = theta;
                                min_label = l;
                            }
                        }
                    }
                }
                if !shortened {
                    continue;
                }
                if min_theta < SNAP_FRACTION {
                    snapped.push((idx, min_label));
                } else {
                    arms.map.insert(idx as u32, a);
                }
            }
        }
    }
    for (idx, l) in snapped {
        labels[idx] = l;
    }

    Ok(Arc::new(MaskGrid {
        layout,
        labels,
        arms,
        geometry_hash: geometry.hash(),
    }))
}

/// Fraction of the step `delta` along `axis` from the free point `p` to the
/// electrode surface, by bisection on the classifier. Returns 1.0 when the
/// full step stays outside metal (the neighbor sits exactly on the surface).
fn surface_fraction(
    geometry: &ElectrodeGeometry,
    p: [f64; 3],
    axis: usize,
    delta: f64,
) -> Result<f64> {
    let probe = |t: f64| -> Result<bool> {
        let mut q = p;
        q[axis] += t * delta;
        Ok(geometry.classify(q)?.is_some())
    };
    if !probe(1.0)? {
        return Ok(1.0);
    }
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for _ in 0..54 {
        let mid = 0.5 * (lo + hi);
        if probe(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Scalar samples on a grid, with the Dirichlet mask they were solved under.
///
/// On masked nodes the value equals the imposed boundary value exactly;
/// free-node values come from the relaxation (or a derived field).
#[derive(Debug, Clone)]
pub struct ScalarFieldGrid<T> {
    pub layout: GridLayout,
    pub values: Vec<T>,
    pub mask: Arc<MaskGrid>,
    /// Final max-norm discrete-Laplace residual, V; `None` for derived grids.
    pub achieved_residual: Option<f64>,
}

impl<T: Real> ScalarFieldGrid<T> {
    #[inline]
    pub fn at(&self, i: usize, j: usize, k: usize) -> T {
        self.values[self.layout.idx(i, j, k)]
    }

    /// Second derivatives along the axes at a node via 5-point central
    /// stencils, in value-units per m^2. Errors if the stencil leaves the
    /// free region.
    pub fn curvatures_at_node(&self, node: [usize; 3]) -> Result<[T; 3]> {
        let [i, j, k] = node;
        let [nx, ny, nz] = self.layout.dims;
        if i < 2 || j < 2 || k < 2 || i + 2 >= nx || j + 2 >= ny || k + 2 >= nz {
            return Err(Error::MinimumOnBoundary);
        }
        let h2 = T::from_f64(self.layout.spacing * self.layout.spacing).unwrap();
        let twelve = T::from_f64(12.0).unwrap();
        let c16 = T::from_f64(16.0).unwrap();
        let c30 = T::from_f64(30.0).unwrap();
        let mut out = [T::zero(); 3];
        for (axis, slot) in out.iter_mut().enumerate() {
            let sample = |d: i64| -> Result<T> {
                let mut p = [i as i64, j as i64, k as i64];
                p[axis] += d;
                let idx = self
                    .layout
                    .idx(p[0] as usize, p[1] as usize, p[2] as usize);
                if !self.mask.is_free(idx) {
                    return Err(Error::MinimumOnBoundary);
                }
                Ok(self.values[idx])
            };
            let m2 = sample(-2)?;
            let m1 = sample(-1)?;
            let c0 = sample(0)?;
            let p1 = sample(1)?;
            let p2 = sample(2)?;
            *slot = (-m2 - p2 + c16 * (m1 + p1) - c30 * c0) / (twelve * h2);
        }
        Ok(out)
    }

    /// Copies the axis-aligned sub-grid of all nodes with `|x_a| <= half[a]`.
    /// Returns `None` when fewer than five planes fit along any axis.
    /// Labels come along; fractional boundary arms do not (windows are meant
    /// for interpolation, which never consults them).
    pub fn window(&self, half: [f64; 3]) -> Option<ScalarFieldGrid<T>> {
        let l = self.layout;
        let mut lo = [0usize; 3];
        let mut dims = [0usize; 3];
        for a in 0..3 {
            if !(half[a].is_finite() && half[a] > 0.0) {
                return None;
            }
            let eps = 1e-9 * l.spacing;
            let i0 = ((-half[a] - l.origin[a] - eps) / l.spacing).ceil();
            let i1 = ((half[a] - l.origin[a] + eps) / l.spacing).floor();
            if !(i0 >= 0.0 && i1 < l.dims[a] as f64 && i1 - i0 >= 4.0) {
                return None;
            }
            lo[a] = i0 as usize;
            dims[a] = (i1 - i0) as usize + 1;
        }
        let layout = GridLayout {
            origin: [
                l.origin[0] + lo[0] as f64 * l.spacing,
                l.origin[1] + lo[1] as f64 * l.spacing,
                l.origin[2] + lo[2] as f64 * l.spacing,
            ],
            spacing: l.spacing,
            dims,
        };
        let mut values = Vec::with_capacity(layout.len());
        let mut labels = Vec::with_capacity(layout.len());
        for k in 0..dims[2] {
            for j in 0..dims[1] {
                let row = l.idx(lo[0], lo[1] + j, lo[2] + k);
                values.extend_from_slice(&self.values[row..row + dims[0]]);
                labels.extend_from_slice(&self.mask.labels[row..row + dims[0]]);
            }
        }
        let mask = Arc::new(MaskGrid {
            layout,
            labels,
            arms: BoundaryArms::default(),
            geometry_hash: self.mask.geometry_hash,
        });
        Some(ScalarFieldGrid {
            layout,
            values,
            mask,
            achieved_residual: self.achieved_residual,
        })
    }
}
