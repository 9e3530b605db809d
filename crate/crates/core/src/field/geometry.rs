//! Electrode geometry of the sectored-ring trap.
//!
//! The trap is a planar ring electrode split into eight azimuthal sectors,
//! sandwiched between two conical endcap electrodes whose hollow bores give
//! optical access along Z. Everything sits inside a grounded cubic enclosure.
//!
//! Solids, in cylindrical coordinates (r, theta, z) about the trap center:
//!
//! * sector k (k = 1..=8, counterclockwise from +X): annulus
//!   `ring_inner_radius <= r <= ring_outer_radius`, `|z| <= ring_thickness/2`,
//!   azimuth within `sector_wedge_angle/2` of the sector center at
//!   `(k-1) * sector_pitch`;
//! * endcap (top): hollow conical shell between the bore cone
//!   `r = z tan(theta_c)` and the complementary outer cone
//!   `r = z / tan(theta_c)`, both with apex at the trap center, truncated
//!   below at `z = separation/2` and capped at `r <= endcap_outer_radius`;
//!   the shell thins to a rim where the bore meets the outer radius.
//!   `theta_c = asin(NA)` is the bore half-angle, so rays from the center
//!   within the numerical aperture pass unobstructed;
//! * endcap (bottom): mirror image under z -> -z.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Fixed number of ring sectors.
pub const SECTOR_COUNT: u32 = 8;

/// One independently biased DC electrode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Electrode {
    /// Ring sector 1..=8, counterclockwise from +X.
    Sector(u8),
    EndcapTop,
    EndcapBottom,
}

impl Electrode {
    /// All ten DC electrodes in a fixed order: sectors 1..8, then endcaps.
    pub fn all() -> [Electrode; 10] {
        [
            Electrode::Sector(1),
            Electrode::Sector(2),
            Electrode::Sector(3),
            Electrode::Sector(4),
            Electrode::Sector(5),
            Electrode::Sector(6),
            Electrode::Sector(7),
            Electrode::Sector(8),
            Electrode::EndcapTop,
            Electrode::EndcapBottom,
        ]
    }

    /// Stable text name, e.g. `sector_3` or `endcap_top`.
    pub fn name(&self) -> String {
        match self {
            Electrode::Sector(k) => format!("sector_{k}"),
            Electrode::EndcapTop => "endcap_top".into(),
            Electrode::EndcapBottom => "endcap_bottom".into(),
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "endcap_top" => Ok(Electrode::EndcapTop),
            "endcap_bottom" => Ok(Electrode::EndcapBottom),
            _ => {
                if let Some(num) = s.strip_prefix("sector_") {
                    if let Ok(k) = num.parse::<u8>() {
                        if (1..=SECTOR_COUNT as u8).contains(&k) {
                            return Ok(Electrode::Sector(k));
                        }
                    }
                }
                Err(Error::InvalidParameter(format!("unknown electrode {s:?}")))
            }
        }
    }
}

/// Voltage basis to solve for: a single DC electrode at 1 V, the RF drive
/// pattern (both endcaps at 1 V, sectors RF-grounded), or the enclosure.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum BasisId {
    Dc(Electrode),
    /// Both endcaps driven together; the sectors are held at RF ground by
    /// their bias filters.
    Rf,
    /// Grounded enclosure at 1 V; used for partition-of-unity checks.
    Enclosure,
}

impl BasisId {
    pub fn name(&self) -> String {
        match self {
            BasisId::Dc(e) => e.name(),
            BasisId::Rf => "rf".into(),
            BasisId::Enclosure => "enclosure".into(),
        }
    }
}

/// Trap dimensions, m and degrees. `Default` gives the published design:
/// ring ID 4 mm / OD 10 mm, 20 deg sector wedges on a 45 deg pitch,
/// NA-0.5 endcaps separated by 1 mm, in a 40 mm grounded box.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ElectrodeGeometry {
    /// Ring inner radius, m.
    pub ring_inner_radius: f64,
    /// Ring outer radius, m.
    pub ring_outer_radius: f64,
    /// Ring electrode thickness along Z, m.
    pub ring_thickness: f64,
    /// Angular width of each metal sector wedge, degrees.
    pub sector_wedge_angle_deg: f64,
    /// Angular pitch between sector centers, degrees (fixed 45).
    pub sector_pitch_deg: f64,
    /// Tip-to-tip separation of the endcap truncation faces, m.
    pub endcap_separation: f64,
    /// Numerical aperture of the endcap bore as seen from the trap center.
    pub endcap_numerical_aperture: f64,
    /// Endcap outer radius, m.
    pub endcap_outer_radius: f64,
    /// Side length of the grounded cubic enclosure, m.
    pub bounding_box: f64,
}

impl Default for ElectrodeGeometry {
    fn default() -> Self {
        Self {
            ring_inner_radius: 2.0e-3,
            ring_outer_radius: 5.0e-3,
            ring_thickness: 0.5e-3,
            sector_wedge_angle_deg: 20.0,
            sector_pitch_deg: 45.0,
            endcap_separation: 1.0e-3,
            endcap_numerical_aperture: 0.5,
            endcap_outer_radius: 6.0e-3,
            bounding_box: 40.0e-3,
        }
    }
}

impl ElectrodeGeometry {
    /// Endcap bore cone half-angle from the Z axis, rad.
    pub fn cone_half_angle(&self) -> f64 {
        self.endcap_numerical_aperture.asin()
    }

    /// Z extent of each endcap: the cone tapers to nothing where the bore
    /// meets the outer radius.
    pub fn endcap_z_top(&self) -> f64 {
        self.endcap_outer_radius / self.cone_half_angle().tan()
    }

    pub fn validate(&self) -> Result<()> {
        let err = |m: String| Err(Error::InvalidParameter(m));
        if self.sector_pitch_deg != 45.0 {
            return err(format!(
                "sector pitch is fixed at 45 deg for the eight-sector ring, got {}",
                self.sector_pitch_deg
            ));
        }
        if !(self.sector_wedge_angle_deg > 0.0 && self.sector_wedge_angle_deg < 45.0) {
            return err("sector wedge angle must lie in (0, 45) deg".into());
        }
        if !(self.ring_inner_radius > 0.0 && self.ring_inner_radius < self.ring_outer_radius) {
            return err("need 0 < ring inner radius < outer radius".into());
        }
        if self.ring_thickness <= 0.0 {
            return err("ring thickness must be positive".into());
        }
        if self.endcap_separation <= 0.0 {
            return err("endcap separation must be positive".into());
        }
        if !(self.endcap_numerical_aperture > 0.0
            && self.endcap_numerical_aperture < std::f64::consts::FRAC_1_SQRT_2)
        {
            return err(
                "endcap numerical aperture must lie in (0, 0.707) so the bore cone \
                 stays inside the 45 deg outer cone and the shell has metal"
                    .into(),
            );
        }
        if self.endcap_outer_radius <= 0.0 {
            return err("endcap outer radius must be positive".into());
        }
        if self.endcap_separation / 2.0 >= self.endcap_z_top() {
            return err("endcap truncation face lies beyond the cone tip".into());
        }
        let half_box = self.bounding_box / 2.0;
        let needed = self
            .ring_outer_radius
            .max(self.endcap_outer_radius)
            .max(self.endcap_z_top());
        if half_box <= needed {
            return err(format!(
                "bounding box {:.3e} m too small for electrodes extending to {:.3e} m",
                self.bounding_box, needed
            ));
        }
        // The ring must clear the endcap truncation faces.
        if self.ring_thickness / 2.0 >= self.endcap_separation / 2.0 {
            return err("ring and endcaps overlap along Z".into());
        }
        Ok(())
    }

    /// SHA-256 over the canonical little-endian encoding of every field.
    /// Used to key basis caches.
    pub fn hash(&self) -> [u8; 32] {
        let mut h = Sha256::new();
        for v in [
            self.ring_inner_radius,
            self.ring_outer_radius,
            self.ring_thickness,
            self.sector_wedge_angle_deg,
            self.sector_pitch_deg,
            self.endcap_separation,
            self.endcap_numerical_aperture,
            self.endcap_outer_radius,
            self.bounding_box,
        ] {
            h.update(v.to_le_bytes());
        }
        h.update(SECTOR_COUNT.to_le_bytes());
        h.finalize().into()
    }

    /// Does the top endcap solid contain the point? (Bottom is the z-mirror.)
    fn endcap_top_contains(&self, r2: f64, z: f64) -> bool {
        if z < self.endcap_separation / 2.0 || z > self.endcap_z_top() {
            return false;
        }
        if r2 > self.endcap_outer_radius * self.endcap_outer_radius {
            return false;
        }
        let tan = self.cone_half_angle().tan();
        let bore = z * tan;
        let outer = z / tan;
        r2 >= bore * bore && r2 <= outer * outer
    }

    /// Is the (canonicalized) azimuth inside a sector wedge?
    ///
    /// `a >= b >= 0` are the sorted absolute in-plane coordinates; the wedge
    /// pattern repeats every 45 deg and is mirror-symmetric about each sector
    /// center, so membership depends only on the folded azimuth in [0, 45] deg
    /// and its distance to the nearer multiple of 45 deg. Computing it from
    /// the canonical octant makes the rasterized mask exactly symmetric under
    /// the grid-preserving dihedral group.
    fn wedge_contains_folded(&self, a: f64, b: f64) -> bool {
        debug_assert!(a >= b && b >= 0.0);
        if a == 0.0 {
            // Origin: never inside the annulus, so membership is moot.
            return false;
        }
        let theta = b.atan2(a).to_degrees(); // in [0, 45]
        let dist_to_center = theta.min(45.0 - theta);
        dist_to_center <= self.sector_wedge_angle_deg / 2.0
    }

    /// Classifies a point: `None` for vacuum, `Some(electrode)` for metal.
    ///
    /// Errors if two solids claim the point (possible for pathological
    /// dimensions).
    pub fn classify(&self, p: [f64; 3]) -> Result<Option<Electrode>> {
        let [x, y, z] = p;
        let r2 = x * x + y * y;
        let az = z.abs();

        let mut hit: Option<Electrode> = None;
        let claim = |e: Electrode, hit: &mut Option<Electrode>| -> Result<()> {
            if hit.is_some() {
                return Err(Error::OverlappingElectrodes { x, y, z });
            }
            *hit = Some(e);
            Ok(())
        };

        // Ring sectors.
        if az <= self.ring_thickness / 2.0
            && r2 >= self.ring_inner_radius * self.ring_inner_radius
            && r2 <= self.ring_outer_radius * self.ring_outer_radius
        {
            let (a, b) = {
                let ax = x.abs();
                let ay = y.abs();
                if ax >= ay {
                    (ax, ay)
                } else {
                    (ay, ax)
                }
            };
            if self.wedge_contains_folded(a, b) {
                // Azimuth is at least 12.5 deg from any rounding boundary for
                // in-wedge points, so the sector index is unambiguous.
                let theta = y.atan2(x).to_degrees();
                let k = (theta / self.sector_pitch_deg).round() as i64;
                let k = k.rem_euclid(i64::from(SECTOR_COUNT)) as u8 + 1;
                claim(Electrode::Sector(k), &mut hit)?;
            }
        }

        if self.endcap_top_contains(r2, z) {
            claim(Electrode::EndcapTop, &mut hit)?;
        }
        if self.endcap_top_contains(r2, -z) {
            claim(Electrode::EndcapBottom, &mut hit)?;
        }
        Ok(hit)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_geometry_is_valid() {
        ElectrodeGeometry::default().validate().unwrap();
    }

    #[test]
    fn cone_half_angle_from_na() {
        let g = ElectrodeGeometry::default();
        assert!((g.cone_half_angle().to_degrees() - 30.0).abs() < 1e-12);
    }

    #[test]
    fn classify_known_points() {
        let g = ElectrodeGeometry::default();
        // Trap center: vacuum.
        assert_eq!(g.classify([0.0, 0.0, 0.0]).unwrap(), None);
        // On the +X axis inside the annulus: sector 1.
        assert_eq!(
            g.classify([3.0e-3, 0.0, 0.0]).unwrap(),
            Some(Electrode::Sector(1))
        );
        // 45 deg azimuth: sector 2.
        let d = 3.0e-3 / 2f64.sqrt();
        assert_eq!(g.classify([d, d, 0.0]).unwrap(), Some(Electrode::Sector(2)));
        // 22.5 deg azimuth: in the gap between wedges.
        let th = 22.5f64.to_radians();
        assert_eq!(
            g.classify([3.0e-3 * th.cos(), 3.0e-3 * th.sin(), 0.0]).unwrap(),
            None
        );
        // Above the ring plane: vacuum.
        assert_eq!(g.classify([3.0e-3, 0.0, 1.0e-3]).unwrap(), None);
        // On the axis just above the truncation face: inside the bore, vacuum.
        assert_eq!(g.classify([0.0, 0.0, 0.6e-3]).unwrap(), None);
        // Off-axis at the same height: metal.
        assert_eq!(
            g.classify([1.0e-3, 0.0, 0.7e-3]).unwrap(),
            Some(Electrode::EndcapTop)
        );
        assert_eq!(
            g.classify([1.0e-3, 0.0, -0.7e-3]).unwrap(),
            Some(Electrode::EndcapBottom)
        );
    }

    #[test]
    fn sector_labels_rotate_with_azimuth() {
        let g = ElectrodeGeometry::default();
        for k in 0..8u8 {
            let th = (f64::from(k) * 45.0).to_radians();
            let p = [3.0e-3 * th.cos(), 3.0e-3 * th.sin(), 0.0];
            assert_eq!(g.classify(p).unwrap(), Some(Electrode::Sector(k + 1)));
        }
    }

    #[test]
    fn classify_agrees_under_45_deg_rotation() {
        // A point in sector k maps to sector k+1 under a 45 deg rotation.
        let g = ElectrodeGeometry::default();
        let (s, c) = 45f64.to_radians().sin_cos();
        let r_in2 = g.ring_inner_radius * g.ring_inner_radius;
        let r_out2 = g.ring_outer_radius * g.ring_outer_radius;
        let mut checked = 0;
        for i in -40..=40i32 {
            for j in -40..=40i32 {
                let p = [f64::from(i) * 1.25e-4, f64::from(j) * 1.25e-4, 0.0];
                let r2 = p[0] * p[0] + p[1] * p[1];
                // Points exactly on an annulus wall can round to either side
                // of it after the irrational rotation; skip those.
                if (r2 - r_in2).abs() < 1e-9 * r_in2 || (r2 - r_out2).abs() < 1e-9 * r_out2 {
                    continue;
                }
                if let Some(Electrode::Sector(k)) = g.classify(p).unwrap() {
                    let q = [p[0] * c - p[1] * s, p[0] * s + p[1] * c, 0.0];
                    let expect = k % 8 + 1;
                    assert_eq!(g.classify(q).unwrap(), Some(Electrode::Sector(expect)));
                    checked += 1;
                }
            }
        }
        assert!(checked > 100);
    }

    #[test]
    fn validation_rejects_bad_dimensions() {
        let mut g = ElectrodeGeometry::default();
        g.ring_inner_radius = 6.0e-3;
        assert!(g.validate().is_err());

        let mut g = ElectrodeGeometry::default();
        g.ring_thickness = 1.2e-3; // collides with endcaps
        assert!(g.validate().is_err());

        let mut g = ElectrodeGeometry::default();
        g.bounding_box = 8.0e-3;
        assert!(g.validate().is_err());

        let mut g = ElectrodeGeometry::default();
        g.sector_pitch_deg = 90.0;
        assert!(g.validate().is_err());
    }

    #[test]
    fn hash_changes_with_geometry() {
        let a = ElectrodeGeometry::default().hash();
        let mut g = ElectrodeGeometry::default();
        g.ring_thickness = 0.6e-3;
        assert_ne!(a, g.hash());
        assert_eq!(a, ElectrodeGeometry::default().hash());
    }

    #[test]
    fn electrode_names_round_trip() {
        for e in Electrode::all() {
            assert_eq!(Electrode::parse(&e.name()).unwrap(), e);
        }
        assert!(Electrode::parse("sector_9").is_err());
        assert!(Electrode::parse("lens").is_err());
    }
}
