//! Physical constants, ion species, RF drive parameters, and the closed-form
//! relations for planarity, micromotion, and first-order Mathieu dynamics.
//!
//! Conventions: SI units throughout; angular frequencies in rad/s unless the
//! name says otherwise; the RF drive axis is Z.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{count, lit, Real};

/// CODATA 2018 constants.
///
/// | constant | value | unit |
/// |---|---|---|
/// | `ELEMENTARY_CHARGE` | 1.602176634e-19 | C |
/// | `VACUUM_PERMITTIVITY` | 8.8541878128e-12 | F/m |
/// | `ATOMIC_MASS` | 1.66053906660e-27 | kg |
/// | `COULOMB_CONSTANT` | 1/(4 pi eps0) | N m^2/C^2 |
pub mod consts {
    /// Elementary charge, C (exact).
    pub const ELEMENTARY_CHARGE: f64 = 1.602_176_634e-19;
    /// Vacuum permittivity, F/m.
    pub const VACUUM_PERMITTIVITY: f64 = 8.854_187_812_8e-12;
    /// Unified atomic mass unit, kg.
    pub const ATOMIC_MASS: f64 = 1.660_539_066_60e-27;
    /// Coulomb force constant 1/(4 pi eps0), N m^2 / C^2.
    pub const COULOMB_CONSTANT: f64 =
        1.0 / (4.0 * std::f64::consts::PI * VACUUM_PERMITTIVITY);
}

/// Edge of the first Mathieu stability region for a single ion, |q| < 0.908.
pub const MATHIEU_STABILITY_LIMIT: f64 = 0.908;

/// Minimum allowed pair distance before two ions count as coincident, m.
pub const COINCIDENCE_LIMIT: f64 = 1e-9;

/// A trapped ion species: mass in kg, signed charge in C.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IonSpecies {
    pub name: String,
    /// Mass, kg.
    pub mass: f64,
    /// Charge, C; an integer multiple of the elementary charge.
    pub charge: f64,
}

impl IonSpecies {
    /// Builds a species from a mass in atomic mass units and an integer charge state.
    pub fn new(name: &str, mass_u: f64, charge_number: i32) -> Result<Self> {
        if !(mass_u.is_finite() && mass_u > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "species mass must be positive, got {mass_u} u"
            )));
        }
        if charge_number == 0 {
            return Err(Error::InvalidParameter(
                "species charge number must be nonzero".into(),
            ));
        }
        Ok(Self {
            name: name.to_string(),
            mass: mass_u * consts::ATOMIC_MASS,
            charge: f64::from(charge_number) * consts::ELEMENTARY_CHARGE,
        })
    }

    /// Singly ionized barium-138.
    pub fn ba138() -> Self {
        Self::new("Ba-138+", 137.9052, 1).expect("builtin species")
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mass.is_finite() && self.mass > 0.0) {
            return Err(Error::InvalidParameter("ion mass must be positive".into()));
        }
        let z = self.charge / consts::ELEMENTARY_CHARGE;
        if !z.is_finite() || z == 0.0 || (z - z.round()).abs() > 1e-6 {
            return Err(Error::InvalidParameter(
                "ion charge must be a nonzero integer multiple of e".into(),
            ));
        }
        Ok(())
    }
}

/// RF drive: zero-to-peak amplitude in volts, drive frequency in rad/s.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriveParameters {
    /// Zero-to-peak RF amplitude, V.
    pub rf_amplitude: f64,
    /// RF drive angular frequency, rad/s.
    pub rf_angular_frequency: f64,
}

impl DriveParameters {
    pub fn new(rf_amplitude: f64, rf_angular_frequency: f64) -> Result<Self> {
        let d = Self {
            rf_amplitude,
            rf_angular_frequency,
        };
        d.validate()?;
        Ok(d)
    }

    /// Builds drive parameters from an amplitude in volts and an ordinary frequency in Hz.
    pub fn from_frequency_hz(rf_amplitude: f64, rf_frequency_hz: f64) -> Result<Self> {
        Self::new(rf_amplitude, 2.0 * std::f64::consts::PI * rf_frequency_hz)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rf_amplitude.is_finite() && self.rf_amplitude >= 0.0) {
            return Err(Error::InvalidParameter(
                "RF amplitude must be non-negative".into(),
            ));
        }
        if !(self.rf_angular_frequency.is_finite() && self.rf_angular_frequency > 0.0) {
            return Err(Error::InvalidParameter(
                "RF frequency must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Planarity guideline for a crystal of N ions in an oblate trap:
/// the crystal stays a single plane when the trap aspect ratio
/// alpha = omega_z / omega_r exceeds the critical value
///
/// ```text
/// alpha_c^2 = sqrt( 96 N / (pi^3 w1^3) )
/// ```
///
/// with `w1` a dimensionless constant near 1.11. The guideline is asymptotic
/// in N; finite crystals go three-dimensional somewhat below it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlanarityCriterion {
    /// Dimensionless constant in the critical-aspect-ratio expression.
    pub omega1: f64,
}

impl Default for PlanarityCriterion {
    fn default() -> Self {
        Self { omega1: 1.11 }
    }
}

impl PlanarityCriterion {
    /// Critical aspect ratio alpha_c(N) above which an N-ion crystal is planar.
    pub fn critical_aspect_ratio<T: Real>(&self, n_ions: usize) -> Result<T> {
        if n_ions == 0 {
            return Err(Error::TooFewIons { need: 1, got: 0 });
        }
        if !(self.omega1.is_finite() && self.omega1 > 0.0) {
            return Err(Error::InvalidParameter(
                "planarity constant must be positive".into(),
            ));
        }
        let pi: T = T::pi();
        let w1: T = lit(self.omega1);
        let n: T = count(n_ions);
        let alpha_sq = (lit::<T>(96.0) * n / (pi.powi(3) * w1.powi(3))).sqrt();
        Ok(alpha_sq.sqrt())
    }
}

/// Critical aspect ratio with the default planarity constant.
pub fn critical_aspect_ratio<T: Real>(n_ions: usize) -> Result<T> {
    PlanarityCriterion::default().critical_aspect_ratio(n_ions)
}

/// First-order micromotion amplitude `q_r * d / 2` for an ion displaced a
/// distance `d` (m) from the RF null in the crystal plane.
///
/// Linear in `d`; valid for `0 <= q_r` inside the first stability region.
pub fn micromotion_amplitude<T: Real>(q_r: T, displacement: T) -> Result<T> {
    let q = q_r.as_f64();
    if !(0.0..MATHIEU_STABILITY_LIMIT).contains(&q) {
        return Err(Error::UnstableDrive {
            q,
            limit: MATHIEU_STABILITY_LIMIT,
        });
    }
    if displacement < T::zero() {
        return Err(Error::InvalidParameter(
            "displacement must be non-negative".into(),
        ));
    }
    Ok(q_r * displacement / lit(2.0))
}

/// Mathieu stability parameter along one principal axis,
///
/// ```text
/// q_i = 2 e_ion V_rf c_i / (m Omega^2)
/// ```
///
/// where `c_i` (1/m^2) is the second spatial derivative at the trap center of
/// the RF basis potential solved with 1 V applied. The sign of `q_i` follows
/// the sign of `c_i` (for a positive ion).
pub fn mathieu_q<T: Real>(
    curvature: T,
    drive: &DriveParameters,
    species: &IonSpecies,
) -> Result<T> {
    drive.validate()?;
    species.validate()?;
    let num = lit::<T>(2.0 * species.charge * drive.rf_amplitude) * curvature;
    let den = lit::<T>(species.mass * drive.rf_angular_frequency.powi(2));
    Ok(num / den)
}

/// Lowest-order pseudopotential secular frequency `|q| Omega / (2 sqrt 2)`,
/// rad/s. Errors outside the first stability region.
pub fn pseudo_secular_frequency<T: Real>(q: T, drive: &DriveParameters) -> Result<T> {
    drive.validate()?;
    let qa = q.as_f64().abs();
    if qa >= MATHIEU_STABILITY_LIMIT {
        return Err(Error::UnstableDrive {
            q: q.as_f64(),
            limit: MATHIEU_STABILITY_LIMIT,
        });
    }
    Ok(q.abs() * lit::<T>(drive.rf_angular_frequency) / (lit::<T>(2.0) * lit::<T>(2.0).sqrt()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn coulomb_constant_value() {
        assert_relative_eq!(consts::COULOMB_CONSTANT, 8.987551792e9, max_relative = 1e-9);
    }

    #[test]
    fn ba138_mass_and_charge() {
        let ba = IonSpecies::ba138();
        assert_relative_eq!(ba.mass, 2.2899697e-25, max_relative = 1e-6);
        assert_eq!(ba.charge, consts::ELEMENTARY_CHARGE);
        ba.validate().unwrap();
    }

    #[test]
    fn critical_aspect_ratio_reference_values() {
        assert_relative_eq!(critical_aspect_ratio::<f64>(1).unwrap(), 1.227, epsilon = 1e-3);
        assert_relative_eq!(critical_aspect_ratio::<f64>(30).unwrap(), 2.871, epsilon = 1e-3);
        assert_relative_eq!(critical_aspect_ratio::<f64>(127).unwrap(), 4.118, epsilon = 1e-3);
    }

    #[test]
    fn critical_aspect_ratio_scaling() {
        // alpha^4 is linear in N, so a 16x crystal doubles alpha.
        for n in [1usize, 5, 12, 40] {
            let a1: f64 = critical_aspect_ratio(n).unwrap();
            let a16: f64 = critical_aspect_ratio(16 * n).unwrap();
            assert_relative_eq!(a16 / a1, 2.0, max_relative = 1e-12);
        }
    }

    #[test]
    fn critical_aspect_ratio_monotone() {
        let mut prev = 0.0f64;
        for n in 1..200 {
            let a: f64 = critical_aspect_ratio(n).unwrap();
            assert!(a > prev);
            prev = a;
        }
    }

    #[test]
    fn critical_aspect_ratio_rejects_empty_crystal() {
        assert!(matches!(
            critical_aspect_ratio::<f64>(0),
            Err(Error::TooFewIons { .. })
        ));
    }

    #[test]
    fn micromotion_reference_values() {
        // q_r = 0.102: 0.051 um per um of planar displacement.
        let a: f64 = micromotion_amplitude(0.102, 1e-6).unwrap();
        assert_relative_eq!(a, 0.051e-6, max_relative = 1e-12);
        // 54 um from the null: about 2.8 um of micromotion.
        let a: f64 = micromotion_amplitude(0.102, 54e-6).unwrap();
        assert_relative_eq!(a, 2.754e-6, max_relative = 1e-12);
        assert!((a - 2.8e-6).abs() / 2.8e-6 < 0.02);
    }

    #[test]
    fn micromotion_zero_at_null() {
        let a: f64 = micromotion_amplitude(0.3, 0.0).unwrap();
        assert_eq!(a, 0.0);
    }

    #[test]
    fn micromotion_rejects_unstable_q() {
        assert!(micromotion_amplitude(0.95f64, 1e-6).is_err());
        assert!(micromotion_amplitude(-0.1f64, 1e-6).is_err());
    }

    #[test]
    fn pseudo_secular_reference_values() {
        let drive = DriveParameters::from_frequency_hz(1000.0, 12.47e6).unwrap();
        let w: f64 = pseudo_secular_frequency(0.102, &drive).unwrap();
        assert_relative_eq!(w / (2.0 * std::f64::consts::PI), 449.7e3, max_relative = 1e-3);

        let drive = DriveParameters::from_frequency_hz(500.0, 10e6).unwrap();
        let w: f64 = pseudo_secular_frequency(0.2, &drive).unwrap();
        assert_relative_eq!(w / (2.0 * std::f64::consts::PI), 707.1e3, max_relative = 1e-3);
    }

    #[test]
    fn pseudo_secular_rejects_unstable_q() {
        let drive = DriveParameters::from_frequency_hz(1000.0, 12.47e6).unwrap();
        assert!(matches!(
            pseudo_secular_frequency(0.908, &drive),
            Err(Error::UnstableDrive { .. })
        ));
    }

    #[test]
    fn mathieu_q_composes_with_secular_frequency() {
        // omega = |q| Omega / (2 sqrt 2) with q = 2 e V c / (m Omega^2)
        // collapses to omega = e V c / (sqrt 2 m Omega).
        let drive = DriveParameters::from_frequency_hz(1000.0, 12.47e6).unwrap();
        let ba = IonSpecies::ba138();
        let c = 8.5e5; // 1/m^2
        let q: f64 = mathieu_q(c, &drive, &ba).unwrap();
        let w: f64 = pseudo_secular_frequency(q, &drive).unwrap();
        let direct = ba.charge * drive.rf_amplitude * c
            / (2f64.sqrt() * ba.mass * drive.rf_angular_frequency);
        assert_relative_eq!(w, direct, max_relative = 1e-12);
    }

    #[test]
    fn mathieu_q_sign_follows_curvature() {
        let drive = DriveParameters::from_frequency_hz(1000.0, 12.47e6).unwrap();
        let ba = IonSpecies::ba138();
        let qz: f64 = mathieu_q(1.0e6, &drive, &ba).unwrap();
        let qr: f64 = mathieu_q(-0.5e6, &drive, &ba).unwrap();
        assert!(qz > 0.0 && qr < 0.0);
        assert_relative_eq!(qz, -2.0 * qr, max_relative = 1e-12);
    }

    #[test]
    fn drive_and_species_validation() {
        // Zero amplitude is legal (drive off); negative is not.
        assert!(DriveParameters::from_frequency_hz(0.0, 12e6).is_ok());
        assert!(DriveParameters::from_frequency_hz(-1.0, 12e6).is_err());
        assert!(DriveParameters::from_frequency_hz(1000.0, -1.0).is_err());
        assert!(IonSpecies::new("x", -1.0, 1).is_err());
        assert!(IonSpecies::new("x", 10.0, 0).is_err());
    }
}
