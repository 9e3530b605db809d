//! Single-ion trapping potentials.
//!
//! Two interchangeable backends sit behind [`Potential`]: an ideal harmonic
//! well specified by three secular frequencies, and a field-backed model built
//! from solved electrode basis grids (pseudopotential plus a weighted DC
//! superposition, both interpolated with C^2 splines). The crystal solver and
//! sweep engine only see the trait.

pub mod interp;

use nalgebra::{Matrix3, SymmetricEigen, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::cache::BasisSet;
use crate::field::geometry::Electrode;
use crate::field::grid::ScalarFieldGrid;
use crate::field::pseudo::pseudopotential_grid;
use crate::physics::{
    mathieu_q, DriveParameters, IonSpecies, MATHIEU_STABILITY_LIMIT,
};
use crate::scalar::{lit, Real};
use interp::TricubicSpline;

/// Static voltages applied to the ten electrodes, in volts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DcVoltages {
    pub sector_1: f64,
    pub sector_2: f64,
    pub sector_3: f64,
    pub sector_4: f64,
    pub sector_5: f64,
    pub sector_6: f64,
    pub sector_7: f64,
    pub sector_8: f64,
    pub endcap_top: f64,
    pub endcap_bottom: f64,
}

impl Default for DcVoltages {
    fn default() -> Self {
        Self {
            sector_1: 0.0,
            sector_2: 0.0,
            sector_3: 0.0,
            sector_4: 0.0,
            sector_5: 0.0,
            sector_6: 0.0,
            sector_7: 0.0,
            sector_8: 0.0,
            endcap_top: 0.0,
            endcap_bottom: 0.0,
        }
    }
}

impl DcVoltages {
    pub fn voltage(&self, e: Electrode) -> f64 {
        match e {
            Electrode::Sector(1) => self.sector_1,
            Electrode::Sector(2) => self.sector_2,
            Electrode::Sector(3) => self.sector_3,
            Electrode::Sector(4) => self.sector_4,
            Electrode::Sector(5) => self.sector_5,
            Electrode::Sector(6) => self.sector_6,
            Electrode::Sector(7) => self.sector_7,
            Electrode::Sector(8) => self.sector_8,
            Electrode::EndcapTop => self.endcap_top,
            Electrode::EndcapBottom => self.endcap_bottom,
            Electrode::Sector(_) => 0.0,
        }
    }

    pub fn set_voltage(&mut self, e: Electrode, v: f64) {
        match e {
            Electrode::Sector(1) => self.sector_1 = v,
            Electrode::Sector(2) => self.sector_2 = v,
            Electrode::Sector(3) => self.sector_3 = v,
            Electrode::Sector(4) => self.sector_4 = v,
            Electrode::Sector(5) => self.sector_5 = v,
            Electrode::Sector(6) => self.sector_6 = v,
            Electrode::Sector(7) => self.sector_7 = v,
            Electrode::Sector(8) => self.sector_8 = v,
            Electrode::EndcapTop => self.endcap_top = v,
            Electrode::EndcapBottom => self.endcap_bottom = v,
            Electrode::Sector(_) => {}
        }
    }

    /// Electrodes whose voltage is nonzero, in canonical order.
    pub fn active(&self) -> Vec<Electrode> {
        Electrode::all()
            .into_iter()
            .filter(|e| self.voltage(*e) != 0.0)
            .collect()
    }
}

/// Full electrical operating point of the trap.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrapConfiguration {
    pub drive: DriveParameters,
    #[serde(default)]
    pub dc: DcVoltages,
}

/// Ideal harmonic well described by its three secular frequencies (rad/s),
/// with the in-plane principal axes optionally rotated about Z.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HarmonicParameters {
    pub omega_x: f64,
    pub omega_y: f64,
    pub omega_z: f64,
    /// Rotation of the (x, y) principal axes about Z, rad, in [0, pi).
    #[serde(default)]
    pub axis_angle: f64,
}

impl HarmonicParameters {
    pub fn from_hz(fx: f64, fy: f64, fz: f64) -> Self {
        let w = std::f64::consts::TAU;
        Self {
            omega_x: w * fx,
            omega_y: w * fy,
            omega_z: w * fz,
            axis_angle: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("omega_x", self.omega_x),
            ("omega_y", self.omega_y),
            ("omega_z", self.omega_z),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::InvalidParameter(format!(
                    "{name} must be positive and finite, got {v}"
                )));
            }
        }
        if !(0.0..std::f64::consts::PI).contains(&self.axis_angle) {
            return Err(Error::InvalidParameter(format!(
                "axis angle must lie in [0, pi), got {}",
                self.axis_angle
            )));
        }
        Ok(())
    }

    /// Axial-to-mean-radial frequency ratio.
    pub fn aspect_ratio(&self) -> f64 {
        self.omega_z / (0.5 * (self.omega_x + self.omega_y))
    }
}

/// Potential energy landscape seen by a single ion. Energies are in joules
/// and already include the ion charge.
pub trait Potential<T: Real>: Sync {
    fn energy(&self, r: &Vector3<T>) -> Result<T>;
    fn energy_gradient(&self, r: &Vector3<T>) -> Result<(T, Vector3<T>)>;
    fn hessian(&self, r: &Vector3<T>) -> Result<Matrix3<T>>;
    /// True when `r` is inside the evaluable region.
    fn contains(&self, r: &Vector3<T>) -> bool;
    /// Interior point near the expected minimum, used to seed searches.
    fn seed_point(&self) -> Vector3<T>;

    fn gradient(&self, r: &Vector3<T>) -> Result<Vector3<T>> {
        Ok(self.energy_gradient(r)?.1)
    }
}

/// `U = 1/2 r^T K r` with `K` the rotated stiffness matrix
/// `m diag(wx^2, wy^2, wz^2)` expressed in lab coordinates.
#[derive(Debug, Clone)]
pub struct HarmonicPotential<T> {
    stiffness: Matrix3<T>,
}

impl<T: Real> HarmonicPotential<T> {
    pub fn new(params: &HarmonicParameters, species: &IonSpecies) -> Result<Self> {
        params.validate()?;
        species.validate()?;
        let m = species.mass;
        let dx = m * params.omega_x * params.omega_x;
        let dy = m * params.omega_y * params.omega_y;
        let dz = m * params.omega_z * params.omega_z;
        let (s, c) = params.axis_angle.sin_cos();
        // K = R^T diag R for the in-plane rotation; at angle 0 this is the
        // plain diagonal (sin_cos is exact there).
        let kxx = c * c * dx + s * s * dy;
        let kyy = s * s * dx + c * c * dy;
        let kxy = c * s * (dx - dy);
        Ok(Self {
            stiffness: Matrix3::new(
                lit(kxx),
                lit(kxy),
                T::zero(),
                lit(kxy),
                lit(kyy),
                T::zero(),
                T::zero(),
                T::zero(),
                lit(dz),
            ),
        })
    }
}

impl<T: Real> Potential<T> for HarmonicPotential<T> {
    fn energy(&self, r: &Vector3<T>) -> Result<T> {
        let half: T = lit(0.5);
        Ok(half * (self.stiffness * r).dot(r))
    }

    fn energy_gradient(&self, r: &Vector3<T>) -> Result<(T, Vector3<T>)> {
        let g = self.stiffness * r;
        let half: T = lit(0.5);
        Ok((half * g.dot(r), g))
    }

    fn hessian(&self, _r: &Vector3<T>) -> Result<Matrix3<T>> {
        Ok(self.stiffness)
    }

    fn contains(&self, r: &Vector3<T>) -> bool {
        r.iter().all(|c| c.is_finite())
    }

    fn seed_point(&self) -> Vector3<T> {
        Vector3::zeros()
    }
}

/// Potential interpolated from solved field grids: pseudopotential plus the
/// voltage-weighted DC superposition.
pub struct FieldPotential<T> {
    ps: TricubicSpline<T>,
    dc: Option<TricubicSpline<T>>,
    charge: T,
    /// Mathieu stability parameters (x, y, z) at the trap center.
    pub mathieu_q: Vector3<T>,
}

impl<T: Real> FieldPotential<T> {
    /// Builds the model from solved bases and an operating point.
    ///
    /// Fails when the drive parameters put any axis outside the lowest
    /// Mathieu stability region, since the pseudopotential picture is
    /// meaningless there.
    pub fn new(
        basis: &BasisSet<T>,
        config: &TrapConfiguration,
        species: &IonSpecies,
    ) -> Result<Self> {
        config.drive.validate()?;
        species.validate()?;

        let center = basis.rf.layout.center();
        let curv = basis.rf.curvatures_at_node(center)?;
        let mut q = Vector3::zeros();
        for axis in 0..3 {
            q[axis] = mathieu_q::<T>(curv[axis], &config.drive, species)?;
            let qa = q[axis].as_f64().abs();
            if qa >= MATHIEU_STABILITY_LIMIT {
                return Err(Error::UnstableDrive {
                    q: qa,
                    limit: MATHIEU_STABILITY_LIMIT,
                });
            }
        }

        let ps = pseudopotential_grid(&basis.rf, &config.drive, species)?;
        let dc = combined_dc_grid(basis, &config.dc)?;
        Ok(Self {
            ps: core_spline(&ps, basis),
            dc: dc.as_ref().map(|g| core_spline(g, basis)),
            charge: lit(species.charge),
            mathieu_q: q,
        })
    }

    /// Mean of the two transverse stability parameters' magnitudes.
    pub fn radial_q(&self) -> T {
        let half: T = lit(0.5);
        half * (self.mathieu_q[0].abs() + self.mathieu_q[1].abs())
    }
}

/// Interpolant over the vacuum core between the electrodes, where ions live.
///
/// The grid data near electrode edges is steep, and at the re-entrant bore
/// rim the RF gradient diverges, so node values there are large and poorly
/// resolved at any spacing. The spline prefilter is a global recursive
/// filter along each grid line; fed those values it rings into the trap
/// center at the percent level. The window keeps the interpolant inside the
/// region bounded by the ring bore and the endcap faces, all plain vacuum.
/// When the grid is too coarse to fit five planes the full grid is used,
/// matching the coarse presets' documented accuracy.
fn core_spline<T: Real>(grid: &ScalarFieldGrid<T>, basis: &BasisSet<T>) -> TricubicSpline<T> {
    let h = grid.layout.spacing;
    let g = &basis.geometry;
    let wz = g.endcap_separation / 2.0 - 1.5 * h;
    let wt = g.ring_inner_radius / std::f64::consts::SQRT_2 - 1.5 * h;
    match grid.window([wt, wt, wz]) {
        Some(w) => TricubicSpline::build(&w),
        None => TricubicSpline::build(grid),
    }
}

/// Superposes the DC basis grids weighted by the applied voltages.
/// Returns `None` when every DC voltage is zero.
fn combined_dc_grid<T: Real>(
    basis: &BasisSet<T>,
    dc: &DcVoltages,
) -> Result<Option<ScalarFieldGrid<T>>> {
    let active = dc.active();
    if active.is_empty() {
        return Ok(None);
    }
    let mut values = vec![T::zero(); basis.rf.values.len()];
    for e in &active {
        let grid = basis.dc_basis(*e)?;
        let v: T = lit(dc.voltage(*e));
        for (acc, phi) in values.iter_mut().zip(&grid.values) {
            *acc += v * *phi;
        }
    }
    Ok(Some(ScalarFieldGrid {
        layout: basis.rf.layout,
        values,
        mask: basis.rf.mask.clone(),
        achieved_residual: basis.rf.achieved_residual,
    }))
}

impl<T: Real> Potential<T> for FieldPotential<T> {
    fn energy(&self, r: &Vector3<T>) -> Result<T> {
        let mut u = self.ps.value(r)?;
        if let Some(dc) = &self.dc {
            u += self.charge * dc.value(r)?;
        }
        Ok(u)
    }

    fn energy_gradient(&self, r: &Vector3<T>) -> Result<(T, Vector3<T>)> {
        let (mut u, mut g) = self.ps.value_grad(r)?;
        if let Some(dc) = &self.dc {
            let (v, gv) = dc.value_grad(r)?;
            u += self.charge * v;
            g += gv * self.charge;
        }
        Ok((u, g))
    }

    fn hessian(&self, r: &Vector3<T>) -> Result<Matrix3<T>> {
        let (_, _, mut h) = self.ps.value_grad_hess(r)?;
        if let Some(dc) = &self.dc {
            let (_, _, hv) = dc.value_grad_hess(r)?;
            h += hv * self.charge;
        }
        Ok(h)
    }

    fn contains(&self, r: &Vector3<T>) -> bool {
        self.ps.contains(r)
    }

    fn seed_point(&self) -> Vector3<T> {
        self.ps.center()
    }
}

/// Location and normal-mode structure of a potential minimum.
#[derive(Debug, Clone)]
pub struct SecularInfo<T> {
    pub minimum: Vector3<T>,
    /// Secular angular frequencies, ascending (rad/s).
    pub frequencies: [T; 3],
    /// Unit principal axes, one column per frequency.
    pub axes: Matrix3<T>,
}

impl<T: Real> SecularInfo<T> {
    pub fn frequencies_hz(&self) -> [f64; 3] {
        let tau = std::f64::consts::TAU;
        [
            self.frequencies[0].as_f64() / tau,
            self.frequencies[1].as_f64() / tau,
            self.frequencies[2].as_f64() / tau,
        ]
    }

    /// Splits the triplet into the mode most aligned with z and the two
    /// transverse ones, returning `(axial, [radial, radial])`.
    pub fn axial_radial(&self) -> (T, [T; 2]) {
        let mut best = 0;
        for i in 1..3 {
            if self.axes[(2, i)].abs() > self.axes[(2, best)].abs() {
                best = i;
            }
        }
        let radial: Vec<T> = (0..3)
            .filter(|&i| i != best)
            .map(|i| self.frequencies[i])
            .collect();
        (self.frequencies[best], [radial[0], radial[1]])
    }

    /// Axial over mean radial frequency.
    pub fn aspect_ratio(&self) -> T {
        let (axial, radial) = self.axial_radial();
        axial / (lit::<T>(0.5) * (radial[0] + radial[1]))
    }
}

/// Locates the potential minimum near the seed point and diagonalizes the
/// local curvature into secular frequencies.
pub fn secular_frequencies<T, P>(
    potential: &P,
    species: &IonSpecies,
) -> Result<SecularInfo<T>>
where
    T: Real,
    P: Potential<T> + ?Sized,
{
    species.validate()?;
    let r = minimize_single(potential)?;
    let h = potential.hessian(&r)?;
    let eig = SymmetricEigen::new(h);
    let pos = [
        r[0].as_f64(),
        r[1].as_f64(),
        r[2].as_f64(),
    ];
    let mut idx = [0usize, 1, 2];
    idx.sort_by(|&a, &b| {
        eig.eigenvalues[a]
            .partial_cmp(&eig.eigenvalues[b])
            .expect("eigenvalues are finite")
    });
    if eig.eigenvalues[idx[0]] <= T::zero() {
        return Err(Error::SaddlePoint(pos));
    }
    let m: T = lit(species.mass);
    let mut freqs = [T::zero(); 3];
    let mut axes = Matrix3::zeros();
    for (col, &i) in idx.iter().enumerate() {
        freqs[col] = (eig.eigenvalues[i] / m).sqrt();
        let v = eig.eigenvectors.column(i);
        // Fix the sign so the axis has a nonnegative dominant component.
        let mut dom = 0;
        for k in 1..3 {
            if v[k].abs() > v[dom].abs() {
                dom = k;
            }
        }
        let s = if v[dom] < T::zero() { -T::one() } else { T::one() };
        for k in 0..3 {
            axes[(k, col)] = s * v[k];
        }
    }
    Ok(SecularInfo {
        minimum: r,
        frequencies: freqs,
        axes,
    })
}

/// Damped Newton descent to the nearest stationary point, with a gradient
/// fallback while the curvature is not positive definite. Converges when the
/// step drops below a picometer.
fn minimize_single<T, P>(potential: &P) -> Result<Vector3<T>>
where
    T: Real,
    P: Potential<T> + ?Sized,
{
    let step_tol: T = lit(1.0e-12);
    let mut r = potential.seed_point();
    if !potential.contains(&r) {
        return Err(Error::OutOfDomain {
            x: r[0].as_f64(),
            y: r[1].as_f64(),
            z: r[2].as_f64(),
        });
    }
    let mut fallback_step: T = lit(1.0e-4);
    for _ in 0..400 {
        let (e, g) = potential.energy_gradient(&r)?;
        let h = potential.hessian(&r)?;
        let newton = h.try_inverse().map(|inv| -(inv * g));
        let mut d = match newton {
            Some(d) if d.dot(&g) < T::zero() => d,
            // Not a descent direction (indefinite or singular curvature):
            // take a short steepest-descent step instead.
            _ => {
                let n = g.norm();
                if n == T::zero() {
                    break;
                }
                -g * (fallback_step / n)
            }
        };
        // Backtrack into the domain and below the current energy.
        let mut accepted = false;
        for _ in 0..40 {
            let cand = r + d;
            if potential.contains(&cand) {
                if let Ok(ec) = potential.energy(&cand) {
                    if ec <= e {
                        r = cand;
                        accepted = true;
                        break;
                    }
                }
            }
            d *= lit::<T>(0.5);
        }
        if !accepted {
            fallback_step *= lit::<T>(0.25);
            if fallback_step < step_tol {
                break;
            }
            continue;
        }
        if d.norm() < step_tol {
            return Ok(r);
        }
    }
    // Accept the point if the remaining gradient is tiny relative to the
    // local stiffness, otherwise report failure to settle.
    let g = potential.gradient(&r)?;
    let h = potential.hessian(&r)?;
    let scale = h.norm() * lit::<T>(1.0e-6) + lit::<T>(1.0e-30);
    if g.norm() < scale {
        Ok(r)
    } else {
        Err(Error::NoConvergence {
            best_residual: g.norm().as_f64(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn ba() -> IonSpecies {
        IonSpecies::ba138()
    }

    #[test]
    fn harmonic_energy_matches_closed_form() {
        let p = HarmonicParameters::from_hz(200.0e3, 220.0e3, 600.0e3);
        let pot: HarmonicPotential<f64> = HarmonicPotential::new(&p, &ba()).unwrap();
        let r: Vector3<f64> = Vector3::new(3.0e-6, -2.0e-6, 1.0e-6);
        let m = ba().mass;
        let expect = 0.5
            * m
            * (p.omega_x.powi(2) * r[0].powi(2)
                + p.omega_y.powi(2) * r[1].powi(2)
                + p.omega_z.powi(2) * r[2].powi(2));
        assert_relative_eq!(pot.energy(&r).unwrap(), expect, max_relative = 1e-12);
        let (e, g) = pot.energy_gradient(&r).unwrap();
        assert_eq!(e, pot.energy(&r).unwrap());
        assert_relative_eq!(g[0], m * p.omega_x.powi(2) * r[0], max_relative = 1e-12);
    }

    #[test]
    fn harmonic_secular_frequencies_round_trip() {
        let p = HarmonicParameters::from_hz(203.0e3, 221.0e3, 600.0e3);
        let pot: HarmonicPotential<f64> = HarmonicPotential::new(&p, &ba()).unwrap();
        let info = secular_frequencies(&pot, &ba()).unwrap();
        let hz = info.frequencies_hz();
        assert_relative_eq!(hz[0], 203.0e3, max_relative = 1e-9);
        assert_relative_eq!(hz[1], 221.0e3, max_relative = 1e-9);
        assert_relative_eq!(hz[2], 600.0e3, max_relative = 1e-9);
        assert!(info.minimum.norm() < 1e-12);
        let (axial, radial) = info.axial_radial();
        assert_relative_eq!(axial / std::f64::consts::TAU, 600.0e3, max_relative = 1e-9);
        assert_relative_eq!(
            (radial[0] + radial[1]) / std::f64::consts::TAU,
            424.0e3,
            max_relative = 1e-9
        );
        assert_relative_eq!(
            info.aspect_ratio(),
            600.0 / 212.0,
            max_relative = 1e-9
        );
    }

    #[test]
    fn aspect_ratio_helper_agrees() {
        let p = HarmonicParameters::from_hz(100.0e3, 120.0e3, 300.0e3);
        assert_relative_eq!(
            p.aspect_ratio(),
            300.0 / 110.0,
            max_relative = 1e-12
        );
    }

    #[test]
    fn rejects_nonpositive_frequencies() {
        let p = HarmonicParameters {
            omega_x: 0.0,
            omega_y: 1.0,
            omega_z: 1.0,
            axis_angle: 0.0,
        };
        assert!(HarmonicPotential::<f64>::new(&p, &ba()).is_err());
        let mut p = HarmonicParameters::from_hz(100.0e3, 120.0e3, 300.0e3);
        p.axis_angle = -0.1;
        assert!(HarmonicPotential::<f64>::new(&p, &ba()).is_err());
        p.axis_angle = std::f64::consts::PI;
        assert!(HarmonicPotential::<f64>::new(&p, &ba()).is_err());
    }

    #[test]
    fn axis_rotation_turns_the_principal_frame() {
        let angle = 0.35f64;
        let mut p = HarmonicParameters::from_hz(150.0e3, 260.0e3, 500.0e3);
        p.axis_angle = angle;
        let pot: HarmonicPotential<f64> = HarmonicPotential::new(&p, &ba()).unwrap();
        let base: HarmonicPotential<f64> =
            HarmonicPotential::new(&HarmonicParameters::from_hz(150.0e3, 260.0e3, 500.0e3), &ba())
                .unwrap();
        // Energy along the rotated frame matches the unrotated energy at the
        // back-rotated point.
        let (s, c) = angle.sin_cos();
        let r = Vector3::new(2.0e-6, -1.0e-6, 0.5e-6);
        let back = Vector3::new(c * r[0] + s * r[1], -s * r[0] + c * r[1], r[2]);
        assert_relative_eq!(
            pot.energy(&r).unwrap(),
            base.energy(&back).unwrap(),
            max_relative = 1e-12
        );
        // Frequencies are unchanged; the soft planar axis comes out rotated
        // by the requested angle.
        let info = secular_frequencies(&pot, &ba()).unwrap();
        let hz = info.frequencies_hz();
        assert_relative_eq!(hz[0], 150.0e3, max_relative = 1e-9);
        assert_relative_eq!(hz[1], 260.0e3, max_relative = 1e-9);
        assert_relative_eq!(hz[2], 500.0e3, max_relative = 1e-9);
        let ax = info.axes.column(0);
        assert_relative_eq!(ax[0].abs(), c, max_relative = 1e-9);
        assert_relative_eq!(ax[1].abs(), s, max_relative = 1e-9);
        assert!(ax[2].abs() < 1e-9);
    }

    #[test]
    fn voltages_round_trip_through_electrode_names() {
        let mut dc = DcVoltages::default();
        for (i, e) in Electrode::all().into_iter().enumerate() {
            dc.set_voltage(e, i as f64 + 1.0);
        }
        for (i, e) in Electrode::all().into_iter().enumerate() {
            assert_eq!(dc.voltage(e), i as f64 + 1.0);
        }
        assert_eq!(dc.active().len(), 10);
        assert_eq!(DcVoltages::default().active().len(), 0);
    }

    #[test]
    fn saddle_is_reported() {
        struct Saddle;
        impl Potential<f64> for Saddle {
            fn energy(&self, r: &Vector3<f64>) -> Result<f64> {
                Ok(r[0] * r[0] - r[1] * r[1] + r[2] * r[2])
            }
            fn energy_gradient(&self, r: &Vector3<f64>) -> Result<(f64, Vector3<f64>)> {
                Ok((
                    self.energy(r)?,
                    Vector3::new(2.0 * r[0], -2.0 * r[1], 2.0 * r[2]),
                ))
            }
            fn hessian(&self, _r: &Vector3<f64>) -> Result<Matrix3<f64>> {
                Ok(Matrix3::from_diagonal(&Vector3::new(2.0, -2.0, 2.0)))
            }
            fn contains(&self, _r: &Vector3<f64>) -> bool {
                true
            }
            fn seed_point(&self) -> Vector3<f64> {
                Vector3::zeros()
            }
        }
        match secular_frequencies(&Saddle, &ba()) {
            Err(Error::SaddlePoint(_)) => {}
            other => panic!("expected saddle error, got {other:?}"),
        }
    }
}
