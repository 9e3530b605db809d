//! Small-oscillation normal modes about a crystal equilibrium.
//!
//! The 3N x 3N energy Hessian (trap plus Coulomb) is mass-weighted and
//! diagonalized; eigenvalues are signed squared angular frequencies. Negative
//! entries mean the configuration is not a true minimum, near-zero entries
//! flag soft directions such as free rotation in an axially symmetric trap.

use nalgebra::{DMatrix, SymmetricEigen, Vector3};

use crate::error::Result;
use crate::physics::IonSpecies;
use crate::potential::Potential;
use crate::scalar::{lit, Real};

use super::minimize::build_hessian;

#[derive(Debug, Clone)]
pub struct ModeSpectrum<T> {
    /// Signed squared angular frequencies, ascending (rad^2/s^2).
    pub omega_squared: Vec<T>,
    /// `sqrt(max(omega_squared, 0))` per mode (rad/s).
    pub frequencies: Vec<T>,
    /// Mass-weighted displacement patterns, one column per mode.
    pub eigenvectors: DMatrix<T>,
    /// Modes with meaningfully negative curvature.
    pub negative_count: usize,
    /// Modes within 1e-8 of zero relative to the stiffest mode.
    pub zero_count: usize,
}

impl<T: Real> ModeSpectrum<T> {
    pub fn n_modes(&self) -> usize {
        self.omega_squared.len()
    }

    pub fn frequencies_hz(&self) -> Vec<f64> {
        self.frequencies
            .iter()
            .map(|w| w.as_f64() / std::f64::consts::TAU)
            .collect()
    }

    pub fn is_stable(&self) -> bool {
        self.negative_count == 0
    }
}

pub fn normal_modes<T, P>(
    positions: &[Vector3<T>],
    potential: &P,
    species: &IonSpecies,
) -> Result<ModeSpectrum<T>>
where
    T: Real,
    P: Potential<T> + ?Sized,
{
    species.validate()?;
    let h = build_hessian(positions, potential, species)?;
    let inv_m: T = lit(1.0 / species.mass);
    let eig = SymmetricEigen::new(h * inv_m);

    let dim = 3 * positions.len();
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[a]
            .partial_cmp(&eig.eigenvalues[b])
            .expect("eigenvalues are finite")
    });

    let scale = order
        .iter()
        .map(|&i| eig.eigenvalues[i].abs())
        .fold(T::zero(), |a, b| if b > a { b } else { a });
    let tiny = scale * lit::<T>(1.0e-8);

    let mut omega_squared = Vec::with_capacity(dim);
    let mut frequencies = Vec::with_capacity(dim);
    let mut eigenvectors = DMatrix::zeros(dim, dim);
    let mut negative_count = 0;
    let mut zero_count = 0;
    for (col, &i) in order.iter().enumerate() {
        let w2 = eig.eigenvalues[i];
        if w2.abs() <= tiny {
            zero_count += 1;
        } else if w2 < T::zero() {
            negative_count += 1;
        }
        omega_squared.push(w2);
        frequencies.push(if w2 > T::zero() { w2.sqrt() } else { T::zero() });
        eigenvectors.set_column(col, &eig.eigenvectors.column(i).into_owned());
    }
    Ok(ModeSpectrum {
        omega_squared,
        frequencies,
        eigenvectors,
        negative_count,
        zero_count,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crystal::{find_equilibrium, SolverOptions};
    use crate::potential::{HarmonicParameters, HarmonicPotential};
    use approx::assert_relative_eq;

    fn ba() -> IonSpecies {
        IonSpecies::ba138()
    }

    #[test]
    fn two_ion_chain_has_textbook_modes() {
        // Weak x axis: modes are wx, sqrt(3) wx (axial), and per transverse
        // axis wt (center of mass) and sqrt(wt^2 - wx^2) (rocking).
        let (fx, fy, fz) = (80.0e3, 300.0e3, 500.0e3);
        let pot: HarmonicPotential<f64> =
            HarmonicPotential::new(&HarmonicParameters::from_hz(fx, fy, fz), &ba()).unwrap();
        let opts = SolverOptions {
            restarts: 6,
            ..Default::default()
        };
        let state = find_equilibrium(&pot, &ba(), 2, &opts).unwrap();
        let modes = normal_modes(&state.positions, &pot, &ba()).unwrap();
        assert!(modes.is_stable());
        assert_eq!(modes.zero_count, 0);

        let mut expect: Vec<f64> = vec![
            fx,
            3.0_f64.sqrt() * fx,
            fy,
            (fy * fy - fx * fx).sqrt(),
            fz,
            (fz * fz - fx * fx).sqrt(),
        ];
        expect.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let got = modes.frequencies_hz();
        assert_eq!(got.len(), 6);
        for (g, e) in got.iter().zip(&expect) {
            assert_relative_eq!(*g, *e, max_relative = 1e-6);
        }
    }

    #[test]
    fn isotropic_transverse_trap_has_one_rotational_soft_mode() {
        // With wx = wy a planar crystal can rotate freely about z.
        let pot: HarmonicPotential<f64> = HarmonicPotential::new(
            &HarmonicParameters::from_hz(150.0e3, 150.0e3, 700.0e3),
            &ba(),
        )
        .unwrap();
        let opts = SolverOptions {
            restarts: 8,
            ..Default::default()
        };
        let state = find_equilibrium(&pot, &ba(), 3, &opts).unwrap();
        let modes = normal_modes(&state.positions, &pot, &ba()).unwrap();
        assert_eq!(modes.negative_count, 0);
        assert_eq!(modes.zero_count, 1);
    }

    #[test]
    fn single_ion_modes_are_the_trap_frequencies() {
        let pot: HarmonicPotential<f64> = HarmonicPotential::new(
            &HarmonicParameters::from_hz(100.0e3, 120.0e3, 140.0e3),
            &ba(),
        )
        .unwrap();
        let modes =
            normal_modes(&[Vector3::zeros()], &pot, &ba()).unwrap();
        let hz = modes.frequencies_hz();
        assert_relative_eq!(hz[0], 100.0e3, max_relative = 1e-9);
        assert_relative_eq!(hz[1], 120.0e3, max_relative = 1e-9);
        assert_relative_eq!(hz[2], 140.0e3, max_relative = 1e-9);
    }
}
