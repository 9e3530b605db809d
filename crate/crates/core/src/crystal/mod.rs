//! N-ion Coulomb crystal equilibria.
//!
//! Ions interact through mutual Coulomb repulsion inside a single-ion
//! [`Potential`]. Equilibria are found by relaxing many randomized initial
//! configurations and keeping the lowest-energy converged result. The whole
//! pipeline is deterministic for a given seed: every restart draws from its
//! own counter-mode RNG stream, restarts are reduced in index order no matter
//! how they were scheduled across threads, and reported energies use
//! order-independent summation so identical crystals hash identically.

pub mod minimize;
pub mod modes;

use nalgebra::Vector3;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, UnitBall};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::physics::consts::COULOMB_CONSTANT;
use crate::physics::{IonSpecies, COINCIDENCE_LIMIT};
use crate::potential::{secular_frequencies, Potential, SecularInfo};
use crate::scalar::{lit, Real};

/// Distance scale at which Coulomb repulsion balances a harmonic confinement
/// of angular frequency `omega`: `l^3 = k q^2 / (m omega^2)`.
pub fn characteristic_length(species: &IonSpecies, omega: f64) -> f64 {
    let kq2 = COULOMB_CONSTANT * species.charge * species.charge;
    (kq2 / (species.mass * omega * omega)).cbrt()
}

/// Knobs for the randomized-restart relaxation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverOptions {
    /// Independent random initializations to relax.
    pub restarts: usize,
    /// Iteration cap per restart (gradient stage plus Newton stage).
    pub max_iterations: usize,
    /// Convergence threshold on the largest per-ion force, relative to the
    /// characteristic Coulomb force `k q^2 / l^2`.
    pub force_tolerance: f64,
    /// Initial cloud radius in units of `l N^(1/3)`, stretched per axis by
    /// the inverse frequency ratio.
    pub init_radius_scale: f64,
    pub rng_seed: u64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            restarts: 24,
            max_iterations: 50_000,
            force_tolerance: 1.0e-9,
            init_radius_scale: 1.5,
            rng_seed: 1,
        }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<()> {
        if self.restarts == 0 {
            return Err(Error::InvalidParameter(
                "restarts must be at least 1".into(),
            ));
        }
        if !(self.force_tolerance > 0.0) || !(self.init_radius_scale > 0.0) {
            return Err(Error::InvalidParameter(
                "force_tolerance and init_radius_scale must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// A relaxed ion configuration and its diagnostics.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(bound(
    serialize = "T: Serialize + nalgebra::Scalar",
    deserialize = "T: serde::de::DeserializeOwned + nalgebra::Scalar"
))]
pub struct CrystalState<T> {
    /// Ion positions in meters, sorted by (z, y, x) for stable output.
    pub positions: Vec<Vector3<T>>,
    /// Total potential energy (trap plus Coulomb), joules.
    pub total_energy: T,
    /// Largest per-ion force magnitude at the solution, newtons.
    pub max_residual_force: T,
    pub converged: bool,
    /// Restart index that produced this state.
    pub winning_restart: usize,
    /// Restarts that relaxed without error.
    pub restarts_used: usize,
    pub rng_seed: u64,
}

impl<T: Real> CrystalState<T> {
    pub fn n_ions(&self) -> usize {
        self.positions.len()
    }
}

fn coulomb_strength<T: Real>(species: &IonSpecies) -> T {
    lit(COULOMB_CONSTANT * species.charge * species.charge)
}

/// Total energy with order-independent summation: every trap and pair term
/// is collected and sorted before adding, so any permutation of the same
/// ion set produces bit-identical output.
pub fn total_energy<T, P>(
    positions: &[Vector3<T>],
    potential: &P,
    species: &IonSpecies,
) -> Result<T>
where
    T: Real,
    P: Potential<T> + ?Sized,
{
    let kq2 = coulomb_strength::<T>(species);
    let limit: T = lit(COINCIDENCE_LIMIT);
    let mut terms = Vec::with_capacity(positions.len() * (positions.len() + 1) / 2);
    for (i, p) in positions.iter().enumerate() {
        terms.push(potential.energy(p)?);
        for (j, q) in positions.iter().enumerate().skip(i + 1) {
            let r = (p - q).norm();
            if r < limit {
                return Err(Error::CoincidentIons {
                    i,
                    j,
                    limit: COINCIDENCE_LIMIT,
                });
            }
            terms.push(kq2 / r);
        }
    }
    terms.sort_by(|a, b| a.partial_cmp(b).expect("energy terms are ordered"));
    Ok(terms.into_iter().sum())
}

/// Fast energy-and-gradient evaluation used inside the relaxation loops.
/// Gradient entry `i` is the derivative of the total energy with respect to
/// ion `i`'s position.
pub fn energy_and_gradient<T, P>(
    positions: &[Vector3<T>],
    potential: &P,
    species: &IonSpecies,
) -> Result<(T, Vec<Vector3<T>>)>
where
    T: Real,
    P: Potential<T> + ?Sized,
{
    let kq2 = coulomb_strength::<T>(species);
    let limit: T = lit(COINCIDENCE_LIMIT);
    let mut energy = T::zero();
    let mut grad = vec![Vector3::zeros(); positions.len()];
    for (i, p) in positions.iter().enumerate() {
        let (e, g) = potential.energy_gradient(p)?;
        energy += e;
        grad[i] += g;
        for (j, q) in positions.iter().enumerate().skip(i + 1) {
            let d = p - q;
            let r = d.norm();
            if r < limit {
                return Err(Error::CoincidentIons {
                    i,
                    j,
                    limit: COINCIDENCE_LIMIT,
                });
            }
            energy += kq2 / r;
            let pair = d * (kq2 / (r * r * r));
            grad[i] -= pair;
            grad[j] += pair;
        }
    }
    Ok((energy, grad))
}

pub fn max_force_magnitude<T: Real>(grad: &[Vector3<T>]) -> T {
    grad.iter()
        .map(|g| g.norm())
        .fold(T::zero(), |a, b| if b > a { b } else { a })
}

/// Geometric context shared by all restarts of one problem.
struct ProblemScales<T> {
    info: SecularInfo<T>,
    /// Characteristic length at the geometric-mean frequency.
    length: f64,
    /// Characteristic Coulomb force `k q^2 / l^2`.
    force: T,
}

fn problem_scales<T, P>(potential: &P, species: &IonSpecies) -> Result<ProblemScales<T>>
where
    T: Real,
    P: Potential<T> + ?Sized,
{
    let info = secular_frequencies(potential, species)?;
    let omega_bar = info
        .frequencies
        .iter()
        .map(|w| w.as_f64())
        .product::<f64>()
        .cbrt();
    let length = characteristic_length(species, omega_bar);
    let kq2 = COULOMB_CONSTANT * species.charge * species.charge;
    Ok(ProblemScales {
        info,
        length,
        force: lit(kq2 / (length * length)),
    })
}

/// Draws one starting cloud inside an ellipsoid around the trap minimum,
/// elongated along the soft axes.
fn initial_cloud<T: Real>(
    scales: &ProblemScales<T>,
    n: usize,
    options: &SolverOptions,
    rng: &mut ChaCha8Rng,
) -> Vec<Vector3<T>> {
    let omega_bar = scales
        .info
        .frequencies
        .iter()
        .map(|w| w.as_f64())
        .product::<f64>()
        .cbrt();
    let radius = options.init_radius_scale * scales.length * (n as f64).cbrt();
    let semi: Vec<f64> = scales
        .info
        .frequencies
        .iter()
        .map(|w| radius * omega_bar / w.as_f64())
        .collect();
    let ball = UnitBall;
    (0..n)
        .map(|_| {
            let u: [f64; 3] = ball.sample(rng);
            // Stretch along the principal axes, then shift to the minimum.
            let mut r = scales.info.minimum;
            for (col, (ui, si)) in u.iter().zip(&semi).enumerate() {
                let a = scales.info.axes.column(col);
                let amp: T = lit(ui * si);
                r += a * amp;
            }
            r
        })
        .collect()
}

fn sort_positions<T: Real>(positions: &mut [Vector3<T>]) {
    positions.sort_by(|a, b| {
        (a[2], a[1], a[0])
            .partial_cmp(&(b[2], b[1], b[0]))
            .expect("positions are finite")
    });
}

fn run_restart<T, P>(
    potential: &P,
    species: &IonSpecies,
    n: usize,
    options: &SolverOptions,
    scales: &ProblemScales<T>,
    restart: usize,
) -> Result<CrystalState<T>>
where
    T: Real,
    P: Potential<T> + ?Sized,
{
    let mut rng = ChaCha8Rng::seed_from_u64(options.rng_seed);
    rng.set_stream(restart as u64 + 1);
    let mut positions = initial_cloud(scales, n, options, &mut rng);
    // Retreat toward the minimum if the cloud poked outside the domain.
    for p in &mut positions {
        let mut shrink = 0;
        while !potential.contains(p) && shrink < 60 {
            *p = scales.info.minimum + (*p - scales.info.minimum) * lit::<T>(0.5);
            shrink += 1;
        }
    }
    let report = minimize::relax(
        &mut positions,
        potential,
        species,
        options,
        scales.force,
        scales.length,
    )?;
    sort_positions(&mut positions);
    let energy = total_energy(&positions, potential, species)?;
    Ok(CrystalState {
        positions,
        total_energy: energy,
        max_residual_force: report.max_force,
        converged: report.converged,
        winning_restart: restart,
        restarts_used: 1,
        rng_seed: options.rng_seed,
    })
}

/// Characteristic ion spacing for a potential, from the geometric mean of
/// its three secular frequencies.
pub fn length_scale<T, P>(potential: &P, species: &IonSpecies) -> Result<f64>
where
    T: Real,
    P: Potential<T> + ?Sized,
{
    problem_scales::<T, P>(potential, species).map(|s| s.length)
}

/// Relaxes `n` ions from `options.restarts` random clouds and returns the
/// best result: lowest-energy converged state, or the smallest-residual
/// state if nothing converged. Ties within a part in 1e12 keep the lower
/// restart index.
pub fn find_equilibrium<T, P>(
    potential: &P,
    species: &IonSpecies,
    n: usize,
    options: &SolverOptions,
) -> Result<CrystalState<T>>
where
    T: Real,
    P: Potential<T> + ?Sized + Sync,
{
    options.validate()?;
    species.validate()?;
    if n == 0 {
        return Err(Error::TooFewIons { need: 1, got: 0 });
    }
    let scales = problem_scales(potential, species)?;

    let results: Vec<Result<CrystalState<T>>> = (0..options.restarts)
        .into_par_iter()
        .map(|restart| run_restart(potential, species, n, options, &scales, restart))
        .collect();

    reduce_restarts(results)
}

/// Relaxes a supplied configuration without randomization (one restart).
pub fn find_equilibrium_from<T, P>(
    potential: &P,
    species: &IonSpecies,
    initial: &[Vector3<T>],
    options: &SolverOptions,
) -> Result<CrystalState<T>>
where
    T: Real,
    P: Potential<T> + ?Sized,
{
    options.validate()?;
    species.validate()?;
    if initial.is_empty() {
        return Err(Error::TooFewIons { need: 1, got: 0 });
    }
    let scales = problem_scales(potential, species)?;
    let mut positions = initial.to_vec();
    let report = minimize::relax(
        &mut positions,
        potential,
        species,
        options,
        scales.force,
        scales.length,
    )?;
    sort_positions(&mut positions);
    let energy = total_energy(&positions, potential, species)?;
    Ok(CrystalState {
        positions,
        total_energy: energy,
        max_residual_force: report.max_force,
        converged: report.converged,
        winning_restart: 0,
        restarts_used: 1,
        rng_seed: options.rng_seed,
    })
}

/// Index-ordered reduction over restart outcomes; scheduling order cannot
/// influence the winner.
fn reduce_restarts<T: Real>(
    results: Vec<Result<CrystalState<T>>>,
) -> Result<CrystalState<T>> {
    let mut best: Option<CrystalState<T>> = None;
    let mut ok_count = 0usize;
    let mut first_err: Option<Error> = None;
    for res in results {
        match res {
            Ok(state) => {
                ok_count += 1;
                best = Some(match best.take() {
                    None => state,
                    Some(cur) => pick_better(cur, state),
                });
            }
            Err(e) => {
                if first_err.is_none() {
                    first_err = Some(e);
                }
            }
        }
    }
    match best {
        Some(mut state) => {
            state.restarts_used = ok_count;
            Ok(state)
        }
        None => Err(first_err.expect("at least one restart ran")),
    }
}

fn pick_better<T: Real>(cur: CrystalState<T>, cand: CrystalState<T>) -> CrystalState<T> {
    if cur.converged != cand.converged {
        return if cand.converged { cand } else { cur };
    }
    if !cur.converged {
        // Neither settled: keep the smaller residual.
        return if cand.max_residual_force < cur.max_residual_force {
            cand
        } else {
            cur
        };
    }
    // Both converged: require a meaningful energy drop to displace the
    // earlier restart, so degenerate minima resolve deterministically.
    let margin = cur.total_energy.abs() * lit::<T>(1.0e-12);
    if cand.total_energy < cur.total_energy - margin {
        cand
    } else {
        cur
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potential::{HarmonicParameters, HarmonicPotential};
    use approx::assert_relative_eq;

    fn ba() -> IonSpecies {
        IonSpecies::ba138()
    }

    fn harmonic(fx: f64, fy: f64, fz: f64) -> HarmonicPotential<f64> {
        HarmonicPotential::new(&HarmonicParameters::from_hz(fx, fy, fz), &ba()).unwrap()
    }

    #[test]
    fn characteristic_length_at_reference_frequency() {
        let l = characteristic_length(&ba(), std::f64::consts::TAU * 212.0e3);
        assert_relative_eq!(l, 8.2807e-6, max_relative = 1e-4);
    }

    #[test]
    fn two_ion_energy_at_fixed_separation() {
        // Two charges 10 um apart, trap energy excluded by placing them
        // symmetrically in a well that contributes equally.
        let pot = harmonic(100.0e3, 100.0e3, 100.0e3);
        let d = 10.0e-6;
        let positions = vec![
            Vector3::new(-d / 2.0, 0.0, 0.0),
            Vector3::new(d / 2.0, 0.0, 0.0),
        ];
        let e = total_energy(&positions, &pot, &ba()).unwrap();
        let trap = 2.0 * pot.energy(&positions[0]).unwrap();
        assert_relative_eq!(e - trap, 2.30708e-23, max_relative = 1e-4);
    }

    #[test]
    fn energy_is_bit_identical_under_permutation() {
        let pot = harmonic(150.0e3, 180.0e3, 420.0e3);
        let mut positions = vec![
            Vector3::new(1.1e-6, -0.4e-6, 0.2e-6),
            Vector3::new(-5.0e-6, 2.0e-6, -1.0e-6),
            Vector3::new(3.0e-6, 4.0e-6, 0.5e-6),
            Vector3::new(-2.2e-6, -3.3e-6, 0.9e-6),
        ];
        let e1 = total_energy(&positions, &pot, &ba()).unwrap();
        positions.reverse();
        positions.swap(0, 2);
        let e2 = total_energy(&positions, &pot, &ba()).unwrap();
        assert_eq!(e1.to_bits(), e2.to_bits());
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let pot = harmonic(150.0e3, 180.0e3, 420.0e3);
        let positions = vec![
            Vector3::new(2.0e-6, 1.0e-6, -0.5e-6),
            Vector3::new(-4.0e-6, -1.5e-6, 0.8e-6),
            Vector3::new(0.5e-6, 5.0e-6, 0.1e-6),
        ];
        let (_, grad) = energy_and_gradient(&positions, &pot, &ba()).unwrap();
        let h = 1.0e-11;
        for i in 0..positions.len() {
            for axis in 0..3 {
                let mut plus = positions.clone();
                let mut minus = positions.clone();
                plus[i][axis] += h;
                minus[i][axis] -= h;
                let fd = (total_energy(&plus, &pot, &ba()).unwrap()
                    - total_energy(&minus, &pot, &ba()).unwrap())
                    / (2.0 * h);
                assert_relative_eq!(grad[i][axis], fd, max_relative = 1e-4);
            }
        }
    }

    #[test]
    fn coincident_ions_are_rejected() {
        let pot = harmonic(100.0e3, 100.0e3, 100.0e3);
        let positions = vec![Vector3::zeros(), Vector3::new(1.0e-10, 0.0, 0.0)];
        match total_energy(&positions, &pot, &ba()) {
            Err(Error::CoincidentIons { i: 0, j: 1, .. }) => {}
            other => panic!("expected coincidence error, got {other:?}"),
        }
    }

    #[test]
    fn two_ions_settle_at_known_separation() {
        // Weak x axis: the pair aligns along x with spacing 2^(1/3) l(omega_x).
        let pot = harmonic(100.0e3, 500.0e3, 500.0e3);
        let opts = SolverOptions {
            restarts: 8,
            ..Default::default()
        };
        let state = find_equilibrium(&pot, &ba(), 2, &opts).unwrap();
        assert!(state.converged);
        let d = (state.positions[0] - state.positions[1]).norm();
        let l = characteristic_length(&ba(), std::f64::consts::TAU * 100.0e3);
        assert_relative_eq!(d, l * 2.0_f64.cbrt(), max_relative = 1e-6);
        // Aligned with x, centered on the origin.
        assert!(state.positions[0][1].abs() < 1e-9 * l);
        assert!(state.positions[0][2].abs() < 1e-9 * l);
        assert!((state.positions[0][0] + state.positions[1][0]).abs() < 1e-9 * l);
    }

    #[test]
    fn single_ion_sits_at_trap_minimum() {
        let pot = harmonic(200.0e3, 220.0e3, 600.0e3);
        let state = find_equilibrium(&pot, &ba(), 1, &SolverOptions::default()).unwrap();
        assert!(state.converged);
        assert!(state.positions[0].norm() < 1e-12);
    }

    #[test]
    fn deterministic_across_runs_and_seed_sensitive() {
        let pot = harmonic(150.0e3, 160.0e3, 450.0e3);
        let opts = SolverOptions {
            restarts: 6,
            ..Default::default()
        };
        let a = find_equilibrium(&pot, &ba(), 5, &opts).unwrap();
        let b = find_equilibrium(&pot, &ba(), 5, &opts).unwrap();
        assert_eq!(a.total_energy.to_bits(), b.total_energy.to_bits());
        for (p, q) in a.positions.iter().zip(&b.positions) {
            assert_eq!(p[0].to_bits(), q[0].to_bits());
            assert_eq!(p[1].to_bits(), q[1].to_bits());
            assert_eq!(p[2].to_bits(), q[2].to_bits());
        }
        // A different seed still reaches the same physical minimum.
        let opts2 = SolverOptions {
            rng_seed: 99,
            ..opts
        };
        let c = find_equilibrium(&pot, &ba(), 5, &opts2).unwrap();
        assert_relative_eq!(a.total_energy, c.total_energy, max_relative = 1e-9);
    }

    #[test]
    fn warm_start_refines_a_perturbed_crystal() {
        let pot = harmonic(120.0e3, 130.0e3, 400.0e3);
        let opts = SolverOptions {
            restarts: 6,
            ..Default::default()
        };
        let cold = find_equilibrium(&pot, &ba(), 4, &opts).unwrap();
        let nudged: Vec<_> = cold
            .positions
            .iter()
            .map(|p| p + Vector3::new(3.0e-8, -2.0e-8, 1.0e-8))
            .collect();
        let warm = find_equilibrium_from(&pot, &ba(), &nudged, &opts).unwrap();
        assert!(warm.converged);
        assert_relative_eq!(
            warm.total_energy,
            cold.total_energy,
            max_relative = 1e-10
        );
    }

    #[test]
    fn zero_ions_is_an_error() {
        let pot = harmonic(100.0e3, 110.0e3, 300.0e3);
        assert!(matches!(
            find_equilibrium(&pot, &ba(), 0, &SolverOptions::default()),
            Err(Error::TooFewIons { .. })
        ));
    }
}
