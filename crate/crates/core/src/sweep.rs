//! Parameter sweeps over crystal equilibria.
//!
//! A sweep walks a list of control values (a frequency, a voltage, an aspect
//! ratio) through a caller-supplied potential factory, relaxes the crystal at
//! every point, classifies it, and records category changes. Two tracking
//! modes: ground-state tracking re-seeds fresh restarts at every point and
//! keeps the lowest energy, while adiabatic tracking follows the previous
//! solution only, which lets metastable branches survive and makes hysteresis
//! observable by sweeping both directions.

use nalgebra::Vector3;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::crystal::{
    find_equilibrium, find_equilibrium_from, length_scale, CrystalState, SolverOptions,
};
use crate::error::{Error, Result};
use crate::physics::IonSpecies;
use crate::potential::{secular_frequencies, HarmonicParameters, HarmonicPotential, Potential};
use crate::scalar::{lit, Real};
use crate::structure::{classify, Category, ClassifyOptions, StructureReport};

/// RNG stream ids below this belong to cold restarts; warm-start jitter at
/// step `k` uses `WARM_STREAM_BASE + k` so the two never collide.
const WARM_STREAM_BASE: u64 = 1 << 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrackingMode {
    /// Warm start plus fresh restarts; keep the lowest-energy result.
    GroundState,
    /// Follow the previous solution only (after the first point).
    Adiabatic,
    /// No warm start: every point is an independent cold solve, step-wise
    /// identical to calling the equilibrium solver on its own.
    Independent,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepOptions {
    pub mode: TrackingMode,
    /// Jitter applied to the carried-over positions, as a fraction of the
    /// characteristic spacing.
    pub warm_noise: f64,
    /// Cold restarts per point in ground-state mode (the first point always
    /// uses the solver's full restart count).
    pub fresh_restarts: usize,
    pub solver: SolverOptions,
    pub classify: ClassifyOptions,
}

impl Default for SweepOptions {
    fn default() -> Self {
        Self {
            mode: TrackingMode::GroundState,
            warm_noise: 0.01,
            fresh_restarts: 4,
            solver: SolverOptions::default(),
            classify: ClassifyOptions::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(bound(
    serialize = "T: Serialize + nalgebra::Scalar",
    deserialize = "T: serde::de::DeserializeOwned + nalgebra::Scalar"
))]
pub struct SweepPoint<T> {
    pub index: usize,
    pub control: f64,
    pub state: CrystalState<T>,
    pub report: StructureReport<T>,
    /// Single-ion secular frequencies of this point's potential, rad/s,
    /// ascending.
    pub secular_frequencies: [T; 3],
}

/// A category change between consecutive sweep points.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    /// Index of the first point with the new category.
    pub step: usize,
    pub from: Category,
    pub to: Category,
    pub control_before: f64,
    pub control_after: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(bound(
    serialize = "T: Serialize + nalgebra::Scalar",
    deserialize = "T: serde::de::DeserializeOwned + nalgebra::Scalar"
))]
pub struct SweepResult<T> {
    pub points: Vec<SweepPoint<T>>,
    pub transitions: Vec<Transition>,
}

pub fn run_sweep<T, P, F>(
    controls: &[f64],
    n_ions: usize,
    species: &IonSpecies,
    build: F,
    options: &SweepOptions,
) -> Result<SweepResult<T>>
where
    T: Real,
    P: Potential<T> + Sync,
    F: Fn(f64) -> Result<P>,
{
    if controls.is_empty() {
        return Err(Error::InvalidParameter(
            "sweep needs at least one control value".into(),
        ));
    }
    if controls.iter().any(|c| !c.is_finite()) {
        return Err(Error::InvalidParameter(
            "sweep control values must be finite".into(),
        ));
    }
    options.solver.validate()?;

    let mut points: Vec<SweepPoint<T>> = Vec::with_capacity(controls.len());
    for (index, &control) in controls.iter().enumerate() {
        let potential = build(control)?;
        let secular = secular_frequencies(&potential, species)?;
        let state = if index == 0 || options.mode == TrackingMode::Independent {
            find_equilibrium(&potential, species, n_ions, &options.solver)?
        } else {
            let prev = &points[index - 1].state;
            let warm = warm_candidate(&potential, species, prev, index, options)?;
            match options.mode {
                TrackingMode::Adiabatic => match warm {
                    Some(s) if s.converged => s,
                    // Lost the branch: fall back to a full cold solve.
                    _ => find_equilibrium(&potential, species, n_ions, &options.solver)?,
                },
                TrackingMode::GroundState => {
                    let cold_opts = SolverOptions {
                        restarts: options.fresh_restarts.max(1),
                        ..options.solver
                    };
                    let cold = find_equilibrium(&potential, species, n_ions, &cold_opts)?;
                    match warm {
                        Some(w) => lower_energy(cold, w),
                        None => cold,
                    }
                }
                TrackingMode::Independent => unreachable!("handled above"),
            }
        };
        let report = classify(&state.positions, &options.classify)?;
        points.push(SweepPoint {
            index,
            control,
            state,
            report,
            secular_frequencies: secular.frequencies,
        });
    }

    let transitions = collect_transitions(&points);
    Ok(SweepResult {
        points,
        transitions,
    })
}

fn warm_candidate<T, P>(
    potential: &P,
    species: &IonSpecies,
    prev: &CrystalState<T>,
    step: usize,
    options: &SweepOptions,
) -> Result<Option<CrystalState<T>>>
where
    T: Real,
    P: Potential<T> + ?Sized,
{
    let l = length_scale(potential, species)?;
    let sigma = options.warm_noise * l;
    let mut rng = ChaCha8Rng::seed_from_u64(options.solver.rng_seed);
    rng.set_stream(WARM_STREAM_BASE + step as u64);
    let noise = Normal::new(0.0, sigma.max(f64::MIN_POSITIVE))
        .map_err(|e| Error::InvalidParameter(format!("warm noise: {e}")))?;
    let seed = potential.seed_point();
    let mut start: Vec<Vector3<T>> = prev
        .positions
        .iter()
        .map(|p| {
            Vector3::new(
                p[0] + lit(noise.sample(&mut rng)),
                p[1] + lit(noise.sample(&mut rng)),
                p[2] + lit(noise.sample(&mut rng)),
            )
        })
        .collect();
    for p in &mut start {
        let mut tries = 0;
        while !potential.contains(p) && tries < 60 {
            *p = seed + (*p - seed) * lit::<T>(0.5);
            tries += 1;
        }
    }
    match find_equilibrium_from(potential, species, &start, &options.solver) {
        Ok(s) => Ok(Some(s)),
        Err(e) if matches!(e, Error::OutOfDomain { .. } | Error::CoincidentIons { .. }) => {
            Ok(None)
        }
        Err(e) => Err(e),
    }
}

fn lower_energy<T: Real>(a: CrystalState<T>, b: CrystalState<T>) -> CrystalState<T> {
    if a.converged != b.converged {
        return if a.converged { a } else { b };
    }
    let margin = a.total_energy.abs() * lit::<T>(1.0e-12);
    if b.total_energy < a.total_energy - margin {
        b
    } else {
        a
    }
}

fn collect_transitions<T: Real>(points: &[SweepPoint<T>]) -> Vec<Transition> {
    points
        .windows(2)
        .filter(|w| w[0].report.category != w[1].report.category)
        .map(|w| Transition {
            step: w[1].index,
            from: w[0].report.category,
            to: w[1].report.category,
            control_before: w[0].control,
            control_after: w[1].control,
        })
        .collect()
}

/// One control value where forward and backward passes disagree.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HysteresisPoint {
    pub control: f64,
    pub forward: Category,
    pub backward: Category,
    /// `E_backward - E_forward` in joules; positive means the backward
    /// branch is metastable.
    pub energy_gap: f64,
}

/// Compares a forward sweep with its reversed counterpart point by point.
/// The backward sweep must have been run over the reversed control list.
pub fn hysteresis_report<T: Real>(
    forward: &SweepResult<T>,
    backward: &SweepResult<T>,
) -> Result<Vec<HysteresisPoint>> {
    let n = forward.points.len();
    if backward.points.len() != n {
        return Err(Error::InvalidParameter(
            "hysteresis comparison needs sweeps of equal length".into(),
        ));
    }
    let mut out = Vec::new();
    for (f, b) in forward.points.iter().zip(backward.points.iter().rev()) {
        if (f.control - b.control).abs() > 1e-9 * f.control.abs().max(1.0) {
            return Err(Error::InvalidParameter(format!(
                "control mismatch: forward {} vs backward {}",
                f.control, b.control
            )));
        }
        if f.report.category != b.report.category {
            out.push(HysteresisPoint {
                control: f.control,
                forward: f.report.category,
                backward: b.report.category,
                energy_gap: (b.state.total_energy - f.state.total_energy).as_f64(),
            });
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundaryResult {
    /// Last aspect ratio that still produced a non-flat crystal.
    pub alpha_low: f64,
    /// First aspect ratio that produced a flat crystal.
    pub alpha_high: f64,
    /// Midpoint estimate of the critical aspect ratio.
    pub alpha_critical: f64,
    pub evaluations: usize,
}

/// Bisects the axial-to-radial frequency ratio at which an N-ion crystal
/// flattens into a single plane, in an ideal harmonic trap with the given
/// transverse frequencies (Hz).
///
/// The bracket must straddle the transition: non-flat at `alpha_lo`, flat at
/// `alpha_hi`.
pub fn find_planarity_boundary(
    species: &IonSpecies,
    radial_hz: (f64, f64),
    n_ions: usize,
    alpha_lo: f64,
    alpha_hi: f64,
    tol: f64,
    solver: &SolverOptions,
    classify_opts: &ClassifyOptions,
) -> Result<BoundaryResult> {
    if !(alpha_lo > 0.0 && alpha_hi > alpha_lo && tol > 0.0) {
        return Err(Error::BracketInvalid(format!(
            "need 0 < alpha_lo < alpha_hi and tol > 0, got [{alpha_lo}, {alpha_hi}], tol {tol}"
        )));
    }
    let mean_radial = 0.5 * (radial_hz.0 + radial_hz.1);
    let mut evaluations = 0;
    let mut flat_at = |alpha: f64| -> Result<bool> {
        evaluations += 1;
        let params = HarmonicParameters::from_hz(radial_hz.0, radial_hz.1, alpha * mean_radial);
        let pot: HarmonicPotential<f64> = HarmonicPotential::new(&params, species)?;
        let state = find_equilibrium(&pot, species, n_ions, solver)?;
        if !state.converged {
            return Err(Error::NoConvergence {
                best_residual: state.max_residual_force,
            });
        }
        let report = classify(&state.positions, classify_opts)?;
        Ok(report.is_flat(classify_opts))
    };

    let (mut lo, mut hi) = (alpha_lo, alpha_hi);
    if flat_at(lo)? {
        return Err(Error::BracketInvalid(format!(
            "crystal is already flat at alpha_lo = {lo}"
        )));
    }
    if !flat_at(hi)? {
        return Err(Error::BracketInvalid(format!(
            "crystal is still not flat at alpha_hi = {hi}"
        )));
    }
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if flat_at(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(BoundaryResult {
        alpha_low: lo,
        alpha_high: hi,
        alpha_critical: 0.5 * (lo + hi),
        evaluations,
    })
}
