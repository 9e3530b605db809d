//! Two-stage relaxation of an ion configuration.
//!
//! A Barzilai-Borwein gradient descent with an Armijo backtracking safeguard
//! carries an arbitrary starting cloud into the basin of a minimum; once the
//! residual force falls below a thousandth of the characteristic Coulomb
//! force, a damped Newton stage polishes it to the requested tolerance with
//! quadratic convergence.

use nalgebra::{DMatrix, DVector, Vector3};

use crate::error::{Error, Result};
use crate::physics::consts::COULOMB_CONSTANT;
use crate::physics::IonSpecies;
use crate::potential::Potential;
use crate::scalar::{lit, Real};

use super::{energy_and_gradient, max_force_magnitude, SolverOptions};

#[derive(Debug, Clone, Copy)]
pub struct RelaxReport<T> {
    pub gradient_iterations: usize,
    pub newton_iterations: usize,
    pub converged: bool,
    /// Largest per-ion force magnitude at exit, newtons.
    pub max_force: T,
}

/// True for evaluation failures that a shorter trial step can cure.
fn recoverable(e: &Error) -> bool {
    matches!(
        e,
        Error::OutOfDomain { .. } | Error::CoincidentIons { .. }
    )
}

fn flat_dot<T: Real>(a: &[Vector3<T>], b: &[Vector3<T>]) -> T {
    a.iter().zip(b).map(|(x, y)| x.dot(y)).sum()
}

/// Relaxes `positions` in place toward a local energy minimum.
///
/// `force_scale` is the characteristic Coulomb force `k q^2 / l^2` and
/// `length` the characteristic spacing `l`; both only set step sizing and
/// the convergence threshold `force_tolerance * force_scale`.
pub fn relax<T, P>(
    positions: &mut Vec<Vector3<T>>,
    potential: &P,
    species: &IonSpecies,
    options: &SolverOptions,
    force_scale: T,
    length: f64,
) -> Result<RelaxReport<T>>
where
    T: Real,
    P: Potential<T> + ?Sized,
{
    let tol = lit::<T>(options.force_tolerance) * force_scale;
    let newton_gate = lit::<T>(1.0e-3) * force_scale;
    // Step that would move an ion 0.05 l under the characteristic force.
    let t0: T = lit::<T>(0.05 * length) / force_scale;
    let armijo: T = lit(1.0e-4);

    let mut report = RelaxReport {
        gradient_iterations: 0,
        newton_iterations: 0,
        converged: false,
        max_force: T::zero(),
    };

    let (mut energy, mut grad) = energy_and_gradient(positions.as_slice(), potential, species)?;
    let mut step = t0;
    let mut prev: Option<(Vec<Vector3<T>>, Vec<Vector3<T>>)> = None;

    while report.gradient_iterations < options.max_iterations {
        let fmax = max_force_magnitude(&grad);
        report.max_force = fmax;
        if fmax < tol {
            report.converged = true;
            return Ok(report);
        }
        if fmax < newton_gate {
            break;
        }
        report.gradient_iterations += 1;

        let g2 = flat_dot(&grad, &grad);
        let mut t = step;
        let mut accepted = false;
        for _ in 0..40 {
            let trial: Vec<Vector3<T>> =
                positions.iter().zip(&grad).map(|(p, g)| p - g * t).collect();
            match energy_and_gradient(trial.as_slice(), potential, species) {
                Ok((e_new, g_new)) if e_new <= energy - armijo * t * g2 => {
                    prev = Some((std::mem::take(positions), std::mem::replace(&mut grad, g_new)));
                    *positions = trial;
                    energy = e_new;
                    accepted = true;
                    break;
                }
                Ok(_) => {}
                Err(e) if recoverable(&e) => {}
                Err(e) => return Err(e),
            }
            t *= lit::<T>(0.5);
        }
        if !accepted {
            // Step underflow: the gradient stage cannot improve further.
            break;
        }
        // Barzilai-Borwein step length from the last displacement.
        step = match &prev {
            Some((old_pos, old_grad)) => {
                let s: Vec<Vector3<T>> = positions
                    .iter()
                    .zip(old_pos)
                    .map(|(p, q)| p - q)
                    .collect();
                let y: Vec<Vector3<T>> =
                    grad.iter().zip(old_grad).map(|(g, h)| g - h).collect();
                let sy = flat_dot(&s, &y);
                if sy > T::zero() {
                    let bb = flat_dot(&s, &s) / sy;
                    bb.min(t0 * lit(1.0e4)).max(t0 * lit(1.0e-4))
                } else {
                    t0
                }
            }
            None => t0,
        };
    }

    newton_polish(
        positions,
        potential,
        species,
        options,
        force_scale,
        length,
        tol,
        &mut report,
    )?;
    Ok(report)
}

/// Damped Newton iterations on the full 3N-dimensional energy.
#[allow(clippy::too_many_arguments)]
fn newton_polish<T, P>(
    positions: &mut Vec<Vector3<T>>,
    potential: &P,
    species: &IonSpecies,
    options: &SolverOptions,
    force_scale: T,
    length: f64,
    tol: T,
    report: &mut RelaxReport<T>,
) -> Result<()>
where
    T: Real,
    P: Potential<T> + ?Sized,
{
    let n = positions.len();
    let dim = 3 * n;
    // Natural stiffness scale for Levenberg damping.
    let lambda_unit: T = force_scale / lit(length);
    let lambda_max = lambda_unit * lit::<T>(1.0e9);
    let newton_cap = options.max_iterations.min(200);

    let (mut energy, mut grad) = energy_and_gradient(positions.as_slice(), potential, species)?;
    let mut lambda = T::zero();

    for _ in 0..newton_cap {
        let fmax = max_force_magnitude(&grad);
        report.max_force = fmax;
        if fmax < tol {
            report.converged = true;
            return Ok(());
        }
        report.newton_iterations += 1;

        let hessian = build_hessian(positions.as_slice(), potential, species)?;
        let mut g_flat = DVector::zeros(dim);
        for (i, g) in grad.iter().enumerate() {
            for a in 0..3 {
                g_flat[3 * i + a] = g[a];
            }
        }

        let mut advanced = false;
        while lambda <= lambda_max {
            let mut damped = hessian.clone();
            for d in 0..dim {
                damped[(d, d)] += lambda;
            }
            let Some(chol) = damped.cholesky() else {
                lambda = bump(lambda, lambda_unit);
                continue;
            };
            let delta = chol.solve(&(-&g_flat));
            let trial: Vec<Vector3<T>> = positions
                .iter()
                .enumerate()
                .map(|(i, p)| {
                    p + Vector3::new(delta[3 * i], delta[3 * i + 1], delta[3 * i + 2])
                })
                .collect();
            match energy_and_gradient(trial.as_slice(), potential, species) {
                Ok((e_new, g_new))
                    if e_new <= energy
                        || max_force_magnitude(&g_new) < max_force_magnitude(&grad) =>
                {
                    *positions = trial;
                    energy = e_new;
                    grad = g_new;
                    lambda *= lit::<T>(0.25);
                    if lambda < lambda_unit * lit::<T>(1.0e-12) {
                        lambda = T::zero();
                    }
                    advanced = true;
                    break;
                }
                Ok(_) => lambda = bump(lambda, lambda_unit),
                Err(e) if recoverable(&e) => lambda = bump(lambda, lambda_unit),
                Err(e) => return Err(e),
            }
        }
        if !advanced {
            break;
        }
    }
    report.max_force = max_force_magnitude(&grad);
    report.converged = report.max_force < tol;
    Ok(())
}

fn bump<T: Real>(lambda: T, unit: T) -> T {
    if lambda == T::zero() {
        unit * lit(1.0e-6)
    } else {
        lambda * lit(10.0)
    }
}

/// Full second-derivative matrix of the total energy, row-major blocks of
/// 3x3 per ion pair. Symmetric by construction.
pub fn build_hessian<T, P>(
    positions: &[Vector3<T>],
    potential: &P,
    species: &IonSpecies,
) -> Result<DMatrix<T>>
where
    T: Real,
    P: Potential<T> + ?Sized,
{
    let n = positions.len();
    let kq2: T = lit(COULOMB_CONSTANT * species.charge * species.charge);
    let mut h = DMatrix::zeros(3 * n, 3 * n);
    for (i, p) in positions.iter().enumerate() {
        let trap = potential.hessian(p)?;
        for a in 0..3 {
            for b in 0..3 {
                h[(3 * i + a, 3 * i + b)] += trap[(a, b)];
            }
        }
        for (j, q) in positions.iter().enumerate().skip(i + 1) {
            let d = p - q;
            let r2 = d.norm_squared();
            let r = r2.sqrt();
            let r3 = r2 * r;
            let r5 = r3 * r2;
            for a in 0..3 {
                for b in 0..3 {
                    let mut v = lit::<T>(3.0) * d[a] * d[b] / r5;
                    if a == b {
                        v -= T::one() / r3;
                    }
                    v *= kq2;
                    h[(3 * i + a, 3 * i + b)] += v;
                    h[(3 * j + a, 3 * j + b)] += v;
                    h[(3 * i + a, 3 * j + b)] -= v;
                    h[(3 * j + a, 3 * i + b)] -= v;
                }
            }
        }
    }
    Ok(h)
}
