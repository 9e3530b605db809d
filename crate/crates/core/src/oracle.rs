//! Independent cross-check minimizer for harmonic-trap crystals.
//!
//! Deliberately shares no code with the production solver: energies are
//! recomputed from scratch here, the global search is simulated annealing
//! with single-ion Metropolis moves, and the final polish is a coordinate
//! pattern search. It is slow and f64-only, and exists so tests can confirm
//! that the fast solver lands on the same ground states by an entirely
//! different route.

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::physics::consts::COULOMB_CONSTANT;
use crate::physics::IonSpecies;
use crate::potential::HarmonicParameters;

#[derive(Debug, Clone)]
pub struct OracleResult {
    pub positions: Vec<Vector3<f64>>,
    pub energy: f64,
    /// Metropolis proposals attempted.
    pub proposals: usize,
}

struct Problem {
    /// `m omega_i^2` per axis.
    stiff: [f64; 3],
    kq2: f64,
}

impl Problem {
    fn trap(&self, p: &Vector3<f64>) -> f64 {
        0.5 * (self.stiff[0] * p[0] * p[0]
            + self.stiff[1] * p[1] * p[1]
            + self.stiff[2] * p[2] * p[2])
    }

    fn pair(&self, a: &Vector3<f64>, b: &Vector3<f64>) -> f64 {
        let r = (a - b).norm();
        if r == 0.0 {
            f64::INFINITY
        } else {
            self.kq2 / r
        }
    }

    /// Energy terms involving ion `i` if it sat at `candidate`.
    fn ion_energy(&self, positions: &[Vector3<f64>], i: usize, candidate: &Vector3<f64>) -> f64 {
        let mut e = self.trap(candidate);
        for (j, q) in positions.iter().enumerate() {
            if j != i {
                e += self.pair(candidate, q);
            }
        }
        e
    }

    fn total(&self, positions: &[Vector3<f64>]) -> f64 {
        let mut e = 0.0;
        for (i, p) in positions.iter().enumerate() {
            e += self.trap(p);
            for q in &positions[i + 1..] {
                e += self.pair(p, q);
            }
        }
        e
    }
}

/// Anneals `n_ions` into a harmonic well and polishes the best configuration
/// found. Deterministic for a given seed.
pub fn reference_minimum(
    params: &HarmonicParameters,
    species: &IonSpecies,
    n_ions: usize,
    seed: u64,
) -> OracleResult {
    let problem = Problem {
        stiff: [
            species.mass * params.omega_x * params.omega_x,
            species.mass * params.omega_y * params.omega_y,
            species.mass * params.omega_z * params.omega_z,
        ],
        kq2: COULOMB_CONSTANT * species.charge * species.charge,
    };
    let omega_bar = (params.omega_x * params.omega_y * params.omega_z).cbrt();
    let length = (problem.kq2 / (species.mass * omega_bar * omega_bar)).cbrt();
    let e_scale = problem.kq2 / length;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let radius = 1.5 * length * (n_ions as f64).cbrt();
    let mut positions: Vec<Vector3<f64>> = (0..n_ions)
        .map(|_| {
            Vector3::new(
                rng.gen_range(-1.0..1.0) * radius * omega_bar / params.omega_x,
                rng.gen_range(-1.0..1.0) * radius * omega_bar / params.omega_y,
                rng.gen_range(-1.0..1.0) * radius * omega_bar / params.omega_z,
            )
        })
        .collect();

    // Annealing ladder: geometric cooling with single-ion moves.
    let stages = 90;
    let proposals_per_stage = 60 * n_ions;
    let t_hot = 3.0 * e_scale;
    let t_cold = 1.0e-5 * e_scale;
    let cool = (t_cold / t_hot).powf(1.0 / (stages as f64 - 1.0));

    let mut best = positions.clone();
    let mut best_energy = problem.total(&positions);
    let mut proposals = 0usize;

    let mut temperature = t_hot;
    for _ in 0..stages {
        let step = 0.5 * length * (temperature / t_hot).sqrt().max(0.02);
        let jump = Normal::new(0.0, step).expect("positive step");
        let mut energy = problem.total(&positions);
        for _ in 0..proposals_per_stage {
            proposals += 1;
            let i = rng.gen_range(0..n_ions);
            let old = positions[i];
            let cand = Vector3::new(
                old[0] + jump.sample(&mut rng),
                old[1] + jump.sample(&mut rng),
                old[2] + jump.sample(&mut rng),
            );
            let delta = problem.ion_energy(&positions, i, &cand)
                - problem.ion_energy(&positions, i, &old);
            let accept = delta <= 0.0 || {
                let p: f64 = rng.gen();
                p < (-delta / temperature).exp()
            };
            if accept {
                positions[i] = cand;
                energy += delta;
                if energy < best_energy {
                    best_energy = energy;
                    best.clone_from(&positions);
                }
            }
        }
        temperature *= cool;
    }

    // Pattern-search polish: deterministic coordinate moves with a shrinking
    // step, run until the step is far below any physical length scale.
    let mut positions = best;
    let mut delta = 0.1 * length;
    let delta_min = 1.0e-7 * length;
    let mut passes = 0;
    while delta > delta_min && passes < 20_000 {
        passes += 1;
        let mut improved = false;
        for i in 0..n_ions {
            for axis in 0..3 {
                for sign in [1.0, -1.0] {
                    let mut cand = positions[i];
                    cand[axis] += sign * delta;
                    let gain = problem.ion_energy(&positions, i, &positions[i])
                        - problem.ion_energy(&positions, i, &cand);
                    if gain > 0.0 {
                        positions[i] = cand;
                        improved = true;
                    }
                }
            }
        }
        if !improved {
            delta *= 0.5;
        }
    }

    let energy = problem.total(&positions);
    OracleResult {
        positions,
        energy,
        proposals,
    }
}
