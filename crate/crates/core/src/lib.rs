//! Simulation core for a sectored-ring Paul trap.
//!
//! The crate covers the full chain from electrode geometry to crystal
//! structure: finite-difference solutions of the Laplace boundary-value
//! problem for each electrode (`field`), pseudopotential and DC landscapes
//! with smooth interpolation (`potential`), multi-start relaxation of N-ion
//! Coulomb crystals (`crystal`), geometric classification (`structure`),
//! parameter sweeps and transition detection (`sweep`), and closed-form
//! checks like the planarity criterion (`physics`).
//!
//! All numerics are generic over the scalar type through [`scalar::Real`]
//! (any `nalgebra::RealField` with f64 conversions, in practice `f32` or
//! `f64`). The aliases below pin the common f64 instantiations.

pub mod crystal;
pub mod error;
pub mod field;
pub mod oracle;
pub mod physics;
pub mod potential;
pub mod scalar;
pub mod structure;
pub mod sweep;

pub use error::{Error, ErrorCategory, Result};
pub use physics::{DriveParameters, IonSpecies, PlanarityCriterion};
pub use scalar::Real;

/// Solved field grid holding f64 node values.
pub type FieldGrid = field::ScalarFieldGrid<f64>;
/// Full electrode basis set in f64.
pub type FieldBasis = field::BasisSet<f64>;
/// Field-backed trap potential in f64.
pub type TrapPotential = potential::FieldPotential<f64>;
/// Ideal harmonic trap potential in f64.
pub type HarmonicTrap = potential::HarmonicPotential<f64>;
/// Relaxed crystal state in f64.
pub type Crystal = crystal::CrystalState<f64>;
/// Structure classification report in f64.
pub type Structure = structure::StructureReport<f64>;
/// Sweep output in f64.
pub type Sweep = sweep::SweepResult<f64>;
