//! Electrostatic field stage: electrode geometry, rasterization, Laplace
//! relaxation for unit-voltage bases, the RF pseudopotential, and the basis
//! cache.

pub mod cache;
pub mod geometry;
pub mod grid;
pub mod laplace;
pub mod pseudo;

pub use cache::{read_grid, write_grid, BasisSet};
pub use geometry::{BasisId, Electrode, ElectrodeGeometry, SECTOR_COUNT};
pub use grid::{rasterize, rasterize_onto, BoundaryArms, GridLayout, MaskGrid, ScalarFieldGrid};
pub use laplace::{solve_basis, solve_dirichlet, RelaxationOptions};
pub use pseudo::{aspect_ratio_rf, curvatures_at_center, pseudopotential_grid};
