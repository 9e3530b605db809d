//! Time-averaged RF pseudopotential and its curvature analysis.
//!
//! For an RF drive of zero-to-peak amplitude `V` at angular frequency
//! `Omega`, an ion of charge `e_ion` and mass `m` sees the secular potential
//!
//! ```text
//! Phi_ps(r) = e_ion^2 V^2 |grad phi_rf(r)|^2 / (4 m Omega^2)    [J]
//! ```
//!
//! where `phi_rf` is the unit-voltage RF basis solution.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::field::grid::{MaskGrid, ScalarFieldGrid};
use crate::physics::{DriveParameters, IonSpecies};
use crate::scalar::{lit, Real};

/// Builds the pseudopotential grid (J) from the solved RF basis.
///
/// Gradients use central differences on free nodes; electrode neighbors hold
/// their surface voltage, which is valid at the node position whenever the
/// arm is full. Where a boundary arm is shortened the stencil differentiates
/// the parabola through the far neighbor, the node, and the surface value at
/// its fractional distance, staying exact for quadratics. Electrode and
/// enclosure nodes keep a value of zero and stay masked.
pub fn pseudopotential_grid<T: Real>(
    rf_basis: &ScalarFieldGrid<T>,
    drive: &DriveParameters,
    species: &IonSpecies,
) -> Result<ScalarFieldGrid<T>> {
    drive.validate()?;
    species.validate()?;
    let layout = rf_basis.layout;
    let mask: &Arc<MaskGrid> = &rf_basis.mask;
    let [nx, ny, nz] = layout.dims;
    let h = layout.spacing;
    let prefactor = species.charge * species.charge * drive.rf_amplitude * drive.rf_amplitude
        / (4.0 * species.mass * drive.rf_angular_frequency * drive.rf_angular_frequency);
    let pref: T = lit(prefactor);
    let inv_2h: T = lit(1.0 / (2.0 * h));
    let inv_h: T = lit(1.0 / h);

    let mut values = vec![T::zero(); layout.len()];
    let strides = [1usize, nx, nx * ny];
    for k in 1..nz - 1 {
        for j in 1..ny - 1 {
            for i in 1..nx - 1 {
                let idx = layout.idx(i, j, k);
                if !mask.is_free(idx) {
                    continue;
                }
                let arms = mask.arms.get(idx);
                let mut g2 = T::zero();
                for (axis, s) in strides.into_iter().enumerate() {
                    let um = rf_basis.values[idx - s];
                    let up = rf_basis.values[idx + s];
                    let short = arms.map(|a| (a[2 * axis], a[2 * axis + 1]));
                    let d = match short {
                        Some((tm, tp)) if tm != 1.0 || tp != 1.0 => {
                            let wm: T = lit(tp / (tm * (tm + tp)));
                            let wp: T = lit(tm / (tp * (tm + tp)));
                            (up * wp - um * wm + rf_basis.values[idx] * (wm - wp)) * inv_h
                        }
                        _ => (up - um) * inv_2h,
                    };
                    g2 += d * d;
                }
                values[idx] = pref * g2;
            }
        }
    }
    Ok(ScalarFieldGrid {
        layout,
        values,
        mask: Arc::clone(mask),
        achieved_residual: None,
    })
}

/// Walks downhill over grid nodes from the geometric center to the nearest
/// discrete local minimum. Errors if the walk reaches a masked node.
pub fn descend_to_minimum<T: Real>(grid: &ScalarFieldGrid<T>) -> Result<[usize; 3]> {
    let layout = grid.layout;
    let mut node = layout.center();
    if !grid.mask.is_free(layout.idx(node[0], node[1], node[2])) {
        return Err(Error::MinimumOnBoundary);
    }
    let max_steps = layout.dims.iter().sum::<usize>();
    for _ in 0..max_steps {
        let here = grid.at(node[0], node[1], node[2]);
        let mut best = (here, node);
        for (axis, delta) in [(0usize, -1i64), (0, 1), (1, -1), (1, 1), (2, -1), (2, 1)] {
            let mut p = [node[0] as i64, node[1] as i64, node[2] as i64];
            p[axis] += delta;
            if p[axis] < 0 || p[axis] >= layout.dims[axis] as i64 {
                return Err(Error::MinimumOnBoundary);
            }
            let q = [p[0] as usize, p[1] as usize, p[2] as usize];
            let idx = layout.idx(q[0], q[1], q[2]);
            if !grid.mask.is_free(idx) {
                // Downhill into metal means no interior minimum here.
                if grid.values[idx] < here {
                    return Err(Error::MinimumOnBoundary);
                }
                continue;
            }
            if grid.values[idx] < best.0 {
                best = (grid.values[idx], q);
            }
        }
        if best.1 == node {
            return Ok(node);
        }
        node = best.1;
    }
    Err(Error::MinimumOnBoundary)
}

/// Axis curvatures (value-units / m^2) at the local minimum reached by
/// descent from the geometric center.
pub fn curvatures_at_center<T: Real>(grid: &ScalarFieldGrid<T>) -> Result<[T; 3]> {
    let node = descend_to_minimum(grid)?;
    grid.curvatures_at_node(node)
}

/// Trap aspect ratio `alpha = omega_z / omega_r` of a pseudopotential grid:
/// `sqrt(c_z / mean(c_x, c_y))` from the curvatures at its minimum.
///
/// Errors if any curvature is non-positive or if the transverse curvatures
/// disagree by more than 2% (broken symmetry upstream).
pub fn aspect_ratio_rf<T: Real>(grid: &ScalarFieldGrid<T>) -> Result<T> {
    let c = curvatures_at_center(grid)?;
    let cf = [c[0].as_f64(), c[1].as_f64(), c[2].as_f64()];
    if cf.iter().any(|&x| x <= 0.0) {
        return Err(Error::NegativeCurvature(cf));
    }
    let mean_r = (cf[0] + cf[1]) / 2.0;
    if (cf[0] - cf[1]).abs() / mean_r > 0.02 {
        return Err(Error::NegativeCurvature(cf));
    }
    Ok((c[2] / (lit::<T>(0.5) * (c[0] + c[1]))).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::grid::{GridLayout, LABEL_ENCLOSURE, LABEL_FREE};
    use approx::assert_relative_eq;

    fn analytic_grid(curv: [f64; 3]) -> ScalarFieldGrid<f64> {
        // Quadratic bowl (1/2) sum c_i x_i^2.
        let layout = GridLayout::centered_cube(8.0e-3, 0.4e-3).unwrap();
        let labels: Vec<u8> = (0..layout.len())
            .map(|idx| {
                let [i, j, k] = layout.coords(idx);
                if layout.on_boundary(i, j, k) {
                    LABEL_ENCLOSURE
                } else {
                    LABEL_FREE
                }
            })
            .collect();
        let mask = Arc::new(MaskGrid {
            layout,
            labels,
            arms: Default::default(),
            geometry_hash: [0; 32],
        });
        let values: Vec<f64> = (0..layout.len())
            .map(|idx| {
                let [i, j, k] = layout.coords(idx);
                let [x, y, z] = layout.pos(i, j, k);
                0.5 * (curv[0] * x * x + curv[1] * y * y + curv[2] * z * z)
            })
            .collect();
        ScalarFieldGrid {
            layout,
            values,
            mask,
            achieved_residual: None,
        }
    }

    #[test]
    fn aspect_ratio_of_quadrupole_curvatures() {
        // Curvature pattern (1, 1, 4): alpha = 2.
        let g = analytic_grid([1.0, 1.0, 4.0]);
        assert_relative_eq!(aspect_ratio_rf(&g).unwrap(), 2.0, max_relative = 1e-9);
        // Isotropic bowl: alpha = 1.
        let g = analytic_grid([3.0, 3.0, 3.0]);
        assert_relative_eq!(aspect_ratio_rf(&g).unwrap(), 1.0, max_relative = 1e-9);
    }

    #[test]
    fn aspect_ratio_rejects_saddles() {
        let g = analytic_grid([-1.0, -1.0, 2.0]);
        assert!(aspect_ratio_rf(&g).is_err());
    }

    #[test]
    fn descent_finds_offset_minimum() {
        // Shift the bowl by a few nodes; descent should land on it.
        let mut g = analytic_grid([1.0, 1.0, 1.0]);
        let layout = g.layout;
        let x0 = 3.0 * layout.spacing;
        for idx in 0..layout.len() {
            let [i, j, k] = layout.coords(idx);
            let [x, y, z] = layout.pos(i, j, k);
            g.values[idx] = 0.5 * ((x - x0).powi(2) + y * y + z * z);
        }
        let c = layout.center();
        let node = descend_to_minimum(&g).unwrap();
        assert_eq!(node, [c[0] + 3, c[1], c[2]]);
    }
}
