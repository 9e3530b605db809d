//! Tricubic B-spline interpolation with analytic derivatives.
//!
//! Grid samples are prefiltered (one tridiagonal solve per grid line and
//! axis) into B-spline coefficients, so the interpolant passes through the
//! node values and is C^2 everywhere inside its domain. Gradients and
//! Hessians are exact derivatives of the piecewise polynomial; the Hessian is
//! symmetric by construction.
//!
//! The evaluation domain is every grid cell whose 4x4x4 coefficient stencil
//! stays inside the grid and touches no electrode or enclosure node.

use nalgebra::{Matrix3, Vector3};

use crate::error::{Error, Result};
use crate::field::grid::ScalarFieldGrid;
use crate::scalar::{lit, Real};

/// Uniform cubic B-spline basis on [0, 1), plus first and second derivatives.
#[inline]
fn basis<T: Real>(t: T) -> [[T; 4]; 3] {
    let one = T::one();
    let half: T = lit(0.5);
    let sixth: T = lit(1.0 / 6.0);
    let s = one - t;
    let t2 = t * t;
    let t3 = t2 * t;
    let v = [
        sixth * s * s * s,
        sixth * (lit::<T>(3.0) * t3 - lit::<T>(6.0) * t2 + lit::<T>(4.0)),
        sixth * (lit::<T>(-3.0) * t3 + lit::<T>(3.0) * t2 + lit::<T>(3.0) * t + one),
        sixth * t3,
    ];
    let d = [
        -half * s * s,
        half * (lit::<T>(3.0) * t2 - lit::<T>(4.0) * t),
        half * (lit::<T>(-3.0) * t2 + lit::<T>(2.0) * t + one),
        half * t2,
    ];
    let dd = [s, lit::<T>(3.0) * t - lit::<T>(2.0), one - lit::<T>(3.0) * t, t];
    [v, d, dd]
}

/// Prefilters one axis in place: node values -> B-spline coefficients.
///
/// Interior rows enforce interpolation, `(c[i-1] + 4 c[i] + c[i+1]) / 6 =
/// f[i]`. The end rows close the system with a vanishing third difference of
/// the coefficients (`c[0] - c[1] = f[0] - f[1]` and its mirror), which keeps
/// the solve tridiagonal and reproduces quadratic data exactly everywhere.
fn prefilter_axis<T: Real>(data: &mut [T], dims: [usize; 3], axis: usize) {
    let n = dims[axis];
    let stride = match axis {
        0 => 1,
        1 => dims[0],
        _ => dims[0] * dims[1],
    };
    let sixth: T = lit(1.0 / 6.0);
    let four_sixth: T = lit(4.0 / 6.0);

    // Superdiagonal after forward elimination; depends only on n.
    let mut cp = vec![T::zero(); n];
    cp[0] = -T::one();
    for i in 1..n - 1 {
        let m = four_sixth - sixth * cp[i - 1];
        cp[i] = sixth / m;
    }

    let (outer, inner) = match axis {
        0 => (dims[2], dims[1]),
        1 => (dims[2], dims[0]),
        _ => (dims[1], dims[0]),
    };
    let mut line = vec![T::zero(); n];
    for a in 0..outer {
        for b in 0..inner {
            let base = match axis {
                0 => dims[0] * (b + dims[1] * a),
                1 => b + dims[0] * dims[1] * a,
                _ => b + dims[0] * a,
            };
            // Forward sweep.
            line[0] = data[base] - data[base + stride];
            for i in 1..n - 1 {
                let m = four_sixth - sixth * cp[i - 1];
                line[i] = (data[base + i * stride] - sixth * line[i - 1]) / m;
            }
            let last = data[base + (n - 1) * stride] - data[base + (n - 2) * stride];
            let m_last = T::one() + cp[n - 2];
            line[n - 1] = (last + line[n - 2]) / m_last;
            // Back substitution.
            let mut next = line[n - 1];
            data[base + (n - 1) * stride] = next;
            for i in (0..n - 1).rev() {
                let x = line[i] - cp[i] * next;
                data[base + i * stride] = x;
                next = x;
            }
        }
    }
}

/// C^2 interpolant of one scalar grid.
#[derive(Debug, Clone)]
pub struct TricubicSpline<T> {
    dims: [usize; 3],
    origin: [T; 3],
    inv_h: T,
    h: f64,
    coeffs: Vec<T>,
    /// Per-cell evaluability; indexed `cx + (nx-1) (cy + (ny-1) cz)`.
    valid: Vec<bool>,
    center: Vector3<T>,
}

impl<T: Real> TricubicSpline<T> {
    pub fn build(grid: &ScalarFieldGrid<T>) -> Self {
        let layout = grid.layout;
        let dims = layout.dims;
        let mut coeffs = grid.values.clone();
        for axis in 0..3 {
            prefilter_axis(&mut coeffs, dims, axis);
        }

        let [nx, ny, nz] = dims;
        // A cell is valid when its full stencil is free of held nodes.
        let mut node_free = vec![false; grid.values.len()];
        for (idx, f) in node_free.iter_mut().enumerate() {
            *f = grid.mask.is_free(idx);
        }
        let cdims = [nx - 1, ny - 1, nz - 1];
        let mut valid = vec![false; cdims[0] * cdims[1] * cdims[2]];
        for cz in 1..nz.saturating_sub(2) {
            for cy in 1..ny.saturating_sub(2) {
                'cell: for cx in 1..nx.saturating_sub(2) {
                    for dz in 0..4 {
                        for dy in 0..4 {
                            for dx in 0..4 {
                                let idx =
                                    layout.idx(cx - 1 + dx, cy - 1 + dy, cz - 1 + dz);
                                if !node_free[idx] {
                                    continue 'cell;
                                }
                            }
                        }
                    }
                    valid[cx + cdims[0] * (cy + cdims[1] * cz)] = true;
                }
            }
        }

        let origin = [
            lit(layout.origin[0]),
            lit(layout.origin[1]),
            lit(layout.origin[2]),
        ];
        let c = layout.center();
        let p = layout.pos(c[0], c[1], c[2]);
        Self {
            dims,
            origin,
            inv_h: lit(1.0 / layout.spacing),
            h: layout.spacing,
            coeffs,
            valid,
            center: Vector3::new(lit(p[0]), lit(p[1]), lit(p[2])),
        }
    }

    /// Grid center, a convenient interior starting point.
    pub fn center(&self) -> Vector3<T> {
        self.center
    }

    pub fn spacing(&self) -> f64 {
        self.h
    }

    fn locate(&self, r: &Vector3<T>) -> Option<([usize; 3], [T; 3])> {
        let mut cell = [0usize; 3];
        let mut t = [T::zero(); 3];
        for axis in 0..3 {
            let u = (r[axis] - self.origin[axis]) * self.inv_h;
            let uf = u.floor();
            let c = uf.as_f64();
            let n = self.dims[axis];
            if !(c >= 1.0 && c <= (n - 3) as f64) {
                return None;
            }
            cell[axis] = c as usize;
            t[axis] = u - uf;
        }
        let cd = [self.dims[0] - 1, self.dims[1] - 1];
        if !self.valid[cell[0] + cd[0] * (cell[1] + cd[1] * cell[2])] {
            return None;
        }
        Some((cell, t))
    }

    pub fn contains(&self, r: &Vector3<T>) -> bool {
        self.locate(r).is_some()
    }

    fn out_of_domain(r: &Vector3<T>) -> Error {
        Error::OutOfDomain {
            x: r[0].as_f64(),
            y: r[1].as_f64(),
            z: r[2].as_f64(),
        }
    }

    /// Value, gradient, and Hessian at a point.
    pub fn value_grad_hess(&self, r: &Vector3<T>) -> Result<(T, Vector3<T>, Matrix3<T>)> {
        let (cell, t) = self.locate(r).ok_or_else(|| Self::out_of_domain(r))?;
        let bx = basis(t[0]);
        let by = basis(t[1]);
        let bz = basis(t[2]);
        let [nx, ny, _] = self.dims;

        let mut acc = [T::zero(); 10]; // v, gx, gy, gz, hxx, hyy, hzz, hxy, hxz, hyz
        for dz in 0..4 {
            for dy in 0..4 {
                let row = (cell[0] - 1)
                    + nx * ((cell[1] - 1 + dy) + ny * (cell[2] - 1 + dz));
                for dx in 0..4 {
                    let c = self.coeffs[row + dx];
                    let (vx, vy, vz) = (bx[0][dx], by[0][dy], bz[0][dz]);
                    let (gx, gy, gz) = (bx[1][dx], by[1][dy], bz[1][dz]);
                    acc[0] += c * vx * vy * vz;
                    acc[1] += c * gx * vy * vz;
                    acc[2] += c * vx * gy * vz;
                    acc[3] += c * vx * vy * gz;
                    acc[4] += c * bx[2][dx] * vy * vz;
                    acc[5] += c * vx * by[2][dy] * vz;
                    acc[6] += c * vx * vy * bz[2][dz];
                    acc[7] += c * gx * gy * vz;
                    acc[8] += c * gx * vy * gz;
                    acc[9] += c * vx * gy * gz;
                }
            }
        }
        let ih = self.inv_h;
        let ih2 = ih * ih;
        let grad = Vector3::new(acc[1] * ih, acc[2] * ih, acc[3] * ih);
        let hess = Matrix3::new(
            acc[4] * ih2,
            acc[7] * ih2,
            acc[8] * ih2,
            acc[7] * ih2,
            acc[5] * ih2,
            acc[9] * ih2,
            acc[8] * ih2,
            acc[9] * ih2,
            acc[6] * ih2,
        );
        Ok((acc[0], grad, hess))
    }

    /// Value and gradient only (minimizer hot path).
    pub fn value_grad(&self, r: &Vector3<T>) -> Result<(T, Vector3<T>)> {
        let (cell, t) = self.locate(r).ok_or_else(|| Self::out_of_domain(r))?;
        let bx = basis(t[0]);
        let by = basis(t[1]);
        let bz = basis(t[2]);
        let [nx, ny, _] = self.dims;
        let mut acc = [T::zero(); 4];
        for dz in 0..4 {
            for dy in 0..4 {
                let row = (cell[0] - 1)
                    + nx * ((cell[1] - 1 + dy) + ny * (cell[2] - 1 + dz));
                for dx in 0..4 {
                    let c = self.coeffs[row + dx];
                    let (vx, vy, vz) = (bx[0][dx], by[0][dy], bz[0][dz]);
                    acc[0] += c * vx * vy * vz;
                    acc[1] += c * bx[1][dx] * vy * vz;
                    acc[2] += c * vx * by[1][dy] * vz;
                    acc[3] += c * vx * vy * bz[1][dz];
                }
            }
        }
        Ok((
            acc[0],
            Vector3::new(acc[1] * self.inv_h, acc[2] * self.inv_h, acc[3] * self.inv_h),
        ))
    }

    pub fn value(&self, r: &Vector3<T>) -> Result<T> {
        Ok(self.value_grad(r)?.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::grid::{GridLayout, MaskGrid, LABEL_ENCLOSURE, LABEL_FREE};
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use std::sync::Arc;

    fn sample_grid(f: impl Fn(f64, f64, f64) -> f64) -> ScalarFieldGrid<f64> {
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
                f(x, y, z)
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
    fn interpolates_node_values() {
        let grid = sample_grid(|x, y, z| (900.0 * x).sin() + (700.0 * y).cos() + 500.0 * z);
        let spline = TricubicSpline::build(&grid);
        let layout = grid.layout;
        let c = layout.center();
        for di in [-3i64, 0, 2] {
            for dj in [-2i64, 1] {
                let i = (c[0] as i64 + di) as usize;
                let j = (c[1] as i64 + dj) as usize;
                let p = layout.pos(i, j, c[2]);
                let v = spline.value(&Vector3::new(p[0], p[1], p[2])).unwrap();
                assert_relative_eq!(v, grid.at(i, j, c[2]), max_relative = 1e-10);
            }
        }
    }

    #[test]
    fn reproduces_quadratics_exactly() {
        // Cubic B-splines reproduce polynomials up to degree 3.
        let grid = sample_grid(|x, y, z| 1.0 + 2.0 * x + 3.0 * x * y + z * z);
        let spline = TricubicSpline::build(&grid);
        let r = Vector3::new(0.3e-3, -0.7e-3, 0.52e-3);
        let (v, g, h) = spline.value_grad_hess(&r).unwrap();
        assert_relative_eq!(
            v,
            1.0 + 2.0 * r[0] + 3.0 * r[0] * r[1] + r[2] * r[2],
            max_relative = 1e-9
        );
        assert_relative_eq!(g[0], 2.0 + 3.0 * r[1], max_relative = 1e-6);
        assert_relative_eq!(g[1], 3.0 * r[0], max_relative = 1e-6);
        assert_relative_eq!(g[2], 2.0 * r[2], max_relative = 1e-6);
        assert_relative_eq!(h[(0, 1)], 3.0, max_relative = 1e-6);
        assert_relative_eq!(h[(2, 2)], 2.0, max_relative = 1e-6);
        assert_relative_eq!(h[(0, 0)], 0.0, epsilon = 1e-4);
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let grid = sample_grid(|x, y, z| {
            (1200.0 * x).sin() * (800.0 * y).cos() + (600.0 * z).sin()
        });
        let spline = TricubicSpline::build(&grid);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let h = grid.layout.spacing;
        let step = h / 20.0;
        for _ in 0..100 {
            let r = Vector3::new(
                rng.gen_range(-2.0e-3..2.0e-3),
                rng.gen_range(-2.0e-3..2.0e-3),
                rng.gen_range(-2.0e-3..2.0e-3),
            );
            let (v, g, hess) = spline.value_grad_hess(&r).unwrap();
            assert!(v.is_finite());
            for axis in 0..3 {
                let mut rp = r;
                let mut rm = r;
                rp[axis] += step;
                rm[axis] -= step;
                let fd = (spline.value(&rp).unwrap() - spline.value(&rm).unwrap()) / (2.0 * step);
                // Floor the scale near gradient zeros, where the difference
                // picks up knot effects that do not shrink with the local
                // gradient. Typical gradients of this sample field are ~1e3.
                let scale = g[axis].abs().max(10.0);
                assert!(
                    (fd - g[axis]).abs() / scale < 1e-3,
                    "grad axis {axis}: fd {fd:.6e} vs {:.6e}",
                    g[axis]
                );
                // Finer step for the curvature probe: the spline's third
                // derivative jumps at knots, making this difference first
                // order in the step there.
                let fine = h / 100.0;
                let mut rp2 = r;
                let mut rm2 = r;
                rp2[axis] += fine;
                rm2[axis] -= fine;
                let fd2 = (spline.gradient_for_test(&rp2)[axis]
                    - spline.gradient_for_test(&rm2)[axis])
                    / (2.0 * fine);
                let scale = hess[(axis, axis)].abs().max(1.0);
                assert!(
                    (fd2 - hess[(axis, axis)]).abs() / scale < 1e-3,
                    "hess axis {axis}: fd {fd2:.6e} vs {:.6e} at {r:?}",
                    hess[(axis, axis)]
                );
            }
            // Hessian symmetry is structural.
            assert_eq!(hess[(0, 1)], hess[(1, 0)]);
            assert_eq!(hess[(0, 2)], hess[(2, 0)]);
            assert_eq!(hess[(1, 2)], hess[(2, 1)]);
        }
    }

    #[test]
    fn rejects_points_outside_domain() {
        let grid = sample_grid(|x, _, _| x);
        let spline = TricubicSpline::build(&grid);
        assert!(spline.value(&Vector3::new(5.0e-3, 0.0, 0.0)).is_err());
        assert!(spline.value(&Vector3::new(f64::NAN, 0.0, 0.0)).is_err());
        assert!(spline.contains(&Vector3::new(0.0, 0.0, 0.0)));
        assert!(!spline.contains(&Vector3::new(0.0, 0.0, 4.1e-3)));
    }

    impl TricubicSpline<f64> {
        fn gradient_for_test(&self, r: &Vector3<f64>) -> Vector3<f64> {
            self.value_grad(r).unwrap().1
        }
    }
}
