//! Laplace boundary-value solver: red-black successive over-relaxation on the
//! 7-point stencil.
//!
//! Free nodes relax toward the average of their six neighbors; masked nodes
//! hold their imposed Dirichlet value. Within one color pass every update
//! reads only nodes of the other color (plus the node's own previous value),
//! so the pass parallelizes with bitwise-deterministic results regardless of
//! worker count.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::geometry::BasisId;
use crate::field::grid::{MaskGrid, ScalarFieldGrid};
use crate::scalar::{lit, Real};

/// Relaxation controls. The tolerance is the max-norm of the discrete
/// Laplace residual `sum(neighbors) - 6 u`, in volts, over free nodes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RelaxationOptions {
    /// Residual max-norm target, V.
    pub tolerance: f64,
    /// Hard sweep limit before giving up.
    pub max_sweeps: usize,
    /// Residual is measured every this many sweeps.
    pub check_interval: usize,
    /// Over-relaxation factor; `None` picks the optimal value for the grid.
    pub omega: Option<f64>,
}

impl Default for RelaxationOptions {
    fn default() -> Self {
        Self {
            tolerance: 1e-6,
            max_sweeps: 200_000,
            check_interval: 20,
            omega: None,
        }
    }
}

impl RelaxationOptions {
    fn resolved_omega(&self, dims: [usize; 3]) -> f64 {
        match self.omega {
            Some(w) => w,
            None => {
                // Optimal SOR factor for the Dirichlet Laplacian on the
                // enclosing cube; electrodes inside only help convergence.
                let n = dims.iter().copied().max().unwrap_or(3) as f64;
                2.0 / (1.0 + (std::f64::consts::PI / (n - 1.0)).sin())
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tolerance > 0.0 && self.tolerance.is_finite()) {
            return Err(Error::InvalidParameter(
                "relaxation tolerance must be positive".into(),
            ));
        }
        if let Some(w) = self.omega {
            if !(0.0 < w && w < 2.0) {
                return Err(Error::InvalidParameter(format!(
                    "over-relaxation factor must lie in (0, 2), got {w}"
                )));
            }
        }
        if self.check_interval == 0 || self.max_sweeps == 0 {
            return Err(Error::InvalidParameter(
                "sweep counts must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// A free node whose stencil arms were shortened by a nearby electrode
/// surface. `w` holds the over-relaxed update weights `omega * w_i / diag`
/// of the unequal-arm second-difference stencil, so an update is
/// `(1 - omega) u + sum_i w_i u_i` just like the uniform kernel.
///
/// Weights are grouped and summed per axis in the kernels; with the arm
/// arithmetic exactly symmetric under the grid motions, the whole sweep then
/// stays exactly symmetric too.
#[derive(Debug, Clone, Copy)]
struct FringeNode<T> {
    idx: u32,
    w: [T; 6],
}

impl<T: Real> FringeNode<T> {
    fn new(idx: u32, arms: &[f64; 6], omega: f64) -> Self {
        let mut w = [0.0f64; 6];
        let mut diag = 0.0f64;
        for axis in 0..3 {
            let (tm, tp) = (arms[2 * axis], arms[2 * axis + 1]);
            let s = tm + tp;
            w[2 * axis] = 1.0 / (tm * s);
            w[2 * axis + 1] = 1.0 / (tp * s);
            diag += 1.0 / (tm * tp);
        }
        let mut out = [T::zero(); 6];
        for (o, v) in out.iter_mut().zip(w) {
            *o = lit(omega * v / diag);
        }
        Self { idx, w: out }
    }
}

/// Shared mutable view used by the color passes. Sound because each pass
/// writes a node set disjoint from everything it reads.
struct RawGrid<T>(*mut T);
unsafe impl<T> Sync for RawGrid<T> {}
unsafe impl<T> Send for RawGrid<T> {}

impl<T: Copy> RawGrid<T> {
    /// Safety: `idx` must be in bounds and not concurrently written.
    unsafe fn get(&self, idx: usize) -> T {
        *self.0.add(idx)
    }

    /// Safety: `idx` must be in bounds and written by no other thread.
    unsafe fn set(&self, idx: usize, v: T) {
        *self.0.add(idx) = v;
    }
}

/// Solves the Dirichlet problem for an arbitrary boundary-value assignment.
///
/// `boundary(idx, label)` supplies the held value for every masked node.
/// Returns the relaxed grid with its achieved residual, or
/// [`Error::SolverStalled`] if the sweep limit is hit first.
pub fn solve_dirichlet<T: Real>(
    mask: &Arc<MaskGrid>,
    boundary: impl Fn(usize, u8) -> T + Sync,
    options: &RelaxationOptions,
) -> Result<ScalarFieldGrid<T>> {
    options.validate()?;
    let layout = mask.layout;
    let [nx, ny, nz] = layout.dims;
    let n_nodes = layout.len();

    let mut values = vec![T::zero(); n_nodes];
    for idx in 0..n_nodes {
        let l = mask.label(idx);
        if l != crate::field::grid::LABEL_FREE {
            values[idx] = boundary(idx, l);
        }
    }

    let omega = options.resolved_omega(layout.dims);
    let om: T = lit(omega);
    let one_minus: T = T::one() - om;
    let sixth: T = lit(1.0 / 6.0);

    // Free interior nodes by color (parity of i+j+k), as flat indices.
    // Boundary-face nodes are always masked, so every free node has six
    // neighbors. Nodes with shortened arms carry precomputed update weights;
    // the rest take the uniform six-neighbor average.
    let mut colors: [Vec<u32>; 2] = [Vec::new(), Vec::new()];
    let mut fringe: [Vec<FringeNode<T>>; 2] = [Vec::new(), Vec::new()];
    for k in 1..nz - 1 {
        for j in 1..ny - 1 {
            for i in 1..nx - 1 {
                let idx = layout.idx(i, j, k);
                if !mask.is_free(idx) {
                    continue;
                }
                let color = (i + j + k) % 2;
                match mask.arms.get(idx) {
                    None => colors[color].push(idx as u32),
                    Some(a) => fringe[color].push(FringeNode::new(idx as u32, a, omega)),
                }
            }
        }
    }
    if colors[0].is_empty() && colors[1].is_empty() && fringe[0].is_empty() && fringe[1].is_empty()
    {
        return Err(Error::InvalidParameter(
            "mask has no free interior nodes".into(),
        ));
    }

    let sx = 1usize;
    let sy = nx;
    let sz = nx * ny;

    let mut achieved = f64::INFINITY;
    let mut converged = false;
    let mut sweeps = 0usize;
    while sweeps < options.max_sweeps {
        let batch = options.check_interval.min(options.max_sweeps - sweeps);
        for _ in 0..batch {
            let raw = RawGrid(values.as_mut_ptr());
            for c in 0..2 {
                colors[c].par_iter().for_each(|&u| {
                    let idx = u as usize;
                    // Safety: indices within one color are distinct, and all
                    // reads are of the other color or of idx itself.
                    unsafe {
                        let nb = raw.get(idx - sx)
                            + raw.get(idx + sx)
                            + raw.get(idx - sy)
                            + raw.get(idx + sy)
                            + raw.get(idx - sz)
                            + raw.get(idx + sz);
                        let old = raw.get(idx);
                        raw.set(idx, one_minus * old + om * sixth * nb);
                    }
                });
                fringe[c].par_iter().for_each(|n| {
                    let idx = n.idx as usize;
                    // Safety: as above; fringe and uniform nodes of one color
                    // are disjoint and only read the other color.
                    unsafe {
                        let wx = n.w[0] * raw.get(idx - sx) + n.w[1] * raw.get(idx + sx);
                        let wy = n.w[2] * raw.get(idx - sy) + n.w[3] * raw.get(idx + sy);
                        let wz = n.w[4] * raw.get(idx - sz) + n.w[5] * raw.get(idx + sz);
                        let old = raw.get(idx);
                        raw.set(idx, one_minus * old + (wx + wy + wz));
                    }
                });
            }
        }
        sweeps += batch;
        achieved = residual_max(&values, &colors, &fringe, sx, sy, sz, omega);
        if achieved < options.tolerance {
            converged = true;
            break;
        }
    }

    if !converged {
        return Err(Error::SolverStalled {
            tolerance: options.tolerance,
            sweeps,
            residual: achieved,
        });
    }
    Ok(ScalarFieldGrid {
        layout,
        values,
        mask: Arc::clone(mask),
        achieved_residual: Some(achieved),
    })
}

/// Max-norm of `sum(neighbors) - 6 u` over free nodes, in value units. On
/// shortened-arm nodes the same quantity is read off the weighted stencil,
/// rescaled so a full-arm node reproduces the uniform formula exactly.
fn residual_max<T: Real>(
    values: &[T],
    colors: &[Vec<u32>; 2],
    fringe: &[Vec<FringeNode<T>>; 2],
    sx: usize,
    sy: usize,
    sz: usize,
    omega: f64,
) -> f64 {
    let six: T = lit(6.0);
    let om: T = lit(omega);
    let scale = 6.0 / omega;
    let per_color = |color: &Vec<u32>| -> f64 {
        color
            .par_iter()
            .map(|&u| {
                let idx = u as usize;
                let nb = values[idx - sx]
                    + values[idx + sx]
                    + values[idx - sy]
                    + values[idx + sy]
                    + values[idx - sz]
                    + values[idx + sz];
                (nb - six * values[idx]).abs().as_f64()
            })
            .reduce(|| 0.0, f64::max)
    };
    let per_fringe = |list: &Vec<FringeNode<T>>| -> f64 {
        list.par_iter()
            .map(|n| {
                let idx = n.idx as usize;
                let s = n.w[0] * values[idx - sx]
                    + n.w[1] * values[idx + sx]
                    + n.w[2] * values[idx - sy]
                    + n.w[3] * values[idx + sy]
                    + n.w[4] * values[idx - sz]
                    + n.w[5] * values[idx + sz];
                (s - om * values[idx]).abs().as_f64() * scale
            })
            .reduce(|| 0.0, f64::max)
    };
    per_color(&colors[0])
        .max(per_color(&colors[1]))
        .max(per_fringe(&fringe[0]))
        .max(per_fringe(&fringe[1]))
}

/// Solves one unit-voltage basis pattern: the named electrode (or drive
/// pattern) at 1 V, every other conductor at 0 V.
pub fn solve_basis<T: Real>(
    mask: &Arc<MaskGrid>,
    basis: BasisId,
    options: &RelaxationOptions,
) -> Result<ScalarFieldGrid<T>> {
    solve_dirichlet(
        mask,
        |idx, _l| lit(mask.basis_voltage(idx, basis).unwrap_or(0.0)),
        options,
    )
}
