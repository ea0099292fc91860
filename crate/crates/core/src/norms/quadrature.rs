//! Trapezoidal quadrature over cubes and over the whole box.
//!
//! All sums run in a fixed loop order with compensated accumulation, so
//! results are identical across runs and thread counts.

use crate::field::Field;
use crate::grid::{Boundary, Grid};
use crate::util::KahanSum;

/// Per-axis node table for a tensor-product trapezoid rule: storage index,
/// quadrature weight (in units of h), and coordinate.
pub(crate) struct AxisNodes {
    pub idx: Vec<usize>,
    pub w: Vec<f64>,
    pub coord: Vec<f64>,
}

/// Nodes for one axis of the whole box `[-L/2, L/2]`.
pub(crate) fn axis_nodes_box(grid: &Grid) -> AxisNodes {
    let n = grid.cells_per_axis();
    let mut idx = Vec::with_capacity(n + 1);
    let mut w = Vec::with_capacity(n + 1);
    let mut coord = Vec::with_capacity(n + 1);
    for j in 0..=n {
        let storage = match grid.boundary() {
            Boundary::Periodic => j % n,
            Boundary::DirichletZero => j,
        };
        idx.push(storage);
        w.push(if j == 0 || j == n { 0.5 } else { 1.0 });
        coord.push(-grid.half_width() + j as f64 * grid.spacing());
    }
    AxisNodes { idx, w, coord }
}

/// Nodes for one axis of a unit cube starting at grid index `start`
/// (wrapping on periodic grids), with `m` cells per side.
pub(crate) fn axis_nodes_cube(grid: &Grid, start: i64, m: usize) -> AxisNodes {
    let p = grid.points_per_axis() as i64;
    let mut idx = Vec::with_capacity(m + 1);
    let mut w = Vec::with_capacity(m + 1);
    let mut coord = Vec::with_capacity(m + 1);
    for j in 0..=m {
        let raw = start + j as i64;
        let storage = match grid.boundary() {
            Boundary::Periodic => raw.rem_euclid(p) as usize,
            Boundary::DirichletZero => raw as usize,
        };
        idx.push(storage);
        w.push(if j == 0 || j == m { 0.5 } else { 1.0 });
        // geometric position of the unwrapped node, not of its storage slot
        coord.push(-grid.half_width() + raw as f64 * grid.spacing());
    }
    AxisNodes { idx, w, coord }
}

/// Tensor-product trapezoid integral: `f` receives the flat storage index
/// and the node coordinates.
pub(crate) fn integrate(
    grid: &Grid,
    axes: &[AxisNodes],
    mut f: impl FnMut(usize, &[f64]) -> f64,
) -> f64 {
    let h = grid.spacing();
    let p = grid.points_per_axis();
    let mut acc = KahanSum::new();
    match axes {
        [ax] => {
            let mut x = [0.0];
            for i in 0..ax.idx.len() {
                x[0] = ax.coord[i];
                acc.add(ax.w[i] * f(ax.idx[i], &x));
            }
            acc.value() * h
        }
        [ax0, ax1] => {
            let mut x = [0.0; 2];
            for i0 in 0..ax0.idx.len() {
                x[0] = ax0.coord[i0];
                let base = ax0.idx[i0] * p;
                for i1 in 0..ax1.idx.len() {
                    x[1] = ax1.coord[i1];
                    acc.add(ax0.w[i0] * ax1.w[i1] * f(base + ax1.idx[i1], &x));
                }
            }
            acc.value() * h * h
        }
        [ax0, ax1, ax2] => {
            let mut x = [0.0; 3];
            for i0 in 0..ax0.idx.len() {
                x[0] = ax0.coord[i0];
                for i1 in 0..ax1.idx.len() {
                    x[1] = ax1.coord[i1];
                    let base = (ax0.idx[i0] * p + ax1.idx[i1]) * p;
                    for i2 in 0..ax2.idx.len() {
                        x[2] = ax2.coord[i2];
                        acc.add(ax0.w[i0] * ax1.w[i1] * ax2.w[i2] * f(base + ax2.idx[i2], &x));
                    }
                }
            }
            acc.value() * h * h * h
        }
        _ => unreachable!("grids are 1-, 2- or 3-dimensional"),
    }
}

/// `int_box f(x) e^{-|x - xbar|} dx` by trapezoid.
pub fn box_integral_expw(grid: &Grid, xbar: &[f64], f: impl Fn(usize) -> f64) -> f64 {
    let axes: Vec<AxisNodes> = (0..grid.dim()).map(|_| axis_nodes_box(grid)).collect();
    integrate(grid, &axes, |flat, x| {
        let mut d2 = 0.0;
        for (xi, bi) in x.iter().zip(xbar) {
            d2 += (xi - bi) * (xi - bi);
        }
        f(flat) * (-d2.sqrt()).exp()
    })
}

/// Total mass of the truncated exponential measure, `int_box e^{-|x-xbar|} dx`.
pub fn exp_measure(grid: &Grid, xbar: &[f64]) -> f64 {
    box_integral_expw(grid, xbar, |_| 1.0)
}

/// Single-center Lebesgue norm `(int_box |u|^p e^{-|x-xbar|} dx)^{1/p}`.
pub fn xbar_lp_norm(field: &Field, xbar: &[f64], p: f64) -> f64 {
    let v = field.values();
    box_integral_expw(field.grid(), xbar, |i| v[i].abs().powf(p)).powf(1.0 / p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Boundary;

    #[test]
    fn box_measure_approaches_full_line_mass() {
        // int_R e^{-|x|} = 2, truncation error ~ e^{-L/2}
        let grid = Grid::new(1, 64.0, 0.0625, Boundary::Periodic).unwrap();
        let m = exp_measure(&grid, &[0.0]);
        assert!((m - 2.0).abs() < 1e-3, "measure {m}");
    }

    #[test]
    fn measure_is_translation_insensitive_away_from_faces() {
        let grid = Grid::new(1, 64.0, 0.0625, Boundary::Periodic).unwrap();
        let a = exp_measure(&grid, &[0.0]);
        let b = exp_measure(&grid, &[5.0]);
        assert!((a - b).abs() < 1e-3);
    }

    #[test]
    fn two_dimensional_constant_integral_is_box_area() {
        let grid = Grid::new(2, 4.0, 0.25, Boundary::Periodic).unwrap();
        let axes: Vec<AxisNodes> = (0..2).map(|_| axis_nodes_box(&grid)).collect();
        let v = integrate(&grid, &axes, |_, _| 1.0);
        assert!((v - 16.0).abs() < 1e-12);
    }
}
