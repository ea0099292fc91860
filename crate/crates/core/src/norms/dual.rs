//! Negative-order norms realized by discrete Riesz solves.
//!
//! On each unit cube, the dual norm of `u` against the zero-trace Sobolev
//! space is `sqrt(<u, v>)` where `v` solves `-lap v + v = u` with `v = 0`
//! on the cube faces. The linear solve is a Thomas factorization in one
//! dimension and matrix-free conjugate gradients otherwise.

use crate::error::Result;
use crate::grid::{CubeTiling, Grid};
use crate::linalg::{conjugate_gradient, TridiagSolver};
use crate::util::KahanSum;

const CG_TOL: f64 = 1e-10;

/// Dual norm of a cube-restricted function given by `value(flat_index)`.
pub(crate) fn cube_dual_norm(
    grid: &Grid,
    tiling: &CubeTiling,
    k: usize,
    value: &dyn Fn(usize) -> f64,
) -> Result<f64> {
    let h = grid.spacing();
    let m = tiling.points_per_side() - 1; // cells per side
    let n_int = m - 1; // interior nodes per side
    let start = tiling.cube_start(k);
    let p = grid.points_per_axis() as i64;
    let wrap = |raw: i64| -> usize {
        match grid.boundary() {
            crate::grid::Boundary::Periodic => raw.rem_euclid(p) as usize,
            crate::grid::Boundary::DirichletZero => raw as usize,
        }
    };

    match grid.dim() {
        1 => {
            let rhs: Vec<f64> = (1..m as i64).map(|j| value(wrap(start[0] + j))).collect();
            let mut v = rhs.clone();
            let diag = 1.0 + 2.0 / (h * h);
            let off = -1.0 / (h * h);
            let solver = TridiagSolver::new(vec![off; n_int], vec![diag; n_int], vec![off; n_int])?;
            solver.solve(&mut v);
            let mut acc = KahanSum::new();
            for (r, vi) in rhs.iter().zip(&v) {
                acc.add(r * vi);
            }
            Ok((acc.value() * h).max(0.0).sqrt())
        }
        2 => {
            let flat_of = |i: usize, j: usize| -> usize {
                wrap(start[0] + 1 + i as i64) * p as usize + wrap(start[1] + 1 + j as i64)
            };
            let rhs: Vec<f64> = (0..n_int * n_int)
                .map(|q| value(flat_of(q / n_int, q % n_int)))
                .collect();
            let inv_h2 = 1.0 / (h * h);
            let apply = |x: &[f64], y: &mut [f64]| {
                for i in 0..n_int {
                    for j in 0..n_int {
                        let q = i * n_int + j;
                        let mut lap = -4.0 * x[q];
                        if i > 0 {
                            lap += x[q - n_int];
                        }
                        if i + 1 < n_int {
                            lap += x[q + n_int];
                        }
                        if j > 0 {
                            lap += x[q - 1];
                        }
                        if j + 1 < n_int {
                            lap += x[q + 1];
                        }
                        y[q] = x[q] - inv_h2 * lap;
                    }
                }
            };
            let mut v = vec![0.0; rhs.len()];
            conjugate_gradient(apply, &rhs, &mut v, CG_TOL, 40 * n_int * n_int)?;
            let mut acc = KahanSum::new();
            for (r, vi) in rhs.iter().zip(&v) {
                acc.add(r * vi);
            }
            Ok((acc.value() * h * h).max(0.0).sqrt())
        }
        3 => {
            let pl = p as usize;
            let flat_of = |i: usize, j: usize, l: usize| -> usize {
                (wrap(start[0] + 1 + i as i64) * pl + wrap(start[1] + 1 + j as i64)) * pl
                    + wrap(start[2] + 1 + l as i64)
            };
            let n2 = n_int * n_int;
            let rhs: Vec<f64> = (0..n_int * n2)
                .map(|q| value(flat_of(q / n2, (q / n_int) % n_int, q % n_int)))
                .collect();
            let inv_h2 = 1.0 / (h * h);
            let apply = |x: &[f64], y: &mut [f64]| {
                for i in 0..n_int {
                    for j in 0..n_int {
                        for l in 0..n_int {
                            let q = (i * n_int + j) * n_int + l;
                            let mut lap = -6.0 * x[q];
                            if i > 0 {
                                lap += x[q - n2];
                            }
                            if i + 1 < n_int {
                                lap += x[q + n2];
                            }
                            if j > 0 {
                                lap += x[q - n_int];
                            }
                            if j + 1 < n_int {
                                lap += x[q + n_int];
                            }
                            if l > 0 {
                                lap += x[q - 1];
                            }
                            if l + 1 < n_int {
                                lap += x[q + 1];
                            }
                            y[q] = x[q] - inv_h2 * lap;
                        }
                    }
                }
            };
            let mut v = vec![0.0; rhs.len()];
            conjugate_gradient(apply, &rhs, &mut v, CG_TOL, 40 * rhs.len())?;
            let mut acc = KahanSum::new();
            for (r, vi) in rhs.iter().zip(&v) {
                acc.add(r * vi);
            }
            Ok((acc.value() * h * h * h).max(0.0).sqrt())
        }
        _ => unreachable!(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::Field;
    use crate::grid::{Ball, Boundary};

    /// d = 1, u = 1 on the centered unit cube: -v'' + v = 1, v(+-1/2) = 0
    /// gives v = 1 - cosh(x)/cosh(1/2) and <u, v> = 1 - 2 tanh(1/2).
    #[test]
    fn matches_closed_form_constant_source() {
        let grid = Grid::new(1, 4.0, 1.0 / 64.0, Boundary::Periodic).unwrap();
        let tiling = CubeTiling::build(&grid).unwrap();
        let k = tiling
            .cubes_intersecting(&Ball::new(vec![0.0], 1e-9))
            .into_iter()
            .find(|&k| tiling.center(k)[0] == 0.0)
            .unwrap();
        let field = Field::constant(&grid, 1.0);
        let v = field.values();
        let d = cube_dual_norm(&grid, &tiling, k, &|i| v[i]).unwrap();
        let exact = (1.0 - 2.0 * (0.5f64).tanh()).sqrt();
        assert!(
            (d - exact).abs() / exact < 1e-3,
            "dual norm {d} vs exact {exact}"
        );
    }

    #[test]
    fn zero_field_has_zero_dual_norm() {
        let grid = Grid::new(2, 2.0, 0.125, Boundary::Periodic).unwrap();
        let tiling = CubeTiling::build(&grid).unwrap();
        let d = cube_dual_norm(&grid, &tiling, 0, &|_| 0.0).unwrap();
        assert_eq!(d, 0.0);
    }
}
