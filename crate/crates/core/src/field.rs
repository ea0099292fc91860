//! Scalar state fields over a grid.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Boundary, Grid};

/// A scalar function sampled at the grid nodes, row-major over axes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Field {
    grid: Grid,
    values: Vec<f64>,
}

impl Field {
    pub fn zeros(grid: &Grid) -> Self {
        Field {
            grid: *grid,
            values: vec![0.0; grid.num_points()],
        }
    }

    pub fn constant(grid: &Grid, value: f64) -> Self {
        Field {
            grid: *grid,
            values: vec![value; grid.num_points()],
        }
    }

    /// Sample a closed-form function at the grid nodes.
    pub fn from_fn(grid: &Grid, f: impl Fn(&[f64]) -> f64) -> Self {
        let values = (0..grid.num_points())
            .map(|i| f(&grid.coords_of(i)))
            .collect();
        Field {
            grid: *grid,
            values,
        }
    }

    pub fn from_values(grid: &Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.num_points() {
            return Err(Error::Incompatible(format!(
                "value count {} does not match grid point count {}",
                values.len(),
                grid.num_points()
            )));
        }
        Ok(Field {
            grid: *grid,
            values,
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    fn assert_same_grid(&self, other: &Field) {
        assert_eq!(self.grid, other.grid, "fields live on different grids");
    }

    pub fn add(&self, other: &Field) -> Field {
        self.assert_same_grid(other);
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a + b)
            .collect();
        Field {
            grid: self.grid,
            values,
        }
    }

    pub fn sub(&self, other: &Field) -> Field {
        self.assert_same_grid(other);
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a - b)
            .collect();
        Field {
            grid: self.grid,
            values,
        }
    }

    pub fn scale(&self, factor: f64) -> Field {
        Field {
            grid: self.grid,
            values: self.values.iter().map(|v| v * factor).collect(),
        }
    }

    /// Pointwise product.
    pub fn mul(&self, other: &Field) -> Field {
        self.assert_same_grid(other);
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a * b)
            .collect();
        Field {
            grid: self.grid,
            values,
        }
    }

    /// Centered second-order gradient, one component field per axis.
    ///
    /// Periodic grids wrap; Dirichlet grids use second-order one-sided
    /// differences on the box faces.
    pub fn gradient(&self) -> Vec<Field> {
        let g = &self.grid;
        let d = g.dim();
        let p = g.points_per_axis() as i64;
        let h = g.spacing();
        let mut comps = vec![Field::zeros(g); d];

        let mut idx = vec![0i64; d];
        for flat in 0..g.num_points() {
            let mut rem = flat;
            for ax in (0..d).rev() {
                idx[ax] = (rem % p as usize) as i64;
                rem /= p as usize;
            }
            for ax in 0..d {
                let i = idx[ax];
                let v = match g.boundary() {
                    Boundary::Periodic => {
                        let mut fwd = idx.clone();
                        fwd[ax] = i + 1;
                        let mut bwd = idx.clone();
                        bwd[ax] = i - 1;
                        (self.values[g.flat_index_wrapped(&fwd)]
                            - self.values[g.flat_index_wrapped(&bwd)])
                            / (2.0 * h)
                    }
                    Boundary::DirichletZero => {
                        if i == 0 {
                            let u0 = self.at_offset(&idx, ax, 0);
                            let u1 = self.at_offset(&idx, ax, 1);
                            let u2 = self.at_offset(&idx, ax, 2);
                            (-3.0 * u0 + 4.0 * u1 - u2) / (2.0 * h)
                        } else if i == p - 1 {
                            let u0 = self.at_offset(&idx, ax, 0);
                            let u1 = self.at_offset(&idx, ax, -1);
                            let u2 = self.at_offset(&idx, ax, -2);
                            (3.0 * u0 - 4.0 * u1 + u2) / (2.0 * h)
                        } else {
                            (self.at_offset(&idx, ax, 1) - self.at_offset(&idx, ax, -1))
                                / (2.0 * h)
                        }
                    }
                };
                comps[ax].values[flat] = v;
            }
        }
        comps
    }

    #[inline]
    fn at_offset(&self, idx: &[i64], ax: usize, off: i64) -> f64 {
        let mut j = idx.to_vec();
        j[ax] += off;
        self.values[self.grid.flat_index_wrapped(&j)]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Boundary;

    #[test]
    fn gradient_of_constant_vanishes() {
        let grid = Grid::new(2, 4.0, 0.25, Boundary::Periodic).unwrap();
        let f = Field::constant(&grid, 3.5);
        for comp in f.gradient() {
            assert!(comp.values().iter().all(|v| v.abs() < 1e-13));
        }
    }

    #[test]
    fn gradient_converges_at_second_order_on_sine() {
        let l = 4.0;
        let err_at = |h: f64| {
            let grid = Grid::new(1, l, h, Boundary::Periodic).unwrap();
            let k = 2.0 * std::f64::consts::PI / l;
            let f = Field::from_fn(&grid, |x| (k * x[0]).sin());
            let grad = &f.gradient()[0];
            grad.values()
                .iter()
                .enumerate()
                .map(|(i, v)| (v - k * (k * grid.axis_coord(i)).cos()).abs())
                .fold(0.0f64, f64::max)
        };
        let e1 = err_at(1.0 / 8.0);
        let e2 = err_at(1.0 / 16.0);
        let ratio = e1 / e2;
        assert!((3.0..5.0).contains(&ratio), "second-order decay, got {ratio}");
    }

    #[test]
    fn gradient_exact_on_linear_dirichlet_interior() {
        let grid = Grid::new(1, 4.0, 0.25, Boundary::DirichletZero).unwrap();
        let f = Field::from_fn(&grid, |x| 2.0 * x[0] + 1.0);
        let grad = &f.gradient()[0];
        for i in 1..grid.points_per_axis() - 1 {
            assert!((grad.values()[i] - 2.0).abs() < 1e-12);
        }
        // one-sided ends are exact on linear data too
        assert!((grad.values()[0] - 2.0).abs() < 1e-12);
    }
}
