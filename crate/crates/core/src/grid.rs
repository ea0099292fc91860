//! Truncated-box discretization of R^d and the overlapping unit-cube tiling
//! centered on the half-integer lattice.
//!
//! The box is `[-L/2, L/2]^d` with uniform spacing `h`. Periodic truncation
//! is the default (the underlying problem is posed on all of R^d, which has
//! no boundary); a zero-Dirichlet mode mimics approximation by large balls.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::util;

/// Boundary treatment of the truncated box.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Boundary {
    Periodic,
    DirichletZero,
}

/// Uniform grid on `[-L/2, L/2]^d`.
///
/// Alignment requirements: `2L` must be a positive integer so the
/// half-integer lattice of cube centers lies inside the box symmetrically,
/// and `1/h` must be a positive even integer so every half-integer
/// coordinate (cube centers and cube faces) coincides with a grid node.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    dim: usize,
    box_size: f64,
    spacing: f64,
    boundary: Boundary,
    #[serde(skip)]
    cells_per_axis: usize,
}

impl Grid {
    pub fn new(dim: usize, box_size: f64, spacing: f64, boundary: Boundary) -> Result<Self> {
        if !(1..=3).contains(&dim) {
            return Err(Error::InvalidGrid(format!(
                "dim must be 1, 2 or 3, got {dim}"
            )));
        }
        if !(box_size > 0.0) || !(spacing > 0.0) {
            return Err(Error::InvalidGrid(
                "box size and spacing must be positive".into(),
            ));
        }
        let two_l = util::as_integer(2.0 * box_size, 1e-9).ok_or_else(|| {
            Error::InvalidGrid(format!(
                "box size {box_size} is not an integer multiple of 1/2"
            ))
        })?;
        if two_l <= 0 {
            return Err(Error::InvalidGrid("box size must be positive".into()));
        }
        let inv_h = util::as_integer(1.0 / spacing, 1e-9)
            .ok_or_else(|| Error::InvalidGrid(format!("1/h must be an integer, got h = {spacing}")))?;
        if inv_h <= 0 || inv_h % 2 != 0 {
            return Err(Error::InvalidGrid(format!(
                "1/h must be a positive even integer so half-integer cube faces \
                 fall on grid nodes, got 1/h = {inv_h}"
            )));
        }
        let cells = util::as_integer(box_size / spacing, 1e-6).ok_or_else(|| {
            Error::InvalidGrid(format!(
                "box size {box_size} is not a whole number of cells of h = {spacing}"
            ))
        })?;
        if cells < 2 {
            return Err(Error::InvalidGrid("fewer than two cells per axis".into()));
        }
        Ok(Grid {
            dim,
            box_size,
            spacing,
            boundary,
            cells_per_axis: cells as usize,
        })
    }

    /// Rebuild derived fields after deserialization.
    pub fn validated(self) -> Result<Self> {
        Grid::new(self.dim, self.box_size, self.spacing, self.boundary)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Full box edge length L; the box is `[-L/2, L/2]^d`.
    pub fn box_size(&self) -> f64 {
        self.box_size
    }

    pub fn half_width(&self) -> f64 {
        self.box_size / 2.0
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn boundary(&self) -> Boundary {
        self.boundary
    }

    pub fn cells_per_axis(&self) -> usize {
        self.cells_per_axis
    }

    /// Stored grid nodes per axis. Periodic grids identify `L/2` with
    /// `-L/2` and store one representative, Dirichlet grids store both ends.
    pub fn points_per_axis(&self) -> usize {
        match self.boundary {
            Boundary::Periodic => self.cells_per_axis,
            Boundary::DirichletZero => self.cells_per_axis + 1,
        }
    }

    pub fn num_points(&self) -> usize {
        self.points_per_axis().pow(self.dim as u32)
    }

    #[inline]
    pub fn axis_coord(&self, i: usize) -> f64 {
        -self.half_width() + i as f64 * self.spacing
    }

    /// Coordinates of the flat node index, row-major over axes.
    pub fn coords_of(&self, flat: usize) -> Vec<f64> {
        let p = self.points_per_axis();
        let mut rem = flat;
        let mut out = vec![0.0; self.dim];
        for ax in (0..self.dim).rev() {
            out[ax] = self.axis_coord(rem % p);
            rem /= p;
        }
        out
    }

    #[inline]
    pub fn flat_index(&self, idx: &[usize]) -> usize {
        let p = self.points_per_axis();
        let mut flat = 0;
        for &i in idx {
            debug_assert!(i < p);
            flat = flat * p + i;
        }
        flat
    }

    /// Flat index for possibly out-of-range per-axis indices. Periodic grids
    /// wrap; Dirichlet grids clamp is a bug, so indices must be in range
    /// except for the right face `cells_per_axis`, which exists in storage.
    #[inline]
    pub fn flat_index_wrapped(&self, idx: &[i64]) -> usize {
        let p = self.points_per_axis() as i64;
        let mut flat: i64 = 0;
        for &i in idx {
            let j = match self.boundary {
                Boundary::Periodic => i.rem_euclid(p),
                Boundary::DirichletZero => {
                    debug_assert!((0..p).contains(&i));
                    i
                }
            };
            flat = flat * p + j;
        }
        flat as usize
    }

    /// Grid node index of a coordinate that is known to lie on the grid.
    pub fn node_index_of(&self, x: f64) -> Result<usize> {
        let raw = (x + self.half_width()) / self.spacing;
        let i = util::as_integer(raw, 1e-6).ok_or_else(|| {
            Error::InvalidGrid(format!("coordinate {x} does not lie on a grid node"))
        })?;
        Ok(i as usize)
    }
}

/// Closed ball used as a localization region.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Ball {
    pub center: Vec<f64>,
    pub radius: f64,
}

impl Ball {
    pub fn new(center: Vec<f64>, radius: f64) -> Self {
        Ball { center, radius }
    }

    pub fn volume(&self, dim: usize) -> f64 {
        let r = self.radius;
        match dim {
            1 => 2.0 * r,
            2 => std::f64::consts::PI * r * r,
            3 => 4.0 / 3.0 * std::f64::consts::PI * r * r * r,
            _ => f64::NAN,
        }
    }
}

/// Enumeration of the closed unit cubes centered on the half-integer lattice
/// and fully contained in the box, ordered lexicographically by center.
///
/// The cubes overlap (adjacent centers are 1/2 apart); every grid cell at
/// least 1/2 from the box face is covered by several cubes.
#[derive(Clone, Debug)]
pub struct CubeTiling {
    grid: Grid,
    axis_centers: Vec<f64>,
    centers: Vec<Vec<f64>>,
}

impl CubeTiling {
    /// Enumerate all unit cubes fully contained in the box.
    pub fn build(grid: &Grid) -> Result<Self> {
        let q = util::as_integer(2.0 * grid.box_size(), 1e-9).unwrap();
        if q < 2 {
            return Err(Error::BoxTooSmall(
                "no unit cube fits in the box".into(),
                grid.box_size(),
            ));
        }
        // centers m/2 with |m| <= L - 1, m integer
        let m_max = (q - 2) / 2;
        let axis_centers: Vec<f64> = (-m_max..=m_max).map(|m| m as f64 / 2.0).collect();
        let per_axis = axis_centers.len();
        let total = per_axis.pow(grid.dim() as u32);
        let mut centers = Vec::with_capacity(total);
        for flat in 0..total {
            let mut rem = flat;
            let mut c = vec![0.0; grid.dim()];
            for ax in (0..grid.dim()).rev() {
                c[ax] = axis_centers[rem % per_axis];
                rem /= per_axis;
            }
            centers.push(c);
        }
        Ok(CubeTiling {
            grid: *grid,
            axis_centers,
            centers,
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn len(&self) -> usize {
        self.centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }

    pub fn centers(&self) -> &[Vec<f64>] {
        &self.centers
    }

    pub fn center(&self, k: usize) -> &[f64] {
        &self.centers[k]
    }

    pub fn axis_centers(&self) -> &[f64] {
        &self.axis_centers
    }

    /// Grid node index of the cube's low corner, per axis.
    pub fn cube_start(&self, k: usize) -> Vec<i64> {
        let h = self.grid.spacing();
        self.centers[k]
            .iter()
            .map(|c| ((c - 0.5 + self.grid.half_width()) / h).round() as i64)
            .collect()
    }

    /// Nodes per cube edge, including both faces.
    pub fn points_per_side(&self) -> usize {
        (1.0 / self.grid.spacing()).round() as usize + 1
    }

    /// Indices of all cubes meeting the closed ball (possibly empty).
    pub fn cubes_intersecting(&self, region: &Ball) -> Vec<usize> {
        assert_eq!(region.center.len(), self.grid.dim(), "ball dimension mismatch");
        let mut out = Vec::new();
        for (k, c) in self.centers.iter().enumerate() {
            let mut d2 = 0.0;
            for ax in 0..c.len() {
                let lo = c[ax] - 0.5;
                let hi = c[ax] + 0.5;
                let x = region.center[ax];
                let gap = if x < lo {
                    lo - x
                } else if x > hi {
                    x - hi
                } else {
                    0.0
                };
                d2 += gap * gap;
            }
            if d2.sqrt() <= region.radius {
                out.push(k);
            }
        }
        out
    }

    /// Index of the cube whose center is nearest to `x`.
    pub fn nearest_center(&self, x: &[f64]) -> usize {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (k, c) in self.centers.iter().enumerate() {
            let d = util::dist(c, x);
            if d < best_d {
                best_d = d;
                best = k;
            }
        }
        best
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid_1d(l: f64, h: f64) -> Grid {
        Grid::new(1, l, h, Boundary::Periodic).unwrap()
    }

    #[test]
    fn rejects_bad_dimensions_and_spacings() {
        assert!(Grid::new(0, 4.0, 0.25, Boundary::Periodic).is_err());
        assert!(Grid::new(4, 4.0, 0.25, Boundary::Periodic).is_err());
        // 1/h odd
        assert!(Grid::new(1, 4.0, 1.0 / 3.0, Boundary::Periodic).is_err());
        // L not multiple of 1/2
        assert!(Grid::new(1, 4.3, 0.25, Boundary::Periodic).is_err());
    }

    #[test]
    fn tiling_1d_box_4_has_seven_interior_cubes() {
        let tiling = CubeTiling::build(&grid_1d(4.0, 0.25)).unwrap();
        let centers: Vec<f64> = tiling.centers().iter().map(|c| c[0]).collect();
        assert_eq!(centers, vec![-1.5, -1.0, -0.5, 0.0, 0.5, 1.0, 1.5]);
    }

    #[test]
    fn tiling_2d_box_2_has_nine_cubes() {
        let grid = Grid::new(2, 2.0, 0.25, Boundary::Periodic).unwrap();
        let tiling = CubeTiling::build(&grid).unwrap();
        assert_eq!(tiling.len(), 9);
        // lexicographic ordering by (x, y)
        assert_eq!(tiling.center(0), &[-0.5, -0.5]);
        assert_eq!(tiling.center(8), &[0.5, 0.5]);
    }

    #[test]
    fn tiling_rejects_boxes_below_unit_size() {
        let err = CubeTiling::build(&grid_1d(0.5, 0.25)).unwrap_err();
        assert!(matches!(err, Error::BoxTooSmall(_, _)));
    }

    #[test]
    fn small_ball_touches_three_overlapping_cubes() {
        let tiling = CubeTiling::build(&grid_1d(4.0, 0.25)).unwrap();
        let idx = tiling.cubes_intersecting(&Ball::new(vec![0.0], 0.1));
        let centers: Vec<f64> = idx.iter().map(|&k| tiling.center(k)[0]).collect();
        assert_eq!(centers, vec![-0.5, 0.0, 0.5]);
    }

    #[test]
    fn ball_covering_box_selects_all_cubes() {
        let tiling = CubeTiling::build(&grid_1d(4.0, 0.25)).unwrap();
        let idx = tiling.cubes_intersecting(&Ball::new(vec![0.0], 10.0));
        assert_eq!(idx.len(), tiling.len());
    }

    #[test]
    fn intersection_is_monotone_and_affine_in_radius() {
        let tiling = CubeTiling::build(&grid_1d(64.0, 0.0625)).unwrap();
        let mut prev: Vec<usize> = Vec::new();
        let mut counts = Vec::new();
        for r in [1.0, 2.0, 4.0, 8.0] {
            let idx = tiling.cubes_intersecting(&Ball::new(vec![0.0], r));
            assert!(prev.iter().all(|k| idx.contains(k)), "monotone in radius");
            counts.push(idx.len());
            prev = idx;
        }
        // affine growth: count = 4R + 3 in 1d (overlapping half-step centers)
        for (i, r) in [1.0f64, 2.0, 4.0, 8.0].iter().enumerate() {
            assert_eq!(counts[i], (4.0 * r + 3.0) as usize);
        }
        // reasonable-domain bound #I <= c1 * vol with a single c1 for R >= 1
        for (i, r) in [1.0f64, 2.0, 4.0, 8.0].iter().enumerate() {
            assert!((counts[i] as f64) <= 4.0 * (2.0 * r));
        }
    }

    #[test]
    fn cube_starts_land_on_nodes() {
        let grid = grid_1d(4.0, 0.0625);
        let tiling = CubeTiling::build(&grid).unwrap();
        for k in 0..tiling.len() {
            let s = tiling.cube_start(k);
            let x = grid.axis_coord(s[0] as usize);
            assert!((x - (tiling.center(k)[0] - 0.5)).abs() < 1e-12);
        }
    }
}
