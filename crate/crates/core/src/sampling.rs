//! Reproducible random test fields and trajectories.
//!
//! Fields are mixtures of Gaussian bumps, periodic plane waves, and
//! (optionally) grid noise smoothed by one explicit diffusion step. The
//! bump/wave part has a closed form, so the same draw can be evaluated on
//! grids of different resolution for refinement studies; noise is tied to
//! the grid it was drawn on.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::field::Field;
use crate::grid::{Boundary, Grid};
use crate::trajectory::Trajectory;
use crate::util;

/// Mixture shape parameters; amplitudes are relative weights.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SamplerParams {
    pub bumps: usize,
    pub bump_amp: f64,
    pub bump_width: (f64, f64),
    pub waves: usize,
    pub wave_amp: f64,
    pub max_wavenumber: i32,
    pub noise_amp: f64,
}

impl Default for SamplerParams {
    fn default() -> Self {
        SamplerParams {
            bumps: 4,
            bump_amp: 1.0,
            bump_width: (0.4, 1.6),
            waves: 3,
            wave_amp: 0.5,
            max_wavenumber: 4,
            noise_amp: 0.3,
        }
    }
}

impl SamplerParams {
    /// Closed-form-only mixture (no grid noise), for refinement studies.
    pub fn smooth() -> Self {
        SamplerParams {
            noise_amp: 0.0,
            ..Default::default()
        }
    }
}

/// A bump/wave mixture with a closed form, evaluable on any grid over the
/// same box.
#[derive(Clone, Debug)]
pub struct SyntheticField {
    dim: usize,
    box_size: f64,
    bumps: Vec<(Vec<f64>, f64, f64)>, // center, width, amplitude
    waves: Vec<(Vec<i32>, f64, f64)>, // integer wave vector, phase, amplitude
}

impl SyntheticField {
    pub fn random(dim: usize, box_size: f64, params: &SamplerParams, rng: &mut impl Rng) -> Self {
        let half = box_size / 2.0;
        let bumps = (0..params.bumps)
            .map(|_| {
                let c: Vec<f64> = (0..dim).map(|_| rng.gen_range(-0.8 * half..0.8 * half)).collect();
                let w = rng.gen_range(params.bump_width.0..params.bump_width.1);
                let a = params.bump_amp * rng.gen_range(-1.0..1.0);
                (c, w, a)
            })
            .collect();
        let waves = (0..params.waves)
            .map(|_| {
                let k: Vec<i32> = (0..dim)
                    .map(|_| rng.gen_range(-params.max_wavenumber..=params.max_wavenumber))
                    .collect();
                let phase = rng.gen_range(0.0..std::f64::consts::TAU);
                let a = params.wave_amp * rng.gen_range(-1.0..1.0);
                (k, phase, a)
            })
            .collect();
        SyntheticField {
            dim,
            box_size,
            bumps,
            waves,
        }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.dim);
        let mut v = 0.0;
        for (c, w, a) in &self.bumps {
            let d = util::dist(x, c);
            v += a * (-0.5 * (d / w) * (d / w)).exp();
        }
        let k0 = std::f64::consts::TAU / self.box_size;
        for (k, phase, a) in &self.waves {
            let arg: f64 = k.iter().zip(x).map(|(ki, xi)| *ki as f64 * xi).sum();
            v += a * (k0 * arg + phase).sin();
        }
        v
    }

    pub fn materialize(&self, grid: &Grid) -> Field {
        let mut f = Field::from_fn(grid, |x| self.eval(x));
        zero_dirichlet_faces(&mut f);
        f
    }
}

/// Draw a random field on the grid: closed-form mixture plus smoothed noise.
pub fn random_field(grid: &Grid, params: &SamplerParams, rng: &mut impl Rng) -> Field {
    let base = SyntheticField::random(grid.dim(), grid.box_size(), params, rng);
    let mut f = base.materialize(grid);
    if params.noise_amp > 0.0 {
        let mut noise = Field::from_fn(grid, |_| 0.0);
        for v in noise.values_mut() {
            *v = params.noise_amp * rng.gen_range(-1.0..1.0);
        }
        diffuse_once(&mut noise);
        let sum = f.add(&noise);
        f = sum;
    }
    zero_dirichlet_faces(&mut f);
    f
}

/// One explicit diffusion step at half the stability limit, to knock the
/// grid-frequency spike off raw noise.
fn diffuse_once(f: &mut Field) {
    let grid = *f.grid();
    let d = grid.dim();
    let p = grid.points_per_axis() as i64;
    let alpha = 0.25 / d as f64; // dt * kappa / h^2
    let old = f.clone();
    let mut idx = vec![0i64; d];
    for flat in 0..grid.num_points() {
        let mut rem = flat;
        for ax in (0..d).rev() {
            idx[ax] = (rem % p as usize) as i64;
            rem /= p as usize;
        }
        let mut lap = -2.0 * d as f64 * old.values()[flat];
        for ax in 0..d {
            for off in [-1i64, 1] {
                let mut j = idx.clone();
                j[ax] += off;
                let j = match grid.boundary() {
                    Boundary::Periodic => grid.flat_index_wrapped(&j),
                    Boundary::DirichletZero => {
                        if j[ax] < 0 || j[ax] >= p {
                            continue;
                        }
                        grid.flat_index_wrapped(&j)
                    }
                };
                lap += old.values()[j];
            }
        }
        f.values_mut()[flat] = old.values()[flat] + alpha * lap;
    }
}

fn zero_dirichlet_faces(f: &mut Field) {
    let grid = *f.grid();
    if grid.boundary() != Boundary::DirichletZero {
        return;
    }
    let p = grid.points_per_axis();
    let d = grid.dim();
    for flat in 0..grid.num_points() {
        let mut rem = flat;
        let mut on_face = false;
        for _ in 0..d {
            let i = rem % p;
            if i == 0 || i == p - 1 {
                on_face = true;
            }
            rem /= p;
        }
        if on_face {
            f.values_mut()[flat] = 0.0;
        }
    }
}

/// A space-time mixture: each spatial mode carries a smooth oscillation in
/// time, so time derivatives stay bounded.
#[derive(Clone, Debug)]
pub struct SyntheticTrajectory {
    modes: Vec<(SyntheticField, f64, f64)>, // field, omega, phase
}

impl SyntheticTrajectory {
    pub fn random(
        dim: usize,
        box_size: f64,
        n_modes: usize,
        params: &SamplerParams,
        rng: &mut impl Rng,
    ) -> Self {
        let modes = (0..n_modes.max(1))
            .map(|_| {
                let f = SyntheticField::random(dim, box_size, params, rng);
                let omega = rng.gen_range(0.5..4.0);
                let phase = rng.gen_range(0.0..std::f64::consts::TAU);
                (f, omega, phase)
            })
            .collect();
        SyntheticTrajectory { modes }
    }

    pub fn eval(&self, x: &[f64], t: f64) -> f64 {
        self.modes
            .iter()
            .map(|(f, omega, phase)| f.eval(x) * (1.0 + 0.5 * (omega * t + phase).sin()))
            .sum()
    }

    pub fn materialize(&self, grid: &Grid, times: &[f64]) -> Trajectory {
        let snaps = times
            .iter()
            .map(|&t| {
                let mut f = Field::from_fn(grid, |x| self.eval(x, t));
                zero_dirichlet_faces(&mut f);
                f
            })
            .collect();
        Trajectory::from_snapshots(times.to_vec(), snaps).expect("times are valid")
    }
}

pub fn random_trajectory(
    grid: &Grid,
    times: &[f64],
    params: &SamplerParams,
    rng: &mut impl Rng,
) -> Trajectory {
    SyntheticTrajectory::random(grid.dim(), grid.box_size(), 3, params, rng).materialize(grid, times)
}

/// Uniformly spaced sample times on `[t0, t0 + ell]`.
pub fn uniform_times(t0: f64, ell: f64, samples: usize) -> Vec<f64> {
    assert!(samples >= 2);
    (0..samples)
        .map(|i| t0 + ell * i as f64 / (samples - 1) as f64)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn same_seed_same_field() {
        let grid = Grid::new(1, 8.0, 0.125, Boundary::Periodic).unwrap();
        let params = SamplerParams::default();
        let a = random_field(&grid, &params, &mut ChaCha8Rng::seed_from_u64(5));
        let b = random_field(&grid, &params, &mut ChaCha8Rng::seed_from_u64(5));
        assert_eq!(a, b);
    }

    #[test]
    fn closed_form_part_is_resolution_independent() {
        let params = SamplerParams::smooth();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let sf = SyntheticField::random(1, 8.0, &params, &mut rng);
        let coarse = Grid::new(1, 8.0, 0.25, Boundary::Periodic).unwrap();
        let fine = Grid::new(1, 8.0, 0.125, Boundary::Periodic).unwrap();
        let fc = sf.materialize(&coarse);
        let ff = sf.materialize(&fine);
        // every coarse node exists on the fine grid with the same value
        for i in 0..coarse.points_per_axis() {
            let x = coarse.axis_coord(i);
            let j = fine.node_index_of(x).unwrap();
            assert_eq!(fc.values()[i], ff.values()[j]);
        }
    }

    #[test]
    fn dirichlet_fields_vanish_on_faces() {
        let grid = Grid::new(2, 4.0, 0.25, Boundary::DirichletZero).unwrap();
        let f = random_field(
            &grid,
            &SamplerParams::default(),
            &mut ChaCha8Rng::seed_from_u64(3),
        );
        let p = grid.points_per_axis();
        for i in 0..p {
            assert_eq!(f.values()[i], 0.0); // first row
            assert_eq!(f.values()[(p - 1) * p + i], 0.0); // last row
        }
    }
}
