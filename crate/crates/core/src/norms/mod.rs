//! Uniformly-local weighted norms and seminorms.
//!
//! Every family comes in two computable forms. The cube-sup form takes a
//! weighted supremum of integrals over the overlapping unit cubes,
//!
//! ```text
//! ||u||_{L^p_{b,phi}}^p = sup_k phi(x_k) int_{C_k} |u|^p dx,
//! ```
//!
//! while the weighted-integral ("tilde") form integrates against the moving
//! exponential `e^{-|x - xbar|}` and takes a weighted supremum over the
//! center. The supremum over centers is restricted to the half-integer
//! lattice: moving the center within a unit cube changes the integral by a
//! bounded factor, so the lattice supremum spans the same space and makes
//! the computation finite. Trajectory norms integrate over the time window
//! first and take the weighted supremum second; the reversed order would
//! give a strictly larger functional.

pub mod quadrature;
mod dual;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::Field;
use crate::grid::{Ball, Boundary, CubeTiling, Grid};
use crate::linalg::{conjugate_gradient, solve_cyclic_variable, TridiagSolver};
use crate::trajectory::Trajectory;
use crate::util::KahanSum;
use crate::weights::Weight;

pub use quadrature::{box_integral_expw, exp_measure, xbar_lp_norm};

/// Norm family tag. `Traj*` families apply to trajectories, the rest to
/// fields; `*Tilde` families require a weight of growth rate below 1.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name")]
pub enum NormFamily {
    #[serde(rename = "lp-b")]
    LpB { p: f64 },
    #[serde(rename = "w12-b")]
    W12B,
    #[serde(rename = "wm12-b")]
    Wm12B,
    #[serde(rename = "lp-tilde")]
    LpTilde { p: f64 },
    #[serde(rename = "w12-tilde")]
    W12Tilde,
    #[serde(rename = "wm12-tilde")]
    Wm12Tilde,
    #[serde(rename = "traj-l2-l2")]
    TrajL2L2,
    #[serde(rename = "traj-l2-w12")]
    TrajL2W12,
    #[serde(rename = "traj-l2-wm12")]
    TrajL2Wm12,
    #[serde(rename = "traj-lp-lp")]
    TrajLpLp { p: f64 },
    #[serde(rename = "traj-l2-l2-tilde")]
    TrajL2L2Tilde,
    #[serde(rename = "traj-l2-w12-tilde")]
    TrajL2W12Tilde,
    #[serde(rename = "traj-lp-lp-tilde")]
    TrajLpLpTilde { p: f64 },
}

impl NormFamily {
    pub fn is_trajectory(&self) -> bool {
        matches!(
            self,
            NormFamily::TrajL2L2
                | NormFamily::TrajL2W12
                | NormFamily::TrajL2Wm12
                | NormFamily::TrajLpLp { .. }
                | NormFamily::TrajL2L2Tilde
                | NormFamily::TrajL2W12Tilde
                | NormFamily::TrajLpLpTilde { .. }
        )
    }

    pub fn is_tilde(&self) -> bool {
        matches!(
            self,
            NormFamily::LpTilde { .. }
                | NormFamily::W12Tilde
                | NormFamily::Wm12Tilde
                | NormFamily::TrajL2L2Tilde
                | NormFamily::TrajL2W12Tilde
                | NormFamily::TrajLpLpTilde { .. }
        )
    }

    pub fn exponent(&self) -> f64 {
        match self {
            NormFamily::LpB { p }
            | NormFamily::LpTilde { p }
            | NormFamily::TrajLpLp { p }
            | NormFamily::TrajLpLpTilde { p } => *p,
            _ => 2.0,
        }
    }
}

/// A norm or localized seminorm: family, weight, optional restriction ball.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormSpec {
    pub family: NormFamily,
    pub weight: Weight,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub restriction: Option<Ball>,
}

impl NormSpec {
    pub fn new(family: NormFamily, weight: Weight) -> Self {
        NormSpec {
            family,
            weight,
            restriction: None,
        }
    }

    pub fn with_restriction(mut self, region: Ball) -> Self {
        self.restriction = Some(region);
        self
    }

    pub fn validate(&self) -> Result<()> {
        let p = self.family.exponent();
        if !(p >= 1.0 && p.is_finite()) {
            return Err(Error::InvalidNormSpec(format!(
                "exponent must lie in [1, inf), got {p}"
            )));
        }
        if self.family.is_tilde() && !(self.weight.mu() < 1.0) {
            return Err(Error::InvalidNormSpec(format!(
                "weighted-integral norms require growth rate below 1, got mu = {}",
                self.weight.mu()
            )));
        }
        Ok(())
    }
}

/// Weight values at the cube centers, in tiling order.
pub fn weight_at_centers(weight: &Weight, tiling: &CubeTiling) -> Vec<f64> {
    tiling.centers().iter().map(|c| weight.evaluate(c)).collect()
}

/// Cube indices selected by an optional restriction ball.
fn selected_cubes(tiling: &CubeTiling, restriction: &Option<Ball>) -> Result<Vec<usize>> {
    match restriction {
        None => Ok((0..tiling.len()).collect()),
        Some(ball) => {
            let idx = tiling.cubes_intersecting(ball);
            if idx.is_empty() {
                Err(Error::EmptyRestriction)
            } else {
                Ok(idx)
            }
        }
    }
}

/// `(int_{C_k} |u|^p dx)^{1/p}` by trapezoid quadrature.
pub fn cube_norm(field: &Field, tiling: &CubeTiling, k: usize, p: f64) -> f64 {
    cube_p_integral(field, tiling, k, p).powf(1.0 / p)
}

fn cube_axes(tiling: &CubeTiling, k: usize) -> Vec<quadrature::AxisNodes> {
    let grid = tiling.grid();
    let m = tiling.points_per_side() - 1;
    tiling
        .cube_start(k)
        .into_iter()
        .map(|s| quadrature::axis_nodes_cube(grid, s, m))
        .collect()
}

fn cube_p_integral(field: &Field, tiling: &CubeTiling, k: usize, p: f64) -> f64 {
    let axes = cube_axes(tiling, k);
    let v = field.values();
    if p == 2.0 {
        quadrature::integrate(tiling.grid(), &axes, |i, _| v[i] * v[i])
    } else {
        quadrature::integrate(tiling.grid(), &axes, |i, _| v[i].abs().powf(p))
    }
}

fn cube_w12_integral(field: &Field, grads: &[Field], tiling: &CubeTiling, k: usize) -> f64 {
    let axes = cube_axes(tiling, k);
    let v = field.values();
    quadrature::integrate(tiling.grid(), &axes, |i, _| {
        let mut s = v[i] * v[i];
        for g in grads {
            let gi = g.values()[i];
            s += gi * gi;
        }
        s
    })
}

/// Norm of a field under the given spec. Builds the cube tiling internally;
/// use [`field_norm_with`] to amortize the tiling over many evaluations.
pub fn field_norm(field: &Field, spec: &NormSpec) -> Result<f64> {
    let tiling = CubeTiling::build(field.grid())?;
    field_norm_with(&tiling, field, spec)
}

pub fn field_norm_with(tiling: &CubeTiling, field: &Field, spec: &NormSpec) -> Result<f64> {
    spec.validate()?;
    if spec.family.is_trajectory() {
        return Err(Error::InvalidNormSpec(
            "trajectory norm family applied to a field".into(),
        ));
    }
    let cubes = selected_cubes(tiling, &spec.restriction)?;
    let grid = field.grid();
    let weight = &spec.weight;

    let value = match &spec.family {
        NormFamily::LpB { p } => {
            let sup = cubes
                .par_iter()
                .map(|&k| weight.evaluate(tiling.center(k)) * cube_p_integral(field, tiling, k, *p))
                .reduce(|| f64::NEG_INFINITY, f64::max);
            sup.max(0.0).powf(1.0 / p)
        }
        NormFamily::W12B => {
            let grads = field.gradient();
            let sup = cubes
                .par_iter()
                .map(|&k| {
                    weight.evaluate(tiling.center(k)) * cube_w12_integral(field, &grads, tiling, k)
                })
                .reduce(|| f64::NEG_INFINITY, f64::max);
            sup.max(0.0).sqrt()
        }
        NormFamily::Wm12B => {
            let v = field.values();
            let sup = cubes
                .par_iter()
                .map(|&k| {
                    let d = dual::cube_dual_norm(grid, tiling, k, &|i| v[i])?;
                    Ok(weight.evaluate(tiling.center(k)) * d * d)
                })
                .try_reduce(|| f64::NEG_INFINITY, |a, b| Ok(a.max(b)))?;
            sup.max(0.0).sqrt()
        }
        NormFamily::LpTilde { p } => {
            let v = field.values();
            let sup = cubes
                .par_iter()
                .map(|&k| {
                    let c = tiling.center(k);
                    weight.evaluate(c)
                        * quadrature::box_integral_expw(grid, c, |i| v[i].abs().powf(*p))
                })
                .reduce(|| f64::NEG_INFINITY, f64::max);
            sup.max(0.0).powf(1.0 / p)
        }
        NormFamily::W12Tilde => {
            let grads = field.gradient();
            let v = field.values();
            let sup = cubes
                .par_iter()
                .map(|&k| {
                    let c = tiling.center(k);
                    weight.evaluate(c)
                        * quadrature::box_integral_expw(grid, c, |i| {
                            let mut s = v[i] * v[i];
                            for g in &grads {
                                let gi = g.values()[i];
                                s += gi * gi;
                            }
                            s
                        })
                })
                .reduce(|| f64::NEG_INFINITY, f64::max);
            sup.max(0.0).sqrt()
        }
        NormFamily::Wm12Tilde => {
            let sup = cubes
                .par_iter()
                .map(|&k| tilde_dual_at_center(field, tiling.center(k), weight))
                .try_reduce(|| f64::NEG_INFINITY, |a, b| Ok(a.max(b)))?;
            sup.max(0.0)
        }
        _ => unreachable!(),
    };
    Ok(value)
}

/// Norm of a trajectory under the given spec (time integral inside,
/// weighted supremum outside).
pub fn trajectory_norm(traj: &Trajectory, spec: &NormSpec) -> Result<f64> {
    let tiling = CubeTiling::build(traj.grid())?;
    trajectory_norm_with(&tiling, traj, spec)
}

pub fn trajectory_norm_with(tiling: &CubeTiling, traj: &Trajectory, spec: &NormSpec) -> Result<f64> {
    spec.validate()?;
    if !spec.family.is_trajectory() {
        return Err(Error::InvalidNormSpec(
            "field norm family applied to a trajectory".into(),
        ));
    }
    if traj.len() < 2 {
        return Err(Error::InvalidTrajectory(
            "trajectory norms need at least two time samples".into(),
        ));
    }
    let cubes = selected_cubes(tiling, &spec.restriction)?;
    let grid = traj.grid();
    let weight = &spec.weight;

    let needs_grads = matches!(
        spec.family,
        NormFamily::TrajL2W12 | NormFamily::TrajL2W12Tilde
    );
    let grads: Vec<Vec<Field>> = if needs_grads {
        traj.snapshots().iter().map(|s| s.gradient()).collect()
    } else {
        Vec::new()
    };

    let value = match &spec.family {
        NormFamily::TrajL2L2 => {
            let sup = cubes
                .par_iter()
                .map(|&k| {
                    let inner =
                        traj.time_integral(|t| cube_p_integral(traj.snapshot(t), tiling, k, 2.0));
                    weight.evaluate(tiling.center(k)) * inner
                })
                .reduce(|| f64::NEG_INFINITY, f64::max);
            sup.max(0.0).sqrt()
        }
        NormFamily::TrajL2W12 => {
            let sup = cubes
                .par_iter()
                .map(|&k| {
                    let inner = traj.time_integral(|t| {
                        cube_w12_integral(traj.snapshot(t), &grads[t], tiling, k)
                    });
                    weight.evaluate(tiling.center(k)) * inner
                })
                .reduce(|| f64::NEG_INFINITY, f64::max);
            sup.max(0.0).sqrt()
        }
        NormFamily::TrajL2Wm12 => {
            let sup = cubes
                .par_iter()
                .map(|&k| -> Result<f64> {
                    let mut duals = Vec::with_capacity(traj.len());
                    for t in 0..traj.len() {
                        let v = traj.snapshot(t).values();
                        let d = dual::cube_dual_norm(grid, tiling, k, &|i| v[i])?;
                        duals.push(d * d);
                    }
                    Ok(weight.evaluate(tiling.center(k)) * traj.time_integral(|t| duals[t]))
                })
                .try_reduce(|| f64::NEG_INFINITY, |a, b| Ok(a.max(b)))?;
            sup.max(0.0).sqrt()
        }
        NormFamily::TrajLpLp { p } => {
            let sup = cubes
                .par_iter()
                .map(|&k| {
                    let inner =
                        traj.time_integral(|t| cube_p_integral(traj.snapshot(t), tiling, k, *p));
                    weight.evaluate(tiling.center(k)) * inner
                })
                .reduce(|| f64::NEG_INFINITY, f64::max);
            sup.max(0.0).powf(1.0 / p)
        }
        NormFamily::TrajL2L2Tilde => {
            let sup = cubes
                .par_iter()
                .map(|&k| {
                    let c = tiling.center(k);
                    let inner = traj.time_integral(|t| {
                        let v = traj.snapshot(t).values();
                        quadrature::box_integral_expw(grid, c, |i| v[i] * v[i])
                    });
                    weight.evaluate(c) * inner
                })
                .reduce(|| f64::NEG_INFINITY, f64::max);
            sup.max(0.0).sqrt()
        }
        NormFamily::TrajL2W12Tilde => {
            let sup = cubes
                .par_iter()
                .map(|&k| {
                    let c = tiling.center(k);
                    let inner = traj.time_integral(|t| {
                        let v = traj.snapshot(t).values();
                        let g = &grads[t];
                        quadrature::box_integral_expw(grid, c, |i| {
                            let mut s = v[i] * v[i];
                            for comp in g {
                                let gi = comp.values()[i];
                                s += gi * gi;
                            }
                            s
                        })
                    });
                    weight.evaluate(c) * inner
                })
                .reduce(|| f64::NEG_INFINITY, f64::max);
            sup.max(0.0).sqrt()
        }
        NormFamily::TrajLpLpTilde { p } => {
            let sup = cubes
                .par_iter()
                .map(|&k| {
                    let c = tiling.center(k);
                    let inner = traj.time_integral(|t| {
                        let v = traj.snapshot(t).values();
                        quadrature::box_integral_expw(grid, c, |i| v[i].abs().powf(*p))
                    });
                    weight.evaluate(c) * inner
                })
                .reduce(|| f64::NEG_INFINITY, f64::max);
            sup.max(0.0).powf(1.0 / p)
        }
        _ => unreachable!(),
    };
    Ok(value)
}

/// Relaxed realization of the weighted-integral dual norm at one center:
/// the Riesz problem is solved under the single growth constraint anchored
/// at that center, which majorizes the fully constrained supremum.
fn tilde_dual_at_center(field: &Field, center: &[f64], weight: &Weight) -> Result<f64> {
    let grid = field.grid();
    if grid.dim() != 1 {
        return Err(Error::InvalidNormSpec(
            "the weighted-integral dual norm is implemented for d = 1 only".into(),
        ));
    }
    let h = grid.spacing();
    let n = grid.points_per_axis();
    let u = field.values();
    let e_at = |x: f64| (-(x - center[0]).abs()).exp();
    let e_node: Vec<f64> = (0..n).map(|i| e_at(grid.axis_coord(i))).collect();

    match grid.boundary() {
        Boundary::Periodic => {
            // edge i sits between node i and node i+1 (edge n-1 wraps)
            let e_edge: Vec<f64> = (0..n)
                .map(|i| e_at(grid.axis_coord(i) + 0.5 * h))
                .collect();
            let inv_h2 = 1.0 / (h * h);
            let mut sub = vec![0.0; n];
            let mut diag = vec![0.0; n];
            let mut sup = vec![0.0; n];
            for i in 0..n {
                let e_left = e_edge[(i + n - 1) % n];
                let e_right = e_edge[i];
                diag[i] = (e_left + e_right) * inv_h2 + e_node[i];
                sub[i] = -e_left * inv_h2;
                sup[i] = -e_right * inv_h2;
            }
            let mut rhs: Vec<f64> = (0..n).map(|i| e_node[i] * u[i]).collect();
            let tr = sup[n - 1];
            let bl = sub[0];
            sub[0] = 0.0;
            sup[n - 1] = 0.0;
            solve_cyclic_variable(&sub, &diag, &sup, tr, bl, &mut rhs)?;
            let mut acc = KahanSum::new();
            for i in 0..n {
                acc.add(e_node[i] * u[i] * rhs[i]);
            }
            Ok(weight.evaluate(center).sqrt() * (acc.value() * h).max(0.0).sqrt())
        }
        Boundary::DirichletZero => {
            let n_int = n - 2;
            let inv_h2 = 1.0 / (h * h);
            let mut sub = vec![0.0; n_int];
            let mut diag = vec![0.0; n_int];
            let mut sup = vec![0.0; n_int];
            for j in 0..n_int {
                let i = j + 1;
                let e_left = e_at(grid.axis_coord(i) - 0.5 * h);
                let e_right = e_at(grid.axis_coord(i) + 0.5 * h);
                diag[j] = (e_left + e_right) * inv_h2 + e_node[i];
                sub[j] = -e_left * inv_h2;
                sup[j] = -e_right * inv_h2;
            }
            let mut rhs: Vec<f64> = (1..n - 1).map(|i| e_node[i] * u[i]).collect();
            let solver = TridiagSolver::new(sub, diag, sup)?;
            solver.solve(&mut rhs);
            let mut acc = KahanSum::new();
            for (j, w) in rhs.iter().enumerate() {
                acc.add(e_node[j + 1] * u[j + 1] * w);
            }
            Ok(weight.evaluate(center).sqrt() * (acc.value() * h).max(0.0).sqrt())
        }
    }
}

/// Per-cube squared space integrals of the pointwise difference of two
/// fields, `int_{C_k} (a - b)^2 dx`, in tiling order.
pub fn field_pair_cube_profile(a: &Field, b: &Field, tiling: &CubeTiling) -> Vec<f64> {
    assert_eq!(a.grid(), b.grid());
    let av = a.values();
    let bv = b.values();
    (0..tiling.len())
        .map(|k| {
            let axes = cube_axes(tiling, k);
            quadrature::integrate(tiling.grid(), &axes, |i, _| {
                let d = av[i] - bv[i];
                d * d
            })
        })
        .collect()
}

/// Per-cube squared space-time integrals of the difference of two aligned
/// trajectories, `int_0^ell int_{C_k} (a - b)^2 dx dt`, in tiling order.
pub fn traj_pair_cube_profile(a: &Trajectory, b: &Trajectory, tiling: &CubeTiling) -> Result<Vec<f64>> {
    a.check_aligned(b)?;
    let profile = (0..tiling.len())
        .map(|k| {
            let axes = cube_axes(tiling, k);
            a.time_integral(|t| {
                let av = a.snapshot(t).values();
                let bv = b.snapshot(t).values();
                quadrature::integrate(tiling.grid(), &axes, |i, _| {
                    let d = av[i] - bv[i];
                    d * d
                })
            })
        })
        .collect();
    Ok(profile)
}

/// Extremal ratios `norm_a / norm_b` observed over a sample.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct RatioBand {
    pub min_ratio: f64,
    pub max_ratio: f64,
    pub count: usize,
}

impl RatioBand {
    pub fn spread(&self) -> f64 {
        self.max_ratio / self.min_ratio
    }
}

fn band_from_ratios(ratios: Vec<f64>) -> Result<RatioBand> {
    if ratios.is_empty() {
        return Err(Error::SampleTooSmall(
            "no nonzero items to measure ratios on".into(),
        ));
    }
    Ok(RatioBand {
        min_ratio: ratios.iter().copied().fold(f64::INFINITY, f64::min),
        max_ratio: ratios.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        count: ratios.len(),
    })
}

/// Measure `norm_a / norm_b` over a field sample, skipping zero fields.
pub fn equivalence_ratio_fields(
    fields: &[Field],
    spec_a: &NormSpec,
    spec_b: &NormSpec,
) -> Result<RatioBand> {
    let tiling = match fields.first() {
        Some(f) => CubeTiling::build(f.grid())?,
        None => return Err(Error::SampleTooSmall("empty field sample".into())),
    };
    let mut ratios = Vec::with_capacity(fields.len());
    for f in fields {
        if f.max_abs() == 0.0 {
            continue;
        }
        let na = field_norm_with(&tiling, f, spec_a)?;
        let nb = field_norm_with(&tiling, f, spec_b)?;
        ratios.push(na / nb);
    }
    band_from_ratios(ratios)
}

/// Measure `norm_a / norm_b` over a trajectory sample, skipping zero
/// trajectories.
pub fn equivalence_ratio_trajectories(
    trajs: &[Trajectory],
    spec_a: &NormSpec,
    spec_b: &NormSpec,
) -> Result<RatioBand> {
    let tiling = match trajs.first() {
        Some(t) => CubeTiling::build(t.grid())?,
        None => return Err(Error::SampleTooSmall("empty trajectory sample".into())),
    };
    let mut ratios = Vec::with_capacity(trajs.len());
    for t in trajs {
        if t.snapshots().iter().all(|s| s.max_abs() == 0.0) {
            continue;
        }
        let na = trajectory_norm_with(&tiling, t, spec_a)?;
        let nb = trajectory_norm_with(&tiling, t, spec_b)?;
        ratios.push(na / nb);
    }
    band_from_ratios(ratios)
}

#[cfg(test)]
mod tests;
