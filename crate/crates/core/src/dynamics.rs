//! The solution semigroup, short-trajectory operators, and the measured
//! dissipation, contraction, and smoothing constants that drive the
//! covering arguments.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::Field;
use crate::grid::CubeTiling;
use crate::norms::{self, quadrature, NormFamily, NormSpec};
use crate::pde::{self, ProblemSpec, SolverConfig};
use crate::sampling::{random_field, SamplerParams};
use crate::trajectory::Trajectory;
use crate::util::KahanSum;
use crate::weights::Weight;

/// Apply the solution operator: `S(t) u0 = u(t)`.
pub fn semigroup_apply(
    u0: &Field,
    t: f64,
    ps: &ProblemSpec,
    cfg: &SolverConfig,
) -> Result<Field> {
    if t < 0.0 {
        return Err(Error::InvalidSolverConfig("semigroup time must be >= 0".into()));
    }
    if t == 0.0 {
        return Ok(u0.clone());
    }
    let mut run = *cfg;
    run.t_final = t;
    run.record_every = usize::MAX; // only the endpoint is needed
    Ok(pde::solve(u0, ps, &run)?.endpoint().clone())
}

/// Shift a short trajectory: continue the underlying solution by `t` and
/// re-window to the last `ell` time units, rebased to start at 0.
///
/// `t` must be a whole number of snapshot strides so the shifted window
/// reuses and extends the recorded samples exactly.
pub fn trajectory_map(
    chi: &Trajectory,
    t: f64,
    ps: &ProblemSpec,
    cfg: &SolverConfig,
) -> Result<Trajectory> {
    if chi.len() < 2 {
        return Err(Error::InvalidTrajectory(
            "short trajectories need at least two snapshots".into(),
        ));
    }
    if t == 0.0 {
        return Ok(chi.clone());
    }
    let stride = chi.times()[1] - chi.times()[0];
    let shift_steps = (t / stride).round();
    if (shift_steps * stride - t).abs() > 1e-9 {
        return Err(Error::InvalidTrajectory(format!(
            "shift {t} is not a whole number of snapshot strides {stride}"
        )));
    }
    let mut run = *cfg;
    run.t_final = t;
    run.record_every = (stride / cfg.dt).round().max(1.0) as usize;
    if (run.record_every as f64 * cfg.dt - stride).abs() > 1e-9 {
        return Err(Error::InvalidTrajectory(format!(
            "snapshot stride {stride} is not a whole number of solver steps"
        )));
    }
    let continued = pde::solve(chi.endpoint(), ps, &run)?;

    // window [t, t + ell]: reuse the tail of chi, then the continuation
    let mut times = Vec::with_capacity(chi.len());
    let mut snaps = Vec::with_capacity(chi.len());
    for (i, &ti) in chi.times().iter().enumerate() {
        if ti - chi.t_start() >= t - 1e-12 {
            times.push(ti - chi.t_start() - t);
            snaps.push(chi.snapshot(i).clone());
        }
    }
    for (i, &ti) in continued.times().iter().enumerate() {
        if i == 0 {
            continue; // endpoint of chi, already present unless t > ell
        }
        let rel = (chi.ell() - t) + ti;
        if rel > -1e-12 && rel <= chi.ell() + 1e-12 {
            if times.last().map_or(false, |last| (rel - last).abs() < 1e-12) {
                continue;
            }
            times.push(rel);
            snaps.push(continued.snapshot(i).clone());
        }
    }
    let mut traj = Trajectory::from_snapshots(times, snaps)?;
    if let Some(meta) = chi.meta() {
        traj = traj.with_meta(meta.clone());
    }
    Ok(traj)
}

/// Endpoint map `chi -> chi(ell)`.
pub fn endpoint(chi: &Trajectory) -> &Field {
    chi.endpoint()
}

// ---------------------------------------------------------------------------
// dissipation
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct DissipationConfig {
    pub sigma_min: f64,
    pub sigma_max: f64,
    pub sigma_steps: usize,
    /// Multiplier on the fitted offset, so the envelope keeps headroom for
    /// runs it was not fitted on.
    pub margin: f64,
    /// Multiplier defining the absorbing radius from the fitted constants.
    pub radius_margin: f64,
}

impl Default for DissipationConfig {
    fn default() -> Self {
        DissipationConfig {
            sigma_min: 1e-2,
            sigma_max: 5.0,
            sigma_steps: 60,
            margin: 1.05,
            radius_margin: 1.1,
        }
    }
}

/// Weighted squared-norm history of one ensemble member.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MemberSeries {
    pub times: Vec<f64>,
    pub energy: Vec<f64>,
}

/// Fitted decay envelope `E(t) <= E(0) e^{-sigma t} + c3` plus the window
/// suprema of the smoothing terms that accompany it.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DissipationFit {
    pub sigma: f64,
    pub c3: f64,
    pub absorbing_radius: f64,
    pub worst_violation: f64,
    pub w12_window_sup: f64,
    pub lp_window_sup: f64,
    pub members: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DissipationReport {
    pub fit: DissipationFit,
    pub series: Vec<MemberSeries>,
}

/// Evolve each member to `cfg.t_final` and fit the tightest exponential
/// envelope that all members satisfy at every recorded time. Among feasible
/// `(sigma, c3)` pairs the fit minimizes the implied absorbing radius.
pub fn estimate_dissipation(
    ensemble: &[Field],
    ps: &ProblemSpec,
    cfg: &SolverConfig,
    weight: &Weight,
    fit_cfg: &DissipationConfig,
) -> Result<DissipationReport> {
    if ensemble.is_empty() {
        return Err(Error::SampleTooSmall("empty ensemble".into()));
    }
    if !(weight.mu() < 1.0) {
        return Err(Error::InvalidWeight(
            "dissipation fitting needs growth rate below 1".into(),
        ));
    }
    let tiling = CubeTiling::build(ensemble[0].grid())?;
    let spec = NormSpec::new(NormFamily::LpB { p: 2.0 }, weight.clone());
    let p_exp = ps.reaction.constants().p;

    struct MemberOut {
        series: MemberSeries,
        w12_sup: f64,
        lp_sup: f64,
    }

    let outs: Vec<MemberOut> = ensemble
        .par_iter()
        .map(|u0| -> Result<MemberOut> {
            let traj = pde::solve(u0, ps, cfg)?;
            let energy: Vec<f64> = traj
                .snapshots()
                .iter()
                .map(|s| norms::field_norm_with(&tiling, s, &spec).map(|v| v * v))
                .collect::<Result<_>>()?;
            let (w12_sup, lp_sup) = unit_window_suprema(&traj, &tiling, weight, p_exp)?;
            Ok(MemberOut {
                series: MemberSeries {
                    times: traj.times().to_vec(),
                    energy,
                },
                w12_sup,
                lp_sup,
            })
        })
        .collect::<Result<_>>()?;

    // smallest feasible offset for each decay rate, then the pair with the
    // smallest implied absorbing radius
    let mut best: Option<(f64, f64, f64)> = None; // (radius^2, sigma, c3)
    for step in 0..fit_cfg.sigma_steps {
        let frac = step as f64 / (fit_cfg.sigma_steps - 1).max(1) as f64;
        let sigma = fit_cfg.sigma_min * (fit_cfg.sigma_max / fit_cfg.sigma_min).powf(frac);
        let mut c3 = 0.0f64;
        for m in &outs {
            let e0 = m.series.energy[0];
            for (t, e) in m.series.times.iter().zip(&m.series.energy) {
                c3 = c3.max(e - e0 * (-sigma * t).exp());
            }
        }
        let r2 = c3 / (1.0 - (-sigma).exp());
        if best.map_or(true, |(br2, _, _)| r2 < br2) {
            best = Some((r2, sigma, c3));
        }
    }
    let (_, sigma, c3_raw) = best.unwrap();
    let c3 = c3_raw * fit_cfg.margin;

    let mut worst_violation = f64::NEG_INFINITY;
    for m in &outs {
        let e0 = m.series.energy[0];
        for (t, e) in m.series.times.iter().zip(&m.series.energy) {
            worst_violation = worst_violation.max(e - (e0 * (-sigma * t).exp() + c3));
        }
    }

    let fit = DissipationFit {
        sigma,
        c3,
        absorbing_radius: fit_cfg.radius_margin * (c3 / (1.0 - (-sigma).exp())).sqrt(),
        worst_violation,
        w12_window_sup: outs.iter().map(|m| m.w12_sup).fold(0.0, f64::max),
        lp_window_sup: outs.iter().map(|m| m.lp_sup).fold(0.0, f64::max),
        members: ensemble.len(),
    };
    Ok(DissipationReport {
        fit,
        series: outs.into_iter().map(|m| m.series).collect(),
    })
}

/// Largest violation of an already-fitted envelope on new members
/// (non-positive means the envelope still holds).
pub fn envelope_violation(fit: &DissipationFit, series: &[MemberSeries]) -> f64 {
    let mut worst = f64::NEG_INFINITY;
    for m in series {
        let e0 = m.energy[0];
        for (t, e) in m.times.iter().zip(&m.energy) {
            worst = worst.max(e - (e0 * (-fit.sigma * t).exp() + fit.c3));
        }
    }
    worst
}

/// Suprema over unit time windows of the squared trajectory Sobolev norm
/// and the p-th power trajectory Lp norm.
fn unit_window_suprema(
    traj: &Trajectory,
    tiling: &CubeTiling,
    weight: &Weight,
    p: f64,
) -> Result<(f64, f64)> {
    let n = traj.len();
    if n < 2 {
        return Ok((0.0, 0.0));
    }
    let phi = norms::weight_at_centers(weight, tiling);
    let n_cubes = tiling.len();

    // per cube, per snapshot: space integrals of u^2 + |grad u|^2 and |u|^p
    let per_time: Vec<(Vec<f64>, Vec<f64>)> = traj
        .snapshots()
        .par_iter()
        .map(|s| {
            let grads = s.gradient();
            let mut w12 = Vec::with_capacity(n_cubes);
            let mut lp = Vec::with_capacity(n_cubes);
            for k in 0..n_cubes {
                let axes: Vec<_> = tiling
                    .cube_start(k)
                    .into_iter()
                    .map(|st| quadrature::axis_nodes_cube(tiling.grid(), st, tiling.points_per_side() - 1))
                    .collect();
                let v = s.values();
                w12.push(quadrature::integrate(tiling.grid(), &axes, |i, _| {
                    let mut q = v[i] * v[i];
                    for g in &grads {
                        let gi = g.values()[i];
                        q += gi * gi;
                    }
                    q
                }));
                lp.push(quadrature::integrate(tiling.grid(), &axes, |i, _| {
                    v[i].abs().powf(p)
                }));
            }
            (w12, lp)
        })
        .collect();

    let times = traj.times();
    let mut w12_sup = 0.0f64;
    let mut lp_sup = 0.0f64;
    let mut start = 0;
    while times[start] + 1.0 <= times[n - 1] + 1e-9 {
        let end = times
            .iter()
            .position(|&t| t >= times[start] + 1.0 - 1e-9)
            .unwrap_or(n - 1);
        for k in 0..n_cubes {
            let mut acc_w = KahanSum::new();
            let mut acc_p = KahanSum::new();
            for i in start + 1..=end {
                let dt = times[i] - times[i - 1];
                acc_w.add(0.5 * dt * (per_time[i - 1].0[k] + per_time[i].0[k]));
                acc_p.add(0.5 * dt * (per_time[i - 1].1[k] + per_time[i].1[k]));
            }
            w12_sup = w12_sup.max(phi[k] * acc_w.value());
            lp_sup = lp_sup.max(phi[k] * acc_p.value());
        }
        start += 1;
        if start >= n - 1 {
            break;
        }
    }
    Ok((w12_sup, lp_sup))
}

// ---------------------------------------------------------------------------
// contraction and smoothing
// ---------------------------------------------------------------------------

/// Measured contraction factors as a function of time: at each recorded
/// time, the worst ratio over pairs and lattice centers of
/// `sup_{s <= t} |w(s)|^2_xbar + kappa int_0^t |grad w|^2_xbar  over  |w(0)|^2_xbar`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ContractionReport {
    pub times: Vec<f64>,
    pub c2: Vec<f64>,
    pub pairs_used: usize,
}

pub fn estimate_contraction(
    pairs: &[(Field, Field)],
    ps: &ProblemSpec,
    cfg: &SolverConfig,
) -> Result<ContractionReport> {
    if pairs.is_empty() {
        return Err(Error::SampleTooSmall("no pairs".into()));
    }
    let grid = pairs[0].0.grid();
    let tiling = CubeTiling::build(grid)?;
    let kappa = ps.flux.kappa();
    let centers = tiling.centers();

    let per_pair: Vec<Option<Vec<f64>>> = pairs
        .par_iter()
        .map(|(u1, u2)| -> Result<Option<Vec<f64>>> {
            if u1.sub(u2).max_abs() == 0.0 {
                return Ok(None); // identical pair carries no information
            }
            let t1 = pde::solve(u1, ps, cfg)?;
            let t2 = pde::solve(u2, ps, cfg)?;
            let n = t1.len();
            let nc = centers.len();

            // per center: running sup of the weighted difference mass and
            // cumulative gradient dissipation
            let mut a0 = vec![0.0f64; nc];
            let mut a_sup = vec![0.0f64; nc];
            let mut b_cum = vec![0.0f64; nc];
            let mut g_prev = vec![0.0f64; nc];
            let mut ratios = vec![f64::NEG_INFINITY; n];
            for i in 0..n {
                let w = t1.snapshot(i).sub(t2.snapshot(i));
                let gw = w.gradient();
                for (ci, c) in centers.iter().enumerate() {
                    let a = quadrature::box_integral_expw(grid, c, |j| {
                        let d = w.values()[j];
                        d * d
                    });
                    let g = quadrature::box_integral_expw(grid, c, |j| {
                        let mut s = 0.0;
                        for comp in &gw {
                            let gj = comp.values()[j];
                            s += gj * gj;
                        }
                        s
                    });
                    if i == 0 {
                        a0[ci] = a;
                    } else {
                        let dt = t1.times()[i] - t1.times()[i - 1];
                        b_cum[ci] += 0.5 * dt * (g_prev[ci] + g);
                    }
                    a_sup[ci] = a_sup[ci].max(a);
                    if a0[ci] > 0.0 {
                        ratios[i] = ratios[i].max((a_sup[ci] + kappa * b_cum[ci]) / a0[ci]);
                    }
                    g_prev[ci] = g;
                }
            }
            Ok(Some(ratios))
        })
        .collect::<Result<_>>()?;

    let mut c2: Vec<f64> = Vec::new();
    let mut used = 0;
    for r in per_pair.into_iter().flatten() {
        used += 1;
        if c2.is_empty() {
            c2 = r;
        } else {
            for (a, b) in c2.iter_mut().zip(&r) {
                *a = a.max(*b);
            }
        }
    }
    if used == 0 {
        return Err(Error::SampleTooSmall("all pairs were identical".into()));
    }
    Ok(ContractionReport {
        times: recorded_times(cfg),
        c2,
        pairs_used: used,
    })
}

/// Times the solver records for a given configuration.
fn recorded_times(cfg: &SolverConfig) -> Vec<f64> {
    let n_steps = (cfg.t_final / cfg.dt).round() as u64;
    let mut times = vec![0.0];
    for s in 1..=n_steps {
        if s % cfg.record_every as u64 == 0 || s == n_steps {
            times.push(s as f64 * cfg.dt);
        }
    }
    times
}

/// Measured Lipschitz gains of the shift-by-ell map from the trajectory
/// L2-metric into the stronger Sobolev and dual-derivative metrics.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SmoothingFit {
    pub k1: f64,
    pub k2: f64,
    pub pairs_used: usize,
}

pub fn estimate_smoothing(
    pairs: &[(Trajectory, Trajectory)],
    ps: &ProblemSpec,
    cfg: &SolverConfig,
    weight: &Weight,
) -> Result<SmoothingFit> {
    if pairs.is_empty() {
        return Err(Error::SampleTooSmall("no pairs".into()));
    }
    let spec_l2 = NormSpec::new(NormFamily::TrajL2L2, weight.clone());
    let spec_w12 = NormSpec::new(NormFamily::TrajL2W12, weight.clone());
    let spec_dual = NormSpec::new(NormFamily::TrajL2Wm12, weight.clone());

    let results: Vec<Option<(f64, f64)>> = pairs
        .par_iter()
        .map(|(chi1, chi2)| -> Result<Option<(f64, f64)>> {
            let denom = norms::trajectory_norm(&chi1.sub(chi2)?, &spec_l2)?;
            if denom == 0.0 {
                return Ok(None);
            }
            let ell = chi1.ell();
            let shifted1 = trajectory_map(chi1, ell, ps, cfg)?;
            let shifted2 = trajectory_map(chi2, ell, ps, cfg)?;
            let w = shifted1.sub(&shifted2)?;
            let k1 = norms::trajectory_norm(&w, &spec_w12)? / denom;
            let k2 = norms::trajectory_norm(&w.time_differences()?, &spec_dual)? / denom;
            Ok(Some((k1, k2)))
        })
        .collect::<Result<_>>()?;

    let mut k1 = 0.0f64;
    let mut k2 = 0.0f64;
    let mut used = 0;
    for r in results.into_iter().flatten() {
        k1 = k1.max(r.0);
        k2 = k2.max(r.1);
        used += 1;
    }
    if used == 0 {
        return Err(Error::SampleTooSmall("all pairs were identical".into()));
    }
    Ok(SmoothingFit {
        k1,
        k2,
        pairs_used: used,
    })
}

// ---------------------------------------------------------------------------
// attractor sampling
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AttractorSampleConfig {
    pub ensemble_size: usize,
    pub burn_in: f64,
    pub ell: f64,
    /// Radius of the absorbing ball initial data are drawn from (take it
    /// from a dissipation fit).
    pub radius: f64,
    pub seed: u64,
    pub sampler: SamplerParams,
}

/// Draw initial data in the absorbing ball, evolve past the burn-in, and
/// record one short trajectory per member. Members that blow up during the
/// burn-in are dropped (and counted); the result is the finite attractor
/// sample used by the covering experiments.
pub fn sample_attractor(
    grid: &crate::grid::Grid,
    ps: &ProblemSpec,
    cfg: &SolverConfig,
    sample_cfg: &AttractorSampleConfig,
) -> Result<Vec<Trajectory>> {
    if sample_cfg.ensemble_size == 0 {
        return Err(Error::SampleTooSmall("ensemble_size must be >= 1".into()));
    }
    let grid = *grid;
    let tiling = CubeTiling::build(&grid)?;
    let l2b = NormSpec::new(NormFamily::LpB { p: 2.0 }, Weight::constant());

    let trajs: Vec<Option<Trajectory>> = (0..sample_cfg.ensemble_size)
        .into_par_iter()
        .map(|i| -> Result<Option<Trajectory>> {
            let mut rng = ChaCha8Rng::seed_from_u64(sample_cfg.seed.wrapping_add(i as u64));
            let raw = random_field(&grid, &sample_cfg.sampler, &mut rng);
            let norm = norms::field_norm_with(&tiling, &raw, &l2b)?;
            let target = sample_cfg.radius * rng.gen_range(0.05..1.0f64);
            let u0 = if norm > 0.0 {
                raw.scale(target / norm)
            } else {
                raw
            };
            let entered = match semigroup_apply(&u0, sample_cfg.burn_in, ps, cfg) {
                Ok(f) => f,
                Err(Error::BlowUp { time, .. }) => {
                    log::warn!("member {i} blew up at t = {time} during burn-in; dropped");
                    return Ok(None);
                }
                Err(e) => return Err(e),
            };
            let mut window_cfg = *cfg;
            window_cfg.t_final = sample_cfg.ell;
            let traj = pde::solve(&entered, ps, &window_cfg)?;
            Ok(Some(traj))
        })
        .collect::<Result<_>>()?;

    let kept: Vec<Trajectory> = trajs.into_iter().flatten().collect();
    if kept.is_empty() {
        return Err(Error::SampleTooSmall(
            "every ensemble member blew up during burn-in".into(),
        ));
    }
    Ok(kept)
}

#[cfg(test)]
mod tests;
