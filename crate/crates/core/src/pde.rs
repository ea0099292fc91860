//! Reaction-diffusion dynamics `u_t - div a(grad u) + f(u) + h(x, grad u) = g`
//! on the truncated box: structural-hypothesis verification, IMEX time
//! stepping, weak-form residuals, and norm monitoring.

use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::Field;
use crate::grid::{Boundary, CubeTiling, Grid};
use crate::linalg::{conjugate_gradient, CyclicTridiagSolver, TridiagSolver};
use crate::norms::{self, NormFamily, NormSpec};
use crate::trajectory::{Trajectory, TrajectoryMeta};
use crate::util;
use crate::weights::Weight;

const GRAD_CLAMP: f64 = 1e6;
const BLOWUP_GUARD: f64 = 1e12;
const CG_TOL: f64 = 1e-10;

/// Diffusion flux `a: R^d -> R^d` with declared monotonicity constant
/// `kappa` and Lipschitz bound `c * kappa`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum DiffusionFlux {
    /// `a(xi) = kappa xi`.
    Linear { kappa: f64 },
    /// `a(xi) = xi / (1 + |xi|)`: bounded flux whose monotonicity constant
    /// degenerates at large gradients. Shipped as a counterexample for the
    /// hypothesis checker, not for time integration.
    Saturating,
}

impl DiffusionFlux {
    pub fn eval(&self, xi: &[f64], out: &mut [f64]) {
        match self {
            DiffusionFlux::Linear { kappa } => {
                for (o, x) in out.iter_mut().zip(xi) {
                    *o = kappa * x;
                }
            }
            DiffusionFlux::Saturating => {
                let n = util::norm(xi);
                let s = 1.0 / (1.0 + n);
                for (o, x) in out.iter_mut().zip(xi) {
                    *o = s * x;
                }
            }
        }
    }

    /// Declared monotonicity constant of the flux.
    pub fn kappa(&self) -> f64 {
        match self {
            DiffusionFlux::Linear { kappa } => *kappa,
            DiffusionFlux::Saturating => 0.5,
        }
    }

    /// Declared Lipschitz bound `c * kappa`.
    pub fn lipschitz(&self) -> f64 {
        match self {
            DiffusionFlux::Linear { kappa } => *kappa,
            DiffusionFlux::Saturating => 1.0,
        }
    }
}

/// Scalar reaction term with declared growth structure. `Cubic` is the
/// production family; the rest are test vehicles (they deliberately violate
/// one or more of the declared growth inequalities).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Reaction {
    /// `f(u) = u^3 - gamma u`, superlinear with p = 4.
    Cubic { gamma: f64 },
    /// `f(u) = lambda u`; linear test reaction, fails the superlinear
    /// lower bound by construction.
    Linear { lambda: f64 },
    /// `f(u) = -u^3`; violates semi-monotonicity and the lower growth
    /// bound, drives finite-time blow-up.
    NegCubic,
    /// `f = 0`; pure-diffusion test vehicle.
    Zero,
}

/// Declared structural constants of a reaction term.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct ReactionConstants {
    pub p: f64,
    pub local_lipschitz: f64,    // c2 in the local Lipschitz bound
    pub semi_monotonicity: f64,  // C in (f(r)-f(s))(r-s) >= -C (r-s)^2
    pub lower_coeff: f64,        // c4
    pub lower_offset: f64,       // c5
    pub upper_coeff: f64,        // c6
}

impl Reaction {
    pub fn eval(&self, r: f64) -> f64 {
        match self {
            Reaction::Cubic { gamma } => r * r * r - gamma * r,
            Reaction::Linear { lambda } => lambda * r,
            Reaction::NegCubic => -(r * r * r),
            Reaction::Zero => 0.0,
        }
    }

    pub fn constants(&self) -> ReactionConstants {
        match self {
            Reaction::Cubic { gamma } => ReactionConstants {
                p: 4.0,
                local_lipschitz: 1.5 + gamma,
                semi_monotonicity: *gamma,
                lower_coeff: 0.5,
                lower_offset: gamma * gamma / 2.0,
                upper_coeff: 1.0,
            },
            Reaction::Linear { lambda } => ReactionConstants {
                p: 4.0,
                local_lipschitz: lambda.abs(),
                semi_monotonicity: (-lambda).max(0.0),
                lower_coeff: 0.5,
                lower_offset: 1.0,
                upper_coeff: 1.0f64.max(lambda.abs()),
            },
            Reaction::NegCubic => ReactionConstants {
                p: 4.0,
                local_lipschitz: 1.5,
                semi_monotonicity: 1.0,
                lower_coeff: 0.5,
                lower_offset: 1.0,
                upper_coeff: 1.0,
            },
            Reaction::Zero => ReactionConstants {
                p: 4.0,
                local_lipschitz: 0.0,
                semi_monotonicity: 0.0,
                lower_coeff: 0.5,
                lower_offset: 1.0,
                upper_coeff: 1.0,
            },
        }
    }
}

/// Convection term `h(x, xi)`, globally Lipschitz in the gradient slot.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Convection {
    None,
    /// `h(x, xi) = v . xi` with a constant drift velocity.
    LinearDrift { velocity: Vec<f64> },
}

impl Convection {
    pub fn eval(&self, _x: &[f64], xi: &[f64]) -> f64 {
        match self {
            Convection::None => 0.0,
            Convection::LinearDrift { velocity } => {
                velocity.iter().zip(xi).map(|(v, g)| v * g).sum()
            }
        }
    }

    pub fn is_none(&self) -> bool {
        matches!(self, Convection::None)
    }

    pub fn lipschitz(&self) -> f64 {
        match self {
            Convection::None => 0.0,
            Convection::LinearDrift { velocity } => util::norm(velocity),
        }
    }
}

/// Wrapper for a time-varying forcing closure (manufactured solutions).
#[derive(Clone)]
pub struct ForcingFn(pub Arc<dyn Fn(&[f64], f64) -> f64 + Send + Sync>);

impl fmt::Debug for ForcingFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("ForcingFn(..)")
    }
}

/// Source term. Config files can only express `Zero` and `Static`;
/// `TimeVarying` exists for verification drivers.
#[derive(Clone, Debug)]
pub enum Forcing {
    Zero,
    Static(Field),
    TimeVarying(ForcingFn),
}

impl Forcing {
    pub fn is_zero(&self) -> bool {
        matches!(self, Forcing::Zero)
    }
}

/// The nonlinearity bundle `(a, f, h, g)`.
#[derive(Clone, Debug)]
pub struct ProblemSpec {
    pub flux: DiffusionFlux,
    pub reaction: Reaction,
    pub convection: Convection,
    pub forcing: Forcing,
}

impl ProblemSpec {
    pub fn new(
        flux: DiffusionFlux,
        reaction: Reaction,
        convection: Convection,
        forcing: Forcing,
    ) -> Self {
        ProblemSpec {
            flux,
            reaction,
            convection,
            forcing,
        }
    }

    /// Linear diffusion with the cubic reaction and no convection/forcing.
    pub fn cubic(gamma: f64) -> Self {
        ProblemSpec {
            flux: DiffusionFlux::Linear { kappa: 1.0 },
            reaction: Reaction::Cubic { gamma },
            convection: Convection::None,
            forcing: Forcing::Zero,
        }
    }

    pub fn with_forcing(mut self, forcing: Forcing) -> Self {
        self.forcing = forcing;
        self
    }

    /// Stable content digest for run metadata.
    pub fn digest(&self) -> String {
        let mut desc = format!(
            "{:?}|{:?}|{:?}|",
            self.flux, self.reaction, self.convection
        );
        match &self.forcing {
            Forcing::Zero => desc.push_str("g=0"),
            Forcing::Static(f) => {
                let bytes: Vec<u8> = f.values().iter().flat_map(|v| v.to_le_bytes()).collect();
                desc.push_str(&format!("g=static:{:016x}", util::fnv1a64(&bytes)));
            }
            Forcing::TimeVarying(_) => desc.push_str("g=custom"),
        }
        format!("{:016x}", util::fnv1a64(desc.as_bytes()))
    }
}

/// Time-integration scheme.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    /// Implicit linear diffusion, explicit everything else.
    Imex,
    /// Forward Euler on all terms; subject to the diffusive step bound
    /// `dt <= h^2 / (2 d c kappa)`.
    FullyExplicit,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub dt: f64,
    pub scheme: Scheme,
    pub t_final: f64,
    pub record_every: usize,
    pub seed: u64,
}

impl SolverConfig {
    pub fn imex(dt: f64, t_final: f64, record_every: usize) -> Self {
        SolverConfig {
            dt,
            scheme: Scheme::Imex,
            t_final,
            record_every,
            seed: 0,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) {
            return Err(Error::InvalidSolverConfig("dt must be positive".into()));
        }
        if self.t_final < 0.0 {
            return Err(Error::InvalidSolverConfig("t_final must be >= 0".into()));
        }
        if self.record_every == 0 {
            return Err(Error::InvalidSolverConfig(
                "record_every must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

enum ImplicitSolve {
    None,
    Cyclic(CyclicTridiagSolver),
    Dirichlet1d(TridiagSolver),
    Cg { factor: f64 },
}

/// Precomputed single-step integrator bound to one grid and problem.
pub struct Stepper {
    grid: Grid,
    ps: ProblemSpec,
    dt: f64,
    scheme: Scheme,
    kappa_split: f64,
    implicit: ImplicitSolve,
    coords: Vec<f64>, // flattened node coordinates, dim per node
    pub clamp_events: u64,
}

impl Stepper {
    pub fn new(grid: &Grid, ps: &ProblemSpec, cfg: &SolverConfig) -> Result<Self> {
        cfg.validate()?;
        let kappa_split = ps.flux.kappa();
        let h = grid.spacing();
        let factor = cfg.dt * kappa_split / (h * h);
        let implicit = match cfg.scheme {
            Scheme::FullyExplicit => ImplicitSolve::None,
            Scheme::Imex => match (grid.dim(), grid.boundary()) {
                (1, Boundary::Periodic) => ImplicitSolve::Cyclic(CyclicTridiagSolver::new(
                    -factor,
                    1.0 + 2.0 * factor,
                    grid.points_per_axis(),
                )?),
                (1, Boundary::DirichletZero) => {
                    let n_int = grid.points_per_axis() - 2;
                    ImplicitSolve::Dirichlet1d(TridiagSolver::new(
                        vec![-factor; n_int],
                        vec![1.0 + 2.0 * factor; n_int],
                        vec![-factor; n_int],
                    )?)
                }
                _ => ImplicitSolve::Cg { factor },
            },
        };
        let mut coords = Vec::with_capacity(grid.num_points() * grid.dim());
        for i in 0..grid.num_points() {
            coords.extend(grid.coords_of(i));
        }
        Ok(Stepper {
            grid: *grid,
            ps: ps.clone(),
            dt: cfg.dt,
            scheme: cfg.scheme,
            kappa_split,
            implicit,
            coords,
            clamp_events: 0,
        })
    }

    /// Advance one step from state `u` at time `t`.
    pub fn step(&mut self, u: &Field, t: f64) -> Result<Field> {
        let d = self.grid.dim();
        let n = self.grid.num_points();
        let dt = self.dt;

        // explicit contributions at time t
        let needs_grad = !self.ps.convection.is_none()
            || !matches!(self.ps.flux, DiffusionFlux::Linear { .. });
        let grads = if needs_grad { u.gradient() } else { Vec::new() };

        let mut rhs = Field::zeros(&self.grid);
        {
            let uv = u.values();
            let out = rhs.values_mut();
            let mut xi = [0.0f64; 3];
            for i in 0..n {
                let x = &self.coords[i * d..(i + 1) * d];
                let mut e = -self.ps.reaction.eval(uv[i]);
                if !self.ps.convection.is_none() {
                    let mut mag2 = 0.0;
                    for ax in 0..d {
                        xi[ax] = grads[ax].values()[i];
                        mag2 += xi[ax] * xi[ax];
                    }
                    // clamp runaway gradients so the explicit step cannot
                    // overflow before the blow-up guard sees the state
                    if mag2.sqrt() > GRAD_CLAMP {
                        let s = GRAD_CLAMP / mag2.sqrt();
                        for g in xi.iter_mut().take(d) {
                            *g *= s;
                        }
                        self.clamp_events += 1;
                    }
                    e -= self.ps.convection.eval(x, &xi[..d]);
                }
                match &self.ps.forcing {
                    Forcing::Zero => {}
                    Forcing::Static(g) => e += g.values()[i],
                    Forcing::TimeVarying(f) => e += (f.0)(x, t),
                }
                out[i] = uv[i] + dt * e;
            }
        }

        // nonlinear remainder of the flux beyond the split linear part
        if !matches!(self.ps.flux, DiffusionFlux::Linear { .. }) {
            let mut flux_fields: Vec<Field> = Vec::with_capacity(d);
            for _ in 0..d {
                flux_fields.push(Field::zeros(&self.grid));
            }
            let mut xi = [0.0f64; 3];
            let mut a_of = [0.0f64; 3];
            for i in 0..n {
                for ax in 0..d {
                    xi[ax] = grads[ax].values()[i];
                }
                self.ps.flux.eval(&xi[..d], &mut a_of[..d]);
                for ax in 0..d {
                    flux_fields[ax].values_mut()[i] = a_of[ax] - self.kappa_split * xi[ax];
                }
            }
            for (ax, fl) in flux_fields.iter().enumerate() {
                let dflux = &fl.gradient()[ax];
                for i in 0..n {
                    rhs.values_mut()[i] += dt * dflux.values()[i];
                }
            }
        }

        // diffusion: explicit Laplacian or implicit solve of the split part
        let mut next = match self.scheme {
            Scheme::FullyExplicit => {
                let mut out = rhs;
                let h2 = self.grid.spacing() * self.grid.spacing();
                let lap = laplacian(u);
                for i in 0..n {
                    out.values_mut()[i] += dt * self.kappa_split * lap.values()[i] / h2;
                }
                out
            }
            Scheme::Imex => self.solve_implicit(rhs)?,
        };

        if self.grid.boundary() == Boundary::DirichletZero {
            zero_faces(&mut next);
        }

        let worst = next.max_abs();
        if !worst.is_finite() || worst > BLOWUP_GUARD {
            return Err(Error::BlowUp {
                time: t + dt,
                detail: format!("max |u| = {worst:.3e}"),
            });
        }
        Ok(next)
    }

    fn solve_implicit(&self, mut rhs: Field) -> Result<Field> {
        match &self.implicit {
            ImplicitSolve::None => Ok(rhs),
            ImplicitSolve::Cyclic(solver) => {
                solver.solve(rhs.values_mut());
                Ok(rhs)
            }
            ImplicitSolve::Dirichlet1d(solver) => {
                let p = self.grid.points_per_axis();
                let mut interior: Vec<f64> = rhs.values()[1..p - 1].to_vec();
                solver.solve(&mut interior);
                let out = rhs.values_mut();
                out[0] = 0.0;
                out[p - 1] = 0.0;
                out[1..p - 1].copy_from_slice(&interior);
                Ok(rhs)
            }
            ImplicitSolve::Cg { factor } => {
                let grid = self.grid;
                let factor = *factor;
                if grid.boundary() == Boundary::DirichletZero {
                    zero_faces(&mut rhs);
                }
                let apply = |x: &[f64], y: &mut [f64]| {
                    apply_helmholtz(&grid, factor, x, y);
                };
                let mut sol = rhs.values().to_vec();
                conjugate_gradient(apply, rhs.values(), &mut sol, CG_TOL, 200 * rhs.len())?;
                Field::from_values(&grid, sol)
            }
        }
    }
}

/// `y = x - factor * lap_h x` (unit-free Laplacian; factor carries h^-2).
fn apply_helmholtz(grid: &Grid, factor: f64, x: &[f64], y: &mut [f64]) {
    let d = grid.dim();
    let p = grid.points_per_axis() as i64;
    let mut idx = vec![0i64; d];
    for flat in 0..x.len() {
        let mut rem = flat;
        for ax in (0..d).rev() {
            idx[ax] = (rem % p as usize) as i64;
            rem /= p as usize;
        }
        if grid.boundary() == Boundary::DirichletZero
            && idx.iter().any(|&i| i == 0 || i == p - 1)
        {
            y[flat] = x[flat];
            continue;
        }
        let mut lap = -2.0 * d as f64 * x[flat];
        for ax in 0..d {
            for off in [-1i64, 1] {
                let mut j = idx.clone();
                j[ax] += off;
                lap += x[grid.flat_index_wrapped(&j)];
            }
        }
        y[flat] = x[flat] - factor * lap;
    }
}

/// Unit-free second-difference Laplacian (caller divides by h^2).
fn laplacian(u: &Field) -> Field {
    let grid = *u.grid();
    let d = grid.dim();
    let p = grid.points_per_axis() as i64;
    let mut out = Field::zeros(&grid);
    let mut idx = vec![0i64; d];
    for flat in 0..u.len() {
        let mut rem = flat;
        for ax in (0..d).rev() {
            idx[ax] = (rem % p as usize) as i64;
            rem /= p as usize;
        }
        let mut lap = -2.0 * d as f64 * u.values()[flat];
        for ax in 0..d {
            for off in [-1i64, 1] {
                let mut j = idx.clone();
                j[ax] += off;
                if grid.boundary() == Boundary::DirichletZero && (j[ax] < 0 || j[ax] >= p) {
                    continue; // zero boundary value contributes nothing
                }
                lap += u.values()[grid.flat_index_wrapped(&j)];
            }
        }
        out.values_mut()[flat] = lap;
    }
    out
}

fn zero_faces(f: &mut Field) {
    let grid = *f.grid();
    let p = grid.points_per_axis();
    let d = grid.dim();
    for flat in 0..f.len() {
        let mut rem = flat;
        for _ in 0..d {
            let i = rem % p;
            if i == 0 || i == p - 1 {
                f.values_mut()[flat] = 0.0;
                break;
            }
            rem /= p;
        }
    }
}

/// Largest |f'| over `|r| <= r_max`, estimated by sampled difference
/// quotients; drives the explicit-reaction step-size bound.
pub fn reaction_slope_bound(reaction: &Reaction, r_max: f64) -> f64 {
    let n = 512;
    let mut worst = 0.0f64;
    for i in 0..=n {
        let r = -r_max + 2.0 * r_max * i as f64 / n as f64;
        let delta = 1e-6 * r_max.max(1.0);
        let q = (reaction.eval(r + delta) - reaction.eval(r)) / delta;
        worst = worst.max(q.abs());
    }
    worst
}

/// One step from `u` (convenience wrapper over [`Stepper`]).
pub fn step(u: &Field, ps: &ProblemSpec, cfg: &SolverConfig) -> Result<Field> {
    Stepper::new(u.grid(), ps, cfg)?.step(u, 0.0)
}

/// Integrate to `t_final`, recording every `record_every` steps (always
/// including the initial and final states).
///
/// The step count must match `t_final` exactly (`t_final = n dt`), so
/// separately computed segments align bitwise.
pub fn solve(u0: &Field, ps: &ProblemSpec, cfg: &SolverConfig) -> Result<Trajectory> {
    if !u0.is_finite() {
        return Err(Error::InvalidProblem("initial state is not finite".into()));
    }
    cfg.validate()?;
    let n_steps = (cfg.t_final / cfg.dt).round() as u64;
    if (n_steps as f64 * cfg.dt - cfg.t_final).abs() > 1e-9 * cfg.t_final.max(1.0) {
        return Err(Error::InvalidSolverConfig(format!(
            "t_final = {} is not a whole number of steps of dt = {}",
            cfg.t_final, cfg.dt
        )));
    }

    // explicit-reaction step bound, estimated over a margin around the data
    let r_max = 2.0 * u0.max_abs() + 1.0;
    let slope = reaction_slope_bound(&ps.reaction, r_max);
    if slope > 0.0 && cfg.dt > 0.5 / slope {
        return Err(Error::InvalidSolverConfig(format!(
            "dt = {} exceeds the explicit-reaction bound 0.5/max|f'| = {:.3e} \
             (|f'| sampled over |r| <= {r_max:.2})",
            cfg.dt,
            0.5 / slope
        )));
    }
    if cfg.scheme == Scheme::FullyExplicit {
        let h = u0.grid().spacing();
        let bound = h * h / (2.0 * u0.grid().dim() as f64 * ps.flux.lipschitz());
        if cfg.dt > bound {
            return Err(Error::InvalidSolverConfig(format!(
                "dt = {} exceeds the explicit diffusion bound h^2/(2 d c kappa) = {bound:.3e}",
                cfg.dt
            )));
        }
    }

    let mut stepper = Stepper::new(u0.grid(), ps, cfg)?;
    let mut times = vec![0.0];
    let mut snaps = vec![u0.clone()];
    let mut u = u0.clone();
    for step_idx in 1..=n_steps {
        let t_prev = (step_idx - 1) as f64 * cfg.dt;
        u = stepper.step(&u, t_prev)?;
        if step_idx % cfg.record_every as u64 == 0 || step_idx == n_steps {
            times.push(step_idx as f64 * cfg.dt);
            snaps.push(u.clone());
        }
    }
    if stepper.clamp_events > 0 {
        log::warn!(
            "gradient clamp engaged {} times during integration",
            stepper.clamp_events
        );
    }
    Ok(Trajectory::from_snapshots(times, snaps)?.with_meta(TrajectoryMeta {
        problem_digest: ps.digest(),
        solver: *cfg,
    }))
}

// ---------------------------------------------------------------------------
// hypothesis verification
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct HypothesisCheckConfig {
    pub samples: usize,
    pub range: f64,
    pub seed: u64,
}

impl Default for HypothesisCheckConfig {
    fn default() -> Self {
        HypothesisCheckConfig {
            samples: 4000,
            range: 10.0,
            seed: 0x5eed,
        }
    }
}

/// Outcome of one structural inequality: worst slack over the samples
/// (non-positive means the declared constant is honored) and the measured
/// best constant for that inequality.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct HypothesisReport {
    pub name: String,
    pub worst_slack: f64,
    pub measured: f64,
    pub pass: bool,
}

fn report(name: &str, worst_slack: f64, measured: f64) -> HypothesisReport {
    HypothesisReport {
        name: name.to_string(),
        worst_slack,
        measured,
        pass: worst_slack <= 1e-9,
    }
}

/// Randomized verification of the structural hypotheses on `(a, f, h, g)`
/// against the declared constants. Diagnostic: failures are reported, not
/// raised.
pub fn verify_hypotheses(
    ps: &ProblemSpec,
    grid: Option<&Grid>,
    cfg: &HypothesisCheckConfig,
) -> Vec<HypothesisReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let d = grid.map(|g| g.dim()).unwrap_or(1);
    let range = cfg.range;
    let n = cfg.samples.max(1);
    let kappa = ps.flux.kappa();
    let ckappa = ps.flux.lipschitz();
    let rc = ps.reaction.constants();
    let mut out = Vec::new();

    // a(0) = 0
    {
        let mut a0 = [0.0f64; 3];
        ps.flux.eval(&[0.0; 3][..d], &mut a0[..d]);
        let v = util::norm(&a0[..d]);
        out.push(report("a-zero", v - 1e-12, v));
    }

    // monotonicity and Lipschitz bounds of a; deterministic large-gradient
    // probes catch degeneracy that uniform sampling misses
    {
        let mut min_quot = f64::INFINITY;
        let mut max_quot: f64 = 0.0;
        let mut probe = |xi: &[f64], eta: &[f64]| {
            let mut a_xi = [0.0f64; 3];
            let mut a_eta = [0.0f64; 3];
            ps.flux.eval(xi, &mut a_xi[..d]);
            ps.flux.eval(eta, &mut a_eta[..d]);
            let mut dot = 0.0;
            let mut diff2 = 0.0;
            let mut adiff2 = 0.0;
            for ax in 0..d {
                let dx = xi[ax] - eta[ax];
                let da = a_xi[ax] - a_eta[ax];
                dot += da * dx;
                diff2 += dx * dx;
                adiff2 += da * da;
            }
            if diff2 > 0.0 {
                min_quot = min_quot.min(dot / diff2);
                max_quot = max_quot.max((adiff2 / diff2).sqrt());
            }
        };
        for _ in 0..n {
            let xi: Vec<f64> = (0..d).map(|_| rng.gen_range(-range..range)).collect();
            let eta: Vec<f64> = (0..d).map(|_| rng.gen_range(-range..range)).collect();
            probe(&xi, &eta);
        }
        for mag in [1e2, 1e3] {
            let xi = vec![mag; d];
            let mut eta = vec![mag; d];
            eta[0] += 1.0;
            probe(&xi, &eta);
        }
        out.push(report("a-monotone", kappa - min_quot, min_quot));
        out.push(report("a-lipschitz", max_quot - ckappa, max_quot));
    }

    // midpoint convexity of xi -> a(xi) . xi
    {
        let phi = |xi: &[f64]| -> f64 {
            let mut a = [0.0f64; 3];
            ps.flux.eval(xi, &mut a[..d]);
            a[..d].iter().zip(xi).map(|(ai, xii)| ai * xii).sum()
        };
        let mut worst = f64::NEG_INFINITY;
        for _ in 0..n {
            let xi: Vec<f64> = (0..d).map(|_| rng.gen_range(-range..range)).collect();
            let eta: Vec<f64> = (0..d).map(|_| rng.gen_range(-range..range)).collect();
            let mid: Vec<f64> = xi.iter().zip(&eta).map(|(a, b)| 0.5 * (a + b)).collect();
            worst = worst.max(phi(&mid) - 0.5 * (phi(&xi) + phi(&eta)));
        }
        out.push(report("a-convex", worst, worst));
    }

    // f(0) = 0
    {
        let v = ps.reaction.eval(0.0).abs();
        out.push(report("f-zero", v - 1e-12, v));
    }

    // reaction inequalities; probes near the diagonal and at the origin
    // pin down the sharp semi-monotonicity constant
    {
        let mut lip_quot: f64 = 0.0;
        let mut semi_min = f64::INFINITY;
        let mut lower_worst = f64::NEG_INFINITY;
        let mut upper_worst = f64::NEG_INFINITY;
        let mut pair = |r: f64, s: f64| {
            if r == s {
                return;
            }
            let df = ps.reaction.eval(r) - ps.reaction.eval(s);
            let q = df / (r - s);
            semi_min = semi_min.min(q);
            let scale = (1.0 + r.abs() + s.abs()).powf(rc.p - 2.0);
            lip_quot = lip_quot.max(q.abs() / scale);
        };
        for _ in 0..n {
            let r = rng.gen_range(-range..range);
            let s = rng.gen_range(-range..range);
            pair(r, s);
            let fr = ps.reaction.eval(r) * r;
            lower_worst = lower_worst.max(rc.lower_coeff * r.abs().powf(rc.p) - rc.lower_offset - fr);
            upper_worst = upper_worst.max(fr - rc.upper_coeff * (r.abs().powf(rc.p) + 1.0));
        }
        for t in [-1.0f64, -0.1, 0.0, 0.1, 1.0] {
            pair(t, t + 1e-6);
        }
        out.push(report("f-local-lipschitz", lip_quot - rc.local_lipschitz, lip_quot));
        out.push(report(
            "f-semimonotone",
            -rc.semi_monotonicity - semi_min,
            -semi_min, // measured best C
        ));
        out.push(report("f-lower-growth", lower_worst, lower_worst));
        out.push(report("f-upper-growth", upper_worst, upper_worst));
    }

    // convection
    {
        let half = grid.map(|g| g.half_width()).unwrap_or(range);
        let lh = ps.convection.lipschitz();
        let mut max_quot: f64 = 0.0;
        let mut h0: f64 = 0.0;
        for _ in 0..n {
            let x: Vec<f64> = (0..d).map(|_| rng.gen_range(-half..half)).collect();
            let xi: Vec<f64> = (0..d).map(|_| rng.gen_range(-range..range)).collect();
            let eta: Vec<f64> = (0..d).map(|_| rng.gen_range(-range..range)).collect();
            let dh = (ps.convection.eval(&x, &xi) - ps.convection.eval(&x, &eta)).abs();
            let dd = util::dist(&xi, &eta);
            if dd > 0.0 {
                max_quot = max_quot.max(dh / dd);
            }
            h0 = h0.max(ps.convection.eval(&x, &vec![0.0; d]).abs());
        }
        out.push(report("h-lipschitz", max_quot - lh, max_quot));
        out.push(report("h-zero-bounded", h0 - 1e-12, h0));
    }

    // forcing in the uniformly-local L2 space
    {
        let value = match (&ps.forcing, grid) {
            (Forcing::Zero, _) => 0.0,
            (Forcing::Static(g), _) => norms::field_norm(
                g,
                &NormSpec::new(NormFamily::LpB { p: 2.0 }, Weight::constant()),
            )
            .unwrap_or(f64::NAN),
            (Forcing::TimeVarying(_), _) => f64::NAN,
        };
        let slack = if value.is_finite() { -1.0 } else { 1.0 };
        out.push(report("g-uniformly-l2", slack, value));
    }

    out
}

// ---------------------------------------------------------------------------
// weak-form residual and norm monitoring
// ---------------------------------------------------------------------------

/// Space-time residual of the expanded weak form against a sampled test
/// function, using the exponential weight centered at `xbar`.
///
/// The time derivative is a difference quotient per interval and all other
/// terms are evaluated at the interval midpoint, so an exact solution gives
/// a residual of the order of the discretization error.
pub fn weak_residual(
    traj: &Trajectory,
    ps: &ProblemSpec,
    xbar: &[f64],
    test_fn: &Trajectory,
) -> Result<f64> {
    Ok(weak_residual_signed(traj, ps, xbar, test_fn)?.abs())
}

/// Signed version of [`weak_residual`]; linear in the test function.
pub fn weak_residual_signed(
    traj: &Trajectory,
    ps: &ProblemSpec,
    xbar: &[f64],
    test_fn: &Trajectory,
) -> Result<f64> {
    traj.check_aligned(test_fn)?;
    if traj.len() < 2 {
        return Err(Error::InvalidTrajectory(
            "need at least two snapshots for a residual".into(),
        ));
    }
    let grid = traj.grid();
    let d = grid.dim();
    let axes: Vec<crate::norms::quadrature::AxisNodes> =
        (0..d).map(|_| crate::norms::quadrature::axis_nodes_box(grid)).collect();

    let mut total = 0.0;
    for i in 1..traj.len() {
        let dt = traj.times()[i] - traj.times()[i - 1];
        let t_mid = 0.5 * (traj.times()[i] + traj.times()[i - 1]);
        let u_mid = traj.snapshot(i - 1).add(traj.snapshot(i)).scale(0.5);
        let ut = traj.snapshot(i).sub(traj.snapshot(i - 1)).scale(1.0 / dt);
        let v_mid = test_fn.snapshot(i - 1).add(test_fn.snapshot(i)).scale(0.5);
        let grad_u = u_mid.gradient();
        let grad_v = v_mid.gradient();

        let um = u_mid.values();
        let utv = ut.values();
        let vm = v_mid.values();
        let mut a_of = [0.0f64; 3];
        let mut xi = [0.0f64; 3];
        let integral = crate::norms::quadrature::integrate(grid, &axes, |flat, x| {
            let mut dist2 = 0.0;
            for (xa, xb) in x.iter().zip(xbar) {
                dist2 += (xa - xb) * (xa - xb);
            }
            let dist = dist2.sqrt();
            let w = (-dist).exp();

            for ax in 0..d {
                xi[ax] = grad_u[ax].values()[flat];
            }
            ps.flux.eval(&xi[..d], &mut a_of[..d]);

            // a(grad u) . (grad v - v (x - xbar)/|x - xbar|)
            let mut flux_term = 0.0;
            for ax in 0..d {
                let drift = if dist > 0.0 { (x[ax] - xbar[ax]) / dist } else { 0.0 };
                flux_term += a_of[ax] * (grad_v[ax].values()[flat] - vm[flat] * drift);
            }

            let g = match &ps.forcing {
                Forcing::Zero => 0.0,
                Forcing::Static(gf) => gf.values()[flat],
                Forcing::TimeVarying(f) => (f.0)(x, t_mid),
            };
            let zero_order = (ps.reaction.eval(um[flat])
                + ps.convection.eval(x, &xi[..d])
                - g)
                * vm[flat];

            (utv[flat] * vm[flat] + flux_term + zero_order) * w
        });
        total += dt * integral;
    }
    Ok(total)
}

/// Time series and post-transient suprema of uniformly-local Lq norms.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LqMonitorReport {
    pub q: f64,
    pub times: Vec<f64>,
    pub series: Vec<f64>,
    pub post_transient_sup: f64,
    pub upward_drift: bool,
}

/// Evaluate `||u(t)||_{L^q_b}` along the trajectory for each exponent and
/// flag upward drift after the transient third.
pub fn monitor_lq_norms(traj: &Trajectory, q_list: &[f64]) -> Result<Vec<LqMonitorReport>> {
    let tiling = CubeTiling::build(traj.grid())?;
    let mut out = Vec::with_capacity(q_list.len());
    for &q in q_list {
        let spec = NormSpec::new(NormFamily::LpB { p: q }, Weight::constant());
        let series: Vec<f64> = traj
            .snapshots()
            .iter()
            .map(|s| norms::field_norm_with(&tiling, s, &spec))
            .collect::<Result<_>>()?;
        let n = series.len();
        let start = n / 3;
        let post = &series[start..];
        let post_sup = post.iter().copied().fold(0.0f64, f64::max);
        let mid_third = &series[start..start + post.len() / 2];
        let last_third = &series[start + post.len() / 2..];
        let mid_sup = mid_third.iter().copied().fold(0.0f64, f64::max);
        let last_sup = last_third.iter().copied().fold(0.0f64, f64::max);
        out.push(LqMonitorReport {
            q,
            times: traj.times().to_vec(),
            series,
            post_transient_sup: post_sup,
            upward_drift: last_sup > mid_sup * 1.05 + 1e-9,
        });
    }
    Ok(out)
}
