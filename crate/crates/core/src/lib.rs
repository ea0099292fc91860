//! Numerical laboratory for reaction-diffusion dynamics on large truncated
//! boxes, built around uniformly-local weighted function-space machinery.
//!
//! The crate provides:
//!
//! - admissible weight functions with controlled exponential growth
//!   ([`weights`]),
//! - truncated-box grids, the overlapping unit-cube tiling on the
//!   half-integer lattice, and discrete differential operators ([`grid`]),
//! - uniformly-local weighted norms in cube-sup and weighted-integral form,
//!   Sobolev and dual variants, and their trajectory-space analogues
//!   ([`norms`]),
//! - an IMEX integrator for `du/dt - div a(grad u) + f(u) + h(x, grad u) = g`
//!   together with structural-hypothesis verification and weak-form residual
//!   checks ([`pde`]),
//! - the solution semigroup, short-trajectory operators, dissipation /
//!   contraction / smoothing constant estimation, and attractor sampling
//!   ([`dynamics`]),
//! - epsilon-net covering, Kolmogorov entropy measurement, tail localization
//!   and entropy-scaling experiments ([`entropy`]).

pub mod dynamics;
pub mod entropy;
pub mod error;
pub mod field;
pub mod grid;
pub mod io;
pub mod linalg;
pub mod norms;
pub mod pde;
pub mod sampling;
pub mod trajectory;
pub(crate) mod util;
pub mod weights;

pub use error::{Error, Result};
pub use field::Field;
pub use grid::{Ball, Boundary, CubeTiling, Grid};
pub use norms::{NormFamily, NormSpec};
pub use pde::{ProblemSpec, SolverConfig};
pub use trajectory::Trajectory;
pub use weights::Weight;
