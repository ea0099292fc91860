//! Time-sampled solution segments ("short trajectories").

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::Field;
use crate::grid::Grid;
use crate::pde::SolverConfig;

/// Provenance attached to solver-produced trajectories.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryMeta {
    pub problem_digest: String,
    pub solver: SolverConfig,
}

/// An ordered sequence of `(t, field)` snapshots on a common grid.
///
/// A trajectory representing an element of the short-trajectory space spans
/// exactly `[t_start, t_start + ell]` with strictly increasing times.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    times: Vec<f64>,
    snapshots: Vec<Field>,
    meta: Option<TrajectoryMeta>,
}

impl Trajectory {
    pub fn from_snapshots(times: Vec<f64>, snapshots: Vec<Field>) -> Result<Self> {
        if times.is_empty() || times.len() != snapshots.len() {
            return Err(Error::InvalidTrajectory(
                "need equally many times and snapshots, at least one".into(),
            ));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidTrajectory(
                "times must be strictly increasing".into(),
            ));
        }
        let grid = *snapshots[0].grid();
        if snapshots.iter().any(|s| *s.grid() != grid) {
            return Err(Error::InvalidTrajectory(
                "snapshots live on different grids".into(),
            ));
        }
        Ok(Trajectory {
            times,
            snapshots,
            meta: None,
        })
    }

    pub fn with_meta(mut self, meta: TrajectoryMeta) -> Self {
        self.meta = Some(meta);
        self
    }

    pub fn meta(&self) -> Option<&TrajectoryMeta> {
        self.meta.as_ref()
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn snapshot(&self, i: usize) -> &Field {
        &self.snapshots[i]
    }

    pub fn snapshots(&self) -> &[Field] {
        &self.snapshots
    }

    pub fn grid(&self) -> &Grid {
        self.snapshots[0].grid()
    }

    pub fn t_start(&self) -> f64 {
        self.times[0]
    }

    pub fn t_end(&self) -> f64 {
        *self.times.last().unwrap()
    }

    /// Trajectory length in time units.
    pub fn ell(&self) -> f64 {
        self.t_end() - self.t_start()
    }

    /// Last snapshot (the endpoint map on short trajectories).
    pub fn endpoint(&self) -> &Field {
        self.snapshots.last().unwrap()
    }

    /// Pointwise difference, requiring aligned time samples.
    pub fn sub(&self, other: &Trajectory) -> Result<Trajectory> {
        self.check_aligned(other)?;
        let snapshots = self
            .snapshots
            .iter()
            .zip(&other.snapshots)
            .map(|(a, b)| a.sub(b))
            .collect();
        Ok(Trajectory {
            times: self.times.clone(),
            snapshots,
            meta: None,
        })
    }

    pub fn scale(&self, factor: f64) -> Trajectory {
        Trajectory {
            times: self.times.clone(),
            snapshots: self.snapshots.iter().map(|s| s.scale(factor)).collect(),
            meta: None,
        }
    }

    /// Relative time offsets within the sampling window are considered
    /// aligned when they agree to 1e-9 absolutely.
    pub fn check_aligned(&self, other: &Trajectory) -> Result<()> {
        if self.len() != other.len() {
            return Err(Error::Incompatible(format!(
                "trajectories have {} vs {} snapshots",
                self.len(),
                other.len()
            )));
        }
        if self.grid() != other.grid() {
            return Err(Error::Incompatible(
                "trajectories live on different grids".into(),
            ));
        }
        for (a, b) in self.times.iter().zip(&other.times) {
            if ((a - self.t_start()) - (b - other.t_start())).abs() > 1e-9 {
                return Err(Error::Incompatible(
                    "trajectory time samples are not aligned".into(),
                ));
            }
        }
        Ok(())
    }

    /// Shift all sample times so the trajectory starts at `t0`.
    pub fn rebased(&self, t0: f64) -> Trajectory {
        let shift = t0 - self.t_start();
        Trajectory {
            times: self.times.iter().map(|t| t + shift).collect(),
            snapshots: self.snapshots.clone(),
            meta: self.meta.clone(),
        }
    }

    /// Backward-difference quotients of consecutive snapshots; one sample
    /// fewer than the input, carrying the right endpoint times.
    pub fn time_differences(&self) -> Result<Trajectory> {
        if self.len() < 2 {
            return Err(Error::InvalidTrajectory(
                "need at least two snapshots to difference in time".into(),
            ));
        }
        let mut times = Vec::with_capacity(self.len() - 1);
        let mut snaps = Vec::with_capacity(self.len() - 1);
        for i in 1..self.len() {
            let dt = self.times[i] - self.times[i - 1];
            times.push(self.times[i]);
            snaps.push(self.snapshots[i].sub(&self.snapshots[i - 1]).scale(1.0 / dt));
        }
        Trajectory::from_snapshots(times, snaps)
    }

    /// Trapezoidal integral over time of a per-snapshot quantity.
    pub fn time_integral(&self, per_snapshot: impl Fn(usize) -> f64) -> f64 {
        if self.len() < 2 {
            return 0.0;
        }
        let mut acc = 0.0;
        for i in 1..self.len() {
            let dt = self.times[i] - self.times[i - 1];
            acc += 0.5 * dt * (per_snapshot(i - 1) + per_snapshot(i));
        }
        acc
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Boundary;

    fn grid() -> Grid {
        Grid::new(1, 2.0, 0.25, Boundary::Periodic).unwrap()
    }

    #[test]
    fn rejects_nonincreasing_times() {
        let g = grid();
        let f = Field::zeros(&g);
        assert!(Trajectory::from_snapshots(vec![0.0, 0.0], vec![f.clone(), f]).is_err());
    }

    #[test]
    fn time_integral_of_constant() {
        let g = grid();
        let times = vec![0.0, 0.25, 0.5, 0.75, 1.0];
        let snaps = vec![Field::constant(&g, 2.0); 5];
        let traj = Trajectory::from_snapshots(times, snaps).unwrap();
        let v = traj.time_integral(|_| 3.0);
        assert!((v - 3.0).abs() < 1e-14);
        assert_eq!(traj.ell(), 1.0);
    }

    #[test]
    fn difference_quotients_recover_linear_growth() {
        let g = grid();
        let times = vec![0.0, 0.5, 1.0];
        let snaps = (0..3).map(|i| Field::constant(&g, i as f64)).collect();
        let traj = Trajectory::from_snapshots(times, snaps).unwrap();
        let dv = traj.time_differences().unwrap();
        assert_eq!(dv.len(), 2);
        for s in dv.snapshots() {
            assert!(s.values().iter().all(|v| (v - 2.0).abs() < 1e-13));
        }
    }
}
