//! Admissible weight functions with controlled exponential growth.
//!
//! A weight `phi` of growth rate `mu >= 0` and constant `c >= 1` satisfies
//! `c^-1 e^{-mu|x-y|} <= phi(x)/phi(y) <= c e^{mu|x-y|}` together with the
//! gradient bound `|grad phi| <= phi` almost everywhere. Only bounded
//! (non-growing) weights are admitted.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::util;

/// Closed-form description of a weight; `Weight` carries the derived
/// growth-rate data. Composites take the pointwise min or max.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum WeightKind {
    Constant,
    Exponential { center: Vec<f64>, rate: f64 },
    Localized { center: Vec<f64>, radius: f64 },
    Min { a: Box<WeightKind>, b: Box<WeightKind> },
    Max { a: Box<WeightKind>, b: Box<WeightKind> },
}

/// An admissible weight with its declared growth rate and constant.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "WeightKind", into = "WeightKind")]
pub struct Weight {
    kind: WeightKind,
    mu: f64,
    growth_constant: f64,
}

impl TryFrom<WeightKind> for Weight {
    type Error = Error;
    fn try_from(kind: WeightKind) -> Result<Self> {
        Weight::from_kind(kind)
    }
}

impl From<Weight> for WeightKind {
    fn from(w: Weight) -> WeightKind {
        w.kind
    }
}

impl Weight {
    /// The constant weight 1 (growth rate 0).
    pub fn constant() -> Weight {
        Weight {
            kind: WeightKind::Constant,
            mu: 0.0,
            growth_constant: 1.0,
        }
    }

    /// `phi(x) = e^{m |x - center|}` with `m` in `[-1, 0]`.
    ///
    /// Positive rates are rejected: growing weights are unbounded, and
    /// rates below -1 violate the gradient bound.
    pub fn exponential(center: Vec<f64>, rate: f64) -> Result<Weight> {
        if !(-1.0..=0.0).contains(&rate) {
            return Err(Error::InvalidWeight(format!(
                "exponential rate must lie in [-1, 0], got {rate}"
            )));
        }
        Ok(Weight {
            mu: rate.abs(),
            growth_constant: 1.0,
            kind: WeightKind::Exponential { center, rate },
        })
    }

    /// Exponential weight without rate validation. Only useful to feed the
    /// admissibility checker deliberately bad inputs.
    pub fn exponential_raw(center: Vec<f64>, rate: f64) -> Weight {
        Weight {
            mu: rate.abs(),
            growth_constant: 1.0,
            kind: WeightKind::Exponential { center, rate },
        }
    }

    /// Localized cut-off weight: 1 on the ball of radius `R + sqrt(d)`
    /// around `x0`, decaying like `e^{-(|x-x0| - R - sqrt(d))/2}` outside.
    /// Growth rate 1/2 with constant 1, for every `x0` and `R >= 1`.
    pub fn localized(center: Vec<f64>, radius: f64) -> Result<Weight> {
        if !(radius >= 1.0) {
            return Err(Error::InvalidWeight(format!(
                "localization radius must satisfy R >= 1, got {radius}"
            )));
        }
        Ok(Weight {
            mu: 0.5,
            growth_constant: 1.0,
            kind: WeightKind::Localized { center, radius },
        })
    }

    /// Pointwise minimum; growth rate is the larger of the two.
    pub fn min(a: Weight, b: Weight) -> Weight {
        Weight {
            mu: a.mu.max(b.mu),
            growth_constant: a.growth_constant.max(b.growth_constant),
            kind: WeightKind::Min {
                a: Box::new(a.kind),
                b: Box::new(b.kind),
            },
        }
    }

    /// Pointwise maximum; growth rate is the larger of the two.
    pub fn max(a: Weight, b: Weight) -> Weight {
        Weight {
            mu: a.mu.max(b.mu),
            growth_constant: a.growth_constant.max(b.growth_constant),
            kind: WeightKind::Max {
                a: Box::new(a.kind),
                b: Box::new(b.kind),
            },
        }
    }

    /// Rebuild a weight from its closed-form description, validating it.
    pub fn from_kind(kind: WeightKind) -> Result<Weight> {
        match kind {
            WeightKind::Constant => Ok(Weight::constant()),
            WeightKind::Exponential { center, rate } => Weight::exponential(center, rate),
            WeightKind::Localized { center, radius } => Weight::localized(center, radius),
            WeightKind::Min { a, b } => Ok(Weight::min(Weight::from_kind(*a)?, Weight::from_kind(*b)?)),
            WeightKind::Max { a, b } => Ok(Weight::max(Weight::from_kind(*a)?, Weight::from_kind(*b)?)),
        }
    }

    pub fn kind(&self) -> &WeightKind {
        &self.kind
    }

    /// Declared growth rate.
    pub fn mu(&self) -> f64 {
        self.mu
    }

    /// Declared growth constant `c >= 1`.
    pub fn growth_constant(&self) -> f64 {
        self.growth_constant
    }

    pub fn evaluate(&self, x: &[f64]) -> f64 {
        eval_kind(&self.kind, x)
    }

    /// Check both admissibility inequalities on a grid.
    ///
    /// The growth inequality is sampled on `samples` random point pairs in
    /// the box; the gradient bound is checked at every grid node with
    /// centered differences of step `h`. Worst slacks are returned; values
    /// at or below the report's tolerances mean the weight passed.
    pub fn check_admissibility(
        &self,
        grid: &Grid,
        samples: usize,
        seed: u64,
    ) -> AdmissibilityReport {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = grid.dim();
        let half = grid.half_width();
        let log_c = self.growth_constant.ln();

        let mut max_ratio_violation = f64::NEG_INFINITY;
        for _ in 0..samples.max(1) {
            let x: Vec<f64> = (0..d).map(|_| rng.gen_range(-half..half)).collect();
            let y: Vec<f64> = (0..d).map(|_| rng.gen_range(-half..half)).collect();
            let lr = self.evaluate(&x).ln() - self.evaluate(&y).ln();
            let slack = lr.abs() - (log_c + self.mu * util::dist(&x, &y));
            max_ratio_violation = max_ratio_violation.max(slack);
        }

        // centered-difference gradient overshoots near cone points by O(h)
        let h = grid.spacing();
        let mut max_gradient_violation = f64::NEG_INFINITY;
        for flat in 0..grid.num_points() {
            let x = grid.coords_of(flat);
            let mut grad2 = 0.0;
            for ax in 0..d {
                let mut xp = x.clone();
                xp[ax] += h;
                let mut xm = x.clone();
                xm[ax] -= h;
                let g = (self.evaluate(&xp) - self.evaluate(&xm)) / (2.0 * h);
                grad2 += g * g;
            }
            let slack = grad2.sqrt() - self.evaluate(&x);
            max_gradient_violation = max_gradient_violation.max(slack);
        }

        AdmissibilityReport {
            max_ratio_violation,
            max_gradient_violation,
            ratio_tolerance: 1e-9,
            gradient_tolerance: 10.0 * h,
            samples,
            seed,
        }
    }
}

fn eval_kind(kind: &WeightKind, x: &[f64]) -> f64 {
    match kind {
        WeightKind::Constant => 1.0,
        WeightKind::Exponential { center, rate } => {
            debug_assert_eq!(center.len(), x.len());
            (rate * util::dist(x, center)).exp()
        }
        WeightKind::Localized { center, radius } => {
            debug_assert_eq!(center.len(), x.len());
            let plateau = radius + (center.len() as f64).sqrt();
            let r = util::dist(x, center);
            if r <= plateau {
                1.0
            } else {
                ((plateau - r) / 2.0).exp()
            }
        }
        WeightKind::Min { a, b } => eval_kind(a, x).min(eval_kind(b, x)),
        WeightKind::Max { a, b } => eval_kind(a, x).max(eval_kind(b, x)),
    }
}

/// Worst slacks of the two admissibility inequalities; non-positive slack
/// (up to the stated tolerance) means the inequality holds on the samples.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AdmissibilityReport {
    pub max_ratio_violation: f64,
    pub max_gradient_violation: f64,
    pub ratio_tolerance: f64,
    pub gradient_tolerance: f64,
    pub samples: usize,
    pub seed: u64,
}

impl AdmissibilityReport {
    pub fn passed(&self) -> bool {
        self.max_ratio_violation <= self.ratio_tolerance
            && self.max_gradient_violation <= self.gradient_tolerance
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Boundary;
    use approx::assert_relative_eq;

    fn grid_1d() -> Grid {
        Grid::new(1, 8.0, 0.0625, Boundary::Periodic).unwrap()
    }

    #[test]
    fn exponential_values() {
        let w = Weight::exponential(vec![0.0], -0.5).unwrap();
        assert_eq!(w.evaluate(&[0.0]), 1.0);
        assert_relative_eq!(w.evaluate(&[2.0]), (-1.0f64).exp(), max_relative = 1e-14);
        assert_eq!(w.mu(), 0.5);
        assert_eq!(w.growth_constant(), 1.0);
    }

    #[test]
    fn zero_rate_is_the_constant_weight() {
        let w = Weight::exponential(vec![1.0], 0.0).unwrap();
        for x in [-3.0, 0.0, 2.5] {
            assert_eq!(w.evaluate(&[x]), 1.0);
        }
    }

    #[test]
    fn rates_outside_range_are_rejected() {
        assert!(Weight::exponential(vec![0.0], -1.5).is_err());
        assert!(Weight::exponential(vec![0.0], 0.25).is_err());
    }

    #[test]
    fn localized_branch_values() {
        let r = 2.0;
        let w = Weight::localized(vec![0.0], r).unwrap();
        let plateau = r + 1.0; // sqrt(1) in d = 1
        assert_eq!(w.evaluate(&[0.0]), 1.0);
        assert_eq!(w.evaluate(&[plateau]), 1.0);
        assert_relative_eq!(
            w.evaluate(&[plateau + 2.0]),
            (-1.0f64).exp(),
            max_relative = 1e-14
        );
        assert_eq!(w.mu(), 0.5);
        assert!(Weight::localized(vec![0.0], 0.5).is_err());
    }

    #[test]
    fn shipped_families_pass_admissibility() {
        let grid = grid_1d();
        for w in [
            Weight::constant(),
            Weight::exponential(vec![0.0], -0.5).unwrap(),
            Weight::exponential(vec![1.5], -1.0).unwrap(),
            Weight::localized(vec![0.0], 2.0).unwrap(),
        ] {
            let rep = w.check_admissibility(&grid, 500, 7);
            assert!(rep.passed(), "{:?} failed: {rep:?}", w.kind());
        }
    }

    #[test]
    fn min_max_composites_are_admissible_with_max_rate() {
        let grid = grid_1d();
        let a = Weight::exponential(vec![-1.0], -0.25).unwrap();
        let b = Weight::localized(vec![1.0], 1.0).unwrap();
        let lo = Weight::min(a.clone(), b.clone());
        let hi = Weight::max(a, b);
        assert_eq!(lo.mu(), 0.5);
        assert_eq!(hi.mu(), 0.5);
        assert!(lo.check_admissibility(&grid, 500, 11).passed());
        assert!(hi.check_admissibility(&grid, 500, 11).passed());
    }

    #[test]
    fn steep_exponential_fails_the_gradient_bound() {
        // |grad e^{-2|x|}| = 2 e^{-2|x|} > e^{-2|x|}
        let grid = grid_1d();
        let w = Weight::exponential_raw(vec![0.0], -2.0);
        let rep = w.check_admissibility(&grid, 500, 13);
        assert!(rep.max_gradient_violation > rep.gradient_tolerance);
    }

    #[test]
    fn weight_serialization_round_trip() {
        let w = Weight::localized(vec![0.5, -0.5], 4.0).unwrap();
        let json = serde_json::to_string(&w).unwrap();
        let back: Weight = serde_json::from_str(&json).unwrap();
        assert_eq!(w, back);
        assert!(json.contains("\"kind\":\"localized\""));
    }

    #[test]
    fn deserialization_validates() {
        let bad = r#"{"kind":"exponential","center":[0.0],"rate":0.5}"#;
        assert!(serde_json::from_str::<Weight>(bad).is_err());
    }
}
