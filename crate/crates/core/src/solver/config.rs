use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// When a differential-evolution run stops.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Termination {
    /// Stop after `ngen` consecutive generations whose best value improved
    /// by less than `tol`.
    ChangeOverGenerations { tol: f64, ngen: usize },
    /// Stop as soon as a feasible candidate reaches `target`.
    ValueToReach { target: f64 },
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    #[default]
    Maximize,
    Minimize,
}

impl Direction {
    /// True when `a` is strictly better than `b`.
    #[inline]
    pub fn better(self, a: f64, b: f64) -> bool {
        match self {
            Direction::Maximize => a > b,
            Direction::Minimize => a < b,
        }
    }

    /// Improvement of `a` over `b`, positive when `a` is better.
    #[inline]
    pub fn gain(self, a: f64, b: f64) -> f64 {
        match self {
            Direction::Maximize => a - b,
            Direction::Minimize => b - a,
        }
    }

    pub fn worst(self) -> f64 {
        match self {
            Direction::Maximize => f64::NEG_INFINITY,
            Direction::Minimize => f64::INFINITY,
        }
    }
}

/// Forced-failure policy for probability solves.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ForcedFailure {
    /// On for `K = 1` upper-bound solves, off otherwise.
    #[default]
    Auto,
    On,
    Off,
}

/// Hyperparameters of the two-loop optimizer.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub outer_npop: usize,
    pub outer_ngen: usize,
    pub outer_tol: f64,
    pub inner_npop: usize,
    pub inner_tol: f64,
    pub inner_budget: usize,
    pub short_tol: f64,
    pub mean_tol: f64,
    pub seed: u64,
    pub de_weight: f64,
    pub de_crossover: f64,
    /// Hard cap on outer generations.
    pub max_generations: usize,
    /// Independent runs before a problem is declared infeasible.
    pub restarts: usize,
    /// Let the inner loop move cube positions as well as values.
    pub joint_inner: bool,
    pub forced_failure: ForcedFailure,
    /// Pattern-search refinement of the best DE member.
    pub polish: bool,
    /// Push values and weights of every feasible candidate to the best
    /// extremes its positions allow.
    pub complete: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            outer_npop: 32,
            outer_ngen: 100,
            outer_tol: 1e-6,
            inner_npop: 40,
            inner_tol: 1e-9,
            inner_budget: 1000,
            short_tol: 1e-6,
            mean_tol: 1e-9,
            seed: 0,
            de_weight: 0.8,
            de_crossover: 0.9,
            max_generations: 3000,
            restarts: 3,
            joint_inner: false,
            forced_failure: ForcedFailure::Auto,
            polish: true,
            complete: true,
        }
    }
}

impl SolverConfig {
    pub fn with_seed(seed: u64) -> Self {
        Self {
            seed,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidInput(msg));
        if self.outer_npop < 4 || self.inner_npop < 4 {
            return bad(format!(
                "populations must be at least 4 (outer {}, inner {})",
                self.outer_npop, self.inner_npop
            ));
        }
        if !(self.de_weight > 0.0 && self.de_weight < 2.0) {
            return bad(format!(
                "de_weight must lie in (0, 2), got {}",
                self.de_weight
            ));
        }
        if !(0.0..=1.0).contains(&self.de_crossover) {
            return bad(format!(
                "de_crossover must lie in [0, 1], got {}",
                self.de_crossover
            ));
        }
        for (name, v) in [
            ("outer_tol", self.outer_tol),
            ("inner_tol", self.inner_tol),
            ("short_tol", self.short_tol),
            ("mean_tol", self.mean_tol),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return bad(format!("{name} must be finite and non-negative, got {v}"));
            }
        }
        if self.outer_ngen == 0 || self.max_generations == 0 || self.restarts == 0 {
            return bad("outer_ngen, max_generations and restarts must be positive".into());
        }
        Ok(())
    }

    pub fn outer_termination(&self) -> Termination {
        Termination::ChangeOverGenerations {
            tol: self.outer_tol,
            ngen: self.outer_ngen,
        }
    }

    pub fn inner_termination(&self) -> Termination {
        Termination::ValueToReach {
            target: self.inner_tol,
        }
    }

    /// Seed of restart `r`, derived from the master seed.
    pub fn restart_seed(&self, r: usize) -> u64 {
        if r == 0 {
            self.seed
        } else {
            super::mix_seed(self.seed, 0x5EED_0000 + r as u64, 0)
        }
    }
}
