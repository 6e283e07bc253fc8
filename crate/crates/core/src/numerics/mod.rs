//! Value-iteration engines.
//!
//! All engines use in-place (Gauss-Seidel) sweeps in state-index order and
//! start from zero, so for the monotone operators used here the iterates
//! approach the least fixed point from below. Convergence is declared when
//! the sup-norm change of a sweep is at most `epsilon` *and* the geometric
//! extrapolation of the remaining distance is at most `epsilon`; the larger
//! of the two is reported as the residual.

mod game;
mod graph;
mod robust;
mod value;
mod visits;

pub use game::{game_value_iteration, VertexGame, VertexGameBuilder};
pub use robust::{robust_value_bounds, IntervalMdp, IntervalMdpBuilder, RobustBounds};
pub use value::{
    expected_reward_under, max_expected_reward, max_reachability, reachability_probability,
};
pub use visits::{expected_visits, VisitVector};

pub(crate) use graph::ChoiceGraph;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Stopping rule shared by all engines.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub epsilon: f64,
    pub max_iterations: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            epsilon: 1e-8,
            max_iterations: 1_000_000,
        }
    }
}

impl SolverConfig {
    pub fn with_epsilon(epsilon: f64) -> Self {
        SolverConfig {
            epsilon,
            ..Self::default()
        }
    }
}

/// Per-state values plus convergence metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueVector {
    pub values: Vec<f64>,
    pub iterations: usize,
    pub residual: f64,
}

impl ValueVector {
    pub fn at(&self, s: usize) -> f64 {
        self.values[s]
    }
}

/// Which player resolves a choice.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Role {
    Max,
    Min,
}

impl Role {
    #[inline]
    pub(crate) fn better(self, candidate: f64, incumbent: f64) -> bool {
        match self {
            Role::Max => candidate > incumbent,
            Role::Min => candidate < incumbent,
        }
    }

    #[inline]
    pub(crate) fn worst(self) -> f64 {
        match self {
            Role::Max => f64::NEG_INFINITY,
            Role::Min => f64::INFINITY,
        }
    }
}

/// What the engines compute.
#[derive(Debug, Clone, PartialEq)]
pub enum Objective {
    /// Expected accumulated state reward until a target is reached.
    Reward,
    /// Probability of reaching the marked states (which must be targets).
    Reach(Vec<bool>),
}

/// One backup of state `s` with its self-loop solved in closed form:
/// `x = r + p_ss x + rest` gives `x = (r + rest) / (1 - p_ss)`. Both forms
/// share their fixed points; this one propagates through slow loops at once.
#[inline]
pub(crate) fn backup_row(s: usize, reward: f64, succ: &[usize], prob: &[f64], v: &[f64]) -> f64 {
    let mut stay = 0.0;
    let mut acc = reward;
    for (&t, &p) in succ.iter().zip(prob) {
        if t == s {
            stay += p;
        } else {
            acc += p * v[t];
        }
    }
    if stay > 0.0 && stay < 1.0 {
        acc / (1.0 - stay)
    } else {
        acc + stay * v[s]
    }
}

/// Tracks sweep deltas and decides when to stop.
#[derive(Debug)]
pub(crate) struct Convergence {
    cfg: SolverConfig,
    prev: f64,
    iterations: usize,
}

impl Convergence {
    pub(crate) fn new(cfg: SolverConfig) -> Self {
        Convergence {
            cfg,
            prev: f64::INFINITY,
            iterations: 0,
        }
    }

    /// Feeds one sweep's sup-norm change. Returns the residual once converged.
    pub(crate) fn step(&mut self, delta: f64) -> Result<Option<f64>> {
        self.iterations += 1;
        let eps = self.cfg.epsilon;
        let estimate = if delta == 0.0 {
            0.0
        } else if delta < self.prev {
            let rho = delta / self.prev;
            delta * rho / (1.0 - rho)
        } else {
            f64::INFINITY
        };
        self.prev = delta;
        if delta.is_nan() {
            return Err(Error::DivergentReward(
                "value iteration produced NaN".into(),
            ));
        }
        if (delta <= eps && estimate <= eps) || delta <= eps * 1e-6 {
            return Ok(Some(delta.max(estimate.min(eps))));
        }
        if self.iterations >= self.cfg.max_iterations {
            return Err(Error::NotConverged(self.iterations));
        }
        Ok(None)
    }

    pub(crate) fn iterations(&self) -> usize {
        self.iterations
    }
}
