//! Search algorithms over the hypercube and merged spaces.
//!
//! All algorithms maximize. The start point is always evaluated; budget
//! limits on evaluations count only the evaluations after it, so
//! [`SearchResult::evaluations`] is at most `1 + max_evaluations`.

mod bounds;
mod evolutionary;
mod hill_climb;
mod mvhc;

use std::fmt;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::hypercube::BitVector;

pub use bounds::{ea_runtime_bound_ln, mvea_runtime_bound_exact, mvea_runtime_bound_ln, mvea_uniform_bound_exponent};
pub use evolutionary::{
    mv_random_mutation, one_plus_one_ea, one_plus_one_mutation, one_plus_one_mvea, one_plus_one_mvea_redrawing,
};
pub use hill_climb::{hill_climb, hill_climb_hypercube};
pub use mvhc::{mvhc, mvhc_iteration, MvhcConfig, MvhcOutcome, RestartConfig};

/// Stopping rules. Unset fields impose no limit.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SearchBudget {
    /// Evaluations allowed after the start point's.
    pub max_evaluations: Option<u64>,
    /// Iterations: neighborhood scans for hill climbing, mutations for the
    /// (1+1) algorithms, mapping draws for MVHC.
    pub max_iterations: Option<u64>,
    /// Consecutive iterations without a strict improvement of the best value.
    pub max_stagnation: Option<u64>,
    pub wall_clock: Option<Duration>,
    /// Stop as soon as the best value reaches this.
    pub target: Option<f64>,
}

impl SearchBudget {
    pub fn evaluations(max: u64) -> Self {
        Self {
            max_evaluations: Some(max),
            ..Self::default()
        }
    }

    pub fn unlimited() -> Self {
        Self::default()
    }

    pub fn with_target(mut self, target: f64) -> Self {
        self.target = Some(target);
        self
    }

    pub fn with_iterations(mut self, max: u64) -> Self {
        self.max_iterations = Some(max);
        self
    }

    pub fn with_stagnation(mut self, max: u64) -> Self {
        self.max_stagnation = Some(max);
        self
    }

    pub fn with_wall_clock(mut self, limit: Duration) -> Self {
        self.wall_clock = Some(limit);
        self
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    LocalOptimum,
    StrongExtremum,
    TargetReached,
    MaxEvaluations,
    MaxIterations,
    Stagnation,
    WallClock,
    RestartsExhausted,
}

impl Termination {
    pub fn is_budget(self) -> bool {
        matches!(
            self,
            Self::MaxEvaluations | Self::MaxIterations | Self::Stagnation | Self::WallClock
        )
    }
}

impl fmt::Display for Termination {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = serde_json::to_value(self).expect("unit variant");
        f.write_str(s.as_str().unwrap_or("unknown"))
    }
}

/// Which improving neighbor a hill climber moves to.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Improvement {
    /// The first improving neighbor in traversal order.
    #[default]
    First,
    /// The best neighbor of the whole scan; ties go to the earliest.
    Best,
}

/// An improvement of the best known value.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryPoint {
    /// 1-based index of the evaluation that found it.
    pub eval: u64,
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchResult<P = BitVector> {
    pub best_point: P,
    pub best_value: f64,
    /// All objective calls of the run, including the start point's.
    pub evaluations: u64,
    pub iterations: u64,
    /// Strictly increasing; the first entry is the start point.
    pub trajectory: Vec<TrajectoryPoint>,
    pub terminated_by: Termination,
}

/// Budget bookkeeping shared by the algorithms.
#[derive(Debug)]
pub(crate) struct Meter {
    budget: SearchBudget,
    started: Instant,
    evaluations: u64,
    iterations: u64,
    stagnation: u64,
    best: f64,
    trajectory: Vec<TrajectoryPoint>,
}

impl Meter {
    pub(crate) fn new(budget: &SearchBudget, start_value: f64) -> Self {
        Self {
            budget: budget.clone(),
            started: Instant::now(),
            evaluations: 1,
            iterations: 0,
            stagnation: 0,
            best: start_value,
            trajectory: vec![TrajectoryPoint {
                eval: 1,
                value: start_value,
            }],
        }
    }

    /// Evaluations still allowed, `None` for unlimited.
    pub(crate) fn remaining(&self) -> Option<u64> {
        self.budget
            .max_evaluations
            .map(|max| max.saturating_sub(self.evaluations - 1))
    }

    /// Limits that forbid another evaluation.
    pub(crate) fn evaluation_limit(&self) -> Option<Termination> {
        if self.remaining() == Some(0) {
            return Some(Termination::MaxEvaluations);
        }
        if self.budget.wall_clock.is_some_and(|limit| self.started.elapsed() >= limit) {
            return Some(Termination::WallClock);
        }
        None
    }

    /// Checks run before starting another iteration.
    pub(crate) fn iteration_limit(&self) -> Option<Termination> {
        if self.target_reached() {
            return Some(Termination::TargetReached);
        }
        if let Some(t) = self.evaluation_limit() {
            return Some(t);
        }
        if self.budget.max_iterations.is_some_and(|max| self.iterations >= max) {
            return Some(Termination::MaxIterations);
        }
        if self.budget.max_stagnation.is_some_and(|max| self.stagnation >= max) {
            return Some(Termination::Stagnation);
        }
        None
    }

    pub(crate) fn target_reached(&self) -> bool {
        self.budget.target.is_some_and(|t| self.best >= t)
    }

    /// Books one evaluation; returns true when it improved the best value.
    pub(crate) fn record(&mut self, value: f64) -> bool {
        self.evaluations += 1;
        if value > self.best {
            self.best = value;
            self.trajectory.push(TrajectoryPoint {
                eval: self.evaluations,
                value,
            });
            true
        } else {
            false
        }
    }

    /// Ends an iteration; `improved` resets the stagnation count.
    pub(crate) fn finish_iteration(&mut self, improved: bool) {
        self.iterations += 1;
        if improved {
            self.stagnation = 0;
        } else {
            self.stagnation += 1;
        }
    }

    pub(crate) fn into_result<P>(self, best_point: P, terminated_by: Termination) -> SearchResult<P> {
        SearchResult {
            best_point,
            best_value: self.best,
            evaluations: self.evaluations,
            iterations: self.iterations,
            trajectory: self.trajectory,
            terminated_by,
        }
    }
}
