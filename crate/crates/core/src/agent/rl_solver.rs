use std::sync::Arc;
use std::time::Instant;

use super::config::{RolloutStart, VisitOrder};
use super::episode::{greedy_rollout, RolloutOptions};
use crate::error::Result;
use crate::model::ModelParams;
use crate::problem::ProblemInstance;
use crate::solver::{BaselineResult, Solver};

/// The trained Q-network as a solver: one greedy rollout per instance.
/// The result may violate capacities; feasibility is reported, not enforced.
pub struct RlSolver {
    params: Arc<ModelParams>,
    beta: f64,
    visit_order: VisitOrder,
    start: RolloutStart,
}

impl RlSolver {
    pub fn new(params: Arc<ModelParams>, beta: f64) -> Self {
        Self {
            params,
            beta,
            visit_order: VisitOrder::Ascending,
            start: RolloutStart::Random,
        }
    }

    pub fn with_start(mut self, start: RolloutStart) -> Self {
        self.start = start;
        self
    }

    pub fn with_visit_order(mut self, order: VisitOrder) -> Self {
        self.visit_order = order;
        self
    }
}

impl Solver for RlSolver {
    fn name(&self) -> &'static str {
        "rl"
    }

    fn solve(&self, inst: &ProblemInstance, seed: u64) -> Result<BaselineResult> {
        let started = Instant::now();
        let opts = RolloutOptions {
            seed,
            beta: self.beta,
            visit_order: self.visit_order,
            start: self.start,
        };
        let out = greedy_rollout(inst, &self.params, &opts)?;
        BaselineResult::evaluate(inst, out.allocation, self.name(), started)
    }
}
