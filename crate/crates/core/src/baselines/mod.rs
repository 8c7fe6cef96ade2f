//! Classical allocation methods used to calibrate the learned policy.
//!
//! Every method returns a feasible allocation or an `Infeasible` error.

mod exact;
mod flow;
mod heuristics;
mod relax;

use std::time::Instant;

pub use exact::{brute_force, BRUTE_FORCE_LIMIT};
pub use flow::lmo_transportation;
pub use heuristics::{greedy_construct, local_search_swap, local_search_trace, random_feasible};
pub use relax::{qp_relax_solve, round_fractional, round_max_mass, FractionalAllocation, QpRelaxation, FW_MAX_ITERS};

use crate::error::{QapError, Result};
use crate::problem::ProblemInstance;
use crate::rng::rng_from_seed;
use crate::solver::{BaselineResult, Solver, SolverRegistry};

pub(crate) fn require_capacity(inst: &ProblemInstance) -> Result<()> {
    require_capacity_for(inst.capacities(), inst.m())
}

pub(crate) fn require_capacity_for(caps: &[usize], m: usize) -> Result<()> {
    let total: usize = caps.iter().sum();
    if total < m {
        return Err(QapError::Infeasible(format!(
            "total capacity {total} is below the {m} phones"
        )));
    }
    Ok(())
}

/// Registers `brute_force`, `random`, `greedy`, `local_search` and `qp`.
pub fn register_all(reg: &mut SolverRegistry) {
    reg.register(Box::new(BruteForce));
    reg.register(Box::new(RandomFeasible));
    reg.register(Box::new(Greedy));
    reg.register(Box::new(LocalSearch::default()));
    reg.register(Box::new(QpRelax::default()));
}

pub struct BruteForce;

impl Solver for BruteForce {
    fn name(&self) -> &'static str {
        "brute_force"
    }

    fn supports(&self, inst: &ProblemInstance) -> Result<()> {
        exact::check_size(inst)
    }

    fn solve(&self, inst: &ProblemInstance, _seed: u64) -> Result<BaselineResult> {
        let mut out = brute_force(inst)?;
        out.method = self.name().into();
        Ok(out)
    }
}

pub struct RandomFeasible;

impl Solver for RandomFeasible {
    fn name(&self) -> &'static str {
        "random"
    }

    fn solve(&self, inst: &ProblemInstance, seed: u64) -> Result<BaselineResult> {
        let mut out = random_feasible(inst, &mut rng_from_seed(seed))?;
        out.method = self.name().into();
        Ok(out)
    }
}

pub struct Greedy;

impl Solver for Greedy {
    fn name(&self) -> &'static str {
        "greedy"
    }

    fn solve(&self, inst: &ProblemInstance, _seed: u64) -> Result<BaselineResult> {
        let mut out = greedy_construct(inst)?;
        out.method = self.name().into();
        Ok(out)
    }
}

/// Greedy construction followed by swap local search.
pub struct LocalSearch {
    pub budget: usize,
}

impl Default for LocalSearch {
    fn default() -> Self {
        Self { budget: usize::MAX }
    }
}

impl Solver for LocalSearch {
    fn name(&self) -> &'static str {
        "local_search"
    }

    fn solve(&self, inst: &ProblemInstance, _seed: u64) -> Result<BaselineResult> {
        let started = Instant::now();
        let start = greedy_construct(inst)?.allocation;
        let out = local_search_swap(inst, &start, self.budget)?;
        BaselineResult::evaluate(inst, out.allocation, self.name(), started)
    }
}

/// Frank–Wolfe on the relaxation, then max-mass rounding with one repair move.
pub struct QpRelax {
    pub iters: usize,
}

impl Default for QpRelax {
    fn default() -> Self {
        Self { iters: FW_MAX_ITERS }
    }
}

impl Solver for QpRelax {
    fn name(&self) -> &'static str {
        "qp"
    }

    fn solve(&self, inst: &ProblemInstance, seed: u64) -> Result<BaselineResult> {
        let started = Instant::now();
        let relax = qp_relax_solve(inst, self.iters, seed)?;
        let out = round_fractional(inst, &relax.x)?;
        BaselineResult::evaluate(inst, out.allocation, self.name(), started)
    }
}
