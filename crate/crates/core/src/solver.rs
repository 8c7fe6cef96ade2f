//! A common interface over every allocation method, and a by-name registry.

use std::collections::BTreeMap;
use std::time::{Duration, Instant};

use crate::error::{QapError, Result};
use crate::problem::{is_feasible, risk, AllocationState, ProblemInstance};

/// Outcome of running one method on one instance.
#[derive(Debug, Clone, PartialEq)]
pub struct BaselineResult {
    pub allocation: AllocationState,
    /// Always `problem::risk` of `allocation`.
    pub risk: f64,
    pub feasible: bool,
    pub wall_time: Duration,
    pub method: String,
}

impl BaselineResult {
    /// Scores `allocation` from scratch and stamps the elapsed time.
    pub fn evaluate(inst: &ProblemInstance, allocation: AllocationState, method: &str, started: Instant) -> Result<Self> {
        Ok(Self {
            risk: risk(inst, &allocation)?,
            feasible: is_feasible(inst, &allocation),
            allocation,
            wall_time: started.elapsed(),
            method: method.to_string(),
        })
    }
}

pub trait Solver: Send + Sync {
    fn name(&self) -> &'static str;

    /// Rejects instances the method cannot handle, before any work is done.
    fn supports(&self, _inst: &ProblemInstance) -> Result<()> {
        Ok(())
    }

    /// `seed` drives any randomness; the same seed gives the same result.
    fn solve(&self, inst: &ProblemInstance, seed: u64) -> Result<BaselineResult>;
}

/// Solvers keyed by name.
#[derive(Default)]
pub struct SolverRegistry {
    solvers: BTreeMap<String, Box<dyn Solver>>,
}

impl SolverRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    /// Registry holding every classical baseline under its default settings.
    pub fn with_baselines() -> Self {
        let mut reg = Self::new();
        crate::baselines::register_all(&mut reg);
        reg
    }

    /// Adds or replaces the solver registered under `solver.name()`.
    pub fn register(&mut self, solver: Box<dyn Solver>) {
        self.solvers.insert(solver.name().to_string(), solver);
    }

    pub fn get(&self, name: &str) -> Option<&dyn Solver> {
        self.solvers.get(name).map(|s| s.as_ref())
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.solvers.keys().map(|k| k.as_str())
    }

    /// Looks up every name, failing on the first unknown one.
    pub fn select(&self, names: &[String]) -> Result<Vec<&dyn Solver>> {
        names
            .iter()
            .map(|n| {
                self.get(n).ok_or_else(|| {
                    let known: Vec<&str> = self.names().collect();
                    QapError::Config(format!("unknown method {n:?} (known: {})", known.join(", ")))
                })
            })
            .collect()
    }
}
