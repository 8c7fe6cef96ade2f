use std::time::Instant;

use super::require_capacity;
use crate::error::{QapError, Result};
use crate::problem::{AllocationState, ProblemInstance};
use crate::solver::BaselineResult;

/// Largest `n^m` enumeration `brute_force` accepts.
pub const BRUTE_FORCE_LIMIT: f64 = 1e7;

pub(crate) fn check_size(inst: &ProblemInstance) -> Result<()> {
    let size = (inst.n() as f64).powi(inst.m() as i32);
    if size > BRUTE_FORCE_LIMIT {
        return Err(QapError::TooLarge(format!(
            "brute force needs n^m = {}^{} ≤ 1e7 assignments",
            inst.n(),
            inst.m()
        )));
    }
    Ok(())
}

struct Search<'a> {
    w_bar: &'a ndarray::Array2<f64>,
    caps: &'a [usize],
    counts: Vec<usize>,
    assign: Vec<usize>,
    best: f64,
    best_assign: Option<Vec<usize>>,
}

impl Search<'_> {
    // Hosts are tried in ascending order and only strict improvements replace
    // the incumbent, so the lexicographically first optimum wins.
    fn dfs(&mut self, phone: usize, partial: f64) {
        if partial >= self.best {
            return;
        }
        if phone == self.assign.len() {
            self.best = partial;
            self.best_assign = Some(self.assign.clone());
            return;
        }
        let row = self.w_bar.row(phone);
        for host in 0..self.caps.len() {
            if self.counts[host] == self.caps[host] {
                continue;
            }
            let added: f64 = (0..phone).filter(|&s| self.assign[s] == host).map(|s| row[s]).sum();
            self.assign[phone] = host;
            self.counts[host] += 1;
            self.dfs(phone + 1, partial + added);
            self.counts[host] -= 1;
        }
    }
}

/// Exact minimum-risk feasible allocation by pruned enumeration.
pub fn brute_force(inst: &ProblemInstance) -> Result<BaselineResult> {
    let started = Instant::now();
    check_size(inst)?;
    require_capacity(inst)?;
    let mut search = Search {
        w_bar: inst.w_bar(),
        caps: inst.capacities(),
        counts: vec![0; inst.n()],
        assign: vec![0; inst.m()],
        best: f64::INFINITY,
        best_assign: None,
    };
    search.dfs(0, 0.0);
    let assign = search
        .best_assign
        .ok_or_else(|| QapError::Infeasible("no feasible allocation".into()))?;
    BaselineResult::evaluate(inst, AllocationState::new(assign), "brute_force", started)
}
