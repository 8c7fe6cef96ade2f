use std::time::Instant;

use ndarray::Array2;

use super::flow::lmo_transportation;
use super::heuristics::{local_search_swap, random_feasible};
use super::require_capacity;
use crate::error::{QapError, Result};
use crate::problem::{AllocationState, ProblemInstance};
use crate::rng::rng_from_seed;
use crate::solver::BaselineResult;

pub const FW_MAX_ITERS: usize = 500;
const STALL_WINDOW: usize = 25;
const STALL_REL_TOL: f64 = 1e-8;

const ROW_TOL: f64 = 1e-9;
const NEG_TOL: f64 = 1e-12;

/// Row-stochastic `m × n` matrix; entry `(i, j)` is the share of phone `i`
/// placed on host `j`.
#[derive(Debug, Clone, PartialEq)]
pub struct FractionalAllocation {
    x: Array2<f64>,
}

impl FractionalAllocation {
    /// Checks nonnegativity and unit row sums.
    pub fn new(x: Array2<f64>) -> Result<Self> {
        for (i, row) in x.rows().into_iter().enumerate() {
            if row.iter().any(|v| !v.is_finite() || *v < -NEG_TOL) {
                return Err(QapError::State(format!("row {i} has a negative or non-finite entry")));
            }
            let sum = row.sum();
            if (sum - 1.0).abs() > ROW_TOL {
                return Err(QapError::State(format!("row {i} sums to {sum}, not 1")));
            }
        }
        Ok(Self { x })
    }

    pub(crate) fn from_matrix_unchecked(x: Array2<f64>) -> Self {
        Self { x }
    }

    pub fn from_allocation(s: &AllocationState, n: usize) -> Self {
        Self { x: s.one_hot(n) }
    }

    pub fn matrix(&self) -> &Array2<f64> {
        &self.x
    }

    pub fn into_matrix(self) -> Array2<f64> {
        self.x
    }

    /// Whether column sums stay within `caps` (tolerance 1e-9).
    pub fn respects(&self, caps: &[usize]) -> bool {
        caps.len() == self.x.ncols()
            && self
                .x
                .columns()
                .into_iter()
                .zip(caps)
                .all(|(col, &c)| col.sum() <= c as f64 + ROW_TOL)
    }

    /// `½ tr(Xᵀ W̄ X)`; equals the risk on one-hot matrices.
    pub fn objective(&self, w_bar: &Array2<f64>) -> f64 {
        0.5 * (&self.x * &w_bar.dot(&self.x)).sum()
    }
}

/// Result of [`qp_relax_solve`].
#[derive(Debug, Clone)]
pub struct QpRelaxation {
    /// Best iterate seen.
    pub x: FractionalAllocation,
    pub objective: f64,
    /// Best objective after each iteration, starting with the initial point.
    pub history: Vec<f64>,
    pub iterations: usize,
}

/// Frank–Wolfe on `½ tr(Xᵀ W̄ X)` over the transportation polytope, from
/// the one-hot matrix of `random_feasible` under `seed`.
///
/// The objective is indefinite, so the result is a stationary point only.
/// On small, tightly capacitated instances the start itself is often
/// stationary and no step is taken.
///
/// Stops after `iters` iterations, when the duality gap vanishes, or when the
/// best objective improves by less than 1e-8 (relative) over 25 iterations.
pub fn qp_relax_solve(inst: &ProblemInstance, iters: usize, seed: u64) -> Result<QpRelaxation> {
    require_capacity(inst)?;
    let n = inst.n();
    let w_bar = inst.w_bar();
    let caps = inst.capacities();
    let start = random_feasible(inst, &mut rng_from_seed(seed))?.allocation;
    let mut x = start.one_hot(n);
    let mut wx = w_bar.dot(&x);
    let mut f = 0.5 * (&x * &wx).sum();
    let mut best = (x.clone(), f);
    let mut history = vec![f];
    let mut iterations = 0;

    while iterations < iters {
        let s = lmo_transportation(&wx, caps)?.into_matrix();
        let d = &s - &x;
        let slope = (&wx * &d).sum();
        if slope >= -NEG_TOL * (1.0 + f.abs()) {
            break;
        }
        let wd = w_bar.dot(&d);
        let curv = (&d * &wd).sum();
        // f(x + γd) = f + γ·slope + ½γ²·curv, minimized over [0, 1].
        let gamma = if curv > 0.0 {
            (-slope / curv).clamp(0.0, 1.0)
        } else if slope + 0.5 * curv < 0.0 {
            1.0
        } else {
            0.0
        };
        if gamma == 0.0 {
            break;
        }
        x.scaled_add(gamma, &d);
        wx.scaled_add(gamma, &wd);
        f += gamma * slope + 0.5 * gamma * gamma * curv;
        iterations += 1;
        if f < best.1 {
            best = (x.clone(), f);
        }
        history.push(best.1);
        if iterations >= STALL_WINDOW {
            let old = history[iterations - STALL_WINDOW];
            if old - best.1 <= STALL_REL_TOL * old.abs().max(f64::MIN_POSITIVE) {
                break;
            }
        }
    }
    // Recompute from scratch so the reported value carries no drift.
    let x = FractionalAllocation::from_matrix_unchecked(best.0);
    let objective = x.objective(w_bar);
    Ok(QpRelaxation { x, objective, history, iterations })
}

/// Max-mass rounding: phones by descending largest entry, each to its
/// highest-mass host with room left. Ties go to the lower index.
pub fn round_max_mass(x: &FractionalAllocation, caps: &[usize]) -> Result<AllocationState> {
    let x = x.matrix();
    let (m, n) = x.dim();
    if caps.len() != n {
        return Err(QapError::Dimension(format!("{n} columns but {} capacities", caps.len())));
    }
    super::require_capacity_for(caps, m)?;
    let peak: Vec<f64> = x.rows().into_iter().map(|r| r.fold(f64::NEG_INFINITY, |a, &b| a.max(b))).collect();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| peak[b].total_cmp(&peak[a]));
    let mut room = caps.to_vec();
    let mut assign = vec![0; m];
    for phone in order {
        let row = x.row(phone);
        let host = (0..n)
            .filter(|&h| room[h] > 0)
            .fold(None, |best: Option<usize>, h| match best {
                Some(b) if row[b] >= row[h] => Some(b),
                _ => Some(h),
            })
            .expect("spare capacity exists");
        room[host] -= 1;
        assign[phone] = host;
    }
    Ok(AllocationState::new(assign))
}

/// [`round_max_mass`] followed by a single local-search move as repair.
pub fn round_fractional(inst: &ProblemInstance, x: &FractionalAllocation) -> Result<BaselineResult> {
    let started = Instant::now();
    if x.matrix().dim() != (inst.m(), inst.n()) {
        return Err(QapError::Dimension(format!(
            "fractional allocation is {:?}, instance is {}×{}",
            x.matrix().dim(),
            inst.m(),
            inst.n()
        )));
    }
    let rounded = round_max_mass(x, inst.capacities())?;
    let repaired = local_search_swap(inst, &rounded, 1)?.allocation;
    BaselineResult::evaluate(inst, repaired, "qp", started)
}
