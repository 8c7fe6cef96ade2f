use std::time::Instant;

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::Rng;

use super::require_capacity;
use crate::error::{QapError, Result};
use crate::problem::{is_feasible, AllocationState, ProblemInstance};
use crate::solver::BaselineResult;

// Moves must beat this to count as improving.
const IMPROVE_TOL: f64 = 1e-12;

/// Phones in random order, each to a uniformly chosen host with room left.
pub fn random_feasible<R: Rng + ?Sized>(inst: &ProblemInstance, rng: &mut R) -> Result<BaselineResult> {
    let started = Instant::now();
    require_capacity(inst)?;
    let (m, n) = (inst.m(), inst.n());
    let mut order: Vec<usize> = (0..m).collect();
    order.shuffle(rng);
    let mut room: Vec<usize> = inst.capacities().to_vec();
    let mut assign = vec![0; m];
    let mut open: Vec<usize> = Vec::with_capacity(n);
    for phone in order {
        open.clear();
        open.extend((0..n).filter(|&h| room[h] > 0));
        let host = open[rng.gen_range(0..open.len())];
        room[host] -= 1;
        assign[phone] = host;
    }
    BaselineResult::evaluate(inst, AllocationState::new(assign), "random", started)
}

/// `cost[[i, h]]`: complementary weight between phone `i` and the phones
/// currently on host `h`, excluding `i` itself.
fn host_costs(w_bar: &Array2<f64>, assign: &[usize], n: usize) -> Array2<f64> {
    let m = assign.len();
    let mut cost = Array2::zeros((m, n));
    for i in 0..m {
        for (s, &h) in assign.iter().enumerate() {
            if s != i {
                cost[[i, h]] += w_bar[[i, s]];
            }
        }
    }
    cost
}

/// Phones by descending total tie strength, each to the open host that adds
/// the least risk. Ties go to the lower index.
pub fn greedy_construct(inst: &ProblemInstance) -> Result<BaselineResult> {
    let started = Instant::now();
    require_capacity(inst)?;
    let (m, n) = (inst.m(), inst.n());
    let w = inst.graph().weights();
    let totals: Vec<f64> = (0..m).map(|i| w.row(i).sum()).collect();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| totals[b].total_cmp(&totals[a]));

    let w_bar = inst.w_bar();
    let caps = inst.capacities();
    let mut counts = vec![0; n];
    let mut cost = Array2::<f64>::zeros((m, n));
    let mut assign = vec![0; m];
    for phone in order {
        let mut best: Option<usize> = None;
        for h in (0..n).filter(|&h| counts[h] < caps[h]) {
            if best.is_none_or(|b| cost[[phone, h]] < cost[[phone, b]]) {
                best = Some(h);
            }
        }
        let host = best.expect("spare capacity exists");
        assign[phone] = host;
        counts[host] += 1;
        for i in 0..m {
            cost[[i, host]] += w_bar[[i, phone]];
        }
    }
    BaselineResult::evaluate(inst, AllocationState::new(assign), "greedy", started)
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Move {
    Relocate { phone: usize, host: usize },
    Swap { a: usize, b: usize },
}

/// Best-improvement descent over relocations and pairwise swaps, applying
/// at most `budget` moves.
pub fn local_search_swap(inst: &ProblemInstance, start: &AllocationState, budget: usize) -> Result<BaselineResult> {
    Ok(local_search_trace(inst, start, budget)?.0)
}

/// As [`local_search_swap`], also returning the risk after each accepted
/// move, starting with the initial risk.
pub fn local_search_trace(
    inst: &ProblemInstance,
    start: &AllocationState,
    budget: usize,
) -> Result<(BaselineResult, Vec<f64>)> {
    let started = Instant::now();
    start.check(inst.m(), inst.n())?;
    if !is_feasible(inst, start) {
        return Err(QapError::Infeasible("local search needs a feasible start".into()));
    }
    let (m, n) = (inst.m(), inst.n());
    let w_bar = inst.w_bar();
    let caps = inst.capacities();
    let mut assign = start.assign().to_vec();
    let mut counts = start.counts(n);
    let mut cost = host_costs(w_bar, &assign, n);
    let mut current = crate::problem::risk_unchecked(w_bar, &assign);
    let mut history = vec![current];

    for _ in 0..budget {
        let mut best: Option<(f64, Move)> = None;
        let mut consider = |delta: f64, mv: Move| {
            if delta < -IMPROVE_TOL && best.is_none_or(|(d, _)| delta < d) {
                best = Some((delta, mv));
            }
        };
        for phone in 0..m {
            let from = assign[phone];
            for host in (0..n).filter(|&h| h != from && counts[h] < caps[h]) {
                consider(cost[[phone, host]] - cost[[phone, from]], Move::Relocate { phone, host });
            }
        }
        for a in 0..m {
            for b in (a + 1)..m {
                let (ha, hb) = (assign[a], assign[b]);
                if ha == hb {
                    continue;
                }
                let delta = cost[[a, hb]] - cost[[a, ha]] + cost[[b, ha]] - cost[[b, hb]] - 2.0 * w_bar[[a, b]];
                consider(delta, Move::Swap { a, b });
            }
        }
        let Some((_, mv)) = best else { break };
        let before = assign.clone();
        let mut relocate = |phone: usize, host: usize, assign: &mut [usize]| {
            let from = assign[phone];
            for i in 0..m {
                if i != phone {
                    cost[[i, from]] -= w_bar[[i, phone]];
                    cost[[i, host]] += w_bar[[i, phone]];
                }
            }
            assign[phone] = host;
        };
        match mv {
            Move::Relocate { phone, host } => {
                counts[assign[phone]] -= 1;
                counts[host] += 1;
                relocate(phone, host, &mut assign);
            }
            Move::Swap { a, b } => {
                let (ha, hb) = (assign[a], assign[b]);
                relocate(a, hb, &mut assign);
                relocate(b, ha, &mut assign);
            }
        }
        // Exact rescoring keeps the cached costs from drifting into false improvements.
        let next = crate::problem::risk_unchecked(w_bar, &assign);
        if next >= current {
            assign = before;
            break;
        }
        current = next;
        history.push(current);
    }
    let out = BaselineResult::evaluate(inst, AllocationState::new(assign), "local_search", started)?;
    Ok((out, history))
}
