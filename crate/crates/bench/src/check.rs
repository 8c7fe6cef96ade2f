//! The `check` command: a battery of self-verifying properties, each with an
//! independent oracle and a pinned tolerance.

use std::path::Path;
use std::sync::Arc;

use ndarray::Array2;
use qapcore::agent::{RlSolver, Transition};
use qapcore::baselines::{brute_force, lmo_transportation, qp_relax_solve};
use qapcore::graph::gen_uniform;
use qapcore::model::{encode, finite_diff_check_against, init_params, loss_and_grad, ModelDims};
use qapcore::problem::{kl_penalty, risk, step_reward};
use qapcore::rng::{rng_from_seed, split_seed};
use qapcore::solver::SolverRegistry;
use qapcore::{AllocationState, CommGraph, ProblemInstance};
use rand::seq::SliceRandom;
use rand::Rng;

use crate::config::ExperimentConfig;
use crate::error::Result;
use crate::output::{fmt9, Table};

pub const GRADIENT: &str = "gradient_fd";
pub const EQUIVARIANCE: &str = "encoder_equivariance";
pub const TELESCOPING: &str = "reward_telescoping";
pub const RISK_ENUMERATION: &str = "risk_enumeration";
pub const ORACLE_DOMINANCE: &str = "oracle_dominance";
pub const POLYTOPE: &str = "polytope_invariants";
pub const LMO_EXACTNESS: &str = "lmo_exactness";

pub const PROPERTIES: [&str; 7] =
    [GRADIENT, EQUIVARIANCE, TELESCOPING, RISK_ENUMERATION, ORACLE_DOMINANCE, POLYTOPE, LMO_EXACTNESS];

#[derive(Debug, Clone, Copy, Default)]
pub struct CheckOptions {
    /// Doubles every analytic gradient before comparing; the gradient
    /// property must then fail.
    pub corrupt_gradient: bool,
}

/// Worst measured deviation of one property against its tolerance.
#[derive(Debug, Clone, PartialEq)]
pub struct PropertyResult {
    pub name: &'static str,
    pub samples: usize,
    pub measured: f64,
    pub tolerance: f64,
}

impl PropertyResult {
    pub fn passed(&self) -> bool {
        self.measured.is_finite() && self.measured <= self.tolerance
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckReport {
    pub results: Vec<PropertyResult>,
}

impl CheckReport {
    pub fn passed(&self) -> bool {
        self.results.iter().all(PropertyResult::passed)
    }

    pub fn get(&self, name: &str) -> Option<&PropertyResult> {
        self.results.iter().find(|r| r.name == name)
    }

    pub fn table(&self) -> Table {
        let mut t = Table::new(["property", "passed", "measured", "tolerance", "samples"]);
        for r in &self.results {
            t.push(vec![
                r.name.to_string(),
                r.passed().to_string(),
                fmt9(r.measured),
                fmt9(r.tolerance),
                r.samples.to_string(),
            ]);
        }
        t
    }
}

/// Runs every property and writes `check_report.csv` to `out`.
pub fn cmd_check(cfg: &ExperimentConfig, opts: CheckOptions, out: &Path) -> Result<CheckReport> {
    crate::output::ensure_dir(out)?;
    let report = run_battery(cfg.master_seed, opts)?;
    report.table().write(&out.join("check_report.csv"), &cfg.hash(), cfg.master_seed)?;
    Ok(report)
}

pub fn run_battery(seed: u64, opts: CheckOptions) -> Result<CheckReport> {
    let s = |i| split_seed(seed, i);
    Ok(CheckReport {
        results: vec![
            gradient_fidelity(s(1), 20, opts.corrupt_gradient)?,
            encoder_equivariance(s(2), 50)?,
            reward_telescoping(s(3), 100, 1.0)?,
            risk_enumeration(s(4), 100)?,
            oracle_dominance(s(5), 200)?,
            polytope_invariants(s(6), 20)?,
            lmo_exactness(s(7), 100)?,
        ],
    })
}

fn uniform_instance(m: usize, caps: Vec<usize>, seed: u64) -> Result<ProblemInstance> {
    let n = caps.len();
    Ok(ProblemInstance::new(gen_uniform(m, seed)?, caps, vec![1.0 / n as f64; n])?)
}

/// Capacities in `1..=m` per host with total at least `m`.
fn random_caps<R: Rng>(m: usize, n: usize, rng: &mut R) -> Vec<usize> {
    loop {
        let caps: Vec<usize> = (0..n).map(|_| rng.gen_range(1..=m)).collect();
        if caps.iter().sum::<usize>() >= m {
            return caps;
        }
    }
}

fn pair_risk(w_bar: &Array2<f64>, assign: &[usize]) -> f64 {
    let m = assign.len();
    let mut total = 0.0;
    for i in 0..m {
        for j in i + 1..m {
            if assign[i] == assign[j] {
                total += w_bar[[i, j]];
            }
        }
    }
    total
}

/// Calls `f` on every assignment of `m` phones to `n` hosts.
fn for_each_assignment(m: usize, n: usize, mut f: impl FnMut(&[usize])) {
    let mut a = vec![0usize; m];
    loop {
        f(&a);
        let mut i = 0;
        loop {
            if i == m {
                return;
            }
            a[i] += 1;
            if a[i] < n {
                break;
            }
            a[i] = 0;
            i += 1;
        }
    }
}

fn fits(assign: &[usize], caps: &[usize]) -> bool {
    let mut counts = vec![0usize; caps.len()];
    for &h in assign {
        counts[h] += 1;
    }
    counts.iter().zip(caps).all(|(c, k)| c <= k)
}

/// Max relative error of the analytic TD-loss gradient against central
/// differences on tiny random models (m 4–8, n 2–3, d_h ≤ 8, L ≤ 2).
pub fn gradient_fidelity(seed: u64, configs: usize, corrupt: bool) -> Result<PropertyResult> {
    let mut worst: f64 = 0.0;
    for case in 0..configs as u64 {
        let mut rng = rng_from_seed(split_seed(seed, case));
        let m = rng.gen_range(4..=8);
        let n = rng.gen_range(2..=3);
        let dims = ModelDims { n, d_h: rng.gen_range(2..=8), d_prime: rng.gen_range(2..=8), layers: rng.gen_range(1..=2) };
        let k = rng.gen_range(1..=3);
        let inst = Arc::new(uniform_instance(m, vec![m; n], rng.gen())?);
        let p = init_params(dims, rng.gen())?;
        let target = init_params(dims, rng.gen())?;
        let batch: Vec<Transition> = (0..3)
            .map(|j| {
                let state = AllocationState::random(m, n, &mut rng);
                let next_state = AllocationState::random(m, n, &mut rng);
                let phone = rng.gen_range(0..m - k + 1);
                Transition {
                    instance: inst.clone(),
                    graph_id: case,
                    state,
                    phone,
                    action: rng.gen_range(0..n),
                    reward: rng.gen_range(-1.0..1.0),
                    next_state,
                    next_phone: (j != 2).then(|| (phone + k).min(m - 1)),
                    frozen: None,
                }
            })
            .collect();
        let (_, mut grads) = loss_and_grad(&p, &target, &batch, 0.99)?;
        if corrupt {
            grads.scale(2.0);
        }
        worst = worst.max(finite_diff_check_against(&p, &target, &batch, 0.99, 1e-5, &grads)?);
    }
    Ok(PropertyResult { name: GRADIENT, samples: configs, measured: worst, tolerance: 1e-4 })
}

/// Relabels phones by a random permutation in both the graph and the
/// allocation and compares the permuted embedding rows.
pub fn encoder_equivariance(seed: u64, instances: usize) -> Result<PropertyResult> {
    let mut worst: f64 = 0.0;
    for case in 0..instances as u64 {
        let mut rng = rng_from_seed(split_seed(seed, case));
        let m = rng.gen_range(3..=12);
        let n = rng.gen_range(2..=4);
        let inst = uniform_instance(m, vec![m; n], rng.gen())?;
        let dims = ModelDims { n, d_h: 8, d_prime: 4, layers: rng.gen_range(1..=3) };
        let p = init_params(dims, rng.gen())?;
        let s = AllocationState::random(m, n, &mut rng);
        let mut perm: Vec<usize> = (0..m).collect();
        perm.shuffle(&mut rng);

        // New phone i is old phone perm[i].
        let w = inst.graph().weights();
        let w_perm = Array2::from_shape_fn((m, m), |(i, j)| w[[perm[i], perm[j]]]);
        let permuted = ProblemInstance::new(CommGraph::new(w_perm)?, vec![m; n], vec![1.0 / n as f64; n])?;
        let s_perm = AllocationState::new(perm.iter().map(|&i| s.host_of(i)).collect());

        let h = encode(&p.encoder, inst.w_bar(), &s, n)?.h;
        let h_perm = encode(&p.encoder, permuted.w_bar(), &s_perm, n)?.h;
        for i in 0..m {
            for c in 0..h.ncols() {
                worst = worst.max((h_perm[[i, c]] - h[[perm[i], c]]).abs());
            }
        }
    }
    Ok(PropertyResult { name: EQUIVARIANCE, samples: instances, measured: worst, tolerance: 1e-9 })
}

/// Summed step rewards of a random episode against
/// `risk(s0) − risk(sm) + β (KL(s0) − KL(sm))`.
pub fn reward_telescoping(seed: u64, episodes: usize, beta: f64) -> Result<PropertyResult> {
    let mut worst: f64 = 0.0;
    for case in 0..episodes as u64 {
        let mut rng = rng_from_seed(split_seed(seed, case));
        let m = rng.gen_range(2..=15);
        let n = rng.gen_range(1..=5);
        let inst = uniform_instance(m, vec![m; n], rng.gen())?;
        let start = AllocationState::random(m, n, &mut rng);
        let mut s = start.clone();
        let mut total = 0.0;
        for phone in 0..m {
            let mut assign = s.assign().to_vec();
            assign[phone] = rng.gen_range(0..n);
            let next = AllocationState::new(assign);
            total += step_reward(&inst, &s, &next, beta)?;
            s = next;
        }
        let expected =
            risk(&inst, &start)? - risk(&inst, &s)? + beta * (kl_penalty(&inst, &start) - kl_penalty(&inst, &s));
        worst = worst.max((total - expected).abs());
    }
    Ok(PropertyResult { name: TELESCOPING, samples: episodes, measured: worst, tolerance: 1e-9 })
}

pub fn risk_enumeration(seed: u64, states: usize) -> Result<PropertyResult> {
    let mut worst: f64 = 0.0;
    for case in 0..states as u64 {
        let mut rng = rng_from_seed(split_seed(seed, case));
        let m = rng.gen_range(2..=30);
        let n = rng.gen_range(1..=6);
        let inst = uniform_instance(m, vec![m; n], rng.gen())?;
        let s = AllocationState::random(m, n, &mut rng);
        worst = worst.max((risk(&inst, &s)? - pair_risk(inst.w_bar(), s.assign())).abs());
    }
    Ok(PropertyResult { name: RISK_ENUMERATION, samples: states, measured: worst, tolerance: 1e-12 })
}

/// Largest amount by which any solver beats brute force on instances with
/// n^m ≤ 10^5. A randomly initialized model stands in for `rl`.
pub fn oracle_dominance(seed: u64, instances: usize) -> Result<PropertyResult> {
    let registry = SolverRegistry::with_baselines();
    let mut worst = f64::NEG_INFINITY;
    for case in 0..instances as u64 {
        let mut rng = rng_from_seed(split_seed(seed, case));
        let n = rng.gen_range(2..=3);
        let m = rng.gen_range(3..=if n == 2 { 12 } else { 9 });
        let caps = random_caps(m, n, &mut rng);
        let inst = uniform_instance(m, caps, rng.gen())?;
        let best = brute_force(&inst)?.risk;
        let dims = ModelDims { n, d_h: 8, d_prime: 4, layers: 2 };
        let rl = RlSolver::new(Arc::new(init_params(dims, rng.gen())?), 1.0);
        let solve_seed = rng.gen();
        for name in registry.names().filter(|&s| s != "brute_force") {
            let out = registry.get(name).expect("registered").solve(&inst, solve_seed)?;
            if out.feasible {
                worst = worst.max(best - out.risk);
            }
        }
        let out = qapcore::solver::Solver::solve(&rl, &inst, solve_seed)?;
        if out.feasible {
            worst = worst.max(best - out.risk);
        }
    }
    Ok(PropertyResult { name: ORACLE_DOMINANCE, samples: instances, measured: worst.max(0.0), tolerance: 1e-9 })
}

/// Frank–Wolfe results stay in the transportation polytope and the best
/// objective never increases. Reports the worst violation.
pub fn polytope_invariants(seed: u64, instances: usize) -> Result<PropertyResult> {
    let mut worst: f64 = 0.0;
    for case in 0..instances as u64 {
        let mut rng = rng_from_seed(split_seed(seed, case));
        let m = rng.gen_range(5..=40);
        let n = rng.gen_range(2..=5);
        let caps = random_caps(m, n, &mut rng);
        let inst = uniform_instance(m, caps.clone(), rng.gen())?;
        let relax = qp_relax_solve(&inst, 200, rng.gen())?;
        let x = relax.x.matrix();
        for row in x.rows() {
            worst = worst.max((row.sum() - 1.0).abs());
            worst = worst.max(row.iter().map(|v| (-v).max(0.0)).fold(0.0, f64::max));
        }
        for (j, col) in x.columns().into_iter().enumerate() {
            worst = worst.max(col.sum() - caps[j] as f64);
        }
        for pair in relax.history.windows(2) {
            worst = worst.max(pair[1] - pair[0]);
        }
        worst = worst.max((relax.objective - relax.x.objective(inst.w_bar())).abs());
    }
    Ok(PropertyResult { name: POLYTOPE, samples: instances, measured: worst, tolerance: 1e-9 })
}

/// The linear oracle against exhaustive enumeration of feasible vertices on
/// random 6×3 cost matrices.
pub fn lmo_exactness(seed: u64, matrices: usize) -> Result<PropertyResult> {
    let (m, n) = (6, 3);
    let mut worst: f64 = 0.0;
    for case in 0..matrices as u64 {
        let mut rng = rng_from_seed(split_seed(seed, case));
        let cost = Array2::from_shape_fn((m, n), |_| rng.gen_range(-1.0..1.0));
        let caps = random_caps(m, n, &mut rng);
        let x = lmo_transportation(&cost, &caps)?;
        let got = (x.matrix() * &cost).sum();
        let mut best = f64::INFINITY;
        for_each_assignment(m, n, |a| {
            if fits(a, &caps) {
                best = best.min(a.iter().enumerate().map(|(i, &h)| cost[[i, h]]).sum());
            }
        });
        worst = worst.max((got - best).abs());
        if !x.respects(&caps) {
            worst = f64::INFINITY;
        }
    }
    Ok(PropertyResult { name: LMO_EXACTNESS, samples: matrices, measured: worst, tolerance: 1e-9 })
}
