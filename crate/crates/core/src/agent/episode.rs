use std::sync::Arc;

use ndarray::Array1;
use rand::seq::SliceRandom;
use rand::Rng;

use super::adam::{adam_step, OptimizerState};
use super::config::{ContextMode, RolloutStart, TrainConfig, VisitOrder};
use super::policy::{argmax, select_action};
use super::replay::{FrozenContexts, ReplayMemory, Transition};
use crate::error::{QapError, Result};
use crate::model::{contexts, encode, loss_and_grad, q_values, ContextPair, ModelParams};
use crate::problem::{is_feasible, kl_from_counts, kl_penalty, risk, risk_delta, AllocationState, ProblemInstance};
use crate::rng::rng_from_seed;

/// Everything the training loop mutates: online and target networks,
/// optimizer moments and the replay memory.
#[derive(Debug, Clone)]
pub struct Learner {
    pub params: ModelParams,
    pub target: ModelParams,
    pub optimizer: OptimizerState,
    pub memory: ReplayMemory,
    pub updates: u64,
}

impl Learner {
    pub fn new(params: ModelParams, replay_capacity: usize) -> Self {
        Self {
            target: params.clone(),
            optimizer: OptimizerState::for_params(&params),
            memory: ReplayMemory::new(replay_capacity),
            params,
            updates: 0,
        }
    }

    pub fn sync_target(&mut self) {
        self.target = self.params.clone();
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeStats {
    /// Sum of step rewards.
    pub total_return: f64,
    pub initial_risk: f64,
    pub final_risk: f64,
    pub initial_kl: f64,
    pub final_kl: f64,
    pub feasible: bool,
    /// Mean batch loss of every optimizer update made during the episode.
    pub losses: Vec<f64>,
    pub transitions_pushed: usize,
    /// Acting phone per step.
    pub visited: Vec<usize>,
    pub initial_state: AllocationState,
    pub final_state: AllocationState,
}

fn q_and_context(
    params: &ModelParams,
    inst: &ProblemInstance,
    s: &AllocationState,
    phone: usize,
) -> Result<(Array1<f64>, ContextPair)> {
    let e = encode(&params.encoder, inst.w_bar(), s, inst.n())?;
    let c = contexts(&e, inst.w_bar(), phone)?;
    Ok((q_values(&params.decoder, &c)?, c))
}

fn visit_order<R: Rng + ?Sized>(m: usize, order: VisitOrder, rng: &mut R) -> Vec<usize> {
    let mut phones: Vec<usize> = (0..m).collect();
    if order == VisitOrder::Shuffled {
        phones.shuffle(rng);
    }
    phones
}

/// Reward for moving `phone` to `host`, given host occupancy `counts`
/// (updated in place).
fn move_reward(
    inst: &ProblemInstance,
    s: &AllocationState,
    counts: &mut [usize],
    phone: usize,
    host: usize,
    beta: f64,
) -> f64 {
    let m = s.len();
    let kl_before = kl_from_counts(counts, m, inst.desired());
    let old = s.host_of(phone);
    counts[old] -= 1;
    counts[host] += 1;
    let kl_after = kl_from_counts(counts, m, inst.desired());
    -risk_delta(inst, s, phone, host) + beta * (kl_before - kl_after)
}

/// One training episode: random initial allocation, every phone acts once,
/// k-step transitions are pushed from step k on and each push is followed
/// by one optimizer update once the memory holds a full batch.
pub fn run_episode<R: Rng + ?Sized>(
    learner: &mut Learner,
    inst: Arc<ProblemInstance>,
    graph_id: u64,
    cfg: &TrainConfig,
    epsilon: f64,
    rng: &mut R,
) -> Result<EpisodeStats> {
    let (m, n) = (inst.m(), inst.n());
    if learner.params.n() != n {
        return Err(QapError::Dimension(format!(
            "model built for {} hosts, instance has {n}",
            learner.params.n()
        )));
    }
    let k = cfg.k;
    let frozen = cfg.context_mode == ContextMode::Frozen;
    let adam = cfg.adam();
    let order = visit_order(m, cfg.visit_order, rng);

    let mut s = AllocationState::random(m, n, rng);
    let initial_risk = risk(&inst, &s)?;
    let initial_kl = kl_penalty(&inst, &s);
    let mut counts = s.counts(n);
    let mut states = Vec::with_capacity(m + 1);
    states.push(s.clone());
    let mut actions = Vec::with_capacity(m);
    let mut rewards = Vec::with_capacity(m);
    let mut ctxs = Vec::new();
    let mut losses = Vec::new();
    let mut pushed = 0;

    for idx in 0..m {
        let phone = order[idx];
        let (q, ctx) = q_and_context(&learner.params, &inst, &s, phone)?;
        let action = select_action(q.as_slice().expect("contiguous"), epsilon, rng)?;
        let r = move_reward(&inst, &s, &mut counts, phone, action, cfg.beta);
        let mut assign = s.assign().to_vec();
        assign[phone] = action;
        s = AllocationState::new(assign);
        states.push(s.clone());
        actions.push(action);
        rewards.push(r);
        if frozen {
            ctxs.push(ctx);
        }

        if idx + 1 < k {
            continue;
        }
        let start = idx + 1 - k;
        let next_phone = order.get(idx + 1).copied();
        let frozen_ctx = if frozen {
            let next = match next_phone {
                Some(np) => Some(q_and_context(&learner.params, &inst, &s, np)?.1),
                None => None,
            };
            Some(FrozenContexts {
                context: ctxs[start].clone(),
                next,
            })
        } else {
            None
        };
        learner.memory.push(Transition {
            instance: inst.clone(),
            graph_id,
            state: states[start].clone(),
            phone: order[start],
            action: actions[start],
            reward: rewards[start..=idx].iter().sum(),
            next_state: s.clone(),
            next_phone,
            frozen: frozen_ctx,
        });
        pushed += 1;

        if learner.memory.len() >= cfg.batch_size {
            let batch = learner.memory.sample(cfg.batch_size, rng);
            let (loss, grads) = loss_and_grad(&learner.params, &learner.target, &batch, cfg.gamma)?;
            adam_step(&mut learner.params, &grads, &mut learner.optimizer, &adam)?;
            learner.updates += 1;
            if learner.updates.is_multiple_of(cfg.target_sync_every) {
                learner.sync_target();
            }
            losses.push(loss);
        }
    }

    let final_risk = risk(&inst, &s)?;
    let final_kl = kl_penalty(&inst, &s);
    Ok(EpisodeStats {
        total_return: rewards.iter().sum(),
        initial_risk,
        final_risk,
        initial_kl,
        final_kl,
        feasible: is_feasible(&inst, &s),
        losses,
        transitions_pushed: pushed,
        visited: order,
        initial_state: states.swap_remove(0),
        final_state: s,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RolloutOptions {
    pub seed: u64,
    pub beta: f64,
    pub visit_order: VisitOrder,
    pub start: RolloutStart,
}

impl Default for RolloutOptions {
    fn default() -> Self {
        Self {
            seed: 0,
            beta: 1.0,
            visit_order: VisitOrder::Ascending,
            start: RolloutStart::Random,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RolloutResult {
    pub initial: AllocationState,
    pub allocation: AllocationState,
    pub initial_risk: f64,
    pub risk: f64,
    pub initial_kl: f64,
    pub kl: f64,
    pub feasible: bool,
    /// `risk₀ − risk + β (KL₀ − KL)`, the sum of step rewards.
    pub total_return: f64,
}

/// One ε = 0 pass over the phones from a seeded initial allocation.
pub fn greedy_rollout(inst: &ProblemInstance, params: &ModelParams, opts: &RolloutOptions) -> Result<RolloutResult> {
    let (m, n) = (inst.m(), inst.n());
    if params.n() != n {
        return Err(QapError::Dimension(format!(
            "model built for {} hosts, instance has {n}",
            params.n()
        )));
    }
    let mut rng = rng_from_seed(opts.seed);
    let initial = match opts.start {
        RolloutStart::Random => AllocationState::random(m, n, &mut rng),
        RolloutStart::Greedy => crate::baselines::greedy_construct(inst)?.allocation,
    };
    let order = visit_order(m, opts.visit_order, &mut rng);
    let mut assign = initial.assign().to_vec();
    for phone in order {
        let s = AllocationState::new(assign.clone());
        let (q, _) = q_and_context(params, inst, &s, phone)?;
        assign[phone] = argmax(q.as_slice().expect("contiguous")).expect("n >= 1");
    }
    let allocation = AllocationState::new(assign);
    let initial_risk = risk(inst, &initial)?;
    let initial_kl = kl_penalty(inst, &initial);
    let final_risk = risk(inst, &allocation)?;
    let kl = kl_penalty(inst, &allocation);
    Ok(RolloutResult {
        feasible: is_feasible(inst, &allocation),
        total_return: initial_risk - final_risk + opts.beta * (initial_kl - kl),
        initial,
        allocation,
        initial_risk,
        risk: final_risk,
        initial_kl,
        kl,
    })
}
