use std::sync::Arc;

use super::config::{HeadInit, TrainConfig};
use super::episode::{greedy_rollout, run_episode, Learner, RolloutOptions};
use crate::error::{QapError, Result};
use crate::fmt::fmt9;
use crate::model::{init_params, ModelParams};
use crate::problem::ProblemInstance;
use crate::rng::{rng_from_seed, stream_seed};
use crate::sampler::InstanceSampler;

const STREAM_INIT: u64 = 1;
const STREAM_AGENT: u64 = 2;
const STREAM_TRAIN_GRAPH: u64 = 3;
const STREAM_EVAL_GRAPH: u64 = 4;
const STREAM_EVAL_START: u64 = 5;

pub const CURVE_HEADER: &str = "episode,mean_return,mean_final_risk,mean_final_kl,feasible_fraction,loss_mean,epsilon";

/// Per-episode learning curve entry. The `mean_*` fields and
/// `feasible_fraction` average greedy rollouts over the fixed evaluation
/// batch, scored right after the episode.
#[derive(Debug, Clone, PartialEq)]
pub struct CurveRecord {
    /// 1-based.
    pub episode: usize,
    pub mean_return: f64,
    pub mean_final_risk: f64,
    pub mean_final_kl: f64,
    pub feasible_fraction: f64,
    /// `None` when no update happened during the episode.
    pub loss_mean: Option<f64>,
    pub epsilon: f64,
    /// Return of the ε-greedy training episode itself.
    pub train_return: f64,
}

impl CurveRecord {
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{}",
            self.episode,
            fmt9(self.mean_return),
            fmt9(self.mean_final_risk),
            fmt9(self.mean_final_kl),
            fmt9(self.feasible_fraction),
            self.loss_mean.map(fmt9).unwrap_or_default(),
            fmt9(self.epsilon)
        )
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutput {
    pub params: ModelParams,
    /// Seed the parameters were initialized from.
    pub init_seed: u64,
    pub curve: Vec<CurveRecord>,
    pub updates: u64,
}

/// Seed the model parameters of a run under `cfg` are drawn from.
pub fn init_seed(cfg: &TrainConfig) -> u64 {
    stream_seed(cfg.seed, STREAM_INIT, 0)
}

pub fn train(sampler: &dyn InstanceSampler, cfg: &TrainConfig) -> Result<TrainOutput> {
    train_with_observer(sampler, cfg, &mut |_, _| Ok(()))
}

/// Runs `cfg.episodes` episodes, each on a fresh graph from `sampler`.
/// `observer` sees the parameters after every episode (1-based index).
pub fn train_with_observer(
    sampler: &dyn InstanceSampler,
    cfg: &TrainConfig,
    observer: &mut dyn FnMut(usize, &ModelParams) -> Result<()>,
) -> Result<TrainOutput> {
    cfg.validate()?;
    if cfg.k > sampler.m() {
        return Err(QapError::Config(format!(
            "k = {} exceeds the {} phones per graph",
            cfg.k,
            sampler.m()
        )));
    }
    let eval_set: Vec<ProblemInstance> = (0..cfg.eval_batch as u64)
        .map(|j| sampler.sample(stream_seed(cfg.seed, STREAM_EVAL_GRAPH, j)))
        .collect::<Result<_>>()?;
    let init_seed = init_seed(cfg);
    let mut params = init_params(cfg.model.with_hosts(sampler.n()), init_seed)?;
    if cfg.head_init == HeadInit::Zero {
        params.decoder.theta6.fill(0.0);
    }
    let mut learner = Learner::new(params, cfg.replay_capacity);
    let mut rng = rng_from_seed(stream_seed(cfg.seed, STREAM_AGENT, 0));
    let schedule = cfg.epsilon_schedule();
    let mut curve = Vec::with_capacity(cfg.episodes);

    for episode in 0..cfg.episodes {
        let graph_seed = stream_seed(cfg.seed, STREAM_TRAIN_GRAPH, episode as u64);
        let inst = Arc::new(sampler.sample(graph_seed)?);
        let epsilon = schedule.at(episode);
        let stats = run_episode(&mut learner, inst, graph_seed, cfg, epsilon, &mut rng)?;

        let (mut ret, mut risk, mut kl, mut feasible) = (0.0, 0.0, 0.0, 0usize);
        for (j, inst) in eval_set.iter().enumerate() {
            let opts = RolloutOptions {
                seed: stream_seed(cfg.seed, STREAM_EVAL_START, j as u64),
                beta: cfg.beta,
                visit_order: cfg.visit_order,
                start: cfg.eval_start,
            };
            let r = greedy_rollout(inst, &learner.params, &opts)?;
            ret += r.total_return;
            risk += r.risk;
            kl += r.kl;
            feasible += r.feasible as usize;
        }
        let b = eval_set.len() as f64;
        let loss_mean = (!stats.losses.is_empty())
            .then(|| stats.losses.iter().sum::<f64>() / stats.losses.len() as f64);
        curve.push(CurveRecord {
            episode: episode + 1,
            mean_return: ret / b,
            mean_final_risk: risk / b,
            mean_final_kl: kl / b,
            feasible_fraction: feasible as f64 / b,
            loss_mean,
            epsilon,
            train_return: stats.total_return,
        });
        observer(episode + 1, &learner.params)?;
    }
    Ok(TrainOutput {
        params: learner.params,
        init_seed,
        curve,
        updates: learner.updates,
    })
}
