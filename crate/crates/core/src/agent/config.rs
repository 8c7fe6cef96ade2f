use serde::{Deserialize, Serialize};

use super::adam::AdamConfig;
use super::policy::EpsilonSchedule;
use crate::error::{QapError, Result};
use crate::model::ModelDims;

/// How the loss reaches the encoder.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ContextMode {
    /// Store allocation snapshots and recompute embeddings at training time,
    /// so gradients flow through the whole network.
    #[default]
    Recompute,
    /// Store context vectors as constants; only the decoder learns.
    Frozen,
}

/// Order in which phones act within an episode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum VisitOrder {
    #[default]
    Ascending,
    Shuffled,
}

/// Initial allocation for evaluation rollouts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum RolloutStart {
    #[default]
    Random,
    /// Start from the greedy constructive heuristic.
    Greedy,
}

/// Starting values of the output layer `θ6`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum HeadInit {
    /// Zeros, so every Q value starts at 0 and early TD targets are bounded
    /// by the rewards. The remaining tensors keep their Glorot draws.
    #[default]
    Zero,
    /// Glorot uniform like every other tensor.
    Glorot,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkShape {
    pub d_h: usize,
    pub d_prime: usize,
    pub layers: usize,
}

impl Default for NetworkShape {
    fn default() -> Self {
        Self {
            d_h: 64,
            d_prime: 32,
            layers: 3,
        }
    }
}

impl NetworkShape {
    pub fn with_hosts(&self, n: usize) -> ModelDims {
        ModelDims {
            n,
            d_h: self.d_h,
            d_prime: self.d_prime,
            layers: self.layers,
        }
    }
}

/// Hyperparameters of k-step Q-learning.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub episodes: usize,
    pub replay_capacity: usize,
    pub batch_size: usize,
    pub k: usize,
    pub gamma: f64,
    pub epsilon_start: f64,
    pub epsilon_end: f64,
    /// Episodes over which epsilon decays linearly; defaults to half the run.
    pub epsilon_decay_episodes: Option<usize>,
    pub learning_rate: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    pub target_sync_every: u64,
    /// Weight of the KL penalty in the reward.
    pub beta: f64,
    pub seed: u64,
    pub model: NetworkShape,
    pub head_init: HeadInit,
    pub context_mode: ContextMode,
    pub visit_order: VisitOrder,
    /// Graphs in the fixed evaluation batch scored after every episode.
    pub eval_batch: usize,
    pub eval_start: RolloutStart,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            episodes: 300,
            replay_capacity: 10_000,
            batch_size: 32,
            k: 4,
            gamma: 0.99,
            epsilon_start: 1.0,
            epsilon_end: 0.05,
            epsilon_decay_episodes: None,
            learning_rate: 1e-3,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
            target_sync_every: 100,
            beta: 1.0,
            seed: 0,
            model: NetworkShape::default(),
            head_init: HeadInit::Zero,
            context_mode: ContextMode::Recompute,
            visit_order: VisitOrder::Ascending,
            eval_batch: 8,
            eval_start: RolloutStart::Random,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(QapError::Config(msg));
        if self.episodes == 0 {
            return fail("episodes must be at least 1".into());
        }
        if self.batch_size == 0 || self.replay_capacity < self.batch_size {
            return fail(format!(
                "need replay_capacity >= batch_size >= 1 (got {} and {})",
                self.replay_capacity, self.batch_size
            ));
        }
        if self.k == 0 {
            return fail("k must be at least 1".into());
        }
        if !(0.0..=1.0).contains(&self.gamma) {
            return fail(format!("gamma {} outside [0,1]", self.gamma));
        }
        for (name, e) in [("epsilon_start", self.epsilon_start), ("epsilon_end", self.epsilon_end)] {
            if !(0.0..=1.0).contains(&e) {
                return fail(format!("{name} {e} outside [0,1]"));
            }
        }
        if self.epsilon_end > self.epsilon_start {
            return fail("epsilon_end must not exceed epsilon_start".into());
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return fail(format!("learning rate {} must be finite and >= 0", self.learning_rate));
        }
        for (name, b) in [("adam_beta1", self.adam_beta1), ("adam_beta2", self.adam_beta2)] {
            if !(0.0..1.0).contains(&b) {
                return fail(format!("{name} {b} outside [0,1)"));
            }
        }
        if self.adam_eps.is_nan() || self.adam_eps <= 0.0 {
            return fail("adam_eps must be positive".into());
        }
        if self.target_sync_every == 0 {
            return fail("target_sync_every must be at least 1".into());
        }
        if !self.beta.is_finite() || self.beta < 0.0 {
            return fail(format!("beta {} must be finite and >= 0", self.beta));
        }
        if self.eval_batch == 0 {
            return fail("eval_batch must be at least 1".into());
        }
        self.model.with_hosts(1).validate()
    }

    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            learning_rate: self.learning_rate,
            beta1: self.adam_beta1,
            beta2: self.adam_beta2,
            eps: self.adam_eps,
        }
    }

    pub fn epsilon_schedule(&self) -> EpsilonSchedule {
        EpsilonSchedule {
            start: self.epsilon_start,
            end: self.epsilon_end,
            decay_episodes: self.epsilon_decay_episodes.unwrap_or(self.episodes.div_ceil(2)),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        let cfg = TrainConfig::default();
        cfg.validate().unwrap();
        assert_eq!(cfg.model, NetworkShape { d_h: 64, d_prime: 32, layers: 3 });
        assert_eq!((cfg.k, cfg.batch_size, cfg.replay_capacity), (4, 32, 10_000));
        assert_eq!(cfg.target_sync_every, 100);
    }

    #[test]
    fn validation_rejects_bad_values() {
        let bad = [
            TrainConfig { episodes: 0, ..Default::default() },
            TrainConfig { batch_size: 20, replay_capacity: 10, ..Default::default() },
            TrainConfig { k: 0, ..Default::default() },
            TrainConfig { gamma: 1.5, ..Default::default() },
            TrainConfig { epsilon_start: 0.1, epsilon_end: 0.5, ..Default::default() },
            TrainConfig { learning_rate: f64::NAN, ..Default::default() },
            TrainConfig { target_sync_every: 0, ..Default::default() },
        ];
        for cfg in bad {
            assert!(matches!(cfg.validate(), Err(QapError::Config(_))), "{cfg:?}");
        }
    }

    #[test]
    fn json_rejects_unknown_keys() {
        let ok: TrainConfig = serde_json::from_str(r#"{"episodes": 3, "context_mode": "frozen"}"#).unwrap();
        assert_eq!(ok.episodes, 3);
        assert_eq!(ok.context_mode, ContextMode::Frozen);
        assert!(serde_json::from_str::<TrainConfig>(r#"{"episodez": 3}"#).is_err());
    }
}
