//! Experiment configuration and seed derivation.

use std::path::{Path, PathBuf};

use qapcore::agent::TrainConfig;
use qapcore::rng::{mix64, split_seed};
use qapcore::sampler::{GraphFamily, InstanceSampler};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{BenchError, Result};

pub const CONFIG_VERSION: u32 = 1;

/// Index reserved for the training-run seed; instance indices never reach it.
const TRAIN_SEED_INDEX: u64 = u64::MAX;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub version: u32,
    #[serde(default)]
    pub family: GraphFamily,
    /// Phones per training graph.
    #[serde(default = "default_train_m")]
    pub train_m: usize,
    /// Phone counts of the evaluation sweep.
    #[serde(default = "default_eval_sizes")]
    pub eval_sizes: Vec<usize>,
    /// Host count; must match `relative_capacities` when given.
    #[serde(default)]
    pub n: Option<usize>,
    #[serde(default = "default_relative_capacities")]
    pub relative_capacities: Vec<f64>,
    #[serde(default)]
    pub train: TrainConfig,
    /// Instances per evaluation size.
    #[serde(default = "default_eval_batch")]
    pub eval_batch: usize,
    #[serde(default = "default_out_dir")]
    pub out_dir: PathBuf,
    #[serde(default)]
    pub master_seed: u64,
    /// Episodes between intermediate checkpoints; 0 writes only the final one.
    #[serde(default)]
    pub checkpoint_every: usize,
    /// Methods for `compare` when `--methods` is not given.
    #[serde(default = "default_methods")]
    pub methods: Vec<String>,
}

fn default_train_m() -> usize {
    100
}
fn default_eval_sizes() -> Vec<usize> {
    vec![40, 60, 80, 100]
}
fn default_relative_capacities() -> Vec<f64> {
    vec![0.1, 0.1, 0.2, 0.3, 0.3]
}
fn default_eval_batch() -> usize {
    50
}
fn default_out_dir() -> PathBuf {
    PathBuf::from("runs")
}
fn default_methods() -> Vec<String> {
    ["rl", "qp", "greedy", "local_search", "random"].map(String::from).to_vec()
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            version: CONFIG_VERSION,
            family: GraphFamily::default(),
            train_m: default_train_m(),
            eval_sizes: default_eval_sizes(),
            n: None,
            relative_capacities: default_relative_capacities(),
            train: TrainConfig::default(),
            eval_batch: default_eval_batch(),
            out_dir: default_out_dir(),
            master_seed: 0,
            checkpoint_every: 0,
            methods: default_methods(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| BenchError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| BenchError::io(path, e))?;
        Self::from_json(&text).map_err(|e| match e {
            BenchError::Config(msg) => BenchError::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(BenchError::Config(msg));
        if self.version != CONFIG_VERSION {
            return fail(format!("unsupported config version {} (expected {CONFIG_VERSION})", self.version));
        }
        if self.eval_sizes.is_empty() {
            return fail("eval_sizes is empty".into());
        }
        if self.eval_batch == 0 {
            return fail("eval_batch must be at least 1".into());
        }
        if let Some(n) = self.n {
            if n != self.relative_capacities.len() {
                return fail(format!("n = {n} but {} relative capacities", self.relative_capacities.len()));
            }
        }
        self.train.validate()?;
        for &m in self.eval_sizes.iter().chain([&self.train_m]) {
            self.family.sampler(m, &self.relative_capacities)?;
        }
        if self.train.k > self.train_m {
            return fail(format!("k = {} exceeds train_m = {}", self.train.k, self.train_m));
        }
        Ok(())
    }

    pub fn hosts(&self) -> usize {
        self.relative_capacities.len()
    }

    pub fn sampler(&self, m: usize) -> Result<Box<dyn InstanceSampler>> {
        Ok(self.family.sampler(m, &self.relative_capacities)?)
    }

    /// Training settings with the seed derived from the master seed.
    pub fn effective_train(&self) -> TrainConfig {
        TrainConfig { seed: split_seed(self.master_seed, TRAIN_SEED_INDEX), ..self.train.clone() }
    }

    /// First 16 hex digits of SHA-256 over the canonical JSON form.
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(serde_json::to_vec(self).expect("config serializes"));
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }
}

/// Seed of evaluation instance `index` at size `m`:
/// `master ⊕ mix64((m << 32) | index)`.
pub fn instance_seed(master: u64, m: usize, index: usize) -> u64 {
    master ^ mix64(((m as u64) << 32) | index as u64)
}

/// Seed handed to every method solving that instance (random starts,
/// shuffles); shared so all methods see the same draw.
pub fn solve_seed(instance_seed: u64) -> u64 {
    split_seed(instance_seed, 1)
}
