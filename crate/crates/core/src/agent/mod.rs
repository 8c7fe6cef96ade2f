//! k-step Q-learning: ε-greedy rollouts over the phones of a graph, a replay
//! memory of k-step transitions, a periodically synced target network and
//! Adam updates after every push.

mod adam;
mod config;
mod episode;
mod policy;
mod replay;
mod rl_solver;
mod train;

pub use adam::{adam_step, adam_update_slices, AdamConfig, OptimizerState};
pub use config::{ContextMode, HeadInit, NetworkShape, RolloutStart, TrainConfig, VisitOrder};
pub use episode::{greedy_rollout, run_episode, EpisodeStats, Learner, RolloutOptions, RolloutResult};
pub use policy::{argmax, select_action, EpsilonSchedule};
pub use replay::{FrozenContexts, ReplayMemory, Transition};
pub use rl_solver::RlSolver;
pub use train::{init_seed, train, train_with_observer, CurveRecord, TrainOutput, CURVE_HEADER};
