//! Capacity-constrained quadratic assignment of phone clones to hosts.
//!
//! The crate bundles instance generation ([`graph`]), the risk objective and
//! reward shaping ([`problem`]), a message-passing Q-network with exact
//! gradients ([`model`]), k-step Q-learning ([`agent`]) and classical solvers
//! ([`baselines`]). Every solver, learned or classical, implements
//! [`solver::Solver`] and can be looked up by name in a
//! [`solver::SolverRegistry`].

pub mod agent;
pub mod baselines;
pub mod error;
pub mod fmt;
pub mod graph;
pub mod model;
pub mod problem;
pub mod rng;
pub mod sampler;
pub mod solver;

pub use error::{QapError, Result};
pub use graph::{CommGraph, SbmConfig};
pub use problem::{AllocationState, ProblemInstance};
