use std::collections::VecDeque;
use std::sync::Arc;

use rand::Rng;

use crate::model::ContextPair;
use crate::problem::{AllocationState, ProblemInstance};

/// Context vectors captured at push time, for the literal tuple-storing mode.
#[derive(Debug, Clone, PartialEq)]
pub struct FrozenContexts {
    pub context: ContextPair,
    /// `None` on terminal transitions.
    pub next: Option<ContextPair>,
}

/// One k-step experience: the state before `phone` acted, the action taken,
/// the reward accumulated over the next k steps and the state k steps later.
#[derive(Debug, Clone)]
pub struct Transition {
    pub instance: Arc<ProblemInstance>,
    pub graph_id: u64,
    pub state: AllocationState,
    pub phone: usize,
    pub action: usize,
    pub reward: f64,
    pub next_state: AllocationState,
    /// Phone about to act in `next_state`; `None` marks the end of the episode.
    pub next_phone: Option<usize>,
    pub frozen: Option<FrozenContexts>,
}

impl Transition {
    pub fn terminal(&self) -> bool {
        self.next_phone.is_none()
    }
}

/// FIFO ring buffer with uniform sampling.
#[derive(Debug, Clone)]
pub struct ReplayMemory {
    capacity: usize,
    items: VecDeque<Transition>,
}

impl ReplayMemory {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "replay capacity must be positive");
        Self {
            capacity,
            items: VecDeque::with_capacity(capacity.min(1 << 16)),
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    /// Inserts, evicting the oldest entry when full.
    pub fn push(&mut self, tr: Transition) {
        if self.items.len() == self.capacity {
            self.items.pop_front();
        }
        self.items.push_back(tr);
    }

    /// `count` i.i.d. uniform draws (with replacement).
    pub fn sample<R: Rng + ?Sized>(&self, count: usize, rng: &mut R) -> Vec<Transition> {
        if self.items.is_empty() {
            return Vec::new();
        }
        (0..count)
            .map(|_| self.items[rng.gen_range(0..self.items.len())].clone())
            .collect()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Transition> {
        self.items.iter()
    }
}
