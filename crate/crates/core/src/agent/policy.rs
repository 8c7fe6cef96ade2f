use rand::Rng;

use crate::error::{QapError, Result};

/// Index of the largest value; the lowest index wins ties.
pub fn argmax(q: &[f64]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, &x) in q.iter().enumerate() {
        match best {
            Some((_, b)) if x <= b => {}
            _ => best = Some((i, x)),
        }
    }
    best.map(|(i, _)| i)
}

/// ε-greedy: a uniformly random host with probability `epsilon`, otherwise
/// the argmax.
pub fn select_action<R: Rng + ?Sized>(q: &[f64], epsilon: f64, rng: &mut R) -> Result<usize> {
    if q.is_empty() {
        return Err(QapError::State("no actions to choose from".into()));
    }
    if !(0.0..=1.0).contains(&epsilon) {
        return Err(QapError::Config(format!("epsilon {epsilon} outside [0,1]")));
    }
    if epsilon > 0.0 && rng.gen_bool(epsilon) {
        return Ok(rng.gen_range(0..q.len()));
    }
    Ok(argmax(q).expect("non-empty"))
}

/// Linear decay from `start` to `end` over `decay_episodes`, then flat.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpsilonSchedule {
    pub start: f64,
    pub end: f64,
    pub decay_episodes: usize,
}

impl EpsilonSchedule {
    /// Epsilon for the 0-based `episode`.
    pub fn at(&self, episode: usize) -> f64 {
        if self.decay_episodes == 0 {
            return self.end;
        }
        if episode >= self.decay_episodes {
            return self.end;
        }
        let frac = episode as f64 / self.decay_episodes as f64;
        (self.start + (self.end - self.start) * frac).clamp(self.end, self.start)
    }
}
