use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{LayeredMdp, Policy};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Step {
    pub state: usize,
    pub action: usize,
    pub reward: f64,
    /// `None` at the last layer (terminal sink).
    pub next_state: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub steps: Vec<Step>,
}

impl Trajectory {
    pub fn total_reward(&self) -> f64 {
        self.steps.iter().map(|s| s.reward).sum()
    }
}

pub fn categorical<R: Rng + ?Sized>(rng: &mut R, probs: impl IntoIterator<Item = (usize, f64)>) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    let mut last = 0;
    for (i, p) in probs {
        if p <= 0.0 {
            continue;
        }
        acc += p;
        last = i;
        if u < acc {
            return i;
        }
    }
    last
}

pub fn sample_trajectory(mdp: &LayeredMdp, policy: &Policy, seed: u64) -> Trajectory {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    sample_with(mdp, policy, &mut rng)
}

/// Samples one episode using a caller-owned RNG.
pub fn sample_with<R: Rng + ?Sized>(mdp: &LayeredMdp, policy: &Policy, rng: &mut R) -> Trajectory {
    let hz = mdp.horizon();
    let mut steps = Vec::with_capacity(hz);
    let mut x = mdp.initial_state();
    for h in 0..hz {
        let action = match policy.action(h, x) {
            Some(a) => a,
            None => categorical(rng, policy.dist(h, x).iter().copied().enumerate()),
        };
        let reward = mdp.reward(h, x, action);
        let next_state = if h + 1 < hz {
            Some(categorical(rng, mdp.next(h, x, action).iter().copied()))
        } else {
            None
        };
        steps.push(Step {
            state: x,
            action,
            reward,
            next_state,
        });
        if let Some(y) = next_state {
            x = y;
        }
    }
    Trajectory { steps }
}
