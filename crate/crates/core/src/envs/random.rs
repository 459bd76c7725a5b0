use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mdp::TabularMdp;

/// Random MDP with rewards in `[0, 1]` and `branching` distinct successors
/// per state-action pair.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RandomMdpConfig {
    pub num_states: usize,
    pub num_actions: usize,
    pub branching: usize,
    pub discount: f64,
    pub seed: u64,
}

impl RandomMdpConfig {
    pub fn small(seed: u64) -> Self {
        Self {
            num_states: 8,
            num_actions: 3,
            branching: 2,
            discount: 0.9,
            seed,
        }
    }
}

pub fn random_mdp(config: &RandomMdpConfig) -> Result<TabularMdp> {
    let (n, m) = (config.num_states, config.num_actions);
    if n == 0 || m == 0 || config.branching == 0 {
        return Err(Error::invalid(
            "random MDP needs positive states, actions and branching",
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let k = config.branching.min(n);
    let mut rewards = Vec::with_capacity(n * m);
    let mut successors = Vec::with_capacity(n * m);
    for _ in 0..n * m {
        rewards.push(rng.gen::<f64>());
        let targets = sample(&mut rng, n, k);
        let weights: Vec<f64> = (0..k).map(|_| rng.gen_range(0.05..1.0)).collect();
        let total: f64 = weights.iter().sum();
        let mut row: Vec<(usize, f64)> = targets
            .iter()
            .zip(&weights)
            .map(|(t, w)| (t, w / total))
            .collect();
        let head: f64 = row[..k - 1].iter().map(|&(_, p)| p).sum();
        row[k - 1].1 = 1.0 - head;
        successors.push(row);
    }
    TabularMdp::from_flat(n, m, config.discount, rewards, successors)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_per_seed() {
        let a = random_mdp(&RandomMdpConfig::small(3)).unwrap();
        let b = random_mdp(&RandomMdpConfig::small(3)).unwrap();
        let c = random_mdp(&RandomMdpConfig::small(4)).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert!(a.rewards_in_unit_interval());
        for s in 0..a.num_states() {
            for act in 0..a.num_actions() {
                assert_eq!(a.successors(s, act).len(), 2);
            }
        }
    }
}
