use crate::error::{Error, Result};
use crate::mdp::TabularMdp;

pub const CHAIN_UP: usize = 0;
pub const CHAIN_DOWN: usize = 1;

/// Chain of states `s_0 … s_n` plus an absorbing sink `s_{n+1}`.
///
/// `u` moves `s_i → s_{i+1}` (and loops on `s_n`), `d` drops to the sink.
/// The only nonzero reward is `r(s_n, u) = 1 − γ`, so `V⋆(s_i) = γ^{n−i}`.
pub fn build_chain(n: usize, gamma: f64) -> Result<TabularMdp> {
    if n == 0 {
        return Err(Error::invalid("chain length n must be at least 1"));
    }
    let sink = n + 1;
    let mut rewards = vec![vec![0.0, 0.0]; n + 2];
    rewards[n][CHAIN_UP] = 1.0 - gamma;
    let transitions = (0..n + 2)
        .map(|s| {
            if s == sink {
                vec![vec![(sink, 1.0)], vec![(sink, 1.0)]]
            } else {
                vec![vec![((s + 1).min(n), 1.0)], vec![(sink, 1.0)]]
            }
        })
        .collect();
    TabularMdp::new(gamma, rewards, transitions)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::solve_optimal;

    #[test]
    fn structure() {
        let mdp = build_chain(3, 0.9).unwrap();
        assert_eq!(mdp.num_states(), 5);
        assert_eq!(mdp.num_actions(), 2);
        let nonzero = (0..5)
            .flat_map(|s| (0..2).map(move |a| (s, a)))
            .filter(|&(s, a)| mdp.reward(s, a) != 0.0)
            .collect::<Vec<_>>();
        assert_eq!(nonzero, vec![(3, CHAIN_UP)]);
        assert_eq!(mdp.successors(3, CHAIN_UP), &[(3, 1.0)]);
        assert_eq!(mdp.successors(1, CHAIN_UP), &[(2, 1.0)]);
        assert_eq!(mdp.successors(4, CHAIN_UP), &[(4, 1.0)]);
        assert_eq!(mdp.successors(0, CHAIN_DOWN), &[(4, 1.0)]);
        assert!(build_chain(0, 0.9).is_err());
    }

    #[test]
    fn closed_form_optimum() {
        for &(n, gamma) in &[(1usize, 0.5), (7, 0.9), (25, 0.98)] {
            let mdp = build_chain(n, gamma).unwrap();
            let (v, _) = solve_optimal(&mdp, 1e-10).unwrap();
            assert!((v.get(n) - 1.0).abs() < 1e-9);
            for i in 0..=n {
                assert!((v.get(i) - gamma.powi((n - i) as i32)).abs() < 1e-9);
            }
            assert!(v.get(n + 1).abs() < 1e-12);
        }
    }
}
