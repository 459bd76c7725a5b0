//! Forward exhaustive tree search.
//!
//! The tree rooted at `s` with depth `h` expands every action at every
//! internal node and every successor with positive probability. Each
//! (node, action) expansion is one simulator query; no expansion is ever
//! shared between branches, so the charged count is that of the full tree.
//!
//! Identical subtrees (same state, same remaining depth) have identical
//! values and counts, so they are evaluated once per root and reused. This
//! changes running time only: values are bit-identical to the naive
//! recursion and the count is the naive count.

use crate::mdp::TabularMdp;

#[derive(Clone, Copy)]
struct Entry {
    stamp: u32,
    value: f64,
    queries: u64,
}

pub(crate) struct TreeSearch<'a> {
    mdp: &'a TabularMdp,
    leaf: &'a [f64],
    memo: Vec<Entry>,
    stamp: u32,
}

impl<'a> TreeSearch<'a> {
    pub(crate) fn new(mdp: &'a TabularMdp, leaf: &'a [f64]) -> Self {
        Self {
            mdp,
            leaf,
            memo: Vec::new(),
            stamp: 0,
        }
    }

    /// Action values at the root and the number of queries of the tree.
    pub(crate) fn root(&mut self, state: usize, depth: usize) -> (Vec<f64>, u64) {
        debug_assert!(depth >= 1);
        let needed = depth * self.mdp.num_states();
        if self.memo.len() < needed {
            self.memo.resize(
                needed,
                Entry {
                    stamp: 0,
                    value: 0.0,
                    queries: 0,
                },
            );
        }
        self.stamp = self.stamp.wrapping_add(1);
        if self.stamp == 0 {
            self.memo.iter_mut().for_each(|e| e.stamp = 0);
            self.stamp = 1;
        }
        let mut queries = 0u64;
        let row = (0..self.mdp.num_actions())
            .map(|a| {
                let (q, count) = self.expand(state, a, depth - 1);
                queries = queries.saturating_add(count);
                q
            })
            .collect();
        (row, queries)
    }

    /// Value of taking `action` at `state` followed by the best plan over
    /// `remaining` further steps. Mirrors `TabularMdp::backup` exactly.
    fn expand(&mut self, state: usize, action: usize, remaining: usize) -> (f64, u64) {
        let mut queries = 1u64;
        let mut expected = 0.0;
        for &(next, p) in self.mdp.successors(state, action) {
            if p > 0.0 {
                let (w, count) = self.node(next, remaining);
                queries = queries.saturating_add(count);
                expected += p * w;
            }
        }
        (
            self.mdp.reward(state, action) + self.mdp.discount() * expected,
            queries,
        )
    }

    /// `W_remaining(state)`, i.e. `T^remaining[leaf](state)` via expansion.
    fn node(&mut self, state: usize, remaining: usize) -> (f64, u64) {
        if remaining == 0 {
            return (self.leaf[state], 0);
        }
        let slot = (remaining - 1) * self.mdp.num_states() + state;
        let entry = self.memo[slot];
        if entry.stamp == self.stamp {
            return (entry.value, entry.queries);
        }
        let mut best = f64::NEG_INFINITY;
        let mut queries = 0u64;
        for a in 0..self.mdp.num_actions() {
            let (q, count) = self.expand(state, a, remaining - 1);
            best = best.max(q);
            queries = queries.saturating_add(count);
        }
        self.memo[slot] = Entry {
            stamp: self.stamp,
            value: best,
            queries,
        };
        (best, queries)
    }
}

/// Per-state tree sizes for every depth up to `max_depth`.
///
/// `cost[h][s]` is the number of (node, action) expansions of the depth-`h`
/// tree rooted at `s`: `cost[0] = 0`,
/// `cost[h][s] = Σ_a (1 + Σ_{s' : P(s'|s,a) > 0} cost[h−1][s'])`.
#[derive(Clone, Debug)]
pub struct TreeCostTable {
    costs: Vec<Vec<u64>>,
}

impl TreeCostTable {
    pub fn new(mdp: &TabularMdp, max_depth: usize) -> Self {
        let n = mdp.num_states();
        let mut costs = vec![vec![0u64; n]];
        for h in 1..=max_depth {
            let prev = &costs[h - 1];
            let layer = (0..n)
                .map(|s| {
                    let mut total = 0u64;
                    for a in 0..mdp.num_actions() {
                        total = total.saturating_add(1);
                        for &(next, p) in mdp.successors(s, a) {
                            if p > 0.0 {
                                total = total.saturating_add(prev[next]);
                            }
                        }
                    }
                    total
                })
                .collect();
            costs.push(layer);
        }
        Self { costs }
    }

    pub fn max_depth(&self) -> usize {
        self.costs.len() - 1
    }

    pub fn cost(&self, state: usize, depth: usize) -> u64 {
        self.costs[depth][state]
    }

    /// `c̄(h)`: the largest tree over all roots.
    pub fn max_cost(&self, depth: usize) -> u64 {
        self.costs[depth].iter().copied().max().unwrap_or(0)
    }
}
