//! h-step lookahead improvement and the simulator-query cost model.
//!
//! `Q_h(s, a) = r(s,a) + γ E[W_{h−1}(s')]` with `W_0 = v` and
//! `W_i = T[W_{i−1}]`. Two interchangeable backends compute it:
//!
//! - [`LookaheadBackend::Tree`] expands the depth-h tree from `s` and charges
//!   one improvement query per (node, action) expansion.
//! - [`LookaheadBackend::Dp`] builds the layers `W_i` by full Bellman sweeps
//!   (charging `S` evaluation queries per new layer) and shares them across
//!   every state improved with the same bootstrap vector.

mod ledger;
mod tree;

pub use ledger::QueryLedger;
pub use tree::TreeCostTable;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mdp::{bellman_backup, ActionValueTable, TabularMdp, ValueFunction};
use tree::TreeSearch;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LookaheadBackend {
    #[default]
    Tree,
    Dp,
}

impl std::str::FromStr for LookaheadBackend {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tree" => Ok(LookaheadBackend::Tree),
            "dp" => Ok(LookaheadBackend::Dp),
            other => Err(Error::invalid(format!(
                "unknown lookahead backend `{other}` (expected `tree` or `dp`)"
            ))),
        }
    }
}

/// Roots below this count are expanded on the calling thread.
const PARALLEL_ROOTS: usize = 16;

/// Lookahead over a fixed bootstrap vector.
///
/// Holds the DP layers so that several improvement calls within one policy
/// iteration share them.
pub struct Lookahead<'a> {
    mdp: &'a TabularMdp,
    backend: LookaheadBackend,
    layers: Vec<Vec<f64>>,
}

impl<'a> Lookahead<'a> {
    pub fn new(mdp: &'a TabularMdp, v: &ValueFunction, backend: LookaheadBackend) -> Result<Self> {
        mdp.check_value(v)?;
        Ok(Self {
            mdp,
            backend,
            layers: vec![v.as_slice().to_vec()],
        })
    }

    pub fn backend(&self) -> LookaheadBackend {
        self.backend
    }

    fn ensure_layers(&mut self, upto: usize, ledger: &mut QueryLedger) {
        while self.layers.len() <= upto {
            let next = bellman_backup(self.mdp, self.layers.last().expect("layer 0 exists"));
            self.layers.push(next);
            ledger.charge_eval(self.mdp.num_states() as u64);
        }
    }

    /// `Q_h(s, ·)`.
    pub fn q_values(
        &mut self,
        state: usize,
        depth: usize,
        ledger: &mut QueryLedger,
    ) -> Result<Vec<f64>> {
        check_depth(depth)?;
        self.mdp.check_state(state)?;
        Ok(match self.backend {
            LookaheadBackend::Tree => {
                let (row, queries) = TreeSearch::new(self.mdp, &self.layers[0]).root(state, depth);
                ledger.charge_improve(depth, queries);
                row
            }
            LookaheadBackend::Dp => {
                self.ensure_layers(depth - 1, ledger);
                self.dp_row(state, depth)
            }
        })
    }

    fn dp_row(&self, state: usize, depth: usize) -> Vec<f64> {
        let w = &self.layers[depth - 1];
        (0..self.mdp.num_actions())
            .map(|a| self.mdp.backup(state, a, w))
            .collect()
    }

    /// Overwrites the rows of `table` at `states` with `Q_h` values; other rows
    /// are untouched.
    pub fn improve_states(
        &mut self,
        states: &[usize],
        depth: usize,
        ledger: &mut QueryLedger,
        table: &mut ActionValueTable,
    ) -> Result<()> {
        check_depth(depth)?;
        for &s in states {
            self.mdp.check_state(s)?;
        }
        if states.is_empty() {
            return Ok(());
        }
        match self.backend {
            LookaheadBackend::Tree => {
                let mdp = self.mdp;
                let leaf = &self.layers[0];
                let rows: Vec<(Vec<f64>, u64)> = if states.len() < PARALLEL_ROOTS {
                    let mut search = TreeSearch::new(mdp, leaf);
                    states.iter().map(|&s| search.root(s, depth)).collect()
                } else {
                    states
                        .par_iter()
                        .map_init(
                            || TreeSearch::new(mdp, leaf),
                            |search, &s| search.root(s, depth),
                        )
                        .collect()
                };
                let mut queries = 0u64;
                for (&s, (row, count)) in states.iter().zip(rows) {
                    table.set_row(s, &row);
                    queries = queries.saturating_add(count);
                }
                ledger.charge_improve(depth, queries);
            }
            LookaheadBackend::Dp => {
                self.ensure_layers(depth - 1, ledger);
                for &s in states {
                    let row = self.dp_row(s, depth);
                    table.set_row(s, &row);
                }
            }
        }
        Ok(())
    }
}

fn check_depth(depth: usize) -> Result<()> {
    if depth >= 1 {
        Ok(())
    } else {
        Err(Error::invalid("lookahead depth must be at least 1"))
    }
}

/// `Q_h(s, ·)` for a single state with a fresh lookahead scope.
pub fn q_h_state(
    mdp: &TabularMdp,
    v: &ValueFunction,
    depth: usize,
    state: usize,
    backend: LookaheadBackend,
    ledger: &mut QueryLedger,
) -> Result<Vec<f64>> {
    Lookahead::new(mdp, v, backend)?.q_values(state, depth, ledger)
}

/// Improves `states` into `table` with a fresh lookahead scope.
pub fn improve_states(
    mdp: &TabularMdp,
    v: &ValueFunction,
    states: &[usize],
    depth: usize,
    backend: LookaheadBackend,
    ledger: &mut QueryLedger,
    table: &mut ActionValueTable,
) -> Result<()> {
    Lookahead::new(mdp, v, backend)?.improve_states(states, depth, ledger, table)
}

/// Predicted ledger increment of one tree-backend call at `(state, depth)`.
pub fn tree_query_cost(mdp: &TabularMdp, state: usize, depth: usize) -> Result<u64> {
    check_depth(depth)?;
    mdp.check_state(state)?;
    let leaf = vec![0.0; mdp.num_states()];
    Ok(TreeSearch::new(mdp, &leaf).root(state, depth).1)
}

/// `T^h[v]` by repeated Bellman sweeps.
pub fn apply_optimality_operator_n(
    mdp: &TabularMdp,
    v: &ValueFunction,
    times: usize,
) -> Result<ValueFunction> {
    mdp.check_value(v)?;
    let mut w = v.as_slice().to_vec();
    for _ in 0..times {
        w = bellman_backup(mdp, &w);
    }
    ValueFunction::new(w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::{build_chain, random_mdp, RandomMdpConfig};
    use crate::mdp::{evaluate_policy, EvalMethod, Policy};
    use proptest::prelude::*;

    /// Naive recursive expansion without any reuse: the reference for both
    /// values and query counts.
    fn naive_node(mdp: &TabularMdp, leaf: &[f64], s: usize, remaining: usize, q: &mut u64) -> f64 {
        if remaining == 0 {
            return leaf[s];
        }
        (0..mdp.num_actions())
            .map(|a| naive_expand(mdp, leaf, s, a, remaining - 1, q))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    fn naive_expand(
        mdp: &TabularMdp,
        leaf: &[f64],
        s: usize,
        a: usize,
        remaining: usize,
        q: &mut u64,
    ) -> f64 {
        *q += 1;
        let mut expected = 0.0;
        for &(next, p) in mdp.successors(s, a) {
            if p > 0.0 {
                expected += p * naive_node(mdp, leaf, next, remaining, q);
            }
        }
        mdp.reward(s, a) + mdp.discount() * expected
    }

    fn naive_root(mdp: &TabularMdp, leaf: &[f64], s: usize, h: usize) -> (Vec<f64>, u64) {
        let mut q = 0;
        let row = (0..mdp.num_actions())
            .map(|a| naive_expand(mdp, leaf, s, a, h - 1, &mut q))
            .collect();
        (row, q)
    }

    fn deterministic_four_action(n: usize) -> TabularMdp {
        // Action a moves from s to (s * 4 + a + 1) mod n: distinct successors
        // for small trees when n is large.
        let rewards = (0..n)
            .map(|s| (0..4).map(|a| ((s + a) % 3) as f64 / 3.0).collect())
            .collect();
        let transitions = (0..n)
            .map(|s| (0..4).map(|a| vec![((s * 4 + a + 1) % n, 1.0)]).collect())
            .collect();
        TabularMdp::new(0.9, rewards, transitions).unwrap()
    }

    #[test]
    fn chain_two_step_values() {
        let (n, gamma) = (6, 0.9);
        let mdp = build_chain(n, gamma).unwrap();
        let zero = ValueFunction::zeros(n + 2);
        for backend in [LookaheadBackend::Tree, LookaheadBackend::Dp] {
            let mut ledger = QueryLedger::new();
            let q = q_h_state(&mdp, &zero, 2, n - 1, backend, &mut ledger).unwrap();
            assert!((q[0] - gamma * (1.0 - gamma)).abs() < 1e-15);
            assert_eq!(q[1], 0.0);
        }
    }

    #[test]
    fn depth_one_equals_one_step_backup() {
        let mdp = random_mdp(&RandomMdpConfig::small(3)).unwrap();
        let v =
            ValueFunction::new((0..mdp.num_states()).map(|s| s as f64 * 0.3).collect()).unwrap();
        for s in 0..mdp.num_states() {
            let mut ledger = QueryLedger::new();
            let q = q_h_state(&mdp, &v, 1, s, LookaheadBackend::Tree, &mut ledger).unwrap();
            let expected: Vec<f64> = (0..mdp.num_actions())
                .map(|a| mdp.backup(s, a, v.as_slice()))
                .collect();
            assert_eq!(q, expected);
            assert_eq!(ledger.improve_queries(1), mdp.num_actions() as u64);
        }
    }

    #[test]
    fn rejects_zero_depth_and_bad_state() {
        let mdp = build_chain(3, 0.9).unwrap();
        let v = ValueFunction::zeros(5);
        let mut ledger = QueryLedger::new();
        assert!(q_h_state(&mdp, &v, 0, 0, LookaheadBackend::Tree, &mut ledger).is_err());
        assert!(q_h_state(&mdp, &v, 1, 5, LookaheadBackend::Dp, &mut ledger).is_err());
        assert!(tree_query_cost(&mdp, 0, 0).is_err());
    }

    #[test]
    fn seeded_stochastic_backends_agree() {
        let mdp = random_mdp(&RandomMdpConfig {
            num_states: 6,
            num_actions: 3,
            branching: 3,
            discount: 0.9,
            seed: 5,
        })
        .unwrap();
        let v = ValueFunction::new(vec![0.5, -0.25, 1.0, 0.0, 2.0, 0.1]).unwrap();
        for s in 0..6 {
            let mut l1 = QueryLedger::new();
            let mut l2 = QueryLedger::new();
            let tree = q_h_state(&mdp, &v, 3, s, LookaheadBackend::Tree, &mut l1).unwrap();
            let dp = q_h_state(&mdp, &v, 3, s, LookaheadBackend::Dp, &mut l2).unwrap();
            for (a, b) in tree.iter().zip(&dp) {
                assert!((a - b).abs() <= 1e-12);
            }
            assert_eq!(l2.total_improve(), 0);
            assert_eq!(l2.eval_queries(), 2 * 6);
            assert_eq!(l1.eval_queries(), 0);
        }
    }

    #[test]
    fn tree_matches_naive_expansion_bitwise() {
        for seed in 0..20 {
            let mdp = random_mdp(&RandomMdpConfig {
                num_states: 7,
                num_actions: 3,
                branching: 2,
                discount: 0.85,
                seed,
            })
            .unwrap();
            let leaf: Vec<f64> = (0..7)
                .map(|s| ((s * 7 + seed as usize) % 5) as f64 - 1.5)
                .collect();
            let v = ValueFunction::new(leaf.clone()).unwrap();
            for h in 1..=4 {
                for s in 0..7 {
                    let mut ledger = QueryLedger::new();
                    let q = q_h_state(&mdp, &v, h, s, LookaheadBackend::Tree, &mut ledger).unwrap();
                    let (expected, count) = naive_root(&mdp, &leaf, s, h);
                    assert_eq!(q, expected);
                    assert_eq!(ledger.improve_queries(h), count);
                    assert_eq!(tree_query_cost(&mdp, s, h).unwrap(), count);
                }
            }
        }
    }

    #[test]
    fn tree_cost_examples() {
        let mdp = deterministic_four_action(1000);
        assert_eq!(tree_query_cost(&mdp, 0, 1).unwrap(), 4);
        assert_eq!(tree_query_cost(&mdp, 0, 2).unwrap(), 20);
        let chain = build_chain(10, 0.9).unwrap();
        assert_eq!(tree_query_cost(&chain, 0, 2).unwrap(), 6);
        let table = TreeCostTable::new(&chain, 4);
        for h in 1..=4 {
            let expected: u64 = (1..=h).map(|i| 1u64 << i).sum();
            assert_eq!(table.cost(0, h), expected);
            assert_eq!(table.max_cost(h), expected);
        }
    }

    #[test]
    fn improve_states_contracts() {
        let (n, gamma) = (8, 0.9);
        let chain = build_chain(n, gamma).unwrap();
        let zero = ValueFunction::zeros(n + 2);
        let mut table = ActionValueTable::new(n + 2, 2);
        let mut ledger = QueryLedger::new();

        improve_states(
            &chain,
            &zero,
            &[],
            3,
            LookaheadBackend::Tree,
            &mut ledger,
            &mut table,
        )
        .unwrap();
        assert_eq!(ledger, QueryLedger::new());
        assert!((0..n + 2).all(|s| !table.is_improved(s)));

        improve_states(
            &chain,
            &zero,
            &[n - 2],
            3,
            LookaheadBackend::Tree,
            &mut ledger,
            &mut table,
        )
        .unwrap();
        assert!((table.row(n - 2)[0] - gamma * gamma * (1.0 - gamma)).abs() < 1e-15);
        assert!(!table.is_improved(n - 1));

        let mdp = deterministic_four_action(50);
        let v = ValueFunction::zeros(50);
        let mut table = ActionValueTable::new(50, 4);
        let mut ledger = QueryLedger::new();
        let all: Vec<usize> = (0..50).collect();
        improve_states(
            &mdp,
            &v,
            &all,
            1,
            LookaheadBackend::Tree,
            &mut ledger,
            &mut table,
        )
        .unwrap();
        assert_eq!(ledger.improve_queries(1), 50 * 4);
    }

    #[test]
    fn dp_layers_are_shared_within_scope() {
        let mdp = random_mdp(&RandomMdpConfig::small(9)).unwrap();
        let v = ValueFunction::zeros(mdp.num_states());
        let mut ledger = QueryLedger::new();
        let mut table = ActionValueTable::new(mdp.num_states(), mdp.num_actions());
        let mut scope = Lookahead::new(&mdp, &v, LookaheadBackend::Dp).unwrap();
        scope
            .improve_states(&[0, 1], 3, &mut ledger, &mut table)
            .unwrap();
        assert_eq!(ledger.eval_queries(), 2 * mdp.num_states() as u64);
        scope
            .improve_states(&[2], 2, &mut ledger, &mut table)
            .unwrap();
        scope
            .improve_states(&[3], 4, &mut ledger, &mut table)
            .unwrap();
        assert_eq!(ledger.eval_queries(), 3 * mdp.num_states() as u64);
        assert_eq!(ledger.total_improve(), 0);
    }

    #[test]
    fn parallel_sweep_matches_sequential() {
        let mdp = random_mdp(&RandomMdpConfig {
            num_states: 40,
            num_actions: 3,
            branching: 2,
            discount: 0.9,
            seed: 2,
        })
        .unwrap();
        let v = ValueFunction::new((0..40).map(|s| (s % 7) as f64).collect()).unwrap();
        let all: Vec<usize> = (0..40).collect();
        let mut table = ActionValueTable::new(40, 3);
        let mut ledger = QueryLedger::new();
        improve_states(
            &mdp,
            &v,
            &all,
            3,
            LookaheadBackend::Tree,
            &mut ledger,
            &mut table,
        )
        .unwrap();
        let mut expected = 0;
        for s in 0..40 {
            let mut single = QueryLedger::new();
            let row = q_h_state(&mdp, &v, 3, s, LookaheadBackend::Tree, &mut single).unwrap();
            assert_eq!(table.row(s), row.as_slice());
            expected += tree_query_cost(&mdp, s, 3).unwrap();
        }
        assert_eq!(ledger.improve_queries(3), expected);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn backends_agree_and_costs_add_up(
            seed in 0u64..10_000,
            states in 2usize..50,
            actions in 1usize..5,
            h in 1usize..5,
        ) {
            let mdp = random_mdp(&RandomMdpConfig {
                num_states: states,
                num_actions: actions,
                branching: 2,
                discount: 0.9,
                seed,
            }).unwrap();
            let v = ValueFunction::new((0..states).map(|s| ((s * 31 + seed as usize) % 11) as f64 / 3.0).collect()).unwrap();
            let all: Vec<usize> = (0..states).collect();
            let mut tree_table = ActionValueTable::new(states, actions);
            let mut dp_table = ActionValueTable::new(states, actions);
            let mut tree_ledger = QueryLedger::new();
            let mut dp_ledger = QueryLedger::new();
            improve_states(&mdp, &v, &all, h, LookaheadBackend::Tree, &mut tree_ledger, &mut tree_table).unwrap();
            improve_states(&mdp, &v, &all, h, LookaheadBackend::Dp, &mut dp_ledger, &mut dp_table).unwrap();
            for s in 0..states {
                for (a, b) in tree_table.row(s).iter().zip(dp_table.row(s)) {
                    prop_assert!((a - b).abs() <= 1e-12);
                }
            }
            let costs = TreeCostTable::new(&mdp, h);
            let predicted: u64 = (0..states).map(|s| costs.cost(s, h)).sum();
            prop_assert_eq!(tree_ledger.improve_queries(h), predicted);
            prop_assert_eq!(dp_ledger.total_improve(), 0);
        }

        #[test]
        fn lookahead_dominates_one_step_above_policy_value(seed in 0u64..10_000, h in 1usize..5) {
            let mdp = random_mdp(&RandomMdpConfig { num_states: 12, num_actions: 3, branching: 3, discount: 0.9, seed }).unwrap();
            let pi = Policy::new((0..12).map(|s| (s + seed as usize) % 3).collect());
            let v = evaluate_policy(&mdp, &pi, EvalMethod::Direct).unwrap();
            let mut ledger = QueryLedger::new();
            let mut scope = Lookahead::new(&mdp, &v, LookaheadBackend::Dp).unwrap();
            for s in 0..12 {
                let deep = scope.q_values(s, h, &mut ledger).unwrap();
                let shallow = scope.q_values(s, 1, &mut ledger).unwrap();
                let max = |r: &[f64]| r.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                prop_assert!(max(&deep) >= max(&shallow) - 1e-12);
            }
        }

        #[test]
        fn h_step_operator_contracts(seed in 0u64..10_000, h in 1usize..5) {
            let mdp = random_mdp(&RandomMdpConfig { num_states: 10, num_actions: 3, branching: 3, discount: 0.8, seed }).unwrap();
            let u = ValueFunction::new((0..10).map(|s| ((s * 13 + seed as usize) % 17) as f64 - 8.0).collect()).unwrap();
            let w = ValueFunction::new((0..10).map(|s| ((s * 5 + seed as usize) % 9) as f64).collect()).unwrap();
            let tu = apply_optimality_operator_n(&mdp, &u, h).unwrap();
            let tw = apply_optimality_operator_n(&mdp, &w, h).unwrap();
            prop_assert!(tu.distance_inf(&tw) <= mdp.discount().powi(h as i32) * u.distance_inf(&w) + 1e-12);
        }
    }
}
