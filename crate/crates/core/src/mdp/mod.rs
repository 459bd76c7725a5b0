//! Finite discounted MDPs and the exact dynamic-programming machinery around
//! them: Bellman operators, policy evaluation and the optimal-value oracle.

mod io;
mod linalg;
mod operators;

pub use io::MdpDocument;
pub use linalg::solve_dense;
pub(crate) use operators::bellman_backup;
pub use operators::{
    apply_optimality_operator, apply_policy_operator, evaluate_policy, evaluate_policy_with_stats,
    greedy_policy, select_action, solve_optimal, EvalMethod, Evaluation, TIE_TOLERANCE,
};

use std::hash::{Hash, Hasher};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on the row sums of a transition distribution.
pub const PROBABILITY_TOLERANCE: f64 = 1e-12;

/// A finite MDP with sparse successor lists.
///
/// Rows are indexed by `state * num_actions + action`. Zero-probability
/// entries are stored (so the JSON form round-trips) but never expanded.
#[derive(Clone, Debug, PartialEq)]
pub struct TabularMdp {
    num_states: usize,
    num_actions: usize,
    discount: f64,
    rewards: Vec<f64>,
    successors: Vec<Vec<(usize, f64)>>,
}

impl TabularMdp {
    /// Builds an MDP from per-state, per-action rewards and successor lists.
    pub fn new(
        discount: f64,
        rewards: Vec<Vec<f64>>,
        transitions: Vec<Vec<Vec<(usize, f64)>>>,
    ) -> Result<Self> {
        let num_states = rewards.len();
        if num_states == 0 {
            return Err(Error::invalid("an MDP needs at least one state"));
        }
        let num_actions = rewards[0].len();
        Error::check_len("transition table states", num_states, transitions.len())?;
        let mut flat_rewards = Vec::with_capacity(num_states * num_actions);
        let mut flat_successors = Vec::with_capacity(num_states * num_actions);
        for (s, (row_r, row_t)) in rewards.into_iter().zip(transitions).enumerate() {
            if row_r.len() != num_actions {
                return Err(Error::invalid(format!(
                    "state {s} has {} rewards, expected {num_actions}",
                    row_r.len()
                )));
            }
            if row_t.len() != num_actions {
                return Err(Error::invalid(format!(
                    "state {s} has {} transition rows, expected {num_actions}",
                    row_t.len()
                )));
            }
            flat_rewards.extend(row_r);
            flat_successors.extend(row_t);
        }
        Self::from_flat(
            num_states,
            num_actions,
            discount,
            flat_rewards,
            flat_successors,
        )
    }

    /// Builds an MDP from row-major flat tables (`state * num_actions + action`).
    pub fn from_flat(
        num_states: usize,
        num_actions: usize,
        discount: f64,
        rewards: Vec<f64>,
        successors: Vec<Vec<(usize, f64)>>,
    ) -> Result<Self> {
        if num_states == 0 || num_actions == 0 {
            return Err(Error::invalid(
                "num_states and num_actions must be positive",
            ));
        }
        if !(discount > 0.0 && discount < 1.0) {
            return Err(Error::invalid(format!(
                "discount must lie strictly inside (0, 1), got {discount}"
            )));
        }
        Error::check_len("reward table", num_states * num_actions, rewards.len())?;
        Error::check_len(
            "transition table",
            num_states * num_actions,
            successors.len(),
        )?;
        for (row, r) in rewards.iter().enumerate() {
            if !r.is_finite() {
                return Err(Error::invalid(format!(
                    "reward of (state {}, action {}) is not finite",
                    row / num_actions,
                    row % num_actions
                )));
            }
        }
        for (row, list) in successors.iter().enumerate() {
            let (s, a) = (row / num_actions, row % num_actions);
            if list.is_empty() {
                return Err(Error::invalid(format!(
                    "(state {s}, action {a}) has no successors"
                )));
            }
            let mut total = 0.0;
            for &(next, p) in list {
                if next >= num_states {
                    return Err(Error::invalid(format!(
                        "(state {s}, action {a}) points to state {next} outside [0, {num_states})"
                    )));
                }
                if !(p >= 0.0 && p.is_finite()) {
                    return Err(Error::invalid(format!(
                        "(state {s}, action {a}) has invalid probability {p}"
                    )));
                }
                total += p;
            }
            if (total - 1.0).abs() > PROBABILITY_TOLERANCE {
                return Err(Error::invalid(format!(
                    "(state {s}, action {a}) probabilities sum to {total}"
                )));
            }
        }
        Ok(Self {
            num_states,
            num_actions,
            discount,
            rewards,
            successors,
        })
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn discount(&self) -> f64 {
        self.discount
    }

    #[inline]
    pub fn reward(&self, state: usize, action: usize) -> f64 {
        self.rewards[state * self.num_actions + action]
    }

    /// Successor list of `(state, action)`, including zero-probability entries.
    #[inline]
    pub fn successors(&self, state: usize, action: usize) -> &[(usize, f64)] {
        &self.successors[state * self.num_actions + action]
    }

    /// One-step backup `r(s,a) + γ Σ P(s'|s,a) w(s')`.
    ///
    /// Every operator in the crate goes through this function so that the
    /// tree and DP lookahead backends produce bit-identical values.
    #[inline]
    pub fn backup(&self, state: usize, action: usize, w: &[f64]) -> f64 {
        let mut expected = 0.0;
        for &(next, p) in self.successors(state, action) {
            if p > 0.0 {
                expected += p * w[next];
            }
        }
        self.reward(state, action) + self.discount * expected
    }

    /// Whether every reward lies in `[0, 1]`, the normalisation the iteration
    /// bounds assume.
    pub fn rewards_in_unit_interval(&self) -> bool {
        self.rewards.iter().all(|r| (0.0..=1.0).contains(r))
    }

    pub fn max_abs_reward(&self) -> f64 {
        self.rewards.iter().fold(0.0, |m, r| m.max(r.abs()))
    }

    /// Content hash used to check that results refer to the same MDP.
    pub fn fingerprint(&self) -> u64 {
        let mut hasher = std::collections::hash_map::DefaultHasher::new();
        self.num_states.hash(&mut hasher);
        self.num_actions.hash(&mut hasher);
        self.discount.to_bits().hash(&mut hasher);
        for r in &self.rewards {
            r.to_bits().hash(&mut hasher);
        }
        for list in &self.successors {
            list.len().hash(&mut hasher);
            for &(next, p) in list {
                next.hash(&mut hasher);
                p.to_bits().hash(&mut hasher);
            }
        }
        hasher.finish()
    }

    pub(crate) fn check_value(&self, v: &ValueFunction) -> Result<()> {
        Error::check_len("value function", self.num_states, v.len())
    }

    pub(crate) fn check_policy(&self, policy: &Policy) -> Result<()> {
        Error::check_len("policy", self.num_states, policy.len())?;
        if let Some((s, &a)) = policy
            .actions()
            .iter()
            .enumerate()
            .find(|(_, &a)| a >= self.num_actions)
        {
            return Err(Error::invalid(format!(
                "policy picks action {a} at state {s}, but the MDP has {} actions",
                self.num_actions
            )));
        }
        Ok(())
    }

    pub(crate) fn check_state(&self, state: usize) -> Result<()> {
        if state < self.num_states {
            Ok(())
        } else {
            Err(Error::invalid(format!(
                "state {state} outside [0, {})",
                self.num_states
            )))
        }
    }
}

/// Deterministic stationary policy.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Policy(Vec<usize>);

impl Policy {
    pub fn new(actions: Vec<usize>) -> Self {
        Policy(actions)
    }

    /// Validated constructor.
    pub fn for_mdp(mdp: &TabularMdp, actions: Vec<usize>) -> Result<Self> {
        let policy = Policy(actions);
        mdp.check_policy(&policy)?;
        Ok(policy)
    }

    pub fn constant(num_states: usize, action: usize) -> Self {
        Policy(vec![action; num_states])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn actions(&self) -> &[usize] {
        &self.0
    }

    pub fn action(&self, state: usize) -> usize {
        self.0[state]
    }

    /// Number of states where the two policies disagree.
    pub fn differences(&self, other: &Policy) -> usize {
        self.0.iter().zip(&other.0).filter(|(a, b)| a != b).count()
    }
}

/// A real vector over states.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ValueFunction(Vec<f64>);

impl ValueFunction {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("value at state {i} is not finite")));
        }
        Ok(ValueFunction(values))
    }

    pub fn zeros(num_states: usize) -> Self {
        ValueFunction(vec![0.0; num_states])
    }

    pub(crate) fn from_vec_unchecked(values: Vec<f64>) -> Self {
        ValueFunction(values)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn get(&self, state: usize) -> f64 {
        self.0[state]
    }

    pub fn max_norm(&self) -> f64 {
        self.0.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `‖self − other‖∞`. Panics on length mismatch.
    pub fn distance_inf(&self, other: &ValueFunction) -> f64 {
        assert_eq!(self.len(), other.len(), "value functions differ in length");
        self.0
            .iter()
            .zip(&other.0)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }
}

/// Lookahead results `U(s, a)`; a row of `+∞` means "not yet improved".
#[derive(Clone, Debug, PartialEq)]
pub struct ActionValueTable {
    num_actions: usize,
    values: Vec<f64>,
}

impl ActionValueTable {
    pub const UNIMPROVED: f64 = f64::INFINITY;

    pub fn new(num_states: usize, num_actions: usize) -> Self {
        Self {
            num_actions,
            values: vec![Self::UNIMPROVED; num_states * num_actions],
        }
    }

    pub fn num_states(&self) -> usize {
        self.values.len() / self.num_actions
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn row(&self, state: usize) -> &[f64] {
        &self.values[state * self.num_actions..(state + 1) * self.num_actions]
    }

    /// Overwrites all actions of `state` at once.
    pub fn set_row(&mut self, state: usize, row: &[f64]) {
        assert_eq!(row.len(), self.num_actions, "row width mismatch");
        assert!(
            row.iter().all(|v| v.is_finite()),
            "improved rows must be finite"
        );
        self.values[state * self.num_actions..(state + 1) * self.num_actions].copy_from_slice(row);
    }

    pub fn is_improved(&self, state: usize) -> bool {
        self.values[state * self.num_actions].is_finite()
    }

    /// `max_a U(s, a)`; `+∞` for unimproved rows.
    pub fn max(&self, state: usize) -> f64 {
        self.row(state)
            .iter()
            .fold(f64::NEG_INFINITY, |m, &v| m.max(v))
    }

    /// `|target(s) − max_a U(s,a)|` for every state, `+∞` on unimproved rows.
    pub fn distances_to(&self, target: &ValueFunction) -> Vec<f64> {
        (0..self.num_states())
            .map(|s| {
                let m = self.max(s);
                if m.is_infinite() {
                    f64::INFINITY
                } else {
                    (target.get(s) - m).abs()
                }
            })
            .collect()
    }

    /// Greedy extraction; `incumbent` (if given) is kept on ties.
    ///
    /// Returns `None` if some row is still unimproved.
    pub fn greedy(&self, incumbent: Option<&Policy>) -> Option<Policy> {
        let mut actions = Vec::with_capacity(self.num_states());
        for s in 0..self.num_states() {
            if !self.is_improved(s) {
                return None;
            }
            actions.push(select_action(self.row(s), incumbent.map(|p| p.action(s))));
        }
        Some(Policy(actions))
    }
}

/// `⌈(log 1/γ)⁻¹ · S(A−1) · log 1/(1−γ)⌉` scaled by the per-iteration
/// contraction exponent `depth` (1 for PI, h for h-PI).
pub fn iteration_bound(num_states: usize, num_actions: usize, discount: f64, depth: f64) -> f64 {
    let numerator = (num_states * (num_actions - 1)) as f64 * (1.0 / (1.0 - discount)).ln();
    (numerator / (depth * (1.0 / discount).ln())).ceil()
}
