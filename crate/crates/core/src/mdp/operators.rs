use serde::{Deserialize, Serialize};

use super::linalg::solve_dense;
use super::{Policy, TabularMdp, ValueFunction};
use crate::error::{Error, Result};

/// Relative tolerance under which two action values count as tied.
pub const TIE_TOLERANCE: f64 = 1e-12;

/// Picks an action from a row of action values.
///
/// Actions within `TIE_TOLERANCE` (relative, floored at 1) of the maximum are
/// tied. The incumbent wins a tie when given; otherwise the lowest index does.
pub fn select_action(row: &[f64], incumbent: Option<usize>) -> usize {
    let best = row.iter().fold(f64::NEG_INFINITY, |m, &q| m.max(q));
    let slack = TIE_TOLERANCE * best.abs().max(1.0);
    if let Some(a) = incumbent {
        if row[a] >= best - slack {
            return a;
        }
    }
    row.iter()
        .position(|&q| q >= best - slack)
        .expect("row has at least one action")
}

/// `T^π[v] = r^π + γ P^π v`.
pub fn apply_policy_operator(
    mdp: &TabularMdp,
    policy: &Policy,
    v: &ValueFunction,
) -> Result<ValueFunction> {
    mdp.check_policy(policy)?;
    mdp.check_value(v)?;
    Ok(ValueFunction::from_vec_unchecked(policy_backup(
        mdp,
        policy,
        v.as_slice(),
    )))
}

fn policy_backup(mdp: &TabularMdp, policy: &Policy, w: &[f64]) -> Vec<f64> {
    (0..mdp.num_states())
        .map(|s| mdp.backup(s, policy.action(s), w))
        .collect()
}

/// `T[v](s) = max_a r(s,a) + γ Σ P(s'|s,a) v(s')`.
pub fn apply_optimality_operator(mdp: &TabularMdp, v: &ValueFunction) -> Result<ValueFunction> {
    mdp.check_value(v)?;
    Ok(ValueFunction::from_vec_unchecked(bellman_backup(
        mdp,
        v.as_slice(),
    )))
}

pub(crate) fn bellman_backup(mdp: &TabularMdp, w: &[f64]) -> Vec<f64> {
    (0..mdp.num_states())
        .map(|s| {
            (0..mdp.num_actions())
                .map(|a| mdp.backup(s, a, w))
                .fold(f64::NEG_INFINITY, f64::max)
        })
        .collect()
}

/// Greedy policy w.r.t. `v`, ties broken by lowest action index.
pub fn greedy_policy(mdp: &TabularMdp, v: &ValueFunction) -> Result<Policy> {
    mdp.check_value(v)?;
    Ok(greedy_with_incumbent(mdp, v.as_slice(), None))
}

pub(crate) fn greedy_with_incumbent(
    mdp: &TabularMdp,
    w: &[f64],
    incumbent: Option<&Policy>,
) -> Policy {
    let mut row = vec![0.0; mdp.num_actions()];
    let actions = (0..mdp.num_states())
        .map(|s| {
            for (a, q) in row.iter_mut().enumerate() {
                *q = mdp.backup(s, a, w);
            }
            select_action(&row, incumbent.map(|p| p.action(s)))
        })
        .collect();
    Policy::new(actions)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "lowercase")]
pub enum EvalMethod {
    /// Dense elimination on `(I − γP^π) V = r^π`.
    #[default]
    Direct,
    /// Fixed-point iteration of `T^π`, stopped once `‖V − V^π‖∞ ≤ tol` is
    /// guaranteed by the contraction bound.
    Iterative { tol: f64 },
}

/// A policy value together with the number of passes over the policy rows
/// it took (1 for the direct solve).
#[derive(Clone, Debug)]
pub struct Evaluation {
    pub value: ValueFunction,
    pub sweeps: usize,
}

pub fn evaluate_policy(
    mdp: &TabularMdp,
    policy: &Policy,
    method: EvalMethod,
) -> Result<ValueFunction> {
    evaluate_policy_with_stats(mdp, policy, method).map(|e| e.value)
}

pub fn evaluate_policy_with_stats(
    mdp: &TabularMdp,
    policy: &Policy,
    method: EvalMethod,
) -> Result<Evaluation> {
    mdp.check_policy(policy)?;
    match method {
        EvalMethod::Direct => Ok(Evaluation {
            value: ValueFunction::from_vec_unchecked(direct_evaluation(mdp, policy)?),
            sweeps: 1,
        }),
        EvalMethod::Iterative { tol } => {
            if !(tol > 0.0) {
                return Err(Error::invalid(format!(
                    "evaluation tolerance must be positive, got {tol}"
                )));
            }
            let (values, sweeps) = fixed_point(mdp, tol, |w| policy_backup(mdp, policy, w))?;
            Ok(Evaluation {
                value: ValueFunction::from_vec_unchecked(values),
                sweeps,
            })
        }
    }
}

fn direct_evaluation(mdp: &TabularMdp, policy: &Policy) -> Result<Vec<f64>> {
    let n = mdp.num_states();
    let gamma = mdp.discount();
    let mut matrix = vec![0.0; n * n];
    let mut rhs = vec![0.0; n];
    for s in 0..n {
        let a = policy.action(s);
        matrix[s * n + s] = 1.0;
        for &(next, p) in mdp.successors(s, a) {
            if p > 0.0 {
                matrix[s * n + next] -= gamma * p;
            }
        }
        rhs[s] = mdp.reward(s, a);
    }
    solve_dense(matrix, rhs)
}

/// Iterates a γ-contraction from zero until successive iterates are within
/// `tol (1−γ)/γ`, which bounds the distance to the fixed point by `tol`.
fn fixed_point(
    mdp: &TabularMdp,
    tol: f64,
    step: impl Fn(&[f64]) -> Vec<f64>,
) -> Result<(Vec<f64>, usize)> {
    let gamma = mdp.discount();
    let threshold = tol * (1.0 - gamma) / gamma;
    let mut current = vec![0.0; mdp.num_states()];
    let mut next = step(&current);
    let first_gap = max_gap(&current, &next);
    let mut sweeps = 1;
    // Enough sweeps for the geometric bound, plus slack for rounding.
    let budget = if first_gap > threshold {
        ((threshold / first_gap).ln() / gamma.ln()).ceil() as usize + 64
    } else {
        1
    };
    loop {
        let gap = max_gap(&current, &next);
        if gap <= threshold {
            return Ok((next, sweeps));
        }
        // Below this the iterates only move by rounding.
        let floor = 8.0 * f64::EPSILON * next.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if sweeps > budget {
            if gap <= floor {
                return Ok((next, sweeps));
            }
            return Err(Error::Solver {
                context: "fixed-point iteration",
                detail: format!(
                    "gap {gap:e} still above threshold {threshold:e} after {sweeps} sweeps"
                ),
            });
        }
        current = next;
        next = step(&current);
        sweeps += 1;
    }
}

fn max_gap(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .fold(0.0f64, |m, (x, y)| m.max((x - y).abs()))
}

/// Optimal value and a greedy optimal policy.
///
/// Runs value iteration to within `tol` of `V⋆`, extracts the greedy policy,
/// and then polishes it with exact evaluation/improvement rounds until the
/// policy is greedy-stable, so the returned value is `V^π⋆` to solver
/// precision.
pub fn solve_optimal(mdp: &TabularMdp, tol: f64) -> Result<(ValueFunction, Policy)> {
    if !(tol > 0.0) {
        return Err(Error::invalid(format!(
            "tolerance must be positive, got {tol}"
        )));
    }
    let (vi, _) = fixed_point(mdp, tol, |w| bellman_backup(mdp, w))?;
    let mut policy = greedy_with_incumbent(mdp, &vi, None);
    for _ in 0..64 {
        let value = direct_evaluation(mdp, &policy)?;
        let next = greedy_with_incumbent(mdp, &value, Some(&policy));
        if next == policy {
            return Ok((ValueFunction::from_vec_unchecked(value), policy));
        }
        policy = next;
    }
    Err(Error::Solver {
        context: "optimal-policy polish",
        detail: "policy did not stabilise after 64 exact improvement rounds".into(),
    })
}
