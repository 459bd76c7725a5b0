//! Policy-iteration planners: PI, h-PI, threshold-based lookahead (TLPI) and
//! quantile-based lookahead (QLPI).
//!
//! Every planner runs the same loop: evaluate `π_t` exactly, fill an
//! [`ActionValueTable`] with lookahead values, then extract the greedy policy
//! (keeping the current action on ties). The loop stops at the first pass
//! that changes no action. Planners differ only in which states receive
//! which lookahead depth.

mod schedule;
mod trace;

pub use schedule::{quantile_count, quantile_cutoff, QuantileCut, QuantileSchedule};
pub use trace::{ConvergenceTrace, IterationRecord, PlannerResult};

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::lookahead::{Lookahead, LookaheadBackend, QueryLedger};
use crate::mdp::{
    evaluate_policy, evaluate_policy_with_stats, iteration_bound, ActionValueTable, EvalMethod,
    Policy, TabularMdp, ValueFunction,
};

/// Options shared by all planners.
#[derive(Clone, Debug, Default)]
pub struct RunSettings {
    pub backend: LookaheadBackend,
    /// Pass budget; `None` means the PI iteration bound plus one.
    pub max_iters: Option<usize>,
    pub eval: EvalMethod,
    /// `V⋆` used for the trace distances. Without it, distances are measured
    /// to the final policy value, which is `V⋆` once the run has converged.
    pub reference: Option<ValueFunction>,
    /// Starting ledger, e.g. carrying the cost of computing an approximate
    /// `V⋆` beforehand.
    pub initial_ledger: QueryLedger,
}

impl RunSettings {
    pub fn with_backend(mut self, backend: LookaheadBackend) -> Self {
        self.backend = backend;
        self
    }

    pub fn with_reference(mut self, reference: ValueFunction) -> Self {
        self.reference = Some(reference);
        self
    }

    pub fn with_max_iters(mut self, max_iters: usize) -> Self {
        self.max_iters = Some(max_iters);
        self
    }

    pub fn with_eval(mut self, eval: EvalMethod) -> Self {
        self.eval = eval;
        self
    }

    pub fn with_initial_ledger(mut self, ledger: QueryLedger) -> Self {
        self.initial_ledger = ledger;
        self
    }
}

/// Bound on PI iterations for rewards in `[0, 1]`.
pub fn pi_iteration_bound(mdp: &TabularMdp) -> f64 {
    iteration_bound(mdp.num_states(), mdp.num_actions(), mdp.discount(), 1.0)
}

/// Bound on h-PI iterations for rewards in `[0, 1]`.
pub fn h_pi_iteration_bound(mdp: &TabularMdp, depth: usize) -> f64 {
    iteration_bound(
        mdp.num_states(),
        mdp.num_actions(),
        mdp.discount(),
        depth as f64,
    )
}

/// Bound on TLPI iterations, `+∞` when `h^(κ) = 1`.
pub fn tlpi_iteration_bound(mdp: &TabularMdp, kappa: f64) -> Result<f64> {
    let depth = h_kappa(kappa, mdp.discount())?;
    if depth == 1 {
        return Ok(f64::INFINITY);
    }
    Ok(iteration_bound(
        mdp.num_states(),
        mdp.num_actions(),
        mdp.discount(),
        (depth - 1) as f64,
    ))
}

/// `γ^h` by repeated multiplication, the same arithmetic [`h_kappa`] uses.
pub fn discount_power(gamma: f64, h: usize) -> f64 {
    (0..h).fold(1.0, |p, _| p * gamma)
}

/// Smallest `h ≥ 1` with `γ^h ≤ κ`.
pub fn h_kappa(kappa: f64, gamma: f64) -> Result<usize> {
    if !(kappa > 0.0 && kappa < 1.0) {
        return Err(Error::invalid(format!("κ must lie in (0, 1), got {kappa}")));
    }
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(Error::invalid(format!("γ must lie in (0, 1), got {gamma}")));
    }
    let mut h = 1;
    let mut power = gamma;
    while power > kappa {
        power *= gamma;
        h += 1;
    }
    Ok(h)
}

/// Trigger correction `β = ε(κ + 1)` for a `V⋆` estimate within `ε`.
pub fn tlpi_beta(epsilon: f64, kappa: f64) -> f64 {
    epsilon * (kappa + 1.0)
}

enum Rule<'a> {
    Uniform {
        depth: usize,
    },
    Threshold {
        depth: usize,
        kappa: f64,
        v_star: &'a ValueFunction,
        beta: f64,
    },
    Quantile {
        schedule: QuantileSchedule,
        v_star: &'a ValueFunction,
    },
}

/// Filled action-value table plus bookkeeping for the trace.
struct Improvement {
    table: ActionValueTable,
    by_depth: BTreeMap<usize, usize>,
    deep_states: usize,
}

impl Rule<'_> {
    fn improve(
        &self,
        mdp: &TabularMdp,
        v: &ValueFunction,
        backend: LookaheadBackend,
        ledger: &mut QueryLedger,
    ) -> Result<Improvement> {
        let n = mdp.num_states();
        let mut look = Lookahead::new(mdp, v, backend)?;
        let mut table = ActionValueTable::new(n, mdp.num_actions());
        let mut by_depth = BTreeMap::new();
        let all: Vec<usize> = (0..n).collect();
        let deep_states = match self {
            Rule::Uniform { depth } => {
                look.improve_states(&all, *depth, ledger, &mut table)?;
                by_depth.insert(*depth, n);
                if *depth > 1 {
                    n
                } else {
                    0
                }
            }
            Rule::Threshold {
                depth,
                kappa,
                v_star,
                beta,
            } => {
                look.improve_states(&all, 1, ledger, &mut table)?;
                by_depth.insert(1, n);
                if *depth == 1 {
                    0
                } else {
                    // Distances at or below rounding noise never trigger.
                    let noise = 1e-12 * v_star.max_norm().max(1.0);
                    let threshold = kappa * v_star.distance_inf(v) - beta + noise;
                    let deep: Vec<usize> = table
                        .distances_to(v_star)
                        .iter()
                        .enumerate()
                        .filter(|&(_, &d)| d > threshold)
                        .map(|(s, _)| s)
                        .collect();
                    look.improve_states(&deep, *depth, ledger, &mut table)?;
                    by_depth.insert(*depth, deep.len());
                    deep.len()
                }
            }
            Rule::Quantile { schedule, v_star } => {
                let mut depth_of = vec![0usize; n];
                for depth in 1..=schedule.max_depth() {
                    let theta = schedule.theta(depth);
                    if theta <= 0.0 {
                        continue;
                    }
                    let cut = quantile_cutoff(&table.distances_to(v_star), theta);
                    look.improve_states(&cut.selected, depth, ledger, &mut table)?;
                    for &s in &cut.selected {
                        depth_of[s] = depth;
                    }
                    by_depth.insert(depth, cut.selected.len());
                }
                depth_of.iter().filter(|&&d| d > 1).count()
            }
        };
        Ok(Improvement {
            table,
            by_depth,
            deep_states,
        })
    }
}

fn run(
    mdp: &TabularMdp,
    pi0: &Policy,
    rule: Rule<'_>,
    settings: &RunSettings,
) -> Result<PlannerResult> {
    mdp.check_policy(pi0)?;
    if let Some(reference) = &settings.reference {
        mdp.check_value(reference)?;
    }
    let n = mdp.num_states();
    let max_iters = settings
        .max_iters
        .unwrap_or_else(|| pi_iteration_bound(mdp).min(1e9) as usize + 1);
    if max_iters == 0 {
        return Err(Error::invalid("max_iters must be at least 1"));
    }

    let mut ledger = settings.initial_ledger.clone();
    let mut policy = pi0.clone();
    let mut records = Vec::new();
    let mut values = Vec::new();
    let mut converged = false;
    for iter in 1..=max_iters {
        let eval = evaluate_policy_with_stats(mdp, &policy, settings.eval)?;
        ledger.charge_eval((n * eval.sweeps) as u64);
        let improvement = rule.improve(mdp, &eval.value, settings.backend, &mut ledger)?;
        let next = improvement
            .table
            .greedy(Some(&policy))
            .ok_or(Error::Solver {
                context: "greedy extraction",
                detail: "some states received no improvement".into(),
            })?;
        let changes = next.differences(&policy);
        records.push(IterationRecord {
            iter,
            dist_inf: 0.0,
            changes,
            states_improved_by_depth: improvement.by_depth,
            ledger: ledger.clone(),
            deep_fraction: improvement.deep_states as f64 / n as f64,
        });
        values.push(eval.value);
        policy = next;
        if changes == 0 {
            converged = true;
            break;
        }
    }

    let value = if converged {
        values.last().expect("at least one pass").clone()
    } else {
        evaluate_policy(mdp, &policy, settings.eval)?
    };
    let reference = settings.reference.as_ref().unwrap_or(&value);
    for (record, v) in records.iter_mut().zip(&values) {
        record.dist_inf = reference.distance_inf(v);
    }
    Ok(PlannerResult {
        policy,
        value,
        iterations: records.len(),
        trace: ConvergenceTrace { records },
        converged,
    })
}

/// Policy iteration with one-step greedy improvement.
pub fn run_pi(mdp: &TabularMdp, pi0: &Policy, settings: &RunSettings) -> Result<PlannerResult> {
    run(mdp, pi0, Rule::Uniform { depth: 1 }, settings)
}

/// Policy iteration with `h`-step greedy improvement at every state.
pub fn run_h_pi(
    mdp: &TabularMdp,
    pi0: &Policy,
    depth: usize,
    settings: &RunSettings,
) -> Result<PlannerResult> {
    if depth == 0 {
        return Err(Error::invalid("lookahead depth must be at least 1"));
    }
    run(mdp, pi0, Rule::Uniform { depth }, settings)
}

/// Threshold-based lookahead PI.
///
/// Every state gets a one-step improvement; states with
/// `|V⋆(s) − max_a U(s,a)| > κ‖V⋆ − V^{π_t}‖∞ − β` are then re-improved with
/// depth `h^(κ)`. `β = 0` with exact `V⋆` is the exact variant.
pub fn run_tlpi(
    mdp: &TabularMdp,
    pi0: &Policy,
    kappa: f64,
    v_star: &ValueFunction,
    beta: f64,
    settings: &RunSettings,
) -> Result<PlannerResult> {
    let depth = h_kappa(kappa, mdp.discount())?;
    mdp.check_value(v_star)?;
    if !(beta >= 0.0 && beta.is_finite()) {
        return Err(Error::invalid(format!(
            "β must be finite and non-negative, got {beta}"
        )));
    }
    run(
        mdp,
        pi0,
        Rule::Threshold {
            depth,
            kappa,
            v_star,
            beta,
        },
        settings,
    )
}

/// Quantile-based lookahead PI.
///
/// For each depth `h` with `θ_h > 0`, the `⌈θ_h·S⌉` states farthest from
/// `V⋆` under the partially filled table are improved with depth `h`.
/// `order_slack` raises every `θ_h` by `m/S` to compensate for an
/// approximate `V⋆` that is only `m`-order-preserving.
pub fn run_qlpi(
    mdp: &TabularMdp,
    pi0: &Policy,
    schedule: &QuantileSchedule,
    v_star: &ValueFunction,
    order_slack: usize,
    settings: &RunSettings,
) -> Result<PlannerResult> {
    mdp.check_value(v_star)?;
    let schedule = schedule.inflated(order_slack, mdp.num_states());
    run(mdp, pi0, Rule::Quantile { schedule, v_star }, settings)
}
