use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::lookahead::QueryLedger;
use crate::mdp::{Policy, ValueFunction};

/// One policy-iteration pass: evaluate `π_{t−1}`, improve into `π_t`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    /// 1-based pass index.
    pub iter: usize,
    /// `‖V⋆ − V^{π_{t−1}}‖∞` for the policy evaluated in this pass.
    pub dist_inf: f64,
    /// States whose action changed in this pass.
    pub changes: usize,
    pub states_improved_by_depth: BTreeMap<usize, usize>,
    /// Cumulative ledger at the end of the pass.
    pub ledger: QueryLedger,
    /// Fraction of states whose final action values came from a lookahead
    /// deeper than one step.
    pub deep_fraction: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceTrace {
    pub records: Vec<IterationRecord>,
}

impl ConvergenceTrace {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn distances(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.dist_inf).collect()
    }

    /// Ledger increment of pass `index` (0-based).
    pub fn iteration_ledger(&self, index: usize) -> QueryLedger {
        let now = &self.records[index].ledger;
        match index {
            0 => now.clone(),
            _ => now.since(&self.records[index - 1].ledger),
        }
    }

    /// Passes in which the policy changed.
    pub fn changing_iterations(&self) -> usize {
        self.records.iter().filter(|r| r.changes > 0).count()
    }

    pub fn max_deep_fraction(&self) -> f64 {
        self.records.iter().fold(0.0, |m, r| m.max(r.deep_fraction))
    }

    pub fn mean_deep_fraction(&self) -> f64 {
        if self.records.is_empty() {
            return 0.0;
        }
        self.records.iter().map(|r| r.deep_fraction).sum::<f64>() / self.records.len() as f64
    }

    /// `dist_{t+1} / dist_t` for consecutive passes with `dist_t > 0`.
    pub fn contraction_ratios(&self) -> Vec<f64> {
        self.records
            .windows(2)
            .filter(|w| w[0].dist_inf > 0.0)
            .map(|w| w[1].dist_inf / w[0].dist_inf)
            .collect()
    }

    /// Deepest lookahead that was charged any query.
    pub fn max_charged_depth(&self) -> usize {
        self.records
            .last()
            .map(|r| {
                r.ledger
                    .improve_queries_by_depth()
                    .iter()
                    .filter(|(_, &q)| q > 0)
                    .map(|(&d, _)| d)
                    .max()
                    .unwrap_or(0)
            })
            .unwrap_or(0)
    }

    /// CSV with columns
    /// `iter,dist_inf,changes,queries_total,queries_eval,queries_h1..queries_hH,deep_fraction`
    /// where `H` is the deepest charged depth and query columns are cumulative.
    pub fn to_csv(&self) -> String {
        let depth = self.max_charged_depth();
        let mut out = String::from("iter,dist_inf,changes,queries_total,queries_eval");
        for h in 1..=depth {
            let _ = write!(out, ",queries_h{h}");
        }
        out.push_str(",deep_fraction\n");
        for r in &self.records {
            let _ = write!(
                out,
                "{},{:e},{},{},{}",
                r.iter,
                r.dist_inf,
                r.changes,
                r.ledger.total(),
                r.ledger.eval_queries()
            );
            for h in 1..=depth {
                let _ = write!(out, ",{}", r.ledger.improve_queries(h));
            }
            let _ = writeln!(out, ",{}", r.deep_fraction);
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlannerResult {
    pub policy: Policy,
    pub value: ValueFunction,
    pub trace: ConvergenceTrace,
    pub iterations: usize,
    pub converged: bool,
}

impl PlannerResult {
    pub fn ledger(&self) -> QueryLedger {
        self.trace
            .records
            .last()
            .map(|r| r.ledger.clone())
            .unwrap_or_default()
    }

    pub fn total_queries(&self) -> u64 {
        self.ledger().total()
    }

    pub fn final_distance(&self) -> f64 {
        self.trace.records.last().map_or(f64::NAN, |r| r.dist_inf)
    }
}
