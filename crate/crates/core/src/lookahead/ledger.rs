use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

/// Simulator-query counters.
///
/// One query is one fetch of `(r(s,a), P(·|s,a))` for a single state-action
/// pair. Counters only ever grow during a run.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueryLedger {
    eval_queries: u64,
    improve_queries_by_depth: BTreeMap<usize, u64>,
    /// Queries spent before the run proper, e.g. solving an aggregated MDP to
    /// obtain an approximate optimal value.
    #[serde(default)]
    presolve_queries: u64,
}

impl QueryLedger {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn charge_eval(&mut self, queries: u64) {
        self.eval_queries = self.eval_queries.saturating_add(queries);
    }

    pub fn charge_improve(&mut self, depth: usize, queries: u64) {
        let slot = self.improve_queries_by_depth.entry(depth).or_insert(0);
        *slot = slot.saturating_add(queries);
    }

    pub fn charge_presolve(&mut self, queries: u64) {
        self.presolve_queries = self.presolve_queries.saturating_add(queries);
    }

    pub fn eval_queries(&self) -> u64 {
        self.eval_queries
    }

    pub fn presolve_queries(&self) -> u64 {
        self.presolve_queries
    }

    pub fn improve_queries(&self, depth: usize) -> u64 {
        self.improve_queries_by_depth
            .get(&depth)
            .copied()
            .unwrap_or(0)
    }

    pub fn improve_queries_by_depth(&self) -> &BTreeMap<usize, u64> {
        &self.improve_queries_by_depth
    }

    pub fn total_improve(&self) -> u64 {
        self.improve_queries_by_depth
            .values()
            .fold(0u64, |acc, &q| acc.saturating_add(q))
    }

    /// `presolve + eval + Σ_h improve[h]`.
    pub fn total(&self) -> u64 {
        self.presolve_queries
            .saturating_add(self.eval_queries)
            .saturating_add(self.total_improve())
    }

    /// Component-wise difference `self − earlier`.
    pub fn since(&self, earlier: &QueryLedger) -> QueryLedger {
        let mut out = QueryLedger {
            eval_queries: self.eval_queries - earlier.eval_queries,
            improve_queries_by_depth: BTreeMap::new(),
            presolve_queries: self.presolve_queries - earlier.presolve_queries,
        };
        for (&depth, &q) in &self.improve_queries_by_depth {
            let delta = q - earlier.improve_queries(depth);
            if delta > 0 {
                out.improve_queries_by_depth.insert(depth, delta);
            }
        }
        out
    }

    /// Rows `phase,depth,queries`; depth is empty for non-improvement phases.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("phase,depth,queries\n");
        if self.presolve_queries > 0 {
            let _ = writeln!(out, "presolve,,{}", self.presolve_queries);
        }
        let _ = writeln!(out, "eval,,{}", self.eval_queries);
        for (depth, q) in &self.improve_queries_by_depth {
            let _ = writeln!(out, "improve,{depth},{q}");
        }
        out
    }
}
