//! Adaptive-lookahead policy iteration for finite discounted MDPs.
//!
//! The crate is organised bottom-up:
//!
//! - [`mdp`]: tabular MDP model, Bellman operators, exact policy evaluation
//!   and the optimal-value oracle.
//! - [`lookahead`]: h-step improvement through a forward tree search (which
//!   charges simulator queries) or a dynamic-programming backend.
//! - [`planners`]: PI, h-PI, threshold-based (TLPI) and quantile-based
//!   (QLPI) lookahead policy iteration, with convergence traces.
//! - [`envs`]: chain and four-room maze builders plus k×k state aggregation.
//! - [`analysis`]: contraction profiles, histograms, query-count rankings
//!   and SVG charts.
//! - [`experiment`]: declarative experiment specs shared by the CLI and the
//!   acceptance suite.

pub mod analysis;
pub mod envs;
pub mod error;
pub mod experiment;
pub mod lookahead;
pub mod mdp;
pub mod planners;

pub use error::{Error, Result};
pub use lookahead::{LookaheadBackend, QueryLedger};
pub use mdp::{ActionValueTable, Policy, TabularMdp, ValueFunction};
pub use planners::{ConvergenceTrace, PlannerResult, QuantileSchedule, RunSettings};
