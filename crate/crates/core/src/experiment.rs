//! Declarative experiment descriptions and the runner behind them.
//!
//! An [`ExperimentConfig`] names an environment, one or more planners and a
//! list of seeds. Each (planner, seed) cell is independent: the environment
//! is rebuilt from the seed, `V⋆` is solved exactly for the trace distances,
//! and the planner's own `V⋆` input comes from its [`VStarSource`].

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::analysis::MeanStd;
use crate::envs::{
    aggregate_mdp, build_chain, build_maze, grid_partition, lift_value, random_mdp, Maze,
    MazeConfig, RandomMdpConfig, CHAIN_DOWN,
};
use crate::error::{Error, Result};
use crate::lookahead::{LookaheadBackend, QueryLedger};
use crate::mdp::{solve_optimal, EvalMethod, Policy, TabularMdp, ValueFunction};
use crate::planners::{
    discount_power, run_h_pi, run_pi, run_qlpi, run_tlpi, tlpi_beta, PlannerResult,
    QuantileSchedule, RunSettings,
};

/// Tolerance handed to [`solve_optimal`] wherever an exact `V⋆` is needed.
pub const SOLVE_TOLERANCE: f64 = 1e-10;

fn default_chain_gamma() -> f64 {
    0.9
}

fn default_branching() -> usize {
    3
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum EnvSpec {
    Chain {
        n: usize,
        #[serde(default = "default_chain_gamma")]
        gamma: f64,
    },
    Maze(MazeConfig),
    Random {
        num_states: usize,
        num_actions: usize,
        #[serde(default = "default_branching")]
        branching: usize,
        #[serde(default = "default_chain_gamma")]
        discount: f64,
        #[serde(default)]
        seed: u64,
    },
    File {
        path: PathBuf,
    },
}

/// A built environment and the policy runs start from.
#[derive(Clone, Debug)]
pub struct Environment {
    pub mdp: TabularMdp,
    pub maze: Option<Maze>,
    pub initial_policy: Policy,
}

impl EnvSpec {
    /// Seed stored in the spec itself, if the environment is random.
    pub fn own_seed(&self) -> Option<u64> {
        match self {
            EnvSpec::Maze(config) => Some(config.seed),
            EnvSpec::Random { seed, .. } => Some(*seed),
            _ => None,
        }
    }

    /// Builds the environment; `seed` replaces the spec's own seed for the
    /// random kinds and is ignored otherwise.
    pub fn instantiate(&self, seed: u64) -> Result<Environment> {
        match self {
            EnvSpec::Chain { n, gamma } => {
                let mdp = build_chain(*n, *gamma)?;
                let initial_policy = Policy::constant(mdp.num_states(), CHAIN_DOWN);
                Ok(Environment {
                    mdp,
                    maze: None,
                    initial_policy,
                })
            }
            EnvSpec::Maze(config) => {
                let maze = build_maze(&MazeConfig {
                    seed,
                    ..config.clone()
                })?;
                let mdp = maze.mdp().clone();
                let initial_policy = Policy::constant(mdp.num_states(), 0);
                Ok(Environment {
                    mdp,
                    maze: Some(maze),
                    initial_policy,
                })
            }
            EnvSpec::Random {
                num_states,
                num_actions,
                branching,
                discount,
                ..
            } => {
                let mdp = random_mdp(&RandomMdpConfig {
                    num_states: *num_states,
                    num_actions: *num_actions,
                    branching: *branching,
                    discount: *discount,
                    seed,
                })?;
                let initial_policy = Policy::constant(mdp.num_states(), 0);
                Ok(Environment {
                    mdp,
                    maze: None,
                    initial_policy,
                })
            }
            EnvSpec::File { path } => {
                let mdp = TabularMdp::load(path)?;
                let initial_policy = Policy::constant(mdp.num_states(), 0);
                Ok(Environment {
                    mdp,
                    maze: None,
                    initial_policy,
                })
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            EnvSpec::Chain { n, gamma } => {
                if *n == 0 {
                    return Err(Error::invalid("chain length n must be at least 1"));
                }
                check_discount(*gamma)
            }
            EnvSpec::Maze(config) => check_discount(config.discount),
            EnvSpec::Random {
                num_states,
                num_actions,
                branching,
                discount,
                ..
            } => {
                if *num_states == 0 || *num_actions == 0 || *branching == 0 {
                    return Err(Error::invalid(
                        "random MDP needs positive num_states, num_actions and branching",
                    ));
                }
                check_discount(*discount)
            }
            EnvSpec::File { path } => check_file(path),
        }
    }
}

fn check_discount(gamma: f64) -> Result<()> {
    if gamma > 0.0 && gamma < 1.0 {
        Ok(())
    } else {
        Err(Error::invalid(format!(
            "discount must lie in (0, 1), got {gamma}"
        )))
    }
}

fn check_file(path: &Path) -> Result<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(Error::invalid(format!(
            "file {} does not exist",
            path.display()
        )))
    }
}

/// Where a planner gets its `V⋆` input.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum VStarSource {
    #[default]
    Exact,
    /// Solve the `k × k` aggregated maze with PI and lift its value. The
    /// aggregate solve is charged to the run's ledger as presolve queries.
    Aggregate { k: usize },
    /// A JSON document with a `values` array, e.g. the output of `solve`.
    File { path: PathBuf },
}

impl VStarSource {
    fn tag(&self) -> String {
        match self {
            VStarSource::Exact => String::new(),
            VStarSource::Aggregate { k } => format!("[agg k={k}]"),
            VStarSource::File { path } => format!("[file {}]", path.display()),
        }
    }
}

/// `V⋆` document written by `solve` and read by [`VStarSource::File`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolutionDocument {
    pub values: ValueFunction,
    pub policy: Policy,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum PlannerSpec {
    Pi,
    Hpi {
        h: usize,
    },
    Tlpi {
        /// Explicit κ; alternatively `kappa_power = h` means `κ = γ^h`.
        #[serde(default)]
        kappa: Option<f64>,
        #[serde(default)]
        kappa_power: Option<usize>,
        /// Raw trigger correction. Defaults to `ε(κ+1)` when `epsilon` is
        /// given and to 0 otherwise.
        #[serde(default)]
        beta: Option<f64>,
        #[serde(default)]
        epsilon: Option<f64>,
        #[serde(default)]
        vstar: VStarSource,
    },
    Qlpi {
        /// Either the full schedule `(θ_1, …, θ_H)`, or with `depths` the
        /// fractions at those depths (and `θ_1 = 1`).
        thetas: Vec<f64>,
        #[serde(default)]
        depths: Option<Vec<usize>>,
        #[serde(default)]
        m: usize,
        #[serde(default)]
        vstar: VStarSource,
    },
}

fn join<T: std::fmt::Display>(items: &[T]) -> String {
    items
        .iter()
        .map(|t| t.to_string())
        .collect::<Vec<_>>()
        .join("/")
}

impl PlannerSpec {
    /// Short comma-free name used in file names and rankings.
    pub fn label(&self) -> String {
        match self {
            PlannerSpec::Pi => "pi".into(),
            PlannerSpec::Hpi { h } => format!("hpi(h={h})"),
            PlannerSpec::Tlpi {
                kappa,
                kappa_power,
                beta,
                epsilon,
                vstar,
            } => {
                let mut label = match (kappa_power, kappa) {
                    (Some(h), _) => format!("tlpi(kappa=gamma^{h}"),
                    (None, Some(k)) => format!("tlpi(kappa={k}"),
                    (None, None) => "tlpi(kappa=?".into(),
                };
                if let Some(b) = beta {
                    label.push_str(&format!(" beta={b}"));
                } else if let Some(e) = epsilon {
                    label.push_str(&format!(" eps={e}"));
                }
                label.push(')');
                label + &vstar.tag()
            }
            PlannerSpec::Qlpi {
                thetas,
                depths,
                m,
                vstar,
            } => {
                let mut label = match depths {
                    Some(d) => format!("qlpi({}@{}", join(thetas), join(d)),
                    None => format!("qlpi({}", join(thetas)),
                };
                if *m > 0 {
                    label.push_str(&format!(" m={m}"));
                }
                label.push(')');
                label + &vstar.tag()
            }
        }
    }

    pub fn schedule(&self) -> Result<Option<QuantileSchedule>> {
        match self {
            PlannerSpec::Qlpi { thetas, depths, .. } => Ok(Some(match depths {
                Some(depths) => {
                    if depths.len() != thetas.len() {
                        return Err(Error::invalid(format!(
                            "{} quantiles given for {} depths",
                            thetas.len(),
                            depths.len()
                        )));
                    }
                    let pairs: Vec<(usize, f64)> =
                        depths.iter().copied().zip(thetas.iter().copied()).collect();
                    QuantileSchedule::with_depths(&pairs)?
                }
                None => QuantileSchedule::new(thetas.clone())?,
            })),
            _ => Ok(None),
        }
    }

    pub fn kappa(&self, gamma: f64) -> Result<Option<f64>> {
        match self {
            PlannerSpec::Tlpi {
                kappa, kappa_power, ..
            } => match (kappa, kappa_power) {
                (Some(_), Some(_)) => {
                    Err(Error::invalid("give either kappa or kappa_power, not both"))
                }
                (Some(k), None) => Ok(Some(*k)),
                (None, Some(h)) if *h >= 1 => Ok(Some(discount_power(gamma, *h))),
                (None, Some(_)) => Err(Error::invalid("kappa_power must be at least 1")),
                (None, None) => Err(Error::invalid("tlpi needs kappa or kappa_power")),
            },
            _ => Ok(None),
        }
    }

    fn vstar(&self) -> Option<&VStarSource> {
        match self {
            PlannerSpec::Tlpi { vstar, .. } | PlannerSpec::Qlpi { vstar, .. } => Some(vstar),
            _ => None,
        }
    }

    /// Checks everything that does not need the built environment.
    pub fn validate(&self) -> Result<()> {
        match self {
            PlannerSpec::Pi => {}
            PlannerSpec::Hpi { h } => {
                if *h == 0 {
                    return Err(Error::invalid("hpi needs h ≥ 1"));
                }
            }
            PlannerSpec::Tlpi { beta, epsilon, .. } => {
                // Any γ in (0, 1) exercises the same checks on κ.
                if let Some(k) = self.kappa(0.5)? {
                    if !(k > 0.0 && k < 1.0) {
                        return Err(Error::invalid(format!("κ must lie in (0, 1), got {k}")));
                    }
                }
                for (name, value) in [("beta", beta), ("epsilon", epsilon)] {
                    if let Some(v) = value {
                        if !(*v >= 0.0 && v.is_finite()) {
                            return Err(Error::invalid(format!(
                                "{name} must be non-negative, got {v}"
                            )));
                        }
                    }
                }
            }
            PlannerSpec::Qlpi { .. } => {
                self.schedule()?;
            }
        }
        match self.vstar() {
            Some(VStarSource::Aggregate { k }) if *k == 0 => Err(Error::invalid(
                "aggregation block size k must be at least 1",
            )),
            Some(VStarSource::File { path }) => check_file(path),
            _ => Ok(()),
        }
    }
}

/// Top-level experiment document.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub env: EnvSpec,
    /// Planner for `run`.
    #[serde(default)]
    pub planner: Option<PlannerSpec>,
    /// Planner grid for `sweep`.
    #[serde(default)]
    pub planners: Vec<PlannerSpec>,
    /// Defaults to the environment's own seed (or 0).
    #[serde(default)]
    pub seeds: Option<Vec<u64>>,
    #[serde(default)]
    pub backend: LookaheadBackend,
    #[serde(default)]
    pub eval: EvalMethod,
    #[serde(default)]
    pub max_iters: Option<usize>,
    #[serde(default)]
    pub output: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn seeds(&self) -> Vec<u64> {
        self.seeds
            .clone()
            .unwrap_or_else(|| vec![self.env.own_seed().unwrap_or(0)])
    }

    /// `planner` followed by `planners`.
    pub fn all_planners(&self) -> Vec<PlannerSpec> {
        self.planner.iter().chain(&self.planners).cloned().collect()
    }

    pub fn validate(&self) -> Result<()> {
        self.env.validate()?;
        for p in self.all_planners() {
            p.validate()?;
            if matches!(p.vstar(), Some(VStarSource::Aggregate { .. }))
                && !matches!(self.env, EnvSpec::Maze(_))
            {
                return Err(Error::invalid(format!(
                    "{}: aggregation needs a maze environment",
                    p.label()
                )));
            }
        }
        if let Some(seeds) = &self.seeds {
            if seeds.is_empty() {
                return Err(Error::invalid("seed list is empty"));
            }
        }
        if let EvalMethod::Iterative { tol } = self.eval {
            if !(tol > 0.0) {
                return Err(Error::invalid("evaluation tolerance must be positive"));
            }
        }
        if self.max_iters == Some(0) {
            return Err(Error::invalid("max_iters must be at least 1"));
        }
        Ok(())
    }

    pub fn settings(&self) -> RunSettings {
        RunSettings {
            backend: self.backend,
            max_iters: self.max_iters,
            eval: self.eval,
            reference: None,
            initial_ledger: QueryLedger::new(),
        }
    }
}

/// `V⋆` estimate and what it cost to obtain.
#[derive(Clone, Debug)]
pub struct VStarEstimate {
    pub values: ValueFunction,
    pub presolve: QueryLedger,
}

/// Produces the planner's `V⋆` input.
pub fn estimate_v_star(
    source: &VStarSource,
    env: &Environment,
    exact: &ValueFunction,
    settings: &RunSettings,
) -> Result<VStarEstimate> {
    match source {
        VStarSource::Exact => Ok(VStarEstimate {
            values: exact.clone(),
            presolve: QueryLedger::new(),
        }),
        VStarSource::Aggregate { k } => {
            let maze = env
                .maze
                .as_ref()
                .ok_or_else(|| Error::invalid("aggregation needs a maze environment"))?;
            let map = grid_partition(maze, *k)?;
            let small = aggregate_mdp(&env.mdp, &map)?;
            let pi0 = Policy::constant(small.num_states(), 0);
            let inner = RunSettings {
                backend: settings.backend,
                max_iters: None,
                eval: settings.eval,
                reference: None,
                initial_ledger: QueryLedger::new(),
            };
            let solved = run_pi(&small, &pi0, &inner)?;
            if !solved.converged {
                return Err(Error::Solver {
                    context: "aggregate solve",
                    detail: format!("PI on the {k}x{k} aggregate did not converge"),
                });
            }
            let mut presolve = QueryLedger::new();
            presolve.charge_presolve(solved.total_queries());
            Ok(VStarEstimate {
                values: lift_value(&solved.value, &map)?,
                presolve,
            })
        }
        VStarSource::File { path } => {
            let doc: SolutionDocument = serde_json::from_str(&std::fs::read_to_string(path)?)?;
            env.mdp.check_value(&doc.values)?;
            Ok(VStarEstimate {
                values: ValueFunction::new(doc.values.into_vec())?,
                presolve: QueryLedger::new(),
            })
        }
    }
}

/// One (planner, seed) cell.
#[derive(Clone, Debug, Serialize)]
pub struct RunOutcome {
    pub label: String,
    pub seed: u64,
    pub mdp_fingerprint: u64,
    pub result: PlannerResult,
    /// `‖Ṽ⋆ − V⋆‖∞` of the planner's `V⋆` input; 0 for exact sources.
    pub v_star_error: f64,
}

/// Runs `planner` on an already-built environment whose exact `V⋆` is known.
pub fn run_planner(
    planner: &PlannerSpec,
    env: &Environment,
    v_star: &ValueFunction,
    settings: &RunSettings,
) -> Result<(PlannerResult, f64)> {
    planner.validate()?;
    let mdp = &env.mdp;
    let mut settings = settings.clone();
    settings.reference = Some(v_star.clone());
    let pi0 = &env.initial_policy;
    match planner {
        PlannerSpec::Pi => Ok((run_pi(mdp, pi0, &settings)?, 0.0)),
        PlannerSpec::Hpi { h } => Ok((run_h_pi(mdp, pi0, *h, &settings)?, 0.0)),
        PlannerSpec::Tlpi {
            beta,
            epsilon,
            vstar,
            ..
        } => {
            let kappa = planner.kappa(mdp.discount())?.expect("tlpi has a kappa");
            let estimate = estimate_v_star(vstar, env, v_star, &settings)?;
            let beta = beta.unwrap_or_else(|| epsilon.map_or(0.0, |e| tlpi_beta(e, kappa)));
            let error = estimate.values.distance_inf(v_star);
            settings.initial_ledger = estimate.presolve;
            let result = run_tlpi(mdp, pi0, kappa, &estimate.values, beta, &settings)?;
            Ok((result, error))
        }
        PlannerSpec::Qlpi { m, vstar, .. } => {
            let schedule = planner.schedule()?.expect("qlpi has a schedule");
            let estimate = estimate_v_star(vstar, env, v_star, &settings)?;
            let error = estimate.values.distance_inf(v_star);
            settings.initial_ledger = estimate.presolve;
            let result = run_qlpi(mdp, pi0, &schedule, &estimate.values, *m, &settings)?;
            Ok((result, error))
        }
    }
}

/// Builds the environment for `seed`, solves it, and runs `planner`.
pub fn run_cell(config: &ExperimentConfig, planner: &PlannerSpec, seed: u64) -> Result<RunOutcome> {
    let env = config.env.instantiate(seed)?;
    let (v_star, _) = solve_optimal(&env.mdp, SOLVE_TOLERANCE)?;
    let (result, v_star_error) = run_planner(planner, &env, &v_star, &config.settings())?;
    Ok(RunOutcome {
        label: planner.label(),
        seed,
        mdp_fingerprint: env.mdp.fingerprint(),
        result,
        v_star_error,
    })
}

/// Across-seed statistics of one planner.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlannerSummary {
    pub label: String,
    pub seeds: Vec<u64>,
    pub runs: usize,
    pub converged_runs: usize,
    pub iterations: MeanStd,
    pub total_queries: MeanStd,
    pub presolve_queries: MeanStd,
    pub mean_deep_fraction: MeanStd,
    pub final_distance_max: f64,
}

pub fn summarize(label: &str, outcomes: &[RunOutcome]) -> PlannerSummary {
    let f =
        |g: &dyn Fn(&RunOutcome) -> f64| MeanStd::of(&outcomes.iter().map(g).collect::<Vec<_>>());
    PlannerSummary {
        label: label.to_string(),
        seeds: outcomes.iter().map(|o| o.seed).collect(),
        runs: outcomes.len(),
        converged_runs: outcomes.iter().filter(|o| o.result.converged).count(),
        iterations: f(&|o| o.result.iterations as f64),
        total_queries: f(&|o| o.result.total_queries() as f64),
        presolve_queries: f(&|o| o.result.ledger().presolve_queries() as f64),
        mean_deep_fraction: f(&|o| o.result.trace.mean_deep_fraction()),
        final_distance_max: outcomes
            .iter()
            .map(|o| o.result.final_distance())
            .fold(0.0, f64::max),
    }
}
