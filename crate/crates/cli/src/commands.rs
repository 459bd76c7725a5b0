//! `solve`, `run` and `sweep`.

use std::fmt::Write as _;
use std::path::Path;

use alpi::analysis::{compare_query_counts, ranking_csv, LabeledRun, MeanStd};
use alpi::experiment::{
    run_cell, summarize, ExperimentConfig, PlannerSummary, RunOutcome, SolutionDocument,
    SOLVE_TOLERANCE,
};
use alpi::mdp::{apply_optimality_operator, solve_optimal};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::output_dir;
use crate::error::{CliError, CliResult};
use crate::output::{slug, write_atomic, write_json};

/// Writes `vstar_seed<seed>.json` (and the layout for mazes) per seed.
pub fn solve(config: &ExperimentConfig) -> CliResult<()> {
    let dir = output_dir(config);
    let seeds = config.seeds();
    let solved: Vec<_> = seeds
        .par_iter()
        .map(|&seed| -> CliResult<_> {
            let env = config.env.instantiate(seed)?;
            let (values, policy) = solve_optimal(&env.mdp, SOLVE_TOLERANCE)?;
            let residual = apply_optimality_operator(&env.mdp, &values)?.distance_inf(&values);
            Ok((seed, env, SolutionDocument { values, policy }, residual))
        })
        .collect();
    for item in solved {
        let (seed, env, doc, residual) = item?;
        write_json(&dir.join(format!("vstar_seed{seed}.json")), &doc)?;
        if let Some(maze) = &env.maze {
            write_atomic(
                &dir.join(format!("maze_seed{seed}.txt")),
                maze.render().as_bytes(),
            )?;
        }
        println!(
            "seed {seed}: {} states, Bellman residual {residual:.3e}",
            env.mdp.num_states()
        );
    }
    Ok(())
}

#[derive(Serialize)]
struct RunRow {
    seed: u64,
    mdp_fingerprint: u64,
    converged: bool,
    iterations: usize,
    total_queries: u64,
    presolve_queries: u64,
    final_distance: f64,
    v_star_error: f64,
    mean_deep_fraction: f64,
    max_deep_fraction: f64,
}

impl RunRow {
    fn of(o: &RunOutcome) -> Self {
        Self {
            seed: o.seed,
            mdp_fingerprint: o.mdp_fingerprint,
            converged: o.result.converged,
            iterations: o.result.iterations,
            total_queries: o.result.total_queries(),
            presolve_queries: o.result.ledger().presolve_queries(),
            final_distance: o.result.final_distance(),
            v_star_error: o.v_star_error,
            mean_deep_fraction: o.result.trace.mean_deep_fraction(),
            max_deep_fraction: o.result.trace.max_deep_fraction(),
        }
    }
}

#[derive(Serialize)]
struct RunSummary {
    summary: PlannerSummary,
    runs: Vec<RunRow>,
}

/// Runs the single planner of `config` on every seed.
pub fn run(config: &ExperimentConfig) -> CliResult<()> {
    let planners = config.all_planners();
    let planner = match planners.as_slice() {
        [one] => one,
        [] => return Err(CliError::Config("`run` needs a `planner`".into())),
        _ => {
            return Err(CliError::Config(
                "`run` takes exactly one planner; use `sweep` for a grid".into(),
            ))
        }
    };
    let dir = output_dir(config);
    let outcomes = config
        .seeds()
        .par_iter()
        .map(|&seed| run_cell(config, planner, seed))
        .collect::<alpi::Result<Vec<_>>>()?;
    for o in &outcomes {
        write_atomic(
            &dir.join(format!("trace_seed{}.csv", o.seed)),
            o.result.trace.to_csv().as_bytes(),
        )?;
        write_atomic(
            &dir.join(format!("ledger_seed{}.csv", o.seed)),
            o.result.ledger().to_csv().as_bytes(),
        )?;
    }
    let label = planner.label();
    let summary = summarize(&label, &outcomes);
    write_json(
        &dir.join("summary.json"),
        &RunSummary {
            summary: summary.clone(),
            runs: outcomes.iter().map(RunRow::of).collect(),
        },
    )?;
    println!(
        "{label}: {}/{} converged, iterations {:.2} ± {:.2}, queries {:.4e} ± {:.4e}, deep fraction {:.4}",
        summary.converged_runs,
        summary.runs,
        summary.iterations.mean,
        summary.iterations.std,
        summary.total_queries.mean,
        summary.total_queries.std,
        summary.mean_deep_fraction.mean,
    );
    if summary.converged_runs < summary.runs {
        let seeds: Vec<String> = outcomes
            .iter()
            .filter(|o| !o.result.converged)
            .map(|o| o.seed.to_string())
            .collect();
        return Err(CliError::NotConverged(format!(
            "{label} did not converge within max_iters for seeds {}",
            seeds.join(",")
        )));
    }
    Ok(())
}

enum CellStatus {
    Ok(RunOutcome),
    NotConverged(RunOutcome),
    Failed(String),
}

impl CellStatus {
    fn name(&self) -> &'static str {
        match self {
            CellStatus::Ok(_) => "ok",
            CellStatus::NotConverged(_) => "not_converged",
            CellStatus::Failed(_) => "failed",
        }
    }

    fn outcome(&self) -> Option<&RunOutcome> {
        match self {
            CellStatus::Ok(o) | CellStatus::NotConverged(o) => Some(o),
            CellStatus::Failed(_) => None,
        }
    }
}

#[derive(Serialize)]
struct SweepRow {
    label: String,
    runs: usize,
    converged_runs: usize,
    failed_runs: usize,
    iterations: MeanStd,
    total_queries: MeanStd,
    presolve_queries: MeanStd,
    mean_deep_fraction: MeanStd,
}

/// Runs every planner on every seed. Cell failures are recorded and the
/// sweep carries on; the exit status reports them afterwards.
pub fn sweep(config: &ExperimentConfig) -> CliResult<()> {
    let planners = config.all_planners();
    if planners.is_empty() {
        return Err(CliError::Config("`sweep` needs `planners`".into()));
    }
    let seeds = config.seeds();
    let dir = output_dir(config);
    let cells: Vec<(usize, u64)> = (0..planners.len())
        .flat_map(|p| seeds.iter().map(move |&s| (p, s)))
        .collect();
    let statuses: Vec<CellStatus> = cells
        .par_iter()
        .map(|&(p, seed)| {
            let status = match run_cell(config, &planners[p], seed) {
                Ok(o) if o.result.converged => CellStatus::Ok(o),
                Ok(o) => CellStatus::NotConverged(o),
                Err(e) => CellStatus::Failed(e.to_string()),
            };
            if let Some(o) = status.outcome() {
                let name = format!("p{p:02}_{}_seed{seed}.csv", slug(&o.label));
                write_atomic(
                    &dir.join("traces").join(name),
                    o.result.trace.to_csv().as_bytes(),
                )?;
            }
            Ok(status)
        })
        .collect::<CliResult<_>>()?;

    let mut cells_csv = String::from(
        "planner,seed,status,iterations,total_queries,presolve_queries,final_distance,v_star_error,error\n",
    );
    for (&(p, seed), status) in cells.iter().zip(&statuses) {
        let label = planners[p].label();
        match status {
            CellStatus::Failed(e) => {
                let _ = writeln!(
                    cells_csv,
                    "{label},{seed},failed,,,,,,\"{}\"",
                    e.replace('"', "'")
                );
            }
            other => {
                let o = other.outcome().expect("run outcome");
                let _ = writeln!(
                    cells_csv,
                    "{label},{seed},{},{},{},{},{:e},{:e},",
                    other.name(),
                    o.result.iterations,
                    o.result.total_queries(),
                    o.result.ledger().presolve_queries(),
                    o.result.final_distance(),
                    o.v_star_error
                );
            }
        }
    }
    write_atomic(&dir.join("cells.csv"), cells_csv.as_bytes())?;

    let mut rows = Vec::with_capacity(planners.len());
    let mut comparison = String::from(
        "label,runs,converged_runs,failed_runs,iterations_mean,iterations_std,total_queries_mean,total_queries_std,presolve_queries_mean,mean_deep_fraction\n",
    );
    for (p, planner) in planners.iter().enumerate() {
        let label = planner.label();
        let mine: Vec<&CellStatus> = cells
            .iter()
            .zip(&statuses)
            .filter(|((q, _), _)| *q == p)
            .map(|(_, s)| s)
            .collect();
        let converged: Vec<RunOutcome> = mine
            .iter()
            .filter_map(|s| match s {
                CellStatus::Ok(o) => Some(o.clone()),
                _ => None,
            })
            .collect();
        let summary = summarize(&label, &converged);
        let row = SweepRow {
            label: label.clone(),
            runs: mine.len(),
            converged_runs: converged.len(),
            failed_runs: mine
                .iter()
                .filter(|s| matches!(s, CellStatus::Failed(_)))
                .count(),
            iterations: summary.iterations,
            total_queries: summary.total_queries,
            presolve_queries: summary.presolve_queries,
            mean_deep_fraction: summary.mean_deep_fraction,
        };
        let _ = writeln!(
            comparison,
            "{},{},{},{},{},{},{},{},{},{}",
            row.label,
            row.runs,
            row.converged_runs,
            row.failed_runs,
            row.iterations.mean,
            row.iterations.std,
            row.total_queries.mean,
            row.total_queries.std,
            row.presolve_queries.mean,
            row.mean_deep_fraction.mean
        );
        rows.push(row);
    }
    write_atomic(&dir.join("comparison.csv"), comparison.as_bytes())?;
    write_json(&dir.join("sweep.json"), &rows)?;

    for &seed in &seeds {
        let runs: Vec<LabeledRun<'_>> = statuses
            .iter()
            .zip(&cells)
            .filter(|(_, &(_, s))| s == seed)
            .filter_map(|(status, _)| match status {
                CellStatus::Ok(o) => Some(LabeledRun {
                    label: &o.label,
                    mdp_fingerprint: o.mdp_fingerprint,
                    result: &o.result,
                }),
                _ => None,
            })
            .collect();
        let ranking = compare_query_counts(&runs)?;
        write_atomic(
            &dir.join(format!("ranking_seed{seed}.csv")),
            ranking_csv(&ranking).as_bytes(),
        )?;
    }

    for row in &rows {
        println!(
            "{:<32} {:>2}/{:<2} converged  queries {:.4e} ± {:.4e}  iterations {:.2}",
            row.label,
            row.converged_runs,
            row.runs,
            row.total_queries.mean,
            row.total_queries.std,
            row.iterations.mean
        );
    }
    let bad = statuses
        .iter()
        .filter(|s| !matches!(s, CellStatus::Ok(_)))
        .count();
    if bad > 0 {
        return Err(CliError::NotConverged(format!(
            "{bad} of {} sweep cells failed or did not converge; see {}",
            statuses.len(),
            Path::new(&dir).join("cells.csv").display()
        )));
    }
    Ok(())
}
