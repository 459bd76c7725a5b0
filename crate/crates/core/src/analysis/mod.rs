//! Measurements derived from planner runs: per-state contraction profiles,
//! effective-lookahead histograms, query-count rankings and SVG charts.

mod svg;

pub use svg::{bar_chart, line_chart, Bar, Series};

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mdp::{apply_optimality_operator, TabularMdp, ValueFunction};
use crate::planners::PlannerResult;

/// Effective lookaheads are capped here; `ρ = 0` maps to the cap.
pub const EFFECTIVE_LOOKAHEAD_CAP: f64 = 20.0;

/// Slack on `ρ ≤ 1` for the validity flag.
const RATIO_SLACK: f64 = 1e-10;

/// Per-state contraction of one Bellman step towards `V⋆`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContractionProfile {
    /// `ρ(s) = |V⋆(s) − T[V^π](s)| / ‖V⋆ − V^π‖∞`.
    pub ratios: Vec<f64>,
    /// `log ρ(s) / log γ`, `+∞` where `ρ(s) = 0`.
    pub effective_lookahead: Vec<f64>,
    /// Every ratio lies in `[0, 1]` up to rounding.
    pub valid: bool,
}

impl ContractionProfile {
    pub fn len(&self) -> usize {
        self.ratios.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ratios.is_empty()
    }

    /// Effective lookahead clipped to [`EFFECTIVE_LOOKAHEAD_CAP`].
    pub fn capped(&self) -> Vec<f64> {
        self.effective_lookahead
            .iter()
            .map(|&e| e.min(EFFECTIVE_LOOKAHEAD_CAP))
            .collect()
    }

    /// Fraction of states whose effective lookahead is at least `depth`.
    pub fn fraction_at_least(&self, depth: f64) -> f64 {
        if self.is_empty() {
            return 0.0;
        }
        let hits = self
            .effective_lookahead
            .iter()
            .filter(|&&e| e >= depth)
            .count();
        hits as f64 / self.len() as f64
    }
}

pub fn contraction_profile(
    mdp: &TabularMdp,
    v_star: &ValueFunction,
    v_pi: &ValueFunction,
) -> Result<ContractionProfile> {
    mdp.check_value(v_star)?;
    mdp.check_value(v_pi)?;
    let distance = v_star.distance_inf(v_pi);
    if distance <= 1e-12 {
        return Err(Error::UndefinedProfile);
    }
    let backed_up = apply_optimality_operator(mdp, v_pi)?;
    let log_gamma = mdp.discount().ln();
    let ratios: Vec<f64> = v_star
        .as_slice()
        .iter()
        .zip(backed_up.as_slice())
        .map(|(a, b)| (a - b).abs() / distance)
        .collect();
    let effective_lookahead = ratios
        .iter()
        .map(|&r| {
            if r == 0.0 {
                f64::INFINITY
            } else {
                r.ln() / log_gamma
            }
        })
        .collect();
    let valid = ratios.iter().all(|&r| r <= 1.0 + RATIO_SLACK);
    Ok(ContractionProfile {
        ratios,
        effective_lookahead,
        valid,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HistogramBin {
    pub lower: f64,
    /// `+∞` for the last bin.
    pub upper: f64,
    pub fraction: f64,
}

/// Integer bins `[1,2), …, [19,20), [20, ∞)`.
pub fn default_bin_edges() -> Vec<f64> {
    (1..=EFFECTIVE_LOOKAHEAD_CAP as usize)
        .map(|e| e as f64)
        .collect()
}

/// Fractions of the capped effective lookaheads per bin.
///
/// Bin `i` is `[edges[i], edges[i+1])`, the last bin is open-ended and values
/// below the first edge count towards the first bin.
pub fn histogram(profile: &ContractionProfile, edges: &[f64]) -> Result<Vec<HistogramBin>> {
    pooled_histogram(std::slice::from_ref(profile), edges)
}

/// One histogram over the states of several profiles.
pub fn pooled_histogram(
    profiles: &[ContractionProfile],
    edges: &[f64],
) -> Result<Vec<HistogramBin>> {
    if edges.is_empty() || edges.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::invalid(
            "histogram edges must be non-empty and strictly increasing",
        ));
    }
    let total: usize = profiles.iter().map(ContractionProfile::len).sum();
    if total == 0 {
        return Err(Error::invalid(
            "cannot build a histogram of an empty profile",
        ));
    }
    let mut counts = vec![0usize; edges.len()];
    for e in profiles.iter().flat_map(|p| p.capped()) {
        let bin = edges.partition_point(|&edge| edge <= e).saturating_sub(1);
        counts[bin] += 1;
    }
    Ok(counts
        .iter()
        .enumerate()
        .map(|(i, &c)| HistogramBin {
            lower: edges[i],
            upper: edges.get(i + 1).copied().unwrap_or(f64::INFINITY),
            fraction: c as f64 / total as f64,
        })
        .collect())
}

pub fn histogram_csv(bins: &[HistogramBin]) -> String {
    let mut out = String::from("lower,upper,fraction\n");
    for b in bins {
        let _ = writeln!(out, "{},{},{}", b.lower, b.upper, b.fraction);
    }
    out
}

/// Mean and population standard deviation.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

impl MeanStd {
    pub fn of(values: &[f64]) -> Self {
        if values.is_empty() {
            return Self::default();
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        Self {
            mean,
            std: var.sqrt(),
        }
    }
}

/// A converged run tagged with the planner label and the MDP it ran on.
#[derive(Clone, Copy, Debug)]
pub struct LabeledRun<'a> {
    pub label: &'a str,
    pub mdp_fingerprint: u64,
    pub result: &'a PlannerResult,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankingRow {
    pub rank: usize,
    pub label: String,
    pub total_queries: u64,
    pub presolve_queries: u64,
    pub iterations: usize,
}

/// Runs sorted by total queries (presolve included), ascending; ties by label.
pub fn compare_query_counts(runs: &[LabeledRun<'_>]) -> Result<Vec<RankingRow>> {
    if let Some(first) = runs.first() {
        if let Some(other) = runs
            .iter()
            .find(|r| r.mdp_fingerprint != first.mdp_fingerprint)
        {
            return Err(Error::invalid(format!(
                "runs `{}` and `{}` were made on different MDPs",
                first.label, other.label
            )));
        }
    }
    if let Some(r) = runs.iter().find(|r| !r.result.converged) {
        return Err(Error::invalid(format!(
            "run `{}` did not converge",
            r.label
        )));
    }
    let mut rows: Vec<RankingRow> = runs
        .iter()
        .map(|r| {
            let ledger = r.result.ledger();
            RankingRow {
                rank: 0,
                label: r.label.to_string(),
                total_queries: ledger.total(),
                presolve_queries: ledger.presolve_queries(),
                iterations: r.result.iterations,
            }
        })
        .collect();
    rows.sort_by(|a, b| {
        a.total_queries
            .cmp(&b.total_queries)
            .then_with(|| a.label.cmp(&b.label))
    });
    for (i, row) in rows.iter_mut().enumerate() {
        row.rank = i + 1;
    }
    Ok(rows)
}

pub fn ranking_csv(rows: &[RankingRow]) -> String {
    let mut out = String::from("rank,label,total_queries,presolve_queries,iterations\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            r.rank, r.label, r.total_queries, r.presolve_queries, r.iterations
        );
    }
    out
}

/// Whether the smallest value is strictly below both endpoints.
pub fn has_interior_minimum(values: &[f64]) -> bool {
    if values.len() < 3 {
        return false;
    }
    let best = values.iter().copied().fold(f64::INFINITY, f64::min);
    let last = values.len() - 1;
    values[0] > best && values[last] > best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::{build_chain, random_mdp, RandomMdpConfig, CHAIN_DOWN};
    use crate::mdp::{evaluate_policy, solve_optimal, EvalMethod, Policy};
    use crate::planners::{run_h_pi, run_pi, RunSettings};
    use proptest::prelude::*;

    #[test]
    fn one_step_contraction_by_gamma_has_unit_lookahead() {
        // A single absorbing state with reward 1: V⋆ = 1/(1−γ) and T contracts
        // any constant vector by exactly γ.
        let mdp = TabularMdp::new(0.5, vec![vec![1.0]], vec![vec![vec![(0, 1.0)]]]).unwrap();
        let v_star = ValueFunction::new(vec![2.0]).unwrap();
        let profile = contraction_profile(&mdp, &v_star, &ValueFunction::zeros(1)).unwrap();
        assert_eq!(profile.ratios, vec![0.5]);
        assert!((profile.effective_lookahead[0] - 1.0).abs() < 1e-12);
        assert!(profile.valid);
    }

    #[test]
    fn exact_backup_is_binned_at_cap() {
        let mdp = build_chain(3, 0.9).unwrap();
        let (v_star, _) = solve_optimal(&mdp, 1e-12).unwrap();
        let v_pi =
            evaluate_policy(&mdp, &Policy::constant(5, CHAIN_DOWN), EvalMethod::Direct).unwrap();
        let profile = contraction_profile(&mdp, &v_star, &v_pi).unwrap();
        // The sink is fixed by one backup; every other state is still off.
        assert_eq!(profile.effective_lookahead[4], f64::INFINITY);
        let bins = histogram(&profile, &default_bin_edges()).unwrap();
        assert_eq!(bins.last().unwrap().fraction, 1.0 / 5.0);
        assert!(matches!(
            contraction_profile(&mdp, &v_star, &v_star),
            Err(Error::UndefinedProfile)
        ));
    }

    #[test]
    fn histogram_examples() {
        let flat = ContractionProfile {
            ratios: vec![0.5; 4],
            effective_lookahead: vec![3.0; 4],
            valid: true,
        };
        let bins = histogram(&flat, &default_bin_edges()).unwrap();
        assert_eq!(bins.iter().filter(|b| b.fraction > 0.0).count(), 1);
        assert_eq!(bins[2].fraction, 1.0);
        let split = ContractionProfile {
            ratios: vec![0.5, 0.1],
            effective_lookahead: vec![1.0, 7.5],
            valid: true,
        };
        let bins = histogram(&split, &[1.0, 5.0]).unwrap();
        assert_eq!(bins[0].fraction, 0.5);
        assert_eq!(bins[1].fraction, 0.5);
        assert_eq!(bins[1].upper, f64::INFINITY);
        assert!(histogram(&split, &[2.0, 1.0]).is_err());
        let empty = ContractionProfile {
            ratios: vec![],
            effective_lookahead: vec![],
            valid: true,
        };
        assert!(histogram(&empty, &[1.0]).is_err());
    }

    #[test]
    fn ranking_orders_and_rejects_mixed_mdps() {
        let mdp = build_chain(8, 0.9).unwrap();
        let pi0 = Policy::constant(10, CHAIN_DOWN);
        let pi = run_pi(&mdp, &pi0, &RunSettings::default()).unwrap();
        let h3 = run_h_pi(&mdp, &pi0, 3, &RunSettings::default()).unwrap();
        let fp = mdp.fingerprint();
        let rows = compare_query_counts(&[
            LabeledRun {
                label: "hpi3",
                mdp_fingerprint: fp,
                result: &h3,
            },
            LabeledRun {
                label: "pi",
                mdp_fingerprint: fp,
                result: &pi,
            },
        ])
        .unwrap();
        assert!(rows[0].total_queries <= rows[1].total_queries);
        assert_eq!(rows[0].rank, 1);
        let single = compare_query_counts(&[LabeledRun {
            label: "pi",
            mdp_fingerprint: fp,
            result: &pi,
        }])
        .unwrap();
        assert_eq!(single.len(), 1);
        assert!(compare_query_counts(&[
            LabeledRun {
                label: "a",
                mdp_fingerprint: fp,
                result: &pi
            },
            LabeledRun {
                label: "b",
                mdp_fingerprint: fp ^ 1,
                result: &pi
            },
        ])
        .is_err());
    }

    #[test]
    fn interior_minimum_detection() {
        assert!(has_interior_minimum(&[3.0, 1.0, 2.0]));
        assert!(!has_interior_minimum(&[1.0, 2.0, 3.0]));
        assert!(!has_interior_minimum(&[3.0, 2.0, 1.0]));
        assert!(!has_interior_minimum(&[1.0, 2.0]));
    }

    #[test]
    fn mean_std() {
        let m = MeanStd::of(&[1.0, 3.0]);
        assert_eq!(m.mean, 2.0);
        assert_eq!(m.std, 1.0);
    }

    proptest! {
        #[test]
        fn profile_ratios_bounded_and_mass_conserved(seed in 0u64..500, action in 0usize..3) {
            let mdp = random_mdp(&RandomMdpConfig { num_states: 12, num_actions: 3, branching: 3, discount: 0.9, seed }).unwrap();
            let (v_star, _) = solve_optimal(&mdp, 1e-12).unwrap();
            let v_pi = evaluate_policy(&mdp, &Policy::constant(12, action), EvalMethod::Direct).unwrap();
            prop_assume!(v_star.distance_inf(&v_pi) > 1e-9);
            let profile = contraction_profile(&mdp, &v_star, &v_pi).unwrap();
            prop_assert!(profile.valid);
            for (&r, &e) in profile.ratios.iter().zip(&profile.effective_lookahead) {
                prop_assert!(r <= 1.0 + 1e-10);
                if r > 0.0 {
                    prop_assert!(e >= 1.0 - 1e-6);
                }
            }
            let bins = histogram(&profile, &default_bin_edges()).unwrap();
            let mass: f64 = bins.iter().map(|b| b.fraction).sum();
            prop_assert!((mass - 1.0).abs() < 1e-12);
        }
    }
}
