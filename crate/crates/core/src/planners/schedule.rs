use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Fractions `(θ_1, …, θ_H)` of states improved at each depth per iteration.
///
/// Valid schedules have every entry in `[0, 1]` and at least one entry equal
/// to 1, so every state receives some improvement each iteration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct QuantileSchedule {
    thetas: Vec<f64>,
}

impl QuantileSchedule {
    pub fn new(thetas: Vec<f64>) -> Result<Self> {
        if thetas.is_empty() {
            return Err(Error::invalid("quantile schedule is empty"));
        }
        if let Some((i, t)) = thetas
            .iter()
            .enumerate()
            .find(|(_, t)| !(0.0..=1.0).contains(*t))
        {
            return Err(Error::invalid(format!("θ_{} = {t} outside [0, 1]", i + 1)));
        }
        if !thetas.contains(&1.0) {
            return Err(Error::invalid(
                "quantile schedule needs some θ_h = 1 so that every state is improved",
            ));
        }
        Ok(Self { thetas })
    }

    /// `θ_1 = 1` plus the given `(depth, θ)` pairs; other depths get 0.
    pub fn with_depths(pairs: &[(usize, f64)]) -> Result<Self> {
        let max_depth = pairs.iter().map(|&(d, _)| d).max().unwrap_or(1).max(1);
        let mut thetas = vec![0.0; max_depth];
        thetas[0] = 1.0;
        for &(depth, theta) in pairs {
            if depth == 0 {
                return Err(Error::invalid("schedule depths start at 1"));
            }
            thetas[depth - 1] = theta;
        }
        Self::new(thetas)
    }

    /// `θ_h = 1` at `depth`, 0 elsewhere: the h-PI schedule.
    pub fn single(depth: usize) -> Result<Self> {
        if depth == 0 {
            return Err(Error::invalid("lookahead depth must be at least 1"));
        }
        let mut thetas = vec![0.0; depth];
        thetas[depth - 1] = 1.0;
        Self::new(thetas)
    }

    pub fn max_depth(&self) -> usize {
        self.thetas.len()
    }

    pub fn thetas(&self) -> &[f64] {
        &self.thetas
    }

    pub fn theta(&self, depth: usize) -> f64 {
        self.thetas[depth - 1]
    }

    /// Every entry raised by `m / S`, clipped to 1.
    pub fn inflated(&self, order_slack: usize, num_states: usize) -> Self {
        let bump = order_slack as f64 / num_states as f64;
        Self {
            thetas: self.thetas.iter().map(|t| (t + bump).min(1.0)).collect(),
        }
    }
}

impl TryFrom<Vec<f64>> for QuantileSchedule {
    type Error = Error;

    fn try_from(thetas: Vec<f64>) -> Result<Self> {
        Self::new(thetas)
    }
}

impl From<QuantileSchedule> for Vec<f64> {
    fn from(schedule: QuantileSchedule) -> Self {
        schedule.thetas
    }
}

/// Result of [`quantile_cutoff`].
#[derive(Clone, Debug, PartialEq)]
pub struct QuantileCut {
    /// Smallest selected distance; `None` when nothing is selected.
    pub threshold: Option<f64>,
    /// Selected states in increasing index order.
    pub selected: Vec<usize>,
}

/// Number of states a fraction `theta` of `num_states` selects.
pub fn quantile_count(theta: f64, num_states: usize) -> usize {
    if theta <= 0.0 {
        return 0;
    }
    // The slack keeps e.g. 0.3 · 10 from rounding up to 4.
    ((theta * num_states as f64 - 1e-9).ceil().max(0.0) as usize).min(num_states)
}

/// The `⌈θ·S⌉` states with the largest distances, ties broken by lower index.
pub fn quantile_cutoff(distances: &[f64], theta: f64) -> QuantileCut {
    let count = quantile_count(theta, distances.len());
    if count == 0 {
        return QuantileCut {
            threshold: None,
            selected: Vec::new(),
        };
    }
    let mut order: Vec<usize> = (0..distances.len()).collect();
    let by_rank = |&i: &usize, &j: &usize| distances[j].total_cmp(&distances[i]).then(i.cmp(&j));
    if count < order.len() {
        order.select_nth_unstable_by(count - 1, by_rank);
    }
    let mut selected = order[..count].to_vec();
    let threshold = selected
        .iter()
        .map(|&s| distances[s])
        .fold(f64::INFINITY, f64::min);
    selected.sort_unstable();
    QuantileCut {
        threshold: Some(threshold),
        selected,
    }
}
