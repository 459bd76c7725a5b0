use std::collections::BTreeMap;

use super::maze::Maze;
use crate::error::{Error, Result};
use crate::mdp::{TabularMdp, ValueFunction};

/// Partition of the states into non-empty groups.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AggregationMap {
    group_of: Vec<usize>,
    members: Vec<Vec<usize>>,
}

impl AggregationMap {
    /// Groups must be numbered `0..G` with no gaps.
    pub fn new(group_of: Vec<usize>) -> Result<Self> {
        let num_groups = group_of.iter().max().map_or(0, |&g| g + 1);
        let mut members = vec![Vec::new(); num_groups];
        for (s, &g) in group_of.iter().enumerate() {
            members[g].push(s);
        }
        if let Some(g) = members.iter().position(Vec::is_empty) {
            return Err(Error::invalid(format!("aggregation group {g} is empty")));
        }
        Ok(Self { group_of, members })
    }

    pub fn identity(num_states: usize) -> Self {
        Self {
            group_of: (0..num_states).collect(),
            members: (0..num_states).map(|s| vec![s]).collect(),
        }
    }

    pub fn num_states(&self) -> usize {
        self.group_of.len()
    }

    pub fn num_groups(&self) -> usize {
        self.members.len()
    }

    pub fn group_of(&self, state: usize) -> usize {
        self.group_of[state]
    }

    pub fn members(&self, group: usize) -> &[usize] {
        &self.members[group]
    }
}

/// Groups free cells by `k × k` blocks, numbered in row-major block order.
pub fn grid_partition(maze: &Maze, k: usize) -> Result<AggregationMap> {
    let config = maze.config();
    if k == 0 || k > config.width.max(config.height) {
        return Err(Error::invalid(format!(
            "block size {k} outside [1, {}]",
            config.width.max(config.height)
        )));
    }
    let blocks_per_row = config.width.div_ceil(k);
    let block_ids: Vec<usize> = maze
        .cells()
        .iter()
        .map(|&(row, col)| (row / k) * blocks_per_row + col / k)
        .collect();
    let mut renumber = BTreeMap::new();
    for &b in &block_ids {
        renumber.entry(b).or_insert(0);
    }
    for (i, slot) in renumber.values_mut().enumerate() {
        *slot = i;
    }
    AggregationMap::new(block_ids.iter().map(|b| renumber[b]).collect())
}

/// Uniform-weight aggregation: rewards and group-to-group transition mass are
/// averaged over the members of each group.
pub fn aggregate_mdp(mdp: &TabularMdp, map: &AggregationMap) -> Result<TabularMdp> {
    Error::check_len("aggregation map", mdp.num_states(), map.num_states())?;
    let m = mdp.num_actions();
    let mut rewards = Vec::with_capacity(map.num_groups() * m);
    let mut successors = Vec::with_capacity(map.num_groups() * m);
    for group in 0..map.num_groups() {
        let members = map.members(group);
        let weight = members.len() as f64;
        for a in 0..m {
            let mut reward = 0.0;
            let mut mass: BTreeMap<usize, f64> = BTreeMap::new();
            for &s in members {
                reward += mdp.reward(s, a);
                for &(next, p) in mdp.successors(s, a) {
                    if p > 0.0 {
                        *mass.entry(map.group_of(next)).or_insert(0.0) += p;
                    }
                }
            }
            rewards.push(reward / weight);
            successors.push(mass.into_iter().map(|(g, p)| (g, p / weight)).collect());
        }
    }
    TabularMdp::from_flat(map.num_groups(), m, mdp.discount(), rewards, successors)
}

/// `Ṽ(s) = v_agg(group_of(s))`.
pub fn lift_value(v_agg: &ValueFunction, map: &AggregationMap) -> Result<ValueFunction> {
    Error::check_len("aggregated value", map.num_groups(), v_agg.len())?;
    Ok(ValueFunction::from_vec_unchecked(
        (0..map.num_states())
            .map(|s| v_agg.get(map.group_of(s)))
            .collect(),
    ))
}

/// Positions of each state when sorted by decreasing `|target − v_pi|`,
/// ties by index.
fn distance_ranks(target: &ValueFunction, v_pi: &ValueFunction) -> Vec<usize> {
    let d: Vec<f64> = target
        .as_slice()
        .iter()
        .zip(v_pi.as_slice())
        .map(|(a, b)| (a - b).abs())
        .collect();
    let mut order: Vec<usize> = (0..d.len()).collect();
    order.sort_by(|&i, &j| d[j].total_cmp(&d[i]).then(i.cmp(&j)));
    let mut rank = vec![0; d.len()];
    for (position, &s) in order.iter().enumerate() {
        rank[s] = position;
    }
    rank
}

/// Smallest `m` such that `v_tilde` ranks every state within `m` positions
/// of where `v_star` ranks it, distances measured from `v_pi`.
pub fn order_preservation_m(
    v_star: &ValueFunction,
    v_tilde: &ValueFunction,
    v_pi: &ValueFunction,
) -> Result<usize> {
    Error::check_len("approximate value", v_star.len(), v_tilde.len())?;
    Error::check_len("policy value", v_star.len(), v_pi.len())?;
    let p = distance_ranks(v_star, v_pi);
    let q = distance_ranks(v_tilde, v_pi);
    Ok(p.iter()
        .zip(&q)
        .map(|(&a, &b)| a.abs_diff(b))
        .max()
        .unwrap_or(0))
}
