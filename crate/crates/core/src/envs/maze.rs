use std::collections::VecDeque;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mdp::TabularMdp;

/// Placement is retried on a fresh substream this many times.
pub const MAZE_ATTEMPTS: u64 = 100;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MazeAction {
    Up = 0,
    Down = 1,
    Right = 2,
    Left = 3,
}

impl MazeAction {
    pub const ALL: [MazeAction; 4] = [
        MazeAction::Up,
        MazeAction::Down,
        MazeAction::Right,
        MazeAction::Left,
    ];

    fn offset(self) -> (isize, isize) {
        match self {
            MazeAction::Up => (-1, 0),
            MazeAction::Down => (1, 0),
            MazeAction::Right => (0, 1),
            MazeAction::Left => (0, -1),
        }
    }
}

/// Four-room grid world.
///
/// The grid has border walls, a vertical wall at `wall_col` and a horizontal
/// wall at `wall_row`. Each wall is split in two by the other and every half
/// gets one door at a seeded position.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MazeConfig {
    pub width: usize,
    pub height: usize,
    pub seed: u64,
    pub num_goals: usize,
    pub num_traps: usize,
    pub discount: f64,
    pub wall_row: usize,
    pub wall_col: usize,
}

impl Default for MazeConfig {
    fn default() -> Self {
        Self {
            width: 30,
            height: 30,
            seed: 0,
            num_goals: 4,
            num_traps: 1,
            discount: 0.98,
            wall_row: 15,
            wall_col: 15,
        }
    }
}

impl MazeConfig {
    pub fn with_seed(seed: u64) -> Self {
        Self {
            seed,
            ..Self::default()
        }
    }

    fn validate(&self) -> Result<()> {
        if self.width < 5 || self.height < 5 {
            return Err(Error::invalid("maze must be at least 5x5"));
        }
        if !(2..self.height - 2).contains(&self.wall_row)
            || !(2..self.width - 2).contains(&self.wall_col)
        {
            return Err(Error::invalid(
                "inner walls must leave at least one free row/column on each side",
            ));
        }
        if self.num_goals == 0 {
            return Err(Error::invalid("maze needs at least one goal"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct Maze {
    config: MazeConfig,
    mdp: TabularMdp,
    /// `(row, col)` of every state.
    cells: Vec<(usize, usize)>,
    /// State index of every grid cell, `None` for walls.
    state_of: Vec<Option<usize>>,
    goals: Vec<usize>,
    traps: Vec<usize>,
    spawn: usize,
    attempt: u64,
}

impl Maze {
    pub fn config(&self) -> &MazeConfig {
        &self.config
    }

    pub fn mdp(&self) -> &TabularMdp {
        &self.mdp
    }

    pub fn into_mdp(self) -> TabularMdp {
        self.mdp
    }

    pub fn cell(&self, state: usize) -> (usize, usize) {
        self.cells[state]
    }

    pub fn cells(&self) -> &[(usize, usize)] {
        &self.cells
    }

    pub fn state_at(&self, row: usize, col: usize) -> Option<usize> {
        if row < self.config.height && col < self.config.width {
            self.state_of[row * self.config.width + col]
        } else {
            None
        }
    }

    pub fn goals(&self) -> &[usize] {
        &self.goals
    }

    pub fn traps(&self) -> &[usize] {
        &self.traps
    }

    pub fn spawn(&self) -> usize {
        self.spawn
    }

    /// Substream that produced a valid placement.
    pub fn attempt(&self) -> u64 {
        self.attempt
    }

    /// Plain-text layout: `#` wall, `.` free, `G` goal, `T` trap, `S` spawn.
    pub fn render(&self) -> String {
        let mut out = String::with_capacity((self.config.width + 1) * self.config.height);
        for row in 0..self.config.height {
            for col in 0..self.config.width {
                let ch = match self.state_at(row, col) {
                    None => '#',
                    Some(s) if self.goals.contains(&s) => 'G',
                    Some(s) if self.traps.contains(&s) => 'T',
                    Some(s) if s == self.spawn => 'S',
                    Some(_) => '.',
                };
                out.push(ch);
            }
            out.push('\n');
        }
        out
    }
}

struct Layout {
    free: Vec<bool>,
    doors: Vec<(usize, usize)>,
}

fn carve(config: &MazeConfig, rng: &mut ChaCha8Rng) -> Layout {
    let (w, h) = (config.width, config.height);
    let mut free = vec![false; w * h];
    for row in 1..h - 1 {
        for col in 1..w - 1 {
            free[row * w + col] = row != config.wall_row && col != config.wall_col;
        }
    }
    let doors = vec![
        (rng.gen_range(1..config.wall_row), config.wall_col),
        (rng.gen_range(config.wall_row + 1..h - 1), config.wall_col),
        (config.wall_row, rng.gen_range(1..config.wall_col)),
        (config.wall_row, rng.gen_range(config.wall_col + 1..w - 1)),
    ];
    for &(row, col) in &doors {
        free[row * w + col] = true;
    }
    Layout { free, doors }
}

fn connected(free: &[bool], width: usize, start: usize) -> bool {
    let mut seen = vec![false; free.len()];
    let mut queue = VecDeque::from([start]);
    seen[start] = true;
    let mut reached = 1;
    while let Some(i) = queue.pop_front() {
        let (row, col) = (i / width, i % width);
        let neighbours = [
            (row.wrapping_sub(1), col),
            (row + 1, col),
            (row, col + 1),
            (row, col.wrapping_sub(1)),
        ];
        for (r, c) in neighbours {
            if c < width && r * width + c < free.len() {
                let j = r * width + c;
                if free[j] && !seen[j] {
                    seen[j] = true;
                    reached += 1;
                    queue.push_back(j);
                }
            }
        }
    }
    reached == free.iter().filter(|&&f| f).count()
}

/// Builds the maze MDP. A pure function of `config`.
pub fn build_maze(config: &MazeConfig) -> Result<Maze> {
    config.validate()?;
    let mut last_reason = String::new();
    for attempt in 0..MAZE_ATTEMPTS {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        rng.set_stream(attempt);
        match try_build(config, &mut rng, attempt) {
            Ok(maze) => return Ok(maze),
            Err(reason) => last_reason = reason,
        }
    }
    Err(Error::MazeGeneration {
        attempts: MAZE_ATTEMPTS as usize,
        reason: last_reason,
    })
}

fn try_build(
    config: &MazeConfig,
    rng: &mut ChaCha8Rng,
    attempt: u64,
) -> std::result::Result<Maze, String> {
    let w = config.width;
    let layout = carve(config, rng);
    let spawn_cell = w + 1;
    if !connected(&layout.free, w, spawn_cell) {
        return Err("free cells are not connected".into());
    }

    let mut state_of = vec![None; layout.free.len()];
    let mut cells = Vec::new();
    for (i, &f) in layout.free.iter().enumerate() {
        if f {
            state_of[i] = Some(cells.len());
            cells.push((i / w, i % w));
        }
    }
    let spawn = state_of[spawn_cell].expect("spawn cell is free");

    // Goals and traps avoid the spawn and the doors so no room is sealed off.
    let candidates: Vec<usize> = (0..cells.len())
        .filter(|&s| s != spawn && !layout.doors.contains(&cells[s]))
        .collect();
    let wanted = config.num_goals + config.num_traps;
    if wanted > candidates.len() {
        return Err(format!(
            "{wanted} goals and traps requested but only {} candidate cells",
            candidates.len()
        ));
    }
    let picks = sample(rng, candidates.len(), wanted).into_vec();
    let mut goals: Vec<usize> = picks[..config.num_goals]
        .iter()
        .map(|&i| candidates[i])
        .collect();
    let mut traps: Vec<usize> = picks[config.num_goals..]
        .iter()
        .map(|&i| candidates[i])
        .collect();
    goals.sort_unstable();
    traps.sort_unstable();

    let respawn: Vec<usize> = (0..cells.len())
        .filter(|s| !goals.contains(s) && !traps.contains(s))
        .collect();
    if respawn.is_empty() {
        return Err("no cell left for goal respawn".into());
    }
    let p = 1.0 / respawn.len() as f64;
    let respawn_row: Vec<(usize, f64)> = respawn.iter().map(|&s| (s, p)).collect();

    let num_actions = MazeAction::ALL.len();
    let mut rewards = Vec::with_capacity(cells.len() * num_actions);
    let mut successors = Vec::with_capacity(cells.len() * num_actions);
    for (s, &(row, col)) in cells.iter().enumerate() {
        for action in MazeAction::ALL {
            if goals.contains(&s) {
                rewards.push(1.0);
                successors.push(respawn_row.clone());
            } else if traps.contains(&s) {
                rewards.push(-1.0);
                successors.push(vec![(s, 1.0)]);
            } else {
                let (dr, dc) = action.offset();
                let (r, c) = (row as isize + dr, col as isize + dc);
                let next = if r >= 0 && c >= 0 && (r as usize) < config.height && (c as usize) < w {
                    state_of[r as usize * w + c as usize].unwrap_or(s)
                } else {
                    s
                };
                rewards.push(0.0);
                successors.push(vec![(next, 1.0)]);
            }
        }
    }
    let mdp = TabularMdp::from_flat(
        cells.len(),
        num_actions,
        config.discount,
        rewards,
        successors,
    )
    .map_err(|e| e.to_string())?;
    Ok(Maze {
        config: config.clone(),
        mdp,
        cells,
        state_of,
        goals,
        traps,
        spawn,
        attempt,
    })
}
