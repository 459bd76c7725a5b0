//! Environment builders and the state-aggregation pipeline.

mod aggregation;
mod chain;
mod maze;
mod random;

pub use aggregation::{
    aggregate_mdp, grid_partition, lift_value, order_preservation_m, AggregationMap,
};
pub use chain::{build_chain, CHAIN_DOWN, CHAIN_UP};
pub use maze::{build_maze, Maze, MazeAction, MazeConfig, MAZE_ATTEMPTS};
pub use random::{random_mdp, RandomMdpConfig};
