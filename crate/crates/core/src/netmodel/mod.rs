//! Topologies, service pairs, routes and the transition system built from them.

mod graph;
mod routes;
mod system;
mod topology;

use std::path::PathBuf;

use thiserror::Error;

pub use graph::{default_names, Graph, NodeId};
pub use routes::{
    compute_routes, diameter_endpoints, parse_route, place_parasitic_pairs, route_name, select_main_pairs,
    validate_route, NetworkSpec, PairKind, ServicePair, DEFAULT_PENALTY,
};
pub use system::{assign_ranks, build_transition_system, parse_matrix_csv, Op, Queue, Transition, TransitionSystem};
pub use topology::{chain, dumbbell, generate_topology, grid, TopologyParams, MAX_RESAMPLES};

#[derive(Debug, Error)]
pub enum NetError {
    #[error("invalid topology parameters: {0}")]
    InvalidParams(String),
    #[error("no connected graph after {attempts} attempts")]
    GenerationFailed { attempts: usize },
    #[error("main pair selection kept disconnecting the graph after {attempts} attempts")]
    SelectionFailed { attempts: usize },
    #[error("graph is not connected")]
    Disconnected,
    #[error("need {needed} free nodes for parasitic pairs, only {available} available")]
    NotEnoughNodes { needed: usize, available: usize },
    #[error("no path from {from} to {to}")]
    Unreachable { from: String, to: String },
    #[error("invalid route: {0}")]
    InvalidRoute(String),
    #[error("unknown node {0:?}")]
    UnknownNode(String),
    #[error("edge list line {line}: {msg}")]
    EdgeList { line: usize, msg: String },
    #[error("cannot read {}: {msg}", path.display())]
    Io { path: PathBuf, msg: String },
    #[error("operation ranks do not converge; routes feed each other cyclically")]
    RankCycle,
}
