//! Conflict resolution, the discrete-time run loop and stability sweeps.

mod conflict;
mod run;
mod sweep;

use thiserror::Error;

use crate::netmodel::NetError;
use crate::policies::PolicyError;
use crate::stochproc::StochError;

pub use conflict::{apply_decision, Applied};
pub use run::{run_simulation, RunConfig, RunMetrics, TRACE_POINTS};
pub use sweep::{
    append_grid_csv, cell_seed, classify_stability, parasitic_seed, parasitic_spec, read_grid_csv, sweep_grid,
    write_grid_csv, Axis, CellRecord, CellStatus, LinkParams, Scenario, Stability, StabilityGrid, SweepSpec,
    ServiceQueues, with_parasitic_pairs, DEFAULT_THRESHOLD, GRID_CSV_HEADER,
};

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("invalid run parameters: {0}")]
    InvalidParams(String),
    #[error("invariant violated: {0}")]
    Invariant(String),
    #[error(transparent)]
    Stoch(#[from] StochError),
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error(transparent)]
    Net(#[from] NetError),
    #[error("grid csv: {0}")]
    Io(String),
}
