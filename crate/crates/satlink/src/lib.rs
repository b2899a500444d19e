//! Satellite-to-ground link model: free-space transmittance, single- and
//! dual-downlink entanglement rates with a differential-latency correction,
//! memory splits between two ground stations, and per-step generation rates
//! for the network simulator.

mod accumulate;
mod optics;
mod rates;
mod split;
mod trace;

use std::path::PathBuf;

use thiserror::Error;

pub use accumulate::{
    accumulate_pairs, dual_rate_series, rate_source_adapter, single_rate_series, write_rate_csv, Accumulation,
    Allocation, PerSecond, RateSeries,
};
pub use optics::{freespace_transmittance, OpticsParams};
pub use rates::{
    differential_latency_shift, dual_link_rate, leg_rate, single_link_rate, train_bound, LinkHardware, LinkRate,
};
pub use split::{best_fixed_split, exhaustive_split, joint_window, optimal_split_integer, optimal_split_real, IntegerSplit};
pub use trace::{LinkTrace, TracePoint, TRACE_HEADER};

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

#[derive(Debug, Error)]
pub enum SatError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("the two links are never visible at the same time")]
    EmptyWindow,
    #[error("trace {}: line {line}: {msg}", path.display())]
    Trace { path: PathBuf, line: usize, msg: String },
    #[error("cannot access {}: {msg}", path.display())]
    Io { path: PathBuf, msg: String },
}
