//! Discrete-time model of entanglement-swapping networks: queues and
//! transitions derived from routes, stochastic arrivals, losses and demands,
//! scheduling policies, and a simulation engine with stability sweeps.

pub mod engine;
pub mod netmodel;
pub mod policies;
pub mod stochproc;
