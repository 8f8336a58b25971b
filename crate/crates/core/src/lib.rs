//! Discrete-time Monte Carlo simulation of continuous entanglement
//! distribution on regular lattices.
//!
//! Nodes on a chain, honeycomb, square or triangular lattice generate
//! elementary links with their physical neighbors, swap pairs of links with
//! a tunable probability and discard links that reach the cutoff age. The
//! simulator estimates each node's expected virtual neighborhood size and
//! virtual degree in steady state.

pub mod config;
pub mod entanglement;
pub mod error;
pub mod estimation;
pub mod lattice;
pub mod metrics;
pub mod oracle;
pub mod protocol;
pub mod rng;
pub mod sweep;

pub use config::{load_config, ExperimentConfig};
pub use entanglement::{max_cutoff, max_swap_distance, HardwareParams, PolicyParams};
pub use error::{Error, Result};
pub use estimation::{EstimateOptions, EstimateRecord, ProtocolConfig, Schedule, Simulation};
pub use lattice::{Boundary, PhysicalGraph, TopologyKind};
pub use metrics::MetricKind;
pub use sweep::run_sweep;
