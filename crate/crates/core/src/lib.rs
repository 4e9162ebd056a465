//! # rachsim
//!
//! Modeling toolkit for LTE random-access channel overload under mixed
//! human (H2H) and machine (M2M) traffic:
//!
//! - an analytical engine propagating expected contender populations
//!   through a higher-order Markov chain of RA slots linked by the uniform
//!   backoff kernel ([`kmc`]);
//! - a slot-driven simulator of the four-step RA procedure with success at
//!   Msg2 ([`sim`]);
//! - the TR 37.868-style performance metrics from either path ([`metrics`]);
//! - disjoint (DA) and joint (JA) preamble-splitting policies, and an
//!   optimizer for the H2H share given an M2M delay threshold
//!   ([`optimizer`]);
//! - brute-force oracles used by the test and validation suites
//!   ([`oracles`]).
//!
//! Batch work (replications, share scans, parameter sweeps) runs through
//! [`exec::par_map`], which fans out over rayon when the default `parallel`
//! feature is enabled and degrades to a sequential loop without it. Every
//! batch entry point takes explicit seeds, so outputs are identical in both
//! modes.

pub mod config;
pub mod error;
pub mod exec;
pub mod grid;
pub mod kmc;
pub mod metrics;
pub mod optimizer;
pub mod oracles;
pub mod report;
pub mod scenario;
pub mod sim;
pub mod traffic;

pub use config::{ConfigError, ScenarioConfig};
pub use error::{ModelError, Result};
pub use grid::SlotGrid;
pub use kmc::{
    AllocationPolicy, BackoffGeometry, Class, JaSuccessMode, NewArrivals, PerClass,
    PopulationGrid, TransitionMatrix,
};
pub use metrics::{ClassMetrics, MetricsReport, RetxLagMode};
pub use scenario::{AnalysisOutput, Scenario};
pub use sim::{BatchMetrics, BatchResult, SimTrace, UeOutcome, UeRecord};
pub use traffic::ArrivalModel;
