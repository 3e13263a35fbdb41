//! Path-loss channel and a deterministic multi-agent contact simulator.
//!
//! A run steps simulated time at the scan interval. Every ordered pair of
//! agents within radio range exchanges one shadowed RSS sample, the receiver
//! classifies it and logs the sender's current ephemeral ID. Diagnoses then
//! go through the selected protocol flow and the resulting alerts are scored
//! against geometric ground truth.

mod agent;
mod channel;
mod check;
mod corpus;
mod run;
mod scenario;

use thiserror::Error;

use crate::classifier::ClassifierError;
use crate::protocol::ProtocolError;

pub use agent::{ground_truth_close_time, ground_truth_contacts, Agent, PairDay, Waypoint};
pub use channel::{fit_path_loss, rss_at, PathLossModel};
pub use check::{brute_force_alerts, check_world, random_world, AlertKey, WorldCheck};
pub use corpus::{synthesize_corpus, CorpusSpec};
pub use run::{
    run_scenario, run_scenario_observed, DiagnosisSnapshot, PairRow, SimMetrics, MIN_DISTANCE_M,
};
pub use scenario::{ClassifierKind, ClassifierSpec, Diagnosis, ScenarioConfig};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("invalid scenario: {0}")]
    ConfigInvalid(String),
    #[error("all samples share one distance; slope is undefined")]
    DegenerateDistances,
    #[error("distance {0} m is not positive")]
    NonpositiveDistance(f64),
    #[error("fitted path-loss exponent {0} is not positive")]
    NonPhysicalFit(f64),
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
    #[error(transparent)]
    Classifier(#[from] ClassifierError),
    #[error("{0}")]
    Io(String),
}

/// Scripted scenario used for the noise sweep and smoke runs.
pub const BENCHMARK_SCENARIO: &str = include_str!("../../scenarios/benchmark.toml");
