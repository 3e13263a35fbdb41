//! BLE proximity classification and exposure-notification workbench.
//!
//! - [`dataset`]: corpus ingestion, labelling, windowing and splitting
//! - [`classifier`]: CART close/far classifier, RSS threshold baseline, accuracy table
//! - [`protocol`]: centralized and decentralized exposure-notification flows
//! - [`sim`]: path-loss channel and deterministic multi-agent simulator
//! - [`report`]: run manifests and digests for reproducible outputs

// `!(x > 0.0)` rejects NaN along with non-positive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod classifier;
pub mod dataset;
pub mod protocol;
pub mod report;
pub mod sim;
