//! Address clustering over transaction streams using the multi-input
//! heuristic, with full merge-event instrumentation, measurement series,
//! anomaly flagging and graph exports.
//!
//! Modules:
//!
//! * [`model`] — shared domain types and record validation.
//! * [`codec`] — canonical text/binary stream formats and the seeded
//!   synthetic-chain generator.
//! * [`engine`] — outpoint resolution, incremental union-find, merge logging,
//!   balance tracking and snapshot/resume.
//! * [`analytics`] — per-window series, histograms, quantiles, super-cluster
//!   statistics and anomaly flags computed from the engine log.
//! * [`graphs`] — per-cluster bipartite structure graphs and inter-cluster
//!   flow graphs with DOT/GraphML export.
//! * [`pipeline`] — one-shot orchestration used by the CLI and the
//!   integration tests.

pub mod analytics;
pub mod codec;
pub mod engine;
pub mod graphs;
mod hash;
pub mod model;
pub mod pipeline;
#[cfg(test)]
pub(crate) mod testutil;
mod wire;
