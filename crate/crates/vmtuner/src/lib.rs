//! Deterministic virtualized-cluster simulator plus an adaptive VM
//! resource-allocation controller.
//!
//! The controller tunes per-VM vCPU and memory allocations online with a
//! nine-arm contextual bandit (disjoint LinUCB), alongside passive, reactive
//! (threshold), and proactive (predicted-threshold) baselines. Bandit state
//! can be checkpointed after simulator pretraining and loaded to warm-start
//! later runs.
//!
//! Module map:
//! - [`model`] — cluster topology, VM allocations, the action space, clamping
//! - [`sim`] — discrete-time cluster environment (CPU round-robin, memory
//!   swap, M/M/1 I/O latency)
//! - [`sensing`] — telemetry store, rolling statistics, context vectors
//! - [`bandit`] — disjoint-arm LinUCB with rank-one inverse updates and
//!   JSON checkpoints
//! - [`policies`] — baseline decision methods behind a common trait
//! - [`controller`] — the per-round sense/filter/decide/execute/reward/learn
//!   loop with regret diagnostics
//! - [`config`] / [`experiment`] — experiment configs, run drivers, metrics

pub mod bandit;
pub mod config;
pub mod controller;
pub(crate) mod det;
pub mod experiment;
pub(crate) mod linalg;
pub mod model;
pub mod policies;
pub mod sensing;
pub mod sim;
