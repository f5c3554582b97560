//! Discrete-event traffic simulation driving the two chains.
//!
//! The simulation layer puts vehicles on the road: agents arrive, move,
//! broadcast claims, cross-check each other's messages against what their
//! own sensors show, and feed the resulting stances into per-region chain
//! runtimes. Three scenarios exercise the framework end to end: a highway
//! merge under a phantom-vehicle attack, a signalized intersection forced
//! into its fallback mode, and a route-choice corridor where a colluding
//! group fakes a hazard until redress catches up with it.

pub mod agent;
pub mod batch;
pub mod chain_runtime;
pub mod config;
pub mod event;
pub mod metrics;
pub mod net;
pub mod scenario;
pub mod sensing;
pub mod stats;
pub mod world;

pub use batch::{run_batch, run_configs};
pub use chain_runtime::{process_transfer, ChainSettings, RegionRuntime, RoundReport};
pub use config::{AttackMode, ConfigError, ScenarioConfig, ScenarioKind};
pub use event::{Claim, EventKind, EventQueue, Message};
pub use metrics::{MetricPoint, MetricSeries};
pub use world::{run_scenario, RunOutput};
