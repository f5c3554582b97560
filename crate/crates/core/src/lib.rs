//! Dual-ledger trust framework for connected vehicles.
//!
//! Two chains cooperate to score every vehicle: a fast *trust-points* chain
//! whose voting, redress and record-transfer contracts react to reported
//! misbehavior within a couple of propagation bounds, and a slow
//! *proof-of-travel* chain that accumulates discounted per-period credits for
//! the messages a vehicle contributed to others. Consensus weight (stake) is
//! computed from both scores and drives committee sortition and quorum votes.
//!
//! The crate bundles:
//!
//! * [`chain`] — identities, transactions, blocks, hash-linked ledgers;
//! * [`trust`] — the instant-voting / redress / transfer contract engine;
//! * [`pot`] — proof-of-travel credit aggregation and inter-region merge;
//! * [`consensus`] — stake computation, sortition, quorum rounds, committee
//!   sizing;
//! * [`sim`] — a deterministic discrete-event traffic world with spoofing,
//!   bad-mouthing and Sybil attack injectors plus three scenario harnesses;
//! * [`resource`] — closed-form block-size, latency, communication and
//!   storage models with CSV sweep emitters.
//!
//! Batch runs and parameter sweeps fan out through rayon when the default
//! `parallel` feature is enabled; disabling it falls back to an equivalent
//! sequential path with byte-identical output.

pub mod audit;
pub mod chain;
pub mod consensus;
pub mod parallel;
pub mod pot;
pub mod resource;
pub mod sim;
pub mod time;
pub mod trust;
