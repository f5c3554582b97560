//! Shared plumbing for scenario runs: deterministic keys and attribute
//! draws, the run output bundle, and the scenario dispatcher.

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::audit::AuditLog;
use crate::chain::crypto::Keypair;
use crate::chain::id::{Point, VehicleId};
use crate::chain::ledger::LedgerExport;
use crate::chain::tx::{Opinion, Payload, Transaction};
use crate::consensus::sortition::{derive_rng, master_seed};
use crate::sim::chain_runtime::ChainSettings;
use crate::sim::config::{ScenarioConfig, ScenarioKind};
use crate::sim::metrics::MetricSeries;
use crate::sim::scenario;
use crate::time::SimTime;

pub use crate::sim::config::ConfigError;

/// Everything one scenario run produces.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunOutput {
    /// The configuration the run actually used.
    pub config: ScenarioConfig,
    /// Time series sampled during the run.
    pub metrics: MetricSeries,
    /// Screening and protocol events, in order.
    pub audit: AuditLog,
    /// The region's trust chain at the end of the run.
    pub trust_ledger: LedgerExport,
    /// The region's travel-credit chain at the end of the run.
    pub pot_ledger: LedgerExport,
    /// Scenario-level scalar results, keyed by name.
    pub summary: BTreeMap<String, f64>,
}

/// Validates the configuration and runs the scenario it names.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<RunOutput, ConfigError> {
    cfg.validate()?;
    Ok(match cfg.scenario {
        ScenarioKind::HighwayMerge => scenario::merge::run(cfg),
        ScenarioKind::Intersection => scenario::intersection::run(cfg),
        ScenarioKind::RouteChoice => scenario::routes::run(cfg),
    })
}

/// Deterministic per-vehicle keypairs, derived from the run's master seed
/// so the same configuration always yields the same signatures.
#[derive(Clone)]
pub struct Keyring {
    master: [u8; 32],
    cache: BTreeMap<VehicleId, Keypair>,
}

impl Keyring {
    pub fn new(seed: u64) -> Self {
        Keyring {
            master: master_seed(seed),
            cache: BTreeMap::new(),
        }
    }

    pub fn master(&self) -> [u8; 32] {
        self.master
    }

    pub fn keypair(&mut self, id: VehicleId) -> &Keypair {
        let master = self.master;
        self.cache
            .entry(id)
            .or_insert_with(|| Keypair::generate(&mut derive_rng(master, &format!("key/{id}"))))
    }
}

/// Opening chain state and driving style for a newly spawned vehicle.
#[derive(Debug, Clone, Copy)]
pub struct InitialAttributes {
    pub trust_points: i64,
    pub pot_credits: f64,
    pub desired_speed: f64,
}

/// Draws a spawn's starting attributes from its own labeled stream, so
/// the draw depends only on (seed, vehicle), never on spawn order.
pub fn draw_initial(master: [u8; 32], id: VehicleId, cfg: &ScenarioConfig) -> InitialAttributes {
    let mut rng = derive_rng(master, &format!("init/{id}"));
    let tp_low = (cfg.initial_tp_mean - 5.0).round() as i64;
    let tp_high = (cfg.initial_tp_mean + 5.0).round() as i64;
    InitialAttributes {
        trust_points: rng.gen_range(tp_low..=tp_high),
        pot_credits: rng.gen_range((cfg.initial_pot_mean - 50.0).max(0.0)..=cfg.initial_pot_mean + 50.0),
        desired_speed: rng.gen_range(16.0..=18.0),
    }
}

/// Chain-side settings for a region runtime, lifted from the scenario
/// configuration.
pub fn chain_settings(cfg: &ScenarioConfig) -> ChainSettings {
    ChainSettings {
        tb: cfg.tb(),
        match_radius_m: cfg.match_radius_m,
        eta_p: cfg.eta_p,
        eta_v: cfg.eta_v,
        n_th: cfg.n_th,
        pot: cfg.pot.clone(),
    }
}

/// Builds a signed stance about `debate`'s message.
pub fn stance_tx(
    keys: &mut Keyring,
    sender: VehicleId,
    debate: VehicleId,
    opinion: Opinion,
    message_time: SimTime,
    location: Point,
    at: SimTime,
) -> Transaction {
    Transaction::build(
        sender,
        Some(debate),
        None,
        location,
        at,
        Payload::Stance {
            opinion,
            message_time,
        },
        keys.keypair(sender),
    )
}

/// Builds a signed redressing request about `debate`.
pub fn redress_tx(
    keys: &mut Keyring,
    sender: VehicleId,
    debate: VehicleId,
    location: Point,
    at: SimTime,
) -> Transaction {
    Transaction::build(
        sender,
        Some(debate),
        None,
        location,
        at,
        Payload::Redress,
        keys.keypair(sender),
    )
}
