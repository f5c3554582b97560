//! Blocks and the state updates they carry.
//!
//! Updates are the only way materialized state changes; a block is the unit
//! of commitment. Normal blocks carry deltas and absolute sanctions, Summary
//! blocks carry the whole surviving state, and PreBlock/Final mark the two
//! stages of the travel-credit period pipeline.

use serde::{Deserialize, Serialize};

use super::codec::Encode;
use super::crypto::{Digest, Hasher};
use super::id::{RegionId, VehicleId};
use super::tx::Transaction;
use crate::time::SimTime;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BlockKind {
    Normal,
    Summary,
    PreBlock,
    Final,
}

impl Encode for BlockKind {
    fn encode_into(&self, out: &mut Vec<u8>) {
        let b: u8 = match self {
            BlockKind::Normal => 0,
            BlockKind::Summary => 1,
            BlockKind::PreBlock => 2,
            BlockKind::Final => 3,
        };
        b.encode_into(out);
    }
}

/// One per-vehicle state change. Trust sanctions are absolute assignments,
/// so repeated condemnations never compound below the sanction value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StateUpdate {
    /// Relative trust-point change (voting reward).
    TrustDelta { vehicle: VehicleId, delta: i64 },
    /// Absolute trust-point assignment (sanction).
    TrustSet { vehicle: VehicleId, value: i64 },
    /// Onboarding of a vehicle with its prior record.
    Register {
        vehicle: VehicleId,
        trust_points: i64,
        pot_accumulated: f64,
    },
    /// Travel credits earned in one period.
    PotPeriod {
        vehicle: VehicleId,
        period: u64,
        credits: u64,
    },
    /// Record arriving from another region: trust moved, credits copied.
    TransferIn {
        vehicle: VehicleId,
        trust_points: i64,
        pot_accumulated: f64,
    },
    /// Record vacated after a confirmed transfer: trust zeroed, inactive.
    TransferOut { vehicle: VehicleId },
    /// Absolute per-vehicle state, used by Summary blocks.
    SummaryState {
        vehicle: VehicleId,
        trust_points: i64,
        pot_accumulated: f64,
        active: bool,
    },
}

impl StateUpdate {
    pub fn vehicle(&self) -> VehicleId {
        match self {
            StateUpdate::TrustDelta { vehicle, .. }
            | StateUpdate::TrustSet { vehicle, .. }
            | StateUpdate::Register { vehicle, .. }
            | StateUpdate::PotPeriod { vehicle, .. }
            | StateUpdate::TransferIn { vehicle, .. }
            | StateUpdate::TransferOut { vehicle }
            | StateUpdate::SummaryState { vehicle, .. } => *vehicle,
        }
    }
}

impl Encode for StateUpdate {
    fn encode_into(&self, out: &mut Vec<u8>) {
        match self {
            StateUpdate::TrustDelta { vehicle, delta } => {
                0u8.encode_into(out);
                vehicle.encode_into(out);
                delta.encode_into(out);
            }
            StateUpdate::TrustSet { vehicle, value } => {
                1u8.encode_into(out);
                vehicle.encode_into(out);
                value.encode_into(out);
            }
            StateUpdate::Register {
                vehicle,
                trust_points,
                pot_accumulated,
            } => {
                2u8.encode_into(out);
                vehicle.encode_into(out);
                trust_points.encode_into(out);
                pot_accumulated.encode_into(out);
            }
            StateUpdate::PotPeriod {
                vehicle,
                period,
                credits,
            } => {
                3u8.encode_into(out);
                vehicle.encode_into(out);
                period.encode_into(out);
                credits.encode_into(out);
            }
            StateUpdate::TransferIn {
                vehicle,
                trust_points,
                pot_accumulated,
            } => {
                4u8.encode_into(out);
                vehicle.encode_into(out);
                trust_points.encode_into(out);
                pot_accumulated.encode_into(out);
            }
            StateUpdate::TransferOut { vehicle } => {
                5u8.encode_into(out);
                vehicle.encode_into(out);
            }
            StateUpdate::SummaryState {
                vehicle,
                trust_points,
                pot_accumulated,
                active,
            } => {
                6u8.encode_into(out);
                vehicle.encode_into(out);
                trust_points.encode_into(out);
                pot_accumulated.encode_into(out);
                active.encode_into(out);
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Block {
    pub region: RegionId,
    pub round: u64,
    pub prev_hash: Digest,
    pub kind: BlockKind,
    pub transactions: Vec<Transaction>,
    pub state_updates: Vec<StateUpdate>,
    /// Absent for genesis and for rounds that did not reach quorum.
    pub proposer: Option<VehicleId>,
    pub timestamp: SimTime,
}

impl Block {
    pub fn digest(&self) -> Digest {
        let mut h = Hasher::new("dualchain/block");
        h.update(&self.region)
            .update(&self.round)
            .update(&self.prev_hash)
            .update(&self.kind)
            .update(&self.transactions)
            .update(&self.state_updates)
            .update(&self.proposer)
            .update(&self.timestamp.as_millis());
        h.finish()
    }

    /// Empty baseline block starting a chain.
    pub fn genesis(region: RegionId, timestamp: SimTime) -> Block {
        Block {
            region,
            round: 0,
            prev_hash: Digest::ZERO,
            kind: BlockKind::Summary,
            transactions: Vec::new(),
            state_updates: Vec::new(),
            proposer: None,
            timestamp,
        }
    }
}
