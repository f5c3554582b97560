//! Cross-region record transfer: validation and the atomic two-sided plan.
//!
//! A transfer moves trust points to the destination region and copies the
//! travel credits; the origin then zeroes the vacated record. Both sides of
//! the plan are applied in their regions' next rounds, or neither is.

use thiserror::Error;

use crate::chain::block::StateUpdate;
use crate::chain::id::{RegionId, RegionMap, VehicleId};
use crate::chain::ledger::Ledger;
use crate::chain::tx::{Scid, Transaction};

/// A validated transfer, ready to apply at both regions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransferPlan {
    pub vehicle: VehicleId,
    pub origin: RegionId,
    pub destination: RegionId,
    /// Moved: destination records this value, origin resets to 0.
    pub trust_points: i64,
    /// Copied: both regions end up holding the same accumulated credits.
    pub pot_accumulated: f64,
}

impl TransferPlan {
    /// The update the destination region applies.
    pub fn incoming_update(&self) -> StateUpdate {
        StateUpdate::TransferIn {
            vehicle: self.vehicle,
            trust_points: self.trust_points,
            pot_accumulated: self.pot_accumulated,
        }
    }

    /// The update the origin region applies once the destination confirms.
    pub fn outgoing_update(&self) -> StateUpdate {
        StateUpdate::TransferOut {
            vehicle: self.vehicle,
        }
    }
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum TransferError {
    #[error("transaction is not a transfer request")]
    NotATransfer,
    #[error("transfer names no destination region")]
    MissingDestination,
    #[error("destination {0} is not a neighbor of {1}")]
    NotNeighbor(RegionId, RegionId),
    #[error("claimed position is not near the border of {0} and {1}")]
    NotNearBorder(RegionId, RegionId),
    #[error("vehicle {0} has no active record in the origin region")]
    NoActiveRecord(VehicleId),
}

/// Validates a transfer request against the origin region's ledgers and the
/// region geometry, returning the two-sided plan.
///
/// Trust points come from the origin's trust ledger. Credits come from the
/// vehicle's travel-credit record when its permanent chain is the origin,
/// otherwise from the snapshot copied in when the vehicle arrived; that is
/// the same value stake computation sees.
pub fn plan_transfer(
    tx: &Transaction,
    origin: RegionId,
    regions: &RegionMap,
    origin_trust: &Ledger,
    origin_pot: &Ledger,
    border_threshold_m: f64,
) -> Result<TransferPlan, TransferError> {
    if tx.scid != Scid::TransferRequest {
        return Err(TransferError::NotATransfer);
    }
    let destination = tx.region.ok_or(TransferError::MissingDestination)?;
    if !regions.are_neighbors(origin, destination) {
        return Err(TransferError::NotNeighbor(destination, origin));
    }
    if !regions.near_border(origin, destination, tx.location, border_threshold_m) {
        return Err(TransferError::NotNearBorder(origin, destination));
    }
    let record = origin_trust
        .record(tx.sender)
        .filter(|r| r.active)
        .ok_or(TransferError::NoActiveRecord(tx.sender))?;

    let pot_accumulated = if tx.sender.permanent_region == origin {
        origin_pot
            .record(tx.sender)
            .map(|r| r.pot_accumulated)
            .unwrap_or(0.0)
    } else {
        record.pot_accumulated
    };

    Ok(TransferPlan {
        vehicle: tx.sender,
        origin,
        destination,
        trust_points: record.trust_points,
        pot_accumulated,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::block::{Block, BlockKind, StateUpdate};
    use crate::chain::crypto::{Keypair, SecretKey};
    use crate::chain::id::Point;
    use crate::chain::tx::Payload;
    use crate::time::SimTime;

    fn region_pair() -> RegionMap {
        // Two circles of radius 5 km whose borders meet near x = 5000.
        let mut map = RegionMap::default();
        map.add(RegionId(0), Point::new(0.0, 0.0), 5.0).unwrap();
        map.add(RegionId(1), Point::new(10_000.0, 0.0), 5.0).unwrap();
        map.link(RegionId(0), RegionId(1)).unwrap();
        map
    }

    fn ledgers_with(vehicle: VehicleId, tp: i64, pot_credits: u64) -> (Ledger, Ledger) {
        // Trust ledger holds the points; the travel-credit ledger holds one
        // period worth exactly `pot_credits` (alpha 1, window 1).
        let mut trust = Ledger::new(RegionId(0), 1.0, 1);
        trust
            .append(Block::genesis(RegionId(0), SimTime::ZERO))
            .unwrap();
        let b = Block {
            region: RegionId(0),
            round: 1,
            prev_hash: trust.head_hash(),
            kind: BlockKind::Normal,
            transactions: vec![],
            state_updates: vec![StateUpdate::Register {
                vehicle,
                trust_points: tp,
                pot_accumulated: 0.0,
            }],
            proposer: None,
            timestamp: SimTime(1000),
        };
        trust.append(b).unwrap();

        let mut pot = Ledger::new(RegionId(0), 1.0, 1);
        pot.append(Block::genesis(RegionId(0), SimTime::ZERO))
            .unwrap();
        let b = Block {
            region: RegionId(0),
            round: 1,
            prev_hash: pot.head_hash(),
            kind: BlockKind::Normal,
            transactions: vec![],
            state_updates: vec![StateUpdate::PotPeriod {
                vehicle,
                period: 0,
                credits: pot_credits,
            }],
            proposer: None,
            timestamp: SimTime(1000),
        };
        pot.append(b).unwrap();
        (trust, pot)
    }

    fn transfer_tx(vehicle: VehicleId, dest: RegionId, location: Point) -> Transaction {
        let keypair = Keypair::from_secret(SecretKey([7u8; 32]));
        Transaction::build(
            vehicle,
            None,
            Some(dest),
            location,
            SimTime(2000),
            Payload::Transfer,
            &keypair,
        )
    }

    #[test]
    fn transfer_moves_points_and_copies_credits() {
        let vehicle = VehicleId::new(RegionId(0), 1);
        let regions = region_pair();
        let (trust, pot) = ledgers_with(vehicle, 5, 40);
        let tx = transfer_tx(vehicle, RegionId(1), Point::new(5000.0, 0.0));
        let plan = plan_transfer(&tx, RegionId(0), &regions, &trust, &pot, 500.0).unwrap();
        assert_eq!(plan.trust_points, 5);
        assert_eq!(plan.pot_accumulated, 40.0);

        // Apply both sides and check the example end-state: destination
        // records tp=5 pot=40, origin records tp=0 with credits unchanged.
        let mut dest_trust = Ledger::new(RegionId(1), 1.0, 1);
        dest_trust
            .append(Block::genesis(RegionId(1), SimTime::ZERO))
            .unwrap();
        let b = Block {
            region: RegionId(1),
            round: 1,
            prev_hash: dest_trust.head_hash(),
            kind: BlockKind::Normal,
            transactions: vec![],
            state_updates: vec![plan.incoming_update()],
            proposer: None,
            timestamp: SimTime(3000),
        };
        dest_trust.append(b).unwrap();
        let dest_record = dest_trust.record(vehicle).unwrap();
        assert_eq!(dest_record.trust_points, 5);
        assert_eq!(dest_record.pot_accumulated, 40.0);
        assert!(dest_record.active);

        let mut origin_trust = trust;
        let b = Block {
            region: RegionId(0),
            round: 2,
            prev_hash: origin_trust.head_hash(),
            kind: BlockKind::Normal,
            transactions: vec![],
            state_updates: vec![plan.outgoing_update()],
            proposer: None,
            timestamp: SimTime(3000),
        };
        origin_trust.append(b).unwrap();
        let origin_record = origin_trust.record(vehicle).unwrap();
        assert_eq!(origin_record.trust_points, 0);
        assert!(!origin_record.active);
        // Credits on the origin chain are untouched by the transfer.
        assert_eq!(pot.record(vehicle).unwrap().pot_accumulated, 40.0);
    }

    #[test]
    fn interior_position_is_rejected() {
        let vehicle = VehicleId::new(RegionId(0), 1);
        let regions = region_pair();
        let (trust, pot) = ledgers_with(vehicle, 5, 40);
        let tx = transfer_tx(vehicle, RegionId(1), Point::new(0.0, 0.0));
        assert_eq!(
            plan_transfer(&tx, RegionId(0), &regions, &trust, &pot, 500.0),
            Err(TransferError::NotNearBorder(RegionId(0), RegionId(1)))
        );
    }

    #[test]
    fn non_neighbor_destination_is_rejected() {
        let vehicle = VehicleId::new(RegionId(0), 1);
        let mut regions = region_pair();
        regions
            .add(RegionId(2), Point::new(0.0, 50_000.0), 5.0)
            .unwrap();
        let (trust, pot) = ledgers_with(vehicle, 5, 40);
        let tx = transfer_tx(vehicle, RegionId(2), Point::new(5000.0, 0.0));
        assert_eq!(
            plan_transfer(&tx, RegionId(0), &regions, &trust, &pot, 500.0),
            Err(TransferError::NotNeighbor(RegionId(2), RegionId(0)))
        );
    }

    #[test]
    fn sanctioned_record_transfers_unmodified() {
        let vehicle = VehicleId::new(RegionId(0), 1);
        let regions = region_pair();
        let (mut trust, pot) = ledgers_with(vehicle, 5, 40);
        let b = Block {
            region: RegionId(0),
            round: 2,
            prev_hash: trust.head_hash(),
            kind: BlockKind::Normal,
            transactions: vec![],
            state_updates: vec![StateUpdate::TrustSet {
                vehicle,
                value: -1,
            }],
            proposer: None,
            timestamp: SimTime(1500),
        };
        trust.append(b).unwrap();
        let tx = transfer_tx(vehicle, RegionId(1), Point::new(5000.0, 0.0));
        let plan = plan_transfer(&tx, RegionId(0), &regions, &trust, &pot, 500.0).unwrap();
        assert_eq!(plan.trust_points, -1);
    }

    #[test]
    fn missing_record_is_rejected() {
        let vehicle = VehicleId::new(RegionId(0), 1);
        let stranger = VehicleId::new(RegionId(0), 2);
        let regions = region_pair();
        let (trust, pot) = ledgers_with(vehicle, 5, 40);
        let tx = transfer_tx(stranger, RegionId(1), Point::new(5000.0, 0.0));
        assert_eq!(
            plan_transfer(&tx, RegionId(0), &regions, &trust, &pot, 500.0),
            Err(TransferError::NoActiveRecord(stranger))
        );
    }

    #[test]
    fn visitor_credits_come_from_the_copied_snapshot() {
        // A vehicle whose permanent region is elsewhere carries its credit
        // snapshot in the trust record; a second hop copies that value.
        let visitor = VehicleId::new(RegionId(1), 9);
        let regions = region_pair();
        let mut trust = Ledger::new(RegionId(0), 1.0, 1);
        trust
            .append(Block::genesis(RegionId(0), SimTime::ZERO))
            .unwrap();
        let b = Block {
            region: RegionId(0),
            round: 1,
            prev_hash: trust.head_hash(),
            kind: BlockKind::Normal,
            transactions: vec![],
            state_updates: vec![StateUpdate::TransferIn {
                vehicle: visitor,
                trust_points: 2,
                pot_accumulated: 17.5,
            }],
            proposer: None,
            timestamp: SimTime(500),
        };
        trust.append(b).unwrap();
        let mut pot = Ledger::new(RegionId(0), 1.0, 1);
        pot.append(Block::genesis(RegionId(0), SimTime::ZERO))
            .unwrap();

        let tx = transfer_tx(visitor, RegionId(1), Point::new(5000.0, 0.0));
        let plan = plan_transfer(&tx, RegionId(0), &regions, &trust, &pot, 500.0).unwrap();
        assert_eq!(plan.pot_accumulated, 17.5);
        assert_eq!(plan.trust_points, 2);
    }
}
