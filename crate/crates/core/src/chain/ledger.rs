//! The per-region hash-linked ledger and its materialized state.
//!
//! Appending verifies the link and the round sequence, then folds the
//! block's updates into the state. The state is always exactly the fold of
//! all updates from genesis (or the latest Summary block, which resets the
//! baseline) — exports can therefore carry blocks only and rebuild.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::block::{Block, BlockKind, StateUpdate};
use super::crypto::Digest;
use super::id::{RegionId, VehicleId};
use crate::pot;

/// Current per-vehicle record. `pot_periods` holds the per-period credit
/// history backing `pot_accumulated`; records that arrived by transfer carry
/// only the copied accumulated value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VehicleRecord {
    pub trust_points: i64,
    pub pot_accumulated: f64,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub pot_periods: BTreeMap<u64, u64>,
    pub active: bool,
}

impl Default for VehicleRecord {
    fn default() -> Self {
        VehicleRecord {
            trust_points: 0,
            pot_accumulated: 0.0,
            pot_periods: BTreeMap::new(),
            active: true,
        }
    }
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum ChainError {
    #[error("block {round}: previous-hash link does not match the preceding block")]
    BadLink { round: u64 },
    #[error("block round {got} does not follow head round {head}")]
    RoundGap { head: u64, got: u64 },
    #[error("genesis block must have round 0 and an all-zero previous hash")]
    BadGenesis,
    #[error("block {index}: round {got} breaks the strictly-increasing sequence")]
    BadSequence { index: usize, got: u64 },
    #[error("exported head hash does not match the final block")]
    HeadMismatch,
    #[error("export region {export} disagrees with block region {block}")]
    RegionMismatch { export: RegionId, block: RegionId },
}

/// Hash-linked block list plus the fold of its state updates.
#[derive(Debug, Clone)]
pub struct Ledger {
    pub region: RegionId,
    blocks: Vec<Block>,
    state: BTreeMap<VehicleId, VehicleRecord>,
    /// Discount base and window for folding per-period credits (Eq. 2 of
    /// the credit model).
    pot_alpha: f64,
    pot_n_sum: u32,
}

impl Ledger {
    pub fn new(region: RegionId, pot_alpha: f64, pot_n_sum: u32) -> Self {
        Ledger {
            region,
            blocks: Vec::new(),
            state: BTreeMap::new(),
            pot_alpha,
            pot_n_sum,
        }
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    pub fn head(&self) -> Option<&Block> {
        self.blocks.last()
    }

    pub fn head_hash(&self) -> Digest {
        self.head().map_or(Digest::ZERO, Block::digest)
    }

    pub fn next_round(&self) -> u64 {
        self.head().map_or(0, |b| b.round + 1)
    }

    pub fn state(&self) -> &BTreeMap<VehicleId, VehicleRecord> {
        &self.state
    }

    pub fn record(&self, vehicle: VehicleId) -> Option<&VehicleRecord> {
        self.state.get(&vehicle)
    }

    pub fn append(&mut self, block: Block) -> Result<(), ChainError> {
        match self.head() {
            None => {
                if block.round != 0 || block.prev_hash != Digest::ZERO {
                    return Err(ChainError::BadGenesis);
                }
            }
            Some(head) => {
                if block.round != head.round + 1 {
                    return Err(ChainError::RoundGap {
                        head: head.round,
                        got: block.round,
                    });
                }
                if block.prev_hash != head.digest() {
                    return Err(ChainError::BadLink { round: block.round });
                }
            }
        }
        apply_block(&mut self.state, &block, self.pot_alpha, self.pot_n_sum);
        self.blocks.push(block);
        Ok(())
    }

    /// Verifies every adjacent hash link and the round sequence, reporting
    /// the first offending block index.
    pub fn verify_chain(&self) -> Result<(), ChainError> {
        verify_blocks(&self.blocks)
    }

    pub fn export(&self) -> LedgerExport {
        LedgerExport {
            region: self.region,
            pot_alpha: self.pot_alpha,
            pot_n_sum: self.pot_n_sum,
            head_hash: self.head_hash(),
            blocks: self.blocks.clone(),
            materialized_state: self.state.clone(),
        }
    }

    /// Rebuilds a ledger from an export, verifying the hash chain and the
    /// recorded head hash before trusting any of it. Materialized state is
    /// recomputed from the blocks, never taken from the file.
    pub fn from_export(export: &LedgerExport) -> Result<Ledger, ChainError> {
        verify_blocks(&export.blocks)?;
        let recomputed_head = export.blocks.last().map_or(Digest::ZERO, Block::digest);
        if recomputed_head != export.head_hash {
            return Err(ChainError::HeadMismatch);
        }
        if let Some(b) = export.blocks.iter().find(|b| b.region != export.region) {
            return Err(ChainError::RegionMismatch {
                export: export.region,
                block: b.region,
            });
        }
        let mut ledger = Ledger::new(export.region, export.pot_alpha, export.pot_n_sum);
        for block in &export.blocks {
            apply_block(&mut ledger.state, block, ledger.pot_alpha, ledger.pot_n_sum);
            ledger.blocks.push(block.clone());
        }
        Ok(ledger)
    }
}

fn verify_blocks(blocks: &[Block]) -> Result<(), ChainError> {
    if let Some(first) = blocks.first() {
        if first.round != 0 || first.prev_hash != Digest::ZERO {
            return Err(ChainError::BadGenesis);
        }
    }
    for i in 1..blocks.len() {
        if blocks[i].round != blocks[i - 1].round + 1 {
            return Err(ChainError::BadSequence {
                index: i,
                got: blocks[i].round,
            });
        }
        if blocks[i].prev_hash != blocks[i - 1].digest() {
            return Err(ChainError::BadLink {
                round: blocks[i].round,
            });
        }
    }
    Ok(())
}

/// Folds one block into the state. Summary blocks replace the baseline:
/// state is cleared and rebuilt from the block's absolute entries.
pub fn apply_block(
    state: &mut BTreeMap<VehicleId, VehicleRecord>,
    block: &Block,
    pot_alpha: f64,
    pot_n_sum: u32,
) {
    if block.kind == BlockKind::Summary {
        state.clear();
    }
    for update in &block.state_updates {
        apply_update(state, update, pot_alpha, pot_n_sum);
    }
}

pub fn apply_update(
    state: &mut BTreeMap<VehicleId, VehicleRecord>,
    update: &StateUpdate,
    pot_alpha: f64,
    pot_n_sum: u32,
) {
    let entry = state.entry(update.vehicle()).or_default();
    match update {
        StateUpdate::TrustDelta { delta, .. } => entry.trust_points += delta,
        StateUpdate::TrustSet { value, .. } => entry.trust_points = *value,
        StateUpdate::Register {
            trust_points,
            pot_accumulated,
            ..
        } => {
            entry.trust_points = *trust_points;
            entry.pot_accumulated = *pot_accumulated;
            entry.active = true;
        }
        StateUpdate::PotPeriod {
            period, credits, ..
        } => {
            entry.pot_periods.insert(*period, *credits);
            let latest = *entry.pot_periods.keys().next_back().unwrap();
            entry.pot_accumulated =
                pot::discounted_accumulation(&entry.pot_periods, latest, pot_alpha, pot_n_sum);
        }
        StateUpdate::TransferIn {
            trust_points,
            pot_accumulated,
            ..
        } => {
            entry.trust_points = *trust_points;
            entry.pot_accumulated = *pot_accumulated;
            entry.active = true;
        }
        StateUpdate::TransferOut { .. } => {
            entry.trust_points = 0;
            entry.active = false;
        }
        StateUpdate::SummaryState {
            trust_points,
            pot_accumulated,
            active,
            ..
        } => {
            entry.trust_points = *trust_points;
            entry.pot_accumulated = *pot_accumulated;
            entry.pot_periods.clear();
            entry.active = *active;
        }
    }
}

/// JSON-facing form of a ledger: blocks plus a recomputable state snapshot.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LedgerExport {
    pub region: RegionId,
    pub pot_alpha: f64,
    pub pot_n_sum: u32,
    pub head_hash: Digest,
    pub blocks: Vec<Block>,
    pub materialized_state: BTreeMap<VehicleId, VehicleRecord>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::block::BlockKind;
    use crate::time::SimTime;

    fn vid(i: u32) -> VehicleId {
        VehicleId::new(RegionId(0), i)
    }

    fn next_block(ledger: &Ledger, updates: Vec<StateUpdate>) -> Block {
        Block {
            region: RegionId(0),
            round: ledger.next_round(),
            prev_hash: ledger.head_hash(),
            kind: BlockKind::Normal,
            transactions: Vec::new(),
            state_updates: updates,
            proposer: None,
            timestamp: SimTime::from_millis(ledger.next_round() * 1000),
        }
    }

    #[test]
    fn append_genesis_then_block_one() {
        let mut ledger = Ledger::new(RegionId(0), 0.9, 100);
        ledger
            .append(Block::genesis(RegionId(0), SimTime::from_millis(0)))
            .unwrap();
        let b1 = next_block(&ledger, vec![]);
        ledger.append(b1).unwrap();
        assert_eq!(ledger.blocks().len(), 2);
        assert!(ledger.verify_chain().is_ok());
    }

    #[test]
    fn wrong_prev_hash_is_a_chain_integrity_error() {
        let mut ledger = Ledger::new(RegionId(0), 0.9, 100);
        ledger
            .append(Block::genesis(RegionId(0), SimTime::from_millis(0)))
            .unwrap();
        let mut b1 = next_block(&ledger, vec![]);
        b1.prev_hash = Digest([0xaa; 32]);
        assert_eq!(ledger.append(b1), Err(ChainError::BadLink { round: 1 }));
    }

    #[test]
    fn round_gap_is_an_ordering_error() {
        let mut ledger = Ledger::new(RegionId(0), 0.9, 100);
        ledger
            .append(Block::genesis(RegionId(0), SimTime::from_millis(0)))
            .unwrap();
        let mut b = next_block(&ledger, vec![]);
        b.round = 5;
        assert_eq!(ledger.append(b), Err(ChainError::RoundGap { head: 0, got: 5 }));
    }

    #[test]
    fn delta_then_absolute_sanction_folds_like_a_replay() {
        let mut ledger = Ledger::new(RegionId(0), 0.9, 100);
        ledger
            .append(Block::genesis(RegionId(0), SimTime::from_millis(0)))
            .unwrap();
        let b1 = next_block(
            &ledger,
            vec![
                StateUpdate::Register {
                    vehicle: vid(1),
                    trust_points: 0,
                    pot_accumulated: 0.0,
                },
                StateUpdate::TrustDelta {
                    vehicle: vid(1),
                    delta: 1,
                },
            ],
        );
        ledger.append(b1).unwrap();
        let b2 = next_block(
            &ledger,
            vec![StateUpdate::TrustSet {
                vehicle: vid(1),
                value: -1,
            }],
        );
        ledger.append(b2).unwrap();

        // Independent replay: fold every update from genesis by hand.
        let mut trust = 0i64;
        for block in ledger.blocks() {
            for u in &block.state_updates {
                match u {
                    StateUpdate::Register { trust_points, .. } => trust = *trust_points,
                    StateUpdate::TrustDelta { delta, .. } => trust += delta,
                    StateUpdate::TrustSet { value, .. } => trust = *value,
                    _ => {}
                }
            }
        }
        assert_eq!(trust, -1);
        assert_eq!(ledger.record(vid(1)).unwrap().trust_points, -1);
    }

    proptest::proptest! {
        /// Incremental materialization must agree with a recomputation
        /// from genesis for any block sequence, including mid-chain
        /// summary baselines that reset the fold.
        #[test]
        fn materialized_state_equals_a_replay_from_genesis(
            steps in proptest::collection::vec(
                (0u8..6, 0u32..6, -3i64..60, 0u64..8),
                1..48,
            ),
        ) {
            let mut ledger = Ledger::new(RegionId(0), 0.9, 100);
            ledger
                .append(Block::genesis(RegionId(0), SimTime::from_millis(0)))
                .unwrap();
            for (i, chunk) in steps.chunks(3).enumerate() {
                let updates: Vec<StateUpdate> = chunk
                    .iter()
                    .map(|&(kind, v, val, period)| match kind {
                        0 => StateUpdate::Register {
                            vehicle: vid(v),
                            trust_points: val,
                            pot_accumulated: val as f64,
                        },
                        1 => StateUpdate::TrustDelta { vehicle: vid(v), delta: val },
                        2 => StateUpdate::TrustSet { vehicle: vid(v), value: -1 },
                        3 => StateUpdate::PotPeriod {
                            vehicle: vid(v),
                            period,
                            credits: val.unsigned_abs(),
                        },
                        4 => StateUpdate::TransferOut { vehicle: vid(v) },
                        _ => StateUpdate::SummaryState {
                            vehicle: vid(v),
                            trust_points: val,
                            pot_accumulated: val as f64 * 2.0,
                            active: val % 2 == 0,
                        },
                    })
                    .collect();
                let mut block = next_block(&ledger, updates);
                if i % 5 == 4 {
                    block.kind = BlockKind::Summary;
                }
                ledger.append(block).unwrap();
            }

            let mut replayed = BTreeMap::new();
            for block in ledger.blocks() {
                apply_block(&mut replayed, block, 0.9, 100);
            }
            proptest::prop_assert_eq!(&replayed, ledger.state());
            proptest::prop_assert!(ledger.verify_chain().is_ok());
        }
    }

    #[test]
    fn mid_chain_mutation_is_detected() {
        let mut ledger = Ledger::new(RegionId(0), 0.9, 100);
        ledger
            .append(Block::genesis(RegionId(0), SimTime::from_millis(0)))
            .unwrap();
        for _ in 0..3 {
            let b = next_block(&ledger, vec![]);
            ledger.append(b).unwrap();
        }
        let mut export = ledger.export();
        export.blocks[2].timestamp = SimTime::from_millis(999_999);
        let err = Ledger::from_export(&export).unwrap_err();
        assert_eq!(err, ChainError::BadLink { round: 3 });
    }

    #[test]
    fn head_mutation_is_detected_via_head_hash() {
        let mut ledger = Ledger::new(RegionId(0), 0.9, 100);
        ledger
            .append(Block::genesis(RegionId(0), SimTime::from_millis(0)))
            .unwrap();
        let b = next_block(&ledger, vec![]);
        ledger.append(b).unwrap();
        let mut export = ledger.export();
        let last = export.blocks.len() - 1;
        export.blocks[last].timestamp = SimTime::from_millis(42);
        assert_eq!(
            Ledger::from_export(&export).unwrap_err(),
            ChainError::HeadMismatch
        );
    }

    #[test]
    fn summary_block_replaces_the_baseline() {
        let mut ledger = Ledger::new(RegionId(0), 0.9, 100);
        ledger
            .append(Block::genesis(RegionId(0), SimTime::from_millis(0)))
            .unwrap();
        let b1 = next_block(
            &ledger,
            vec![
                StateUpdate::Register {
                    vehicle: vid(1),
                    trust_points: 3,
                    pot_accumulated: 10.0,
                },
                StateUpdate::Register {
                    vehicle: vid(2),
                    trust_points: 7,
                    pot_accumulated: 0.0,
                },
            ],
        );
        ledger.append(b1).unwrap();

        let mut summary = next_block(
            &ledger,
            vec![StateUpdate::SummaryState {
                vehicle: vid(1),
                trust_points: 3,
                pot_accumulated: 10.0,
                active: true,
            }],
        );
        summary.kind = BlockKind::Summary;
        ledger.append(summary).unwrap();

        // Vehicle 2 was not carried into the summary, so it is gone.
        assert!(ledger.record(vid(2)).is_none());
        assert_eq!(ledger.record(vid(1)).unwrap().trust_points, 3);
    }

    #[test]
    fn export_round_trips_through_json() {
        let mut ledger = Ledger::new(RegionId(0), 0.9, 100);
        ledger
            .append(Block::genesis(RegionId(0), SimTime::from_millis(0)))
            .unwrap();
        let b1 = next_block(
            &ledger,
            vec![StateUpdate::Register {
                vehicle: vid(1),
                trust_points: 2,
                pot_accumulated: 5.5,
            }],
        );
        ledger.append(b1).unwrap();

        let json = serde_json::to_string(&ledger.export()).unwrap();
        let export: LedgerExport = serde_json::from_str(&json).unwrap();
        let rebuilt = Ledger::from_export(&export).unwrap();
        assert_eq!(rebuilt.state(), ledger.state());
        assert_eq!(rebuilt.head_hash(), ledger.head_hash());
    }
}
