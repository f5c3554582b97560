//! The per-round quorum vote.
//!
//! Full Byzantine agreement is abstracted to one stake-weighted vote: the
//! candidate commits only when verifiers holding strictly more than two
//! thirds of the committee's stake approve it; otherwise the round yields
//! nothing and the chain advances with an empty block. The comparison is
//! done as `3·yes > 2·total` so the exact two-thirds boundary rejects
//! without floating-point surprises.

use std::collections::BTreeMap;

use crate::chain::block::Block;
use crate::chain::id::VehicleId;

use super::committee::Committee;

#[derive(Debug, Clone, PartialEq)]
pub enum RoundOutcome {
    Committed(Block),
    Empty,
}

impl RoundOutcome {
    pub fn is_committed(&self) -> bool {
        matches!(self, RoundOutcome::Committed(_))
    }
}

/// Puts one candidate block to the committee. `vote` is consulted once per
/// verifier, in vehicle order; stake weights come from `stakes` (absent
/// verifiers weigh nothing).
pub fn run_round(
    committee: &Committee,
    candidate: Block,
    stakes: &BTreeMap<VehicleId, f64>,
    vote: impl Fn(VehicleId, &Block) -> bool,
) -> RoundOutcome {
    let mut yes = 0.0f64;
    let mut total = 0.0f64;
    for &verifier in &committee.verifiers {
        let stake = stakes.get(&verifier).copied().unwrap_or(0.0);
        total += stake;
        if vote(verifier, &candidate) {
            yes += stake;
        }
    }
    if 3.0 * yes > 2.0 * total {
        RoundOutcome::Committed(candidate)
    } else {
        RoundOutcome::Empty
    }
}
