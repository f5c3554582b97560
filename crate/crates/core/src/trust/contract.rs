//! Voting contracts and the stake-majority close rule.
//!
//! A contract collects agree/disagree stances about one debated vehicle for
//! a fixed window, then the side holding more stake wins: every majority
//! member gains one trust point, every minority member has its trust set to
//! exactly -1 (an absolute assignment, so repeated condemnations do not
//! compound). Equal stake is a tie and changes nothing; a tied debate stays
//! unresolved for applications until a redress settles it.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::chain::block::StateUpdate;
use crate::chain::id::{Point, VehicleId};
use crate::time::SimTime;

/// What a contract is debating.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ContractKind {
    /// A broadcast message's credibility (the debated vehicle sent it).
    MessageVote,
    /// A travel-count report's honesty for one period (the debated vehicle
    /// filed it).
    CountDispute { period_index: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ContractStatus {
    Open,
    Closed,
    Redressed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    /// The agree side won: the debated vehicle's message stands.
    DebateUpheld,
    /// The disagree side won: the message was judged false.
    DebateCondemned,
    Tie,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::DebateUpheld => "debate_upheld",
            Verdict::DebateCondemned => "debate_condemned",
            Verdict::Tie => "tie",
        }
    }
}

/// One voting instance about one debated vehicle.
///
/// `opened_at` is the debated message's observation time, so the voting
/// window and the staleness bound measure from the same instant; the
/// contract closes exactly `2·tb_s` after it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VotingContract {
    pub id: u64,
    pub kind: ContractKind,
    pub debate: VehicleId,
    pub opened_at: SimTime,
    pub origin_location: Point,
    pub agree: BTreeSet<VehicleId>,
    pub disagree: BTreeSet<VehicleId>,
    pub status: ContractStatus,
    pub verdict: Option<Verdict>,
}

impl VotingContract {
    pub fn is_open(&self) -> bool {
        self.status == ContractStatus::Open
    }

    pub fn has_stance_from(&self, sender: VehicleId) -> bool {
        self.agree.contains(&sender) || self.disagree.contains(&sender)
    }

    /// All voters, both sides.
    pub fn participants(&self) -> impl Iterator<Item = &VehicleId> {
        self.agree.iter().chain(self.disagree.iter())
    }
}

/// Decides an expired contract: compares the two groups' accumulated stake
/// (vehicles without an entry count as zero) and returns the verdict plus
/// the trust updates it implies. Pure; the caller flips the status.
pub fn close_contract(
    contract: &VotingContract,
    stakes: &BTreeMap<VehicleId, f64>,
) -> (Verdict, Vec<StateUpdate>) {
    let group_stake = |group: &BTreeSet<VehicleId>| -> f64 {
        group
            .iter()
            .map(|v| stakes.get(v).copied().unwrap_or(0.0))
            .sum()
    };
    let agree_stake = group_stake(&contract.agree);
    let disagree_stake = group_stake(&contract.disagree);

    if agree_stake == disagree_stake {
        return (Verdict::Tie, Vec::new());
    }
    let (verdict, majority, minority) = if agree_stake > disagree_stake {
        (Verdict::DebateUpheld, &contract.agree, &contract.disagree)
    } else {
        (Verdict::DebateCondemned, &contract.disagree, &contract.agree)
    };
    let mut updates = Vec::new();
    for &vehicle in majority {
        updates.push(StateUpdate::TrustDelta { vehicle, delta: 1 });
    }
    for &vehicle in minority {
        updates.push(StateUpdate::TrustSet { vehicle, value: -1 });
    }
    (verdict, updates)
}
