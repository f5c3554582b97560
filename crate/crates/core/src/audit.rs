//! Append-only audit trail of protocol decisions.
//!
//! Two kinds of entry share the log: inputs that were rejected or silently
//! ignored (these never reach a ledger, so this is their only trace), and
//! contract lifecycle milestones (openings, verdicts, redress outcomes,
//! transfers) that make a run inspectable without replaying it. Every entry
//! carries the simulation time at which the decision was taken; the log
//! serializes to JSON for offline inspection.

use serde::{Deserialize, Serialize};

use crate::chain::id::{RegionId, VehicleId};
use crate::chain::tx::TxId;
use crate::time::SimTime;

/// One recorded protocol decision.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AuditEvent {
    /// Signature did not verify against the registered key.
    BadSignature { tx: TxId, sender: VehicleId },
    /// Sender is not registered in the region's key registry.
    UnknownSender { tx: TxId, sender: VehicleId },
    /// Required payload field absent, or a forbidden one present.
    MalformedPayload { tx: TxId, detail: String },
    /// Stance arrived after its contract's debate window closed.
    StaleStance {
        tx: TxId,
        sender: VehicleId,
        contract_opened_at: SimTime,
    },
    /// A later stance from a sender already recorded on the contract.
    DuplicateStance { tx: TxId, sender: VehicleId },
    /// Transfer request rejected: claimed location is not near the border.
    TransferNotAtBorder {
        tx: TxId,
        sender: VehicleId,
        origin: RegionId,
        dest: RegionId,
    },
    /// Transfer request rejected for a reason other than geometry.
    TransferRejected { tx: TxId, detail: String },
    /// Travel report dropped (condemned reporter, over cap, or malformed).
    PotReportDropped { tx: TxId, reporter: VehicleId, detail: String },
    /// A round closed with no committed block.
    EmptyRound { region: RegionId, round: u64 },
    /// A voting contract was opened about `debate`.
    ContractOpened {
        contract: u64,
        debate: VehicleId,
        opened_at: SimTime,
    },
    /// An open contract reached the end of its window and was decided.
    ContractClosed {
        contract: u64,
        debate: VehicleId,
        verdict: String,
    },
    /// A redress request was evaluated; `margin` is the opposing-minus-
    /// supporting stake (absent when no qualifying contracts existed).
    RedressEvaluated {
        debate: VehicleId,
        margin: Option<f64>,
        fired: bool,
    },
    /// A record transfer was validated and scheduled at both regions.
    TransferPlanned {
        vehicle: VehicleId,
        origin: RegionId,
        dest: RegionId,
    },
}

/// One timestamped entry in the audit trail.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditEntry {
    pub time: SimTime,
    pub event: AuditEvent,
}

/// Append-only list of audit entries, in the order decisions were taken.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct AuditLog {
    entries: Vec<AuditEntry>,
}

impl AuditLog {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record(&mut self, time: SimTime, event: AuditEvent) {
        self.entries.push(AuditEntry { time, event });
    }

    pub fn entries(&self) -> &[AuditEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Count entries matching a predicate, for test assertions.
    pub fn count_where(&self, pred: impl Fn(&AuditEvent) -> bool) -> usize {
        self.entries.iter().filter(|e| pred(&e.event)).count()
    }
}
