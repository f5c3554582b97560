//! Transactions: the typed, signed records both chains process.
//!
//! The `tid` is recomputable by any receiver from (sender, debate, region,
//! location, time). Field presence is tied to the contract type: `debate`
//! accompanies voting and redressing, `region` accompanies transfers, and
//! everything else rides in the scid-specific payload.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::codec::Encode;
use super::crypto::{self, Digest, Hasher, KeyRegistry, Keypair, Signature};
use super::id::{Point, RegionId, VehicleId};
use crate::time::SimTime;

/// Contract type selector. The first three carry the ledger protocol's
/// literal wire codes 0000/0001/0002; the report/dispute pair extends the
/// same transaction format to message-count reporting.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Scid {
    Disagreement,
    RedressRequest,
    TransferRequest,
    PotReport,
    PotDispute,
}

impl Scid {
    pub fn code(self) -> u16 {
        match self {
            Scid::Disagreement => 0,
            Scid::RedressRequest => 1,
            Scid::TransferRequest => 2,
            Scid::PotReport => 3,
            Scid::PotDispute => 4,
        }
    }

    pub fn requires_debate(self) -> bool {
        matches!(self, Scid::Disagreement | Scid::RedressRequest)
    }

    pub fn requires_region(self) -> bool {
        matches!(self, Scid::TransferRequest)
    }
}

impl fmt::Display for Scid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:04}", self.code())
    }
}

impl Encode for Scid {
    fn encode_into(&self, out: &mut Vec<u8>) {
        self.code().encode_into(out);
    }
}

/// A voter's stance on the debated message.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Opinion {
    Agree,
    Disagree,
}

impl Encode for Opinion {
    fn encode_into(&self, out: &mut Vec<u8>) {
        let b: u8 = match self {
            Opinion::Agree => 0,
            Opinion::Disagree => 1,
        };
        b.encode_into(out);
    }
}

/// Scid-specific transaction body.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "body", rename_all = "snake_case")]
pub enum Payload {
    /// Voting stance. `message_time` is when the debated message was
    /// observed; stances older than the voting window relative to it are
    /// stale.
    Stance { opinion: Opinion, message_time: SimTime },
    /// Request to redress prior verdicts about the debated vehicle.
    Redress,
    /// Request to move the sender's record to the region named in
    /// `Transaction::region`. Values are read from the origin ledger, not
    /// trusted from the wire.
    Transfer,
    /// Per-period message-count report: how many messages the sender
    /// received from each listed vehicle.
    PotReport {
        period_index: u64,
        counts: Vec<(VehicleId, u64)>,
    },
    /// Challenge of a count report, voted on like any debate. The disputed
    /// reporter is named here because the `debate` field is reserved for the
    /// voting/redress contract types.
    PotDispute {
        reporter: VehicleId,
        period_index: u64,
        opinion: Opinion,
    },
}

impl Payload {
    pub fn scid(&self) -> Scid {
        match self {
            Payload::Stance { .. } => Scid::Disagreement,
            Payload::Redress => Scid::RedressRequest,
            Payload::Transfer => Scid::TransferRequest,
            Payload::PotReport { .. } => Scid::PotReport,
            Payload::PotDispute { .. } => Scid::PotDispute,
        }
    }
}

impl Encode for Payload {
    fn encode_into(&self, out: &mut Vec<u8>) {
        match self {
            Payload::Stance {
                opinion,
                message_time,
            } => {
                0u8.encode_into(out);
                opinion.encode_into(out);
                message_time.as_millis().encode_into(out);
            }
            Payload::Redress => 1u8.encode_into(out),
            Payload::Transfer => 2u8.encode_into(out),
            Payload::PotReport {
                period_index,
                counts,
            } => {
                3u8.encode_into(out);
                period_index.encode_into(out);
                counts.encode_into(out);
            }
            Payload::PotDispute {
                reporter,
                period_index,
                opinion,
            } => {
                4u8.encode_into(out);
                reporter.encode_into(out);
                period_index.encode_into(out);
                opinion.encode_into(out);
            }
        }
    }
}

/// Transaction id: digest of the identifying fields.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct TxId(pub Digest);

impl fmt::Display for TxId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

impl Encode for TxId {
    fn encode_into(&self, out: &mut Vec<u8>) {
        self.0.encode_into(out);
    }
}

/// Digest of (sender, debate, region, location, time). Total and pure.
pub fn compute_tid(
    sender: VehicleId,
    debate: Option<VehicleId>,
    region: Option<RegionId>,
    location: Point,
    time: SimTime,
) -> TxId {
    let mut h = Hasher::new("dualchain/tid");
    h.update(&sender)
        .update(&debate)
        .update(&region)
        .update(&location)
        .update(&time.as_millis());
    TxId(h.finish())
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum TxError {
    #[error("tid does not match its recomputation from the identifying fields")]
    TidMismatch,
    #[error("debate field must be present exactly for voting and redress transactions")]
    DebatePresence,
    #[error("region field must be present exactly for transfer transactions")]
    RegionPresence,
    #[error("payload body does not match scid {0}")]
    PayloadKind(Scid),
    #[error("count report lists the reporter itself")]
    SelfCount,
    #[error("count report entries must be sorted by vehicle and unique")]
    UnsortedCounts,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transaction {
    pub tid: TxId,
    pub scid: Scid,
    pub sender: VehicleId,
    pub debate: Option<VehicleId>,
    pub region: Option<RegionId>,
    pub location: Point,
    pub time: SimTime,
    pub payload: Payload,
    pub signature: Signature,
}

impl Transaction {
    /// Builds and signs a transaction; the scid is implied by the payload.
    pub fn build(
        sender: VehicleId,
        debate: Option<VehicleId>,
        region: Option<RegionId>,
        location: Point,
        time: SimTime,
        payload: Payload,
        keys: &Keypair,
    ) -> Transaction {
        let scid = payload.scid();
        let tid = compute_tid(sender, debate, region, location, time);
        let mut tx = Transaction {
            tid,
            scid,
            sender,
            debate,
            region,
            location,
            time,
            payload,
            signature: Signature(Vec::new()),
        };
        tx.signature = keys.sign(&tx.signing_bytes());
        tx
    }

    /// Canonical bytes covered by the signature: every semantic field.
    pub fn signing_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        self.scid.encode_into(&mut out);
        self.sender.encode_into(&mut out);
        self.debate.encode_into(&mut out);
        self.region.encode_into(&mut out);
        self.location.encode_into(&mut out);
        self.time.as_millis().encode_into(&mut out);
        self.payload.encode_into(&mut out);
        out
    }

    /// Structural checks: field presence rules, payload/scid agreement, and
    /// tid recomputation.
    pub fn validate_shape(&self) -> Result<(), TxError> {
        if self.payload.scid() != self.scid {
            return Err(TxError::PayloadKind(self.scid));
        }
        if self.debate.is_some() != self.scid.requires_debate() {
            return Err(TxError::DebatePresence);
        }
        if self.region.is_some() != self.scid.requires_region() {
            return Err(TxError::RegionPresence);
        }
        if self.tid
            != compute_tid(
                self.sender,
                self.debate,
                self.region,
                self.location,
                self.time,
            )
        {
            return Err(TxError::TidMismatch);
        }
        if let Payload::PotReport { counts, .. } = &self.payload {
            if counts.iter().any(|(v, _)| *v == self.sender) {
                return Err(TxError::SelfCount);
            }
            if counts.windows(2).any(|w| w[0].0 >= w[1].0) {
                return Err(TxError::UnsortedCounts);
            }
        }
        Ok(())
    }

    /// Shape plus signature against the registered key.
    pub fn verify(&self, registry: &KeyRegistry) -> bool {
        if self.validate_shape().is_err() {
            return false;
        }
        match registry.get(self.sender) {
            Some(pk) => crypto::verify(pk, &self.signing_bytes(), &self.signature),
            None => false,
        }
    }
}

impl Encode for Transaction {
    fn encode_into(&self, out: &mut Vec<u8>) {
        self.tid.encode_into(out);
        self.scid.encode_into(out);
        self.sender.encode_into(out);
        self.debate.encode_into(out);
        self.region.encode_into(out);
        self.location.encode_into(out);
        self.time.as_millis().encode_into(out);
        self.payload.encode_into(out);
        self.signature.encode_into(out);
    }
}
