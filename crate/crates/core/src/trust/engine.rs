//! Per-region contract engine: routes stance transactions into voting
//! contracts, closes expired ones, and evaluates redress requests.
//!
//! The engine holds no trust state of its own; it emits `StateUpdate`s for
//! the caller to embed in blocks, so the ledger stays the single source of
//! truth. It is `Clone` on purpose: round assembly builds a candidate on a
//! clone and promotes it only if the block commits.

use std::collections::{BTreeMap, BTreeSet};

use crate::audit::{AuditEvent, AuditLog};
use crate::chain::block::StateUpdate;
use crate::chain::id::VehicleId;
use crate::chain::tx::{Opinion, Payload, Transaction};
use crate::time::{Millis, SimTime};

use super::contract::{
    close_contract, ContractKind, ContractStatus, Verdict, VotingContract,
};

/// What happened to one stance transaction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StanceOutcome {
    /// A new contract was opened; the stance is its first entry.
    Opened(u64),
    /// The stance joined an existing open contract.
    Joined(u64),
    /// Dropped (stale, duplicate, or not a stance); reason is in the audit log.
    Ignored,
}

/// A contract the engine just decided, with the trust updates it implies.
#[derive(Debug, Clone, PartialEq)]
pub struct ClosedContract {
    pub id: u64,
    pub kind: ContractKind,
    pub debate: VehicleId,
    pub verdict: Verdict,
    pub updates: Vec<StateUpdate>,
}

/// Result of evaluating one redress request.
#[derive(Debug, Clone, PartialEq)]
pub struct RedressOutcome {
    /// How many closed-and-upheld contracts about the debate existed.
    pub qualifying: usize,
    /// Opposing-minus-supporting stake; absent when nothing qualified.
    pub margin: Option<f64>,
    pub fired: bool,
    pub updates: Vec<StateUpdate>,
}

impl RedressOutcome {
    fn no_op(qualifying: usize, margin: Option<f64>) -> Self {
        RedressOutcome {
            qualifying,
            margin,
            fired: false,
            updates: Vec::new(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrustEngine {
    tb_s: Millis,
    match_radius_m: f64,
    contracts: Vec<VotingContract>,
    next_id: u64,
}

impl TrustEngine {
    pub fn new(tb_s: Millis, match_radius_m: f64) -> Self {
        assert!(tb_s > Millis::ZERO, "the time bound must be positive");
        TrustEngine {
            tb_s,
            match_radius_m,
            contracts: Vec::new(),
            next_id: 0,
        }
    }

    /// The debate window: a contract lives exactly twice the time bound.
    pub fn window(&self) -> Millis {
        self.tb_s * 2
    }

    pub fn contracts(&self) -> &[VotingContract] {
        &self.contracts
    }

    pub fn contract(&self, id: u64) -> Option<&VotingContract> {
        self.contracts.iter().find(|c| c.id == id)
    }

    pub fn contracts_about(&self, debate: VehicleId) -> impl Iterator<Item = &VotingContract> {
        self.contracts.iter().filter(move |c| c.debate == debate)
    }

    /// True while some closed contract upholding this debate has not been
    /// redressed. Applications treat such a debate's message as standing.
    pub fn has_unredressed_upheld(&self, debate: VehicleId) -> bool {
        self.contracts.iter().any(|c| {
            c.debate == debate
                && c.status == ContractStatus::Closed
                && c.verdict == Some(Verdict::DebateUpheld)
        })
    }

    /// Routes one stance transaction (a disagreement or a count dispute)
    /// into the contract table. The transaction is assumed shape-valid and
    /// signature-checked by the round builder.
    pub fn handle_stance(&mut self, tx: &Transaction, audit: &mut AuditLog) -> StanceOutcome {
        let (kind, subject, opinion, anchor) = match &tx.payload {
            Payload::Stance {
                opinion,
                message_time,
            } => {
                let Some(debate) = tx.debate else {
                    return StanceOutcome::Ignored;
                };
                (ContractKind::MessageVote, debate, *opinion, *message_time)
            }
            Payload::PotDispute {
                reporter,
                period_index,
                opinion,
            } => (
                ContractKind::CountDispute {
                    period_index: *period_index,
                },
                *reporter,
                *opinion,
                tx.time,
            ),
            _ => return StanceOutcome::Ignored,
        };

        // The stance must land within the debate window of the message it
        // is about; anything later is stale and never joins a contract.
        if tx.time.since(anchor) > self.window() {
            audit.record(
                tx.time,
                AuditEvent::StaleStance {
                    tx: tx.tid,
                    sender: tx.sender,
                    contract_opened_at: anchor,
                },
            );
            return StanceOutcome::Ignored;
        }

        let window = self.window();
        let radius = self.match_radius_m;
        let matched = self.contracts.iter_mut().find(|c| {
            if !(c.is_open() && c.kind == kind && c.debate == subject) {
                return false;
            }
            if tx.time.since(c.opened_at) >= window {
                return false;
            }
            match kind {
                ContractKind::MessageVote => {
                    tx.location.distance(c.origin_location) <= radius
                }
                ContractKind::CountDispute { .. } => true,
            }
        });

        if let Some(c) = matched {
            if c.has_stance_from(tx.sender) {
                audit.record(
                    tx.time,
                    AuditEvent::DuplicateStance {
                        tx: tx.tid,
                        sender: tx.sender,
                    },
                );
                return StanceOutcome::Ignored;
            }
            match opinion {
                Opinion::Agree => c.agree.insert(tx.sender),
                Opinion::Disagree => c.disagree.insert(tx.sender),
            };
            return StanceOutcome::Joined(c.id);
        }

        let id = self.next_id;
        self.next_id += 1;
        let mut contract = VotingContract {
            id,
            kind,
            debate: subject,
            opened_at: anchor,
            origin_location: tx.location,
            agree: BTreeSet::new(),
            disagree: BTreeSet::new(),
            status: ContractStatus::Open,
            verdict: None,
        };
        match opinion {
            Opinion::Agree => contract.agree.insert(tx.sender),
            Opinion::Disagree => contract.disagree.insert(tx.sender),
        };
        audit.record(
            tx.time,
            AuditEvent::ContractOpened {
                contract: id,
                debate: subject,
                opened_at: anchor,
            },
        );
        self.contracts.push(contract);
        StanceOutcome::Opened(id)
    }

    /// Closes every open contract whose window has fully elapsed, in
    /// creation order, evaluating each against the given stakes.
    pub fn close_due(
        &mut self,
        now: SimTime,
        stakes: &BTreeMap<VehicleId, f64>,
        audit: &mut AuditLog,
    ) -> Vec<ClosedContract> {
        let window = self.window();
        let mut closed = Vec::new();
        for c in &mut self.contracts {
            if !c.is_open() || now.since(c.opened_at) < window {
                continue;
            }
            let (verdict, updates) = close_contract(c, stakes);
            c.status = ContractStatus::Closed;
            c.verdict = Some(verdict);
            audit.record(
                now,
                AuditEvent::ContractClosed {
                    contract: c.id,
                    debate: c.debate,
                    verdict: verdict.as_str().to_string(),
                },
            );
            closed.push(ClosedContract {
                id: c.id,
                kind: c.kind,
                debate: c.debate,
                verdict,
                updates,
            });
        }
        closed
    }

    /// Evaluates a redress request about `debate`: gathers every closed
    /// contract the debate finally won, pools the supporting side (the
    /// debated vehicle implicitly supports itself) against the opposing
    /// side, and fires when the opposing stake exceeds the supporting stake
    /// by strictly more than `n_th`. A vehicle that voted both ways across
    /// contracts counts once, on the opposing side.
    pub fn handle_redress(
        &mut self,
        debate: VehicleId,
        now: SimTime,
        stakes: &BTreeMap<VehicleId, f64>,
        n_th: f64,
        audit: &mut AuditLog,
    ) -> RedressOutcome {
        let qualifying: Vec<usize> = self
            .contracts
            .iter()
            .enumerate()
            .filter(|(_, c)| {
                c.debate == debate
                    && c.status == ContractStatus::Closed
                    && c.verdict == Some(Verdict::DebateUpheld)
            })
            .map(|(i, _)| i)
            .collect();
        if qualifying.is_empty() {
            audit.record(
                now,
                AuditEvent::RedressEvaluated {
                    debate,
                    margin: None,
                    fired: false,
                },
            );
            return RedressOutcome::no_op(0, None);
        }

        let mut g_s: BTreeSet<VehicleId> = BTreeSet::new();
        let mut g_o: BTreeSet<VehicleId> = BTreeSet::new();
        for &i in &qualifying {
            g_s.extend(self.contracts[i].agree.iter().copied());
            g_o.extend(self.contracts[i].disagree.iter().copied());
        }
        g_s.insert(debate);
        // Cross-contract overlap resolves to the opposing side, except the
        // debated vehicle itself, which always supports its own message.
        g_o.remove(&debate);
        for v in &g_o {
            g_s.remove(v);
        }

        let stake_of = |group: &BTreeSet<VehicleId>| -> f64 {
            group
                .iter()
                .map(|v| stakes.get(v).copied().unwrap_or(0.0))
                .sum()
        };
        let margin = stake_of(&g_o) - stake_of(&g_s);
        let fired = margin > n_th;
        audit.record(
            now,
            AuditEvent::RedressEvaluated {
                debate,
                margin: Some(margin),
                fired,
            },
        );
        if !fired {
            return RedressOutcome::no_op(qualifying.len(), Some(margin));
        }

        for &i in &qualifying {
            self.contracts[i].status = ContractStatus::Redressed;
        }
        let mut updates = Vec::new();
        for &vehicle in &g_o {
            updates.push(StateUpdate::TrustDelta { vehicle, delta: 1 });
        }
        for &vehicle in &g_s {
            updates.push(StateUpdate::TrustSet { vehicle, value: -1 });
        }
        RedressOutcome {
            qualifying: qualifying.len(),
            margin: Some(margin),
            fired: true,
            updates,
        }
    }
}
