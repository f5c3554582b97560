//! Glue between the simulated world and the two chains of one region.
//!
//! A [`RegionRuntime`] owns the region's trust ledger, its travel-credit
//! ledger, the voting-contract engine, and a mempool. The world feeds it
//! signed transactions as they are delivered and calls [`advance_round`]
//! at every round boundary; the runtime does the rest: screening, contract
//! bookkeeping, committee sortition, the commit vote, and block assembly.
//!
//! [`advance_round`]: RegionRuntime::advance_round

use std::collections::{BTreeMap, BTreeSet};

use crate::audit::{AuditEvent, AuditLog};
use crate::chain::block::{Block, BlockKind, StateUpdate};
use crate::chain::crypto::{CryptoError, KeyRegistry, PublicKey};
use crate::chain::id::{RegionId, RegionMap, VehicleId};
use crate::chain::ledger::Ledger;
use crate::chain::tx::{Payload, Transaction, TxId};
use crate::consensus::committee::{round_seed, select_committee};
use crate::consensus::round::{run_round, RoundOutcome};
use crate::consensus::stake::{compute_stake, StakeView};
use crate::pot::{build_pre_block, FinalCredits, PotParams, PotReport, PreBlockOutcome};
use crate::time::{Millis, SimTime};
use crate::trust::engine::{ClosedContract, RedressOutcome, TrustEngine};
use crate::trust::transfer::{plan_transfer, TransferError, TransferPlan};

/// Chain-side knobs a region runtime needs, separate from traffic knobs.
#[derive(Debug, Clone)]
pub struct ChainSettings {
    /// Message validity bound; the debate window is twice this.
    pub tb: Millis,
    /// Two stances argue about the same message when their claimed subject
    /// locations are within this radius.
    pub match_radius_m: f64,
    /// Proposer committee size.
    pub eta_p: usize,
    /// Verifier committee size.
    pub eta_v: usize,
    /// Redress threshold: opposing stake must beat supporting stake by
    /// strictly more than this.
    pub n_th: f64,
    /// Travel-credit period parameters.
    pub pot: PotParams,
}

impl Default for ChainSettings {
    fn default() -> Self {
        ChainSettings {
            tb: Millis(1000),
            match_radius_m: 100.0,
            eta_p: 3,
            eta_v: 15,
            n_th: 5.0,
            pot: PotParams::default(),
        }
    }
}

#[derive(Debug, Clone)]
struct PendingTx {
    tx: Transaction,
    /// Set once the payload has gone through the contract engine; retained
    /// entries are not re-processed when a failed round retries them.
    processed: bool,
}

/// What one round boundary did, for the world to react to.
#[derive(Debug, Clone)]
pub struct RoundReport {
    pub round: u64,
    pub committed: bool,
    pub closed: Vec<ClosedContract>,
    pub redress: Vec<(VehicleId, RedressOutcome)>,
    /// Vehicles whose trust was set negative this round (contract minority
    /// or redress support side). The world treats them as condemned.
    pub sanctioned: Vec<VehicleId>,
}

/// One region's complete chain state: both ledgers, the contract engine,
/// the key registry, and the queues that feed the next blocks.
#[derive(Debug, Clone)]
pub struct RegionRuntime {
    pub region: RegionId,
    pub trust: Ledger,
    pub pot: Ledger,
    pub engine: TrustEngine,
    pub keys: KeyRegistry,
    settings: ChainSettings,
    mempool: Vec<PendingTx>,
    reports: Vec<(TxId, PotReport)>,
    /// System-level updates (registrations, transfers, verdicts) staged for
    /// the next trust block.
    trust_updates: Vec<StateUpdate>,
    /// Registrations staged for the next travel-credit block.
    pot_updates: Vec<StateUpdate>,
}

impl RegionRuntime {
    /// Builds a runtime with genesis blocks already on both chains.
    pub fn new(region: RegionId, settings: ChainSettings) -> Self {
        let mut trust = Ledger::new(region, settings.pot.alpha, settings.pot.n_sum);
        trust
            .append(Block::genesis(region, SimTime::ZERO))
            .expect("genesis always links");
        let mut pot = Ledger::new(region, settings.pot.alpha, settings.pot.n_sum);
        pot.append(Block::genesis(region, SimTime::ZERO))
            .expect("genesis always links");
        let engine = TrustEngine::new(settings.tb, settings.match_radius_m);
        RegionRuntime {
            region,
            trust,
            pot,
            engine,
            keys: KeyRegistry::new(),
            settings,
            mempool: Vec::new(),
            reports: Vec::new(),
            trust_updates: Vec::new(),
            pot_updates: Vec::new(),
        }
    }

    pub fn settings(&self) -> &ChainSettings {
        &self.settings
    }

    /// Registers a vehicle's key immediately and stages its opening record
    /// for the next block. Vehicles whose permanent chain lives here also
    /// get a record on the travel-credit ledger; visitors only carry the
    /// snapshot on the trust ledger.
    pub fn register_vehicle(
        &mut self,
        id: VehicleId,
        key: PublicKey,
        trust_points: i64,
        pot_accumulated: f64,
    ) -> Result<(), CryptoError> {
        self.keys.register(id, key)?;
        self.trust_updates.push(StateUpdate::Register {
            vehicle: id,
            trust_points,
            pot_accumulated,
        });
        if id.permanent_region == self.region {
            self.pot_updates.push(StateUpdate::Register {
                vehicle: id,
                trust_points: 0,
                pot_accumulated,
            });
        }
        Ok(())
    }

    /// The stake of every active record, with travel credits taken from the
    /// credit ledger for local vehicles and from the transfer snapshot for
    /// visitors.
    pub fn stake_view(&self) -> StakeView {
        let mut trust_points = BTreeMap::new();
        let mut pot_credits = BTreeMap::new();
        for (&v, rec) in self.trust.state() {
            if !rec.active {
                continue;
            }
            trust_points.insert(v, rec.trust_points);
            let credits = if v.permanent_region == self.region {
                self.pot.record(v).map_or(0.0, |r| r.pot_accumulated)
            } else {
                rec.pot_accumulated
            };
            pot_credits.insert(v, credits);
        }
        compute_stake(self.region, &trust_points, &pot_credits)
    }

    /// Screens a delivered transaction and queues it. Bad senders, broken
    /// signatures, and malformed payloads are audited and dropped; travel
    /// reports go to the period buffer; transfers must come through
    /// [`process_transfer`] instead.
    pub fn submit_tx(&mut self, tx: Transaction, now: SimTime, audit: &mut AuditLog) {
        if !self.keys.contains(tx.sender) {
            audit.record(
                now,
                AuditEvent::UnknownSender {
                    tx: tx.tid,
                    sender: tx.sender,
                },
            );
            return;
        }
        if let Err(err) = tx.validate_shape() {
            audit.record(
                now,
                AuditEvent::MalformedPayload {
                    tx: tx.tid,
                    detail: err.to_string(),
                },
            );
            return;
        }
        if !tx.verify(&self.keys) {
            audit.record(
                now,
                AuditEvent::BadSignature {
                    tx: tx.tid,
                    sender: tx.sender,
                },
            );
            return;
        }
        match &tx.payload {
            Payload::PotReport {
                period_index,
                counts,
            } => {
                let report = PotReport {
                    reporter: tx.sender,
                    period_index: *period_index,
                    counts: counts.iter().cloned().collect(),
                };
                match report.validate(&self.settings.pot) {
                    Ok(()) => self.reports.push((tx.tid, report)),
                    Err(err) => audit.record(
                        now,
                        AuditEvent::PotReportDropped {
                            tx: tx.tid,
                            reporter: tx.sender,
                            detail: err.to_string(),
                        },
                    ),
                }
            }
            Payload::Transfer => audit.record(
                now,
                AuditEvent::TransferRejected {
                    tx: tx.tid,
                    detail: "transfers are planned at the border, not voted in a round".into(),
                },
            ),
            _ => self.mempool.push(PendingTx {
                tx,
                processed: false,
            }),
        }
    }

    /// Runs one round boundary: feeds queued stances and disputes through
    /// the contract engine, closes expired contracts, evaluates redress
    /// requests, selects the committee, and holds the commit vote.
    ///
    /// The quorum gates user transactions only. Verdicts, registrations,
    /// and transfer records are appended even when the round fails to
    /// commit, in a block without transactions; the pending transactions
    /// stay queued for the next committed block.
    pub fn advance_round(
        &mut self,
        now: SimTime,
        vote: impl Fn(VehicleId, &Block) -> bool,
        audit: &mut AuditLog,
    ) -> RoundReport {
        let view = self.stake_view();

        // Arrival order over the network is not deterministic enough to
        // build blocks from; process by (claimed time, id) instead.
        self.mempool
            .sort_by(|a, b| (a.tx.time, a.tx.tid).cmp(&(b.tx.time, b.tx.tid)));
        let mut redress_requests: Vec<VehicleId> = Vec::new();
        for pending in self.mempool.iter_mut().filter(|p| !p.processed) {
            pending.processed = true;
            match &pending.tx.payload {
                Payload::Stance { .. } | Payload::PotDispute { .. } => {
                    self.engine.handle_stance(&pending.tx, audit);
                }
                Payload::Redress => {
                    if let Some(debate) = pending.tx.debate {
                        redress_requests.push(debate);
                    }
                }
                // submit_tx never queues these.
                Payload::Transfer | Payload::PotReport { .. } => {}
            }
        }

        let closed = self.engine.close_due(now, &view.stakes, audit);
        let mut updates = std::mem::take(&mut self.trust_updates);
        for c in &closed {
            updates.extend(c.updates.iter().cloned());
        }

        let mut redress = Vec::new();
        let mut seen = BTreeSet::new();
        for debate in redress_requests {
            if !seen.insert(debate) {
                continue;
            }
            let outcome =
                self.engine
                    .handle_redress(debate, now, &view.stakes, self.settings.n_th, audit);
            updates.extend(outcome.updates.iter().cloned());
            redress.push((debate, outcome));
        }

        let sanctioned: Vec<VehicleId> = updates
            .iter()
            .filter_map(|u| match u {
                StateUpdate::TrustSet { vehicle, value } if *value < 0 => Some(*vehicle),
                _ => None,
            })
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();

        let round = self.trust.next_round();
        let seed = round_seed(self.region, round, &self.trust.head_hash());
        let transactions: Vec<Transaction> = self.mempool.iter().map(|p| p.tx.clone()).collect();
        let committee = select_committee(&view, round, seed, self.settings.eta_p, self.settings.eta_v);

        let committed = match committee {
            Ok(committee) => {
                let candidate = Block {
                    region: self.region,
                    round,
                    prev_hash: self.trust.head_hash(),
                    kind: BlockKind::Normal,
                    transactions,
                    state_updates: updates.clone(),
                    proposer: committee.proposers.first().copied(),
                    timestamp: now,
                };
                matches!(
                    run_round(&committee, candidate.clone(), &view.stakes, &vote),
                    RoundOutcome::Committed(_)
                )
                .then(|| self.trust.append(candidate).expect("candidate links to head"))
                .is_some()
            }
            Err(_) => false,
        };

        if committed {
            self.mempool.clear();
        } else {
            audit.record(
                now,
                AuditEvent::EmptyRound {
                    region: self.region,
                    round,
                },
            );
            let fallback = Block {
                region: self.region,
                round,
                prev_hash: self.trust.head_hash(),
                kind: BlockKind::Normal,
                transactions: Vec::new(),
                state_updates: updates,
                proposer: None,
                timestamp: now,
            };
            self.trust.append(fallback).expect("fallback links to head");
        }

        if !self.pot_updates.is_empty() {
            let block = Block {
                region: self.region,
                round: self.pot.next_round(),
                prev_hash: self.pot.head_hash(),
                kind: BlockKind::Normal,
                transactions: Vec::new(),
                state_updates: std::mem::take(&mut self.pot_updates),
                proposer: None,
                timestamp: now,
            };
            self.pot.append(block).expect("credit block links to head");
        }

        RoundReport {
            round,
            committed,
            closed,
            redress,
            sanctioned,
        }
    }

    /// Closes one travel-credit period: drops reports from condemned
    /// reporters, folds the rest into a pre-block, and appends the
    /// pre-block marker to the credit chain. The caller merges pre-blocks
    /// across regions and comes back through [`finalize_period`].
    ///
    /// [`finalize_period`]: RegionRuntime::finalize_period
    pub fn period_boundary(
        &mut self,
        period: u64,
        now: SimTime,
        audit: &mut AuditLog,
    ) -> PreBlockOutcome {
        let mut in_period = Vec::new();
        for (tid, report) in std::mem::take(&mut self.reports) {
            if report.period_index != period {
                self.reports.push((tid, report));
                continue;
            }
            let condemned = self
                .trust
                .record(report.reporter)
                .is_some_and(|r| r.trust_points < 0);
            if condemned {
                audit.record(
                    now,
                    AuditEvent::PotReportDropped {
                        tx: tid,
                        reporter: report.reporter,
                        detail: "reporter stands condemned".into(),
                    },
                );
                continue;
            }
            in_period.push(report);
        }
        let outcome = build_pre_block(self.region, &in_period, period);
        let marker = Block {
            region: self.region,
            round: self.pot.next_round(),
            prev_hash: self.pot.head_hash(),
            kind: BlockKind::PreBlock,
            transactions: Vec::new(),
            state_updates: Vec::new(),
            proposer: None,
            timestamp: now,
        };
        self.pot.append(marker).expect("pre-block links to head");
        outcome
    }

    /// Records one period's merged credits for this region's own vehicles
    /// as a final block on the credit chain.
    pub fn finalize_period(&mut self, finals: &FinalCredits, now: SimTime) {
        let updates = finals
            .credits
            .iter()
            .map(|(&vehicle, &credits)| StateUpdate::PotPeriod {
                vehicle,
                period: finals.period_index,
                credits,
            })
            .collect();
        let block = Block {
            region: self.region,
            round: self.pot.next_round(),
            prev_hash: self.pot.head_hash(),
            kind: BlockKind::Final,
            transactions: Vec::new(),
            state_updates: updates,
            proposer: None,
            timestamp: now,
        };
        self.pot.append(block).expect("final block links to head");
    }
}

/// Validates a border transfer and stages both sides: the destination gets
/// the incoming record, the origin the vacating one, and the key moves so
/// the vehicle can sign in its new region. Both sides land with the next
/// round on each chain.
pub fn process_transfer(
    origin: &mut RegionRuntime,
    dest: &mut RegionRuntime,
    regions: &RegionMap,
    tx: &Transaction,
    border_threshold_m: f64,
    now: SimTime,
    audit: &mut AuditLog,
) -> Result<TransferPlan, TransferError> {
    let plan = plan_transfer(
        tx,
        origin.region,
        regions,
        &origin.trust,
        &origin.pot,
        border_threshold_m,
    );
    match &plan {
        Ok(plan) => {
            if let Some(key) = origin.keys.get(plan.vehicle) {
                // A round trip re-registers the same key; that is fine.
                let _ = dest.keys.register(plan.vehicle, key);
            }
            origin.trust_updates.push(plan.outgoing_update());
            dest.trust_updates.push(plan.incoming_update());
            audit.record(
                now,
                AuditEvent::TransferPlanned {
                    vehicle: plan.vehicle,
                    origin: plan.origin,
                    dest: plan.destination,
                },
            );
        }
        Err(TransferError::NotNearBorder(a, b)) => audit.record(
            now,
            AuditEvent::TransferNotAtBorder {
                tx: tx.tid,
                sender: tx.sender,
                origin: *a,
                dest: *b,
            },
        ),
        Err(err) => audit.record(
            now,
            AuditEvent::TransferRejected {
                tx: tx.tid,
                detail: err.to_string(),
            },
        ),
    }
    plan
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::crypto::{Keypair, SecretKey};
    use crate::chain::id::Point;
    use crate::chain::tx::Opinion;

    fn vid(region: u16, index: u32) -> VehicleId {
        VehicleId::new(RegionId(region), index)
    }

    fn keypair_for(id: VehicleId) -> Keypair {
        let mut secret = [0u8; 32];
        secret[0] = id.permanent_region.0 as u8;
        secret[1] = id.index as u8;
        secret[31] = 0x5a;
        Keypair::from_secret(SecretKey(secret))
    }

    fn runtime_with(region: u16, vehicles: &[(VehicleId, i64, f64)]) -> RegionRuntime {
        let mut rt = RegionRuntime::new(RegionId(region), ChainSettings::default());
        for &(id, tp, pot) in vehicles {
            rt.register_vehicle(id, keypair_for(id).public(), tp, pot)
                .unwrap();
        }
        rt
    }

    fn stance(
        sender: VehicleId,
        debate: VehicleId,
        opinion: Opinion,
        message_time: SimTime,
        sent_at: SimTime,
        location: Point,
    ) -> Transaction {
        Transaction::build(
            sender,
            Some(debate),
            None,
            location,
            sent_at,
            Payload::Stance {
                opinion,
                message_time,
            },
            &keypair_for(sender),
        )
    }

    fn all_yes(_: VehicleId, _: &Block) -> bool {
        true
    }

    #[test]
    fn registration_seeds_the_ledgers_and_the_next_round_commits() {
        let local = vid(0, 1);
        let visitor = vid(7, 2);
        let mut rt = runtime_with(0, &[(local, 3, 40.0), (visitor, 1, 9.0)]);
        let mut audit = AuditLog::default();

        // Nobody holds stake before the opening records land, so the first
        // round cannot commit; its fallback block carries the registrations
        // all the same, and the chain is live from the next round on.
        let report = rt.advance_round(SimTime::from_secs_f64(22.0), all_yes, &mut audit);
        assert!(!report.committed);
        assert_eq!(rt.trust.record(local).unwrap().trust_points, 3);
        assert_eq!(rt.trust.record(visitor).unwrap().trust_points, 1);
        // The credit ledger only tracks vehicles whose permanent chain is
        // here; the visitor's credits live in its trust-ledger snapshot.
        assert_eq!(rt.pot.record(local).unwrap().pot_accumulated, 40.0);
        assert!(rt.pot.record(visitor).is_none());

        let view = rt.stake_view();
        assert!(view.stakes[&local] > 0.0);
        assert!(view.stakes[&visitor] > 0.0);

        let report = rt.advance_round(SimTime::from_secs_f64(44.0), all_yes, &mut audit);
        assert!(report.committed);
    }

    #[test]
    fn condemning_vote_lands_in_the_ledger() {
        let liar = vid(0, 9);
        let honest: Vec<VehicleId> = (1..=3).map(|i| vid(0, i)).collect();
        let mut vehicles: Vec<(VehicleId, i64, f64)> =
            honest.iter().map(|&v| (v, 5, 100.0)).collect();
        vehicles.push((liar, 5, 100.0));
        let mut rt = runtime_with(0, &vehicles);
        let mut audit = AuditLog::default();
        rt.advance_round(SimTime::from_secs_f64(22.0), all_yes, &mut audit);

        // The message under debate went out at t=30; stances arrive within
        // the two-second window, the liar defending its own claim.
        let spot = Point::new(60.0, 0.0);
        let t_msg = SimTime::from_secs_f64(30.0);
        for (i, &v) in honest.iter().enumerate() {
            let at = SimTime::from_secs_f64(30.2 + 0.1 * i as f64);
            rt.submit_tx(
                stance(v, liar, Opinion::Disagree, t_msg, at, spot),
                at,
                &mut audit,
            );
        }
        let defend_at = SimTime::from_secs_f64(30.6);
        rt.submit_tx(
            stance(liar, liar, Opinion::Agree, t_msg, defend_at, spot),
            defend_at,
            &mut audit,
        );

        let report = rt.advance_round(SimTime::from_secs_f64(44.0), all_yes, &mut audit);
        assert!(report.committed);
        assert_eq!(report.closed.len(), 1);
        assert_eq!(report.sanctioned, vec![liar]);
        assert_eq!(rt.trust.record(liar).unwrap().trust_points, -1);
        for &v in &honest {
            assert_eq!(rt.trust.record(v).unwrap().trust_points, 6);
        }
    }

    #[test]
    fn failed_round_retains_transactions_and_still_applies_verdicts() {
        let a = vid(0, 1);
        let b = vid(0, 2);
        let c = vid(0, 3);
        let mut rt = runtime_with(0, &[(a, 5, 100.0), (b, 5, 100.0), (c, 5, 100.0)]);
        let mut audit = AuditLog::default();
        rt.advance_round(SimTime::from_secs_f64(22.0), all_yes, &mut audit);

        let t_msg = SimTime::from_secs_f64(30.0);
        let at = SimTime::from_secs_f64(30.3);
        let spot = Point::new(10.0, 0.0);
        rt.submit_tx(
            stance(a, c, Opinion::Disagree, t_msg, at, spot),
            at,
            &mut audit,
        );

        // Nobody votes yes: the round fails, yet the stance is not lost and
        // the contract it opened still runs its course.
        let report = rt.advance_round(SimTime::from_secs_f64(44.0), |_, _| false, &mut audit);
        assert!(!report.committed);
        assert!(audit
            .entries()
            .iter()
            .any(|e| matches!(e.event, AuditEvent::EmptyRound { round: 2, .. })));
        assert!(rt.trust.head().unwrap().transactions.is_empty());

        let report = rt.advance_round(SimTime::from_secs_f64(66.0), all_yes, &mut audit);
        assert!(report.committed);
        assert_eq!(rt.trust.head().unwrap().transactions.len(), 1);
        // The singleton disagree side won the contract while it waited.
        assert_eq!(rt.trust.record(a).unwrap().trust_points, 6);
    }

    #[test]
    fn redress_without_qualifying_contracts_changes_nothing() {
        let a = vid(0, 1);
        let b = vid(0, 2);
        let mut rt = runtime_with(0, &[(a, 5, 100.0), (b, 5, 100.0)]);
        let mut audit = AuditLog::default();
        rt.advance_round(SimTime::from_secs_f64(22.0), all_yes, &mut audit);

        let at = SimTime::from_secs_f64(30.0);
        let tx = Transaction::build(
            a,
            Some(b),
            None,
            Point::ORIGIN,
            at,
            Payload::Redress,
            &keypair_for(a),
        );
        rt.submit_tx(tx, at, &mut audit);
        let report = rt.advance_round(SimTime::from_secs_f64(44.0), all_yes, &mut audit);

        assert_eq!(report.redress.len(), 1);
        assert!(!report.redress[0].1.fired);
        assert_eq!(report.redress[0].1.qualifying, 0);
        assert_eq!(rt.trust.record(a).unwrap().trust_points, 5);
        assert_eq!(rt.trust.record(b).unwrap().trust_points, 5);
        assert!(audit.entries().iter().any(|e| matches!(
            e.event,
            AuditEvent::RedressEvaluated {
                fired: false,
                margin: None,
                ..
            }
        )));
    }

    #[test]
    fn unknown_sender_and_bad_signature_are_dropped() {
        let a = vid(0, 1);
        let stranger = vid(3, 8);
        let mut rt = runtime_with(0, &[(a, 5, 100.0)]);
        let mut audit = AuditLog::default();
        rt.advance_round(SimTime::from_secs_f64(22.0), all_yes, &mut audit);

        let at = SimTime::from_secs_f64(30.0);
        rt.submit_tx(
            stance(stranger, a, Opinion::Disagree, at, at, Point::ORIGIN),
            at,
            &mut audit,
        );
        // Signed with the wrong key: a's id, stranger's keypair.
        let mut forged = Transaction::build(
            a,
            Some(a),
            None,
            Point::ORIGIN,
            at,
            Payload::Stance {
                opinion: Opinion::Disagree,
                message_time: at,
            },
            &keypair_for(stranger),
        );
        forged.sender = a;
        rt.submit_tx(forged, at, &mut audit);

        assert_eq!(
            audit.count_where(|e| matches!(e, AuditEvent::UnknownSender { .. })),
            1
        );
        assert_eq!(
            audit.count_where(|e| matches!(e, AuditEvent::BadSignature { .. })),
            1
        );
        let report = rt.advance_round(SimTime::from_secs_f64(44.0), all_yes, &mut audit);
        assert!(report.committed);
        assert!(rt.trust.head().unwrap().transactions.is_empty());
    }

    #[test]
    fn period_pipeline_merges_across_regions_and_conserves_credits() {
        let r0_car = vid(0, 1);
        let r1_car = vid(1, 1);
        let roamer = vid(0, 2); // starts in region 0, observed in both
        let mut r0 = runtime_with(
            0,
            &[(r0_car, 2, 0.0), (roamer, 2, 0.0), (r1_car, 2, 0.0)],
        );
        let mut r1 = runtime_with(1, &[(r1_car, 2, 0.0), (roamer, 2, 0.0)]);
        let mut audit = AuditLog::default();
        r0.advance_round(SimTime::from_secs_f64(22.0), all_yes, &mut audit);
        r1.advance_round(SimTime::from_secs_f64(22.0), all_yes, &mut audit);

        let at = SimTime::from_secs_f64(100.0);
        let report = |sender: VehicleId, counts: Vec<(VehicleId, u64)>| {
            Transaction::build(
                sender,
                None,
                None,
                Point::ORIGIN,
                at,
                Payload::PotReport {
                    period_index: 0,
                    counts,
                },
                &keypair_for(sender),
            )
        };
        // Nobody may count itself, so the pairs vouch for each other: in
        // region 0 the roamer and the local car trade counts, in region 1
        // the roamer vouches for the local car and vice versa.
        r0.submit_tx(report(r0_car, vec![(roamer, 3)]), at, &mut audit);
        r0.submit_tx(report(roamer, vec![(r0_car, 5)]), at, &mut audit);
        r1.submit_tx(report(r1_car, vec![(roamer, 2)]), at, &mut audit);
        r1.submit_tx(report(roamer, vec![(r1_car, 7)]), at, &mut audit);

        let boundary = SimTime::from_secs_f64(200.0);
        let pre0 = r0.period_boundary(0, boundary, &mut audit);
        let pre1 = r1.period_boundary(0, boundary, &mut audit);
        assert!(pre0.conflicting_reporters.is_empty());

        let expected: BTreeSet<RegionId> = [RegionId(0), RegionId(1)].into();
        let pre_blocks = [pre0.pre_block.clone(), pre1.pre_block.clone()];
        let merged = crate::pot::merge_final_blocks(0, &pre_blocks, &expected);
        assert!(merged.missing_regions.is_empty());
        assert!(merged.duplicate_regions.is_empty());

        r0.finalize_period(&merged.finals[&RegionId(0)], boundary);
        r1.finalize_period(&merged.finals[&RegionId(1)], boundary);

        // The roamer's credits from both regions land on its permanent
        // chain in region 0; region 1 keeps only its own car.
        assert_eq!(r0.pot.record(roamer).unwrap().pot_periods[&0], 5);
        assert_eq!(r0.pot.record(r0_car).unwrap().pot_periods[&0], 5);
        assert_eq!(r1.pot.record(r1_car).unwrap().pot_periods[&0], 7);
        assert!(r1.pot.record(roamer).map_or(true, |r| r.pot_periods.is_empty()));

        let reported: u64 = 3 + 5 + 2 + 7;
        let finalized: u64 = merged
            .finals
            .values()
            .flat_map(|f| f.credits.values())
            .sum();
        assert_eq!(finalized, reported);
    }

    #[test]
    fn condemned_reporter_is_filtered_at_the_boundary() {
        let honest = vid(0, 1);
        let condemned = vid(0, 2);
        let witness = vid(0, 3);
        let mut rt = runtime_with(
            0,
            &[(honest, 2, 0.0), (condemned, -3, 0.0), (witness, 2, 0.0)],
        );
        let mut audit = AuditLog::default();
        rt.advance_round(SimTime::from_secs_f64(22.0), all_yes, &mut audit);

        let at = SimTime::from_secs_f64(100.0);
        for (sender, count) in [(honest, 4), (condemned, 9)] {
            let tx = Transaction::build(
                sender,
                None,
                None,
                Point::ORIGIN,
                at,
                Payload::PotReport {
                    period_index: 0,
                    counts: vec![(witness, count)],
                },
                &keypair_for(sender),
            );
            rt.submit_tx(tx, at, &mut audit);
        }

        // Only the honest observation survives into the pre-block.
        let pre = rt.period_boundary(0, SimTime::from_secs_f64(200.0), &mut audit);
        assert_eq!(pre.pre_block.partial_credits[&witness], 4);
        assert!(audit.entries().iter().any(|e| matches!(
            e.event,
            AuditEvent::PotReportDropped { reporter, .. } if reporter == condemned
        )));
    }

    #[test]
    fn border_transfer_moves_the_record_and_the_stake_source() {
        let mut regions = RegionMap::new();
        regions.add(RegionId(0), Point::new(0.0, 0.0), 5.0).unwrap();
        regions
            .add(RegionId(1), Point::new(10_000.0, 0.0), 5.0)
            .unwrap();
        regions.link(RegionId(0), RegionId(1)).unwrap();

        let mover = vid(0, 1);
        let anchor0 = vid(0, 2);
        let anchor1 = vid(1, 2);
        let mut r0 = runtime_with(0, &[(mover, 4, 50.0), (anchor0, 1, 10.0)]);
        let mut r1 = runtime_with(1, &[(anchor1, 1, 10.0)]);
        let mut audit = AuditLog::default();
        r0.advance_round(SimTime::from_secs_f64(22.0), all_yes, &mut audit);
        r1.advance_round(SimTime::from_secs_f64(22.0), all_yes, &mut audit);

        let at = SimTime::from_secs_f64(30.0);
        let tx = Transaction::build(
            mover,
            None,
            Some(RegionId(1)),
            Point::new(5_000.0, 0.0),
            at,
            Payload::Transfer,
            &keypair_for(mover),
        );
        let plan = process_transfer(&mut r0, &mut r1, &regions, &tx, 500.0, at, &mut audit)
            .expect("transfer at the border should plan");
        assert_eq!(plan.trust_points, 4);
        assert_eq!(plan.pot_accumulated, 50.0);

        r0.advance_round(SimTime::from_secs_f64(44.0), all_yes, &mut audit);
        r1.advance_round(SimTime::from_secs_f64(44.0), all_yes, &mut audit);

        assert!(!r0.trust.record(mover).unwrap().active);
        assert_eq!(r0.trust.record(mover).unwrap().trust_points, 0);
        let landed = r1.trust.record(mover).unwrap();
        assert!(landed.active);
        assert_eq!(landed.trust_points, 4);
        assert_eq!(landed.pot_accumulated, 50.0);

        // Stake in the new region draws on the copied snapshot even though
        // the mover's credit chain still lives in region 0.
        let view = r1.stake_view();
        assert!(view.stakes[&mover] > view.stakes[&anchor1]);
        assert!(!r0.stake_view().stakes.contains_key(&mover));

        // And the mover can now sign in region 1.
        let t_msg = SimTime::from_secs_f64(50.0);
        r1.submit_tx(
            stance(mover, anchor1, Opinion::Disagree, t_msg, t_msg, Point::ORIGIN),
            t_msg,
            &mut audit,
        );
        assert!(!audit
            .entries()
            .iter()
            .any(|e| matches!(e.event, AuditEvent::UnknownSender { sender, .. } if sender == mover)));
    }

    #[test]
    fn identical_histories_produce_identical_heads() {
        let build = || {
            let mut rt = runtime_with(0, &[(vid(0, 1), 5, 100.0), (vid(0, 2), 3, 80.0)]);
            let mut audit = AuditLog::default();
            let at = SimTime::from_secs_f64(5.0);
            rt.submit_tx(
                stance(
                    vid(0, 1),
                    vid(0, 2),
                    Opinion::Disagree,
                    at,
                    at,
                    Point::new(1.0, 2.0),
                ),
                at,
                &mut audit,
            );
            for k in 1..=4u64 {
                rt.advance_round(SimTime::from_secs_f64(22.0 * k as f64), all_yes, &mut audit);
            }
            rt.trust.head_hash()
        };
        assert_eq!(build(), build());
    }

    #[test]
    fn submission_order_does_not_change_the_block_digest() {
        // Blocks are assembled from the pending set in canonical
        // (time, tid) order, so network arrival order must not matter.
        let vehicles = [
            (vid(0, 1), 5, 100.0),
            (vid(0, 2), 3, 80.0),
            (vid(0, 3), 4, 90.0),
            (vid(0, 9), 2, 70.0),
        ];
        let txs: Vec<Transaction> = (1..=3u32)
            .map(|i| {
                stance(
                    vid(0, i),
                    vid(0, 9),
                    if i == 1 { Opinion::Agree } else { Opinion::Disagree },
                    SimTime::from_secs_f64(5.0),
                    SimTime::from_secs_f64(5.0 + i as f64 * 0.1),
                    Point::new(1.0, 2.0),
                )
            })
            .collect();
        let head_for = |order: &[usize]| {
            let mut rt = runtime_with(0, &vehicles);
            let mut audit = AuditLog::default();
            for &i in order {
                rt.submit_tx(txs[i].clone(), txs[i].time, &mut audit);
            }
            for k in 1..=2u64 {
                rt.advance_round(SimTime::from_secs_f64(22.0 * k as f64), all_yes, &mut audit);
            }
            rt.trust.head_hash()
        };
        let forward = head_for(&[0, 1, 2]);
        let shuffled = head_for(&[2, 0, 1]);
        let reversed = head_for(&[2, 1, 0]);
        assert_eq!(forward, shuffled);
        assert_eq!(forward, reversed);
    }
}
