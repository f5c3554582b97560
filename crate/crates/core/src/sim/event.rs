//! The discrete-event queue.
//!
//! Events pop in nondecreasing time order; equal times break by insertion
//! sequence, so feeding the queue deterministically keeps the whole run
//! deterministic.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::chain::id::{Point, VehicleId};
use crate::chain::tx::Transaction;
use crate::time::SimTime;

/// A broadcast message as it travels between vehicles.
#[derive(Debug, Clone, PartialEq)]
pub struct Message {
    pub id: u64,
    pub sender: VehicleId,
    /// Claimed position of the message's subject.
    pub position: Point,
    /// Claimed speed of the subject, m/s.
    pub speed: f64,
    pub sent_at: SimTime,
    pub claim: Claim,
}

/// What a message asserts about the world.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Claim {
    /// A vehicle (or obstacle) is present at `position` moving at `speed`.
    Presence,
    /// A hazard blocks the numbered route at `position`.
    Hazard { route: u8 },
}

#[derive(Debug, Clone, PartialEq)]
pub enum EventKind {
    VehicleArrival { stream: u8 },
    MessageBroadcast { message: Message },
    MessageDelivery { receiver: VehicleId, message: Message },
    /// A signed transaction becomes due for submission to its region.
    SubmitTx { tx: Box<Transaction> },
    RoundBoundary,
    PotPeriodBoundary { period: u64 },
    AttackTrigger,
    /// The intersection controller looks for a queue head to serve.
    GrantCheck,
    /// An approaching vehicle reaches the back of its stop-line queue.
    ReachStopLine { vehicle: VehicleId },
    /// A route vehicle comes within examination range of a claimed hazard.
    PassClaimSite { vehicle: VehicleId },
    /// The attacker sizes up a voting contract just before its window
    /// closes, to decide whether joining is a winning move.
    AttackerDecision { opened_at: SimTime },
    /// A vehicle leaves the scenario; travel metrics are taken here.
    Depart { vehicle: VehicleId },
    MetricSample,
}

struct Entry {
    time: SimTime,
    seq: u64,
    kind: EventKind,
}

impl PartialEq for Entry {
    fn eq(&self, other: &Self) -> bool {
        self.time == other.time && self.seq == other.seq
    }
}

impl Eq for Entry {}

impl Ord for Entry {
    fn cmp(&self, other: &Self) -> Ordering {
        // Reversed: BinaryHeap is a max-heap, we want the earliest first.
        (other.time, other.seq).cmp(&(self.time, self.seq))
    }
}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

#[derive(Default)]
pub struct EventQueue {
    heap: BinaryHeap<Entry>,
    next_seq: u64,
}

impl EventQueue {
    pub fn new() -> Self {
        EventQueue::default()
    }

    pub fn push(&mut self, time: SimTime, kind: EventKind) {
        let seq = self.next_seq;
        self.next_seq += 1;
        self.heap.push(Entry { time, seq, kind });
    }

    pub fn pop(&mut self) -> Option<(SimTime, EventKind)> {
        self.heap.pop().map(|e| (e.time, e.kind))
    }

    pub fn next_time(&self) -> Option<SimTime> {
        self.heap.peek().map(|e| e.time)
    }

    /// Pops the earliest event if it is due at or before `now`.
    pub fn pop_due(&mut self, now: SimTime) -> Option<(SimTime, EventKind)> {
        if self.next_time()? <= now {
            self.pop()
        } else {
            None
        }
    }

    pub fn is_empty(&self) -> bool {
        self.heap.is_empty()
    }

    pub fn len(&self) -> usize {
        self.heap.len()
    }
}
