//! Smart intersection under a forged stopped-vehicle claim.
//!
//! Four approaches meet at the origin. Vehicles appear 150 m out, drive
//! at 12 m/s to the stop line 10 m from the center, queue, and cross on a
//! reservation granted by the junction manager. The manager normally
//! serves a queue head every half second, round-robin over approaches.
//!
//! The attacker parks at (30, 30), outside the junction box, and claims a
//! stalled vehicle sits in the middle of it. The manager cannot take the
//! chance: it drops to an all-stop crawl, one grant every few seconds,
//! until the claim is resolved. Undefended it stays degraded forever.
//! Defended, the manager and nearby drivers examine the empty box, file
//! disagreeing stances, and the next block's verdict condemns the
//! attacker, at which point reservations resume.
//!
//! The manager is itself a registered participant: a fixed roadside
//! identity with long-standing stake, so its stance counts even when
//! every active car arrived too recently to carry voting weight.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use rand::Rng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Exp};

use crate::audit::AuditLog;
use crate::chain::id::{Point, RegionId, VehicleId};
use crate::chain::tx::Opinion;
use crate::consensus::sortition::derive_rng;
use crate::sim::chain_runtime::RegionRuntime;
use crate::sim::config::{AttackMode, ScenarioConfig};
use crate::sim::event::{Claim, EventKind, EventQueue, Message};
use crate::sim::metrics::MetricSeries;
use crate::sim::net;
use crate::sim::sensing::{
    physical_verify, with_sensing_error, GroundTruth, Sensing, SensingTolerances,
};
use crate::sim::stats;
use crate::sim::world::{chain_settings, draw_initial, stance_tx, Keyring, RunOutput};
use crate::time::{Millis, SimTime};

const REGION: RegionId = RegionId(0);
const SPAWN_DISTANCE_M: f64 = 150.0;
const STOP_LINE_M: f64 = 10.0;
const APPROACH_SPEED: f64 = 12.0;
/// A crossing covers stop line to 15 m past the center in two seconds.
const CROSSING_SECS: f64 = 2.0;
const CROSSING_EXIT_M: f64 = -15.0;
const QUEUE_SPACING_M: f64 = 5.0;
const GRANT_CHECK_EVERY_S: f64 = 0.25;
/// Reservation service: one grant per half second.
const RESERVATION_INTERVAL_S: f64 = 0.5;
/// All-stop service: every driver treats the junction as a four-way stop.
const ALL_STOP_INTERVAL_S: f64 = 3.5;
/// Where the forged claim puts the stalled vehicle.
const CLAIM_POS: Point = Point { x: 0.0, y: 0.0 };
const ATTACKER_POS: Point = Point { x: 30.0, y: 30.0 };
const ATTACKER_INDEX: u32 = 0;
/// The junction manager's roadside identity.
const MANAGER_INDEX: u32 = 50_000;
const FIRST_SPAWN_INDEX: u32 = 1000;

#[derive(Debug, Clone, Copy, PartialEq)]
enum Phase {
    Approaching,
    Queued,
    Crossing { granted: SimTime },
}

#[derive(Debug)]
struct Car {
    approach: u8,
    spawned: SimTime,
    phase: Phase,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Service {
    Reservation,
    AllStop,
}

struct IntersectionWorld {
    cfg: ScenarioConfig,
    keys: Keyring,
    master: [u8; 32],
    runtime: RegionRuntime,
    audit: AuditLog,
    metrics: MetricSeries,
    queue: EventQueue,
    cars: BTreeMap<VehicleId, Car>,
    lanes: [VecDeque<VehicleId>; 4],
    arrival_rngs: [ChaCha20Rng; 4],
    next_index: u32,
    attacker: Option<VehicleId>,
    manager: VehicleId,
    service: Service,
    round_robin: usize,
    last_grant: Option<SimTime>,
    condemned: BTreeSet<VehicleId>,
    defended_msgs: BTreeSet<u64>,
    sanction_time: Option<f64>,
    served_total: u64,
}

pub fn run(cfg: &ScenarioConfig) -> RunOutput {
    let master = Keyring::new(cfg.seed).master();
    let mut world = IntersectionWorld {
        cfg: cfg.clone(),
        keys: Keyring::new(cfg.seed),
        master,
        runtime: RegionRuntime::new(REGION, chain_settings(cfg)),
        audit: AuditLog::new(),
        metrics: MetricSeries::new(),
        queue: EventQueue::new(),
        cars: BTreeMap::new(),
        lanes: Default::default(),
        arrival_rngs: [
            derive_rng(master, "arr/0"),
            derive_rng(master, "arr/1"),
            derive_rng(master, "arr/2"),
            derive_rng(master, "arr/3"),
        ],
        next_index: FIRST_SPAWN_INDEX,
        attacker: None,
        manager: VehicleId::new(REGION, MANAGER_INDEX),
        service: Service::Reservation,
        round_robin: 0,
        last_grant: None,
        condemned: BTreeSet::new(),
        defended_msgs: BTreeSet::new(),
        sanction_time: None,
        served_total: 0,
    };
    world.setup();

    let end = SimTime::from_secs_f64(cfg.duration);
    while let Some(next) = world.queue.next_time() {
        if next > end {
            break;
        }
        let (t, kind) = world.queue.pop_due(next).expect("peeked entry is due");
        world.handle(t, kind);
    }

    world.finish()
}

impl IntersectionWorld {
    fn setup(&mut self) {
        let duration = self.cfg.duration;
        let mut k = 1u64;
        loop {
            let t = k as f64 * self.cfg.t_lat;
            if t > duration {
                break;
            }
            self.queue
                .push(SimTime::from_secs_f64(t), EventKind::RoundBoundary);
            k += 1;
        }
        let mut k = 1u64;
        loop {
            let t = k as f64 * self.cfg.sample_every;
            if t > duration {
                break;
            }
            self.queue
                .push(SimTime::from_secs_f64(t), EventKind::MetricSample);
            k += 1;
        }
        self.queue.push(
            SimTime::from_secs_f64(GRANT_CHECK_EVERY_S),
            EventKind::GrantCheck,
        );

        // The manager has run this junction for years; it carries the
        // stake of an ordinary long-time resident.
        let manager = self.manager;
        let key = self.keys.keypair(manager).public();
        self.runtime
            .register_vehicle(
                manager,
                key,
                self.cfg.initial_tp_mean.round() as i64,
                self.cfg.initial_pot_mean,
            )
            .expect("manager registers on an empty chain");

        if self.cfg.mode != AttackMode::NoAttack {
            let id = VehicleId::new(REGION, ATTACKER_INDEX);
            let key = self.keys.keypair(id).public();
            let banked = self.cfg.initial_pot_mean * self.cfg.attacker_pot_factor;
            self.runtime
                .register_vehicle(id, key, 0, banked)
                .expect("attacker registers on an empty chain");
            self.attacker = Some(id);
            let msg = Message {
                id: 0,
                sender: id,
                position: CLAIM_POS,
                speed: 0.0,
                sent_at: SimTime::from_secs_f64(self.cfg.attack_start),
                claim: Claim::Presence,
            };
            self.queue.push(
                SimTime::from_secs_f64(self.cfg.attack_start),
                EventKind::MessageBroadcast { message: msg },
            );
        }

        for approach in 0..4u8 {
            let gap = self.next_arrival_gap(approach);
            self.queue.push(
                SimTime::ZERO + gap,
                EventKind::VehicleArrival { stream: approach },
            );
        }
    }

    fn next_arrival_gap(&mut self, approach: u8) -> Millis {
        let gap = Exp::new(self.cfg.arrival_rate)
            .expect("validated arrival rate")
            .sample(&mut self.arrival_rngs[approach as usize]);
        Millis::from_secs_f64(gap.max(1e-3))
    }

    fn handle(&mut self, t: SimTime, kind: EventKind) {
        match kind {
            EventKind::VehicleArrival { stream } => self.on_arrival(t, stream),
            EventKind::ReachStopLine { vehicle } => {
                if let Some(car) = self.cars.get_mut(&vehicle) {
                    car.phase = Phase::Queued;
                    self.lanes[car.approach as usize].push_back(vehicle);
                }
            }
            EventKind::GrantCheck => self.on_grant_check(t),
            EventKind::Depart { vehicle } => self.on_depart(t, vehicle),
            EventKind::MessageBroadcast { message } => self.on_broadcast(t, &message),
            EventKind::MessageDelivery { receiver, message } => {
                self.on_delivery(t, receiver, &message)
            }
            EventKind::SubmitTx { tx } => self.runtime.submit_tx(*tx, t, &mut self.audit),
            EventKind::RoundBoundary => self.on_round(t),
            EventKind::MetricSample => self.on_sample(t),
            _ => {}
        }
    }

    fn on_arrival(&mut self, t: SimTime, approach: u8) {
        let gap = self.next_arrival_gap(approach);
        let next = t + gap;
        if next.as_secs_f64() <= self.cfg.duration {
            self.queue
                .push(next, EventKind::VehicleArrival { stream: approach });
        }

        let id = VehicleId::new(REGION, self.next_index);
        self.next_index += 1;
        let attrs = draw_initial(self.master, id, &self.cfg);
        let key = self.keys.keypair(id).public();
        self.runtime
            .register_vehicle(id, key, attrs.trust_points, attrs.pot_credits)
            .expect("spawn indices never repeat");
        self.cars.insert(
            id,
            Car {
                approach,
                spawned: t,
                phase: Phase::Approaching,
            },
        );
        let to_line = (SPAWN_DISTANCE_M - STOP_LINE_M) / APPROACH_SPEED;
        self.queue.push(
            t + Millis::from_secs_f64(to_line),
            EventKind::ReachStopLine { vehicle: id },
        );
    }

    fn grant_interval(&self) -> f64 {
        match self.service {
            Service::Reservation => RESERVATION_INTERVAL_S,
            Service::AllStop => ALL_STOP_INTERVAL_S,
        }
    }

    fn on_grant_check(&mut self, t: SimTime) {
        let next = t + Millis::from_secs_f64(GRANT_CHECK_EVERY_S);
        if next.as_secs_f64() <= self.cfg.duration {
            self.queue.push(next, EventKind::GrantCheck);
        }
        let ready = match self.last_grant {
            Some(last) => t.since(last).as_secs_f64() >= self.grant_interval(),
            None => true,
        };
        if !ready {
            return;
        }
        for i in 0..4 {
            let lane = (self.round_robin + i) % 4;
            if let Some(head) = self.lanes[lane].pop_front() {
                self.cars
                    .get_mut(&head)
                    .expect("queued car exists")
                    .phase = Phase::Crossing { granted: t };
                self.queue.push(
                    t + Millis::from_secs_f64(CROSSING_SECS),
                    EventKind::Depart { vehicle: head },
                );
                self.last_grant = Some(t);
                self.round_robin = (lane + 1) % 4;
                return;
            }
        }
    }

    fn on_depart(&mut self, t: SimTime, vehicle: VehicleId) {
        if let Some(car) = self.cars.remove(&vehicle) {
            let travel = t.since(car.spawned).as_secs_f64();
            self.metrics.push(t.as_secs_f64(), "travel_time", travel);
            self.served_total += 1;
        }
    }

    fn on_broadcast(&mut self, t: SimTime, msg: &Message) {
        let mut agents: Vec<(VehicleId, Point)> = self
            .cars
            .iter()
            .map(|(&id, car)| (id, self.position_of(id, car, t)))
            .collect();
        agents.push((self.manager, CLAIM_POS));
        for (receiver, at) in net::broadcast(
            msg,
            ATTACKER_POS,
            self.cfg.comm_range_m,
            &agents,
            t,
            self.cfg.tb(),
            self.master,
        ) {
            self.queue.push(
                at,
                EventKind::MessageDelivery {
                    receiver,
                    message: msg.clone(),
                },
            );
        }
    }

    fn on_delivery(&mut self, t: SimTime, receiver: VehicleId, msg: &Message) {
        if self.condemned.contains(&msg.sender) {
            return;
        }
        if receiver == self.manager {
            // A stalled-vehicle report about its own box: the manager must
            // assume the worst until the claim is settled.
            if self.service == Service::Reservation && self.cfg.mode != AttackMode::NoAttack {
                self.service = Service::AllStop;
                self.metrics
                    .push(t.as_secs_f64(), "service_degraded", 1.0);
            }
            if self.cfg.mode == AttackMode::AttackDefended {
                // Wired sensor array over the junction: no epsilon here.
                let verdict = physical_verify(
                    CLAIM_POS,
                    self.cfg.exam_range_m,
                    msg,
                    &self.ground_truth(receiver, t),
                    &self.tolerances(),
                );
                match verdict {
                    Sensing::Disagree => self.file_stance(t, receiver, msg, Opinion::Disagree),
                    Sensing::Agree => self.file_stance(t, receiver, msg, Opinion::Agree),
                    Sensing::NoOpinion => {}
                }
            }
            return;
        }
        let Some(car) = self.cars.get(&receiver) else {
            return;
        };
        if self.cfg.mode != AttackMode::AttackDefended {
            return;
        }
        let observer = self.position_of(receiver, car, t);
        if observer.distance(msg.position) > self.cfg.exam_range_m {
            return;
        }
        let truth = self.ground_truth(receiver, t);
        let verdict = physical_verify(observer, self.cfg.exam_range_m, msg, &truth, &self.tolerances());
        let mut rng = derive_rng(self.master, &format!("sense/{}/{}", msg.id, receiver));
        match with_sensing_error(verdict, self.cfg.epsilon, &mut rng) {
            Sensing::Disagree => self.file_stance(t, receiver, msg, Opinion::Disagree),
            Sensing::Agree => self.file_stance(t, receiver, msg, Opinion::Agree),
            Sensing::NoOpinion => {}
        }
    }

    fn file_stance(&mut self, t: SimTime, sender: VehicleId, msg: &Message, opinion: Opinion) {
        let jitter = if sender == self.manager {
            Millis(50)
        } else {
            Millis(
                derive_rng(self.master, &format!("jit/{}/{}", msg.id, sender))
                    .gen_range(1..=500u64),
            )
        };
        let at = t + jitter;
        let tx = stance_tx(
            &mut self.keys,
            sender,
            msg.sender,
            opinion,
            msg.sent_at,
            msg.position,
            at,
        );
        self.queue.push(at, EventKind::SubmitTx { tx: Box::new(tx) });

        if opinion == Opinion::Disagree && self.defended_msgs.insert(msg.id) {
            let agree_at = at + Millis(200);
            let tx = stance_tx(
                &mut self.keys,
                msg.sender,
                msg.sender,
                Opinion::Agree,
                msg.sent_at,
                msg.position,
                agree_at,
            );
            self.queue
                .push(agree_at, EventKind::SubmitTx { tx: Box::new(tx) });
        }
    }

    fn on_round(&mut self, t: SimTime) {
        let attacker = self.attacker;
        let report = self
            .runtime
            .advance_round(t, |v, _| Some(v) != attacker, &mut self.audit);
        for v in &report.sanctioned {
            self.condemned.insert(*v);
        }
        if let Some(a) = attacker {
            if self.condemned.contains(&a) && self.sanction_time.is_none() {
                self.sanction_time = Some(t.as_secs_f64());
                if self.service == Service::AllStop {
                    self.service = Service::Reservation;
                    self.metrics
                        .push(t.as_secs_f64(), "service_degraded", 0.0);
                }
            }
        }
        self.metrics.push(
            t.as_secs_f64(),
            "round_committed",
            if report.committed { 1.0 } else { 0.0 },
        );
    }

    fn on_sample(&mut self, t: SimTime) {
        let queued: usize = self.lanes.iter().map(|q| q.len()).sum();
        self.metrics
            .push(t.as_secs_f64(), "queue_total", queued as f64);
        self.metrics.push(
            t.as_secs_f64(),
            "all_stop",
            if self.service == Service::AllStop {
                1.0
            } else {
                0.0
            },
        );
    }

    fn tolerances(&self) -> SensingTolerances {
        SensingTolerances {
            position_m: self.cfg.pos_tolerance_m,
            speed_ms: self.cfg.speed_tolerance_ms,
        }
    }

    fn direction(approach: u8) -> (f64, f64) {
        match approach {
            0 => (1.0, 0.0),
            1 => (-1.0, 0.0),
            2 => (0.0, 1.0),
            _ => (0.0, -1.0),
        }
    }

    /// Analytic position: distance-to-center along the approach axis.
    /// Crossing vehicles pass straight through at 12.5 m/s, which keeps
    /// them from ever matching a claim of a stopped vehicle at the center.
    fn position_of(&self, id: VehicleId, car: &Car, t: SimTime) -> Point {
        let d = match car.phase {
            Phase::Approaching => {
                (SPAWN_DISTANCE_M - APPROACH_SPEED * t.since(car.spawned).as_secs_f64())
                    .max(STOP_LINE_M)
            }
            Phase::Queued => {
                let idx = self.lanes[car.approach as usize]
                    .iter()
                    .position(|&v| v == id)
                    .unwrap_or(0);
                STOP_LINE_M + QUEUE_SPACING_M * idx as f64
            }
            Phase::Crossing { granted } => {
                let f = (t.since(granted).as_secs_f64() / CROSSING_SECS).clamp(0.0, 1.0);
                STOP_LINE_M + (CROSSING_EXIT_M - STOP_LINE_M) * f
            }
        };
        let (dx, dy) = Self::direction(car.approach);
        Point::new(d * dx, d * dy)
    }

    fn speed_of(car: &Car) -> f64 {
        match car.phase {
            Phase::Approaching => APPROACH_SPEED,
            Phase::Queued => 0.0,
            Phase::Crossing { .. } => {
                (STOP_LINE_M - CROSSING_EXIT_M) / CROSSING_SECS
            }
        }
    }

    fn ground_truth(&self, observer: VehicleId, t: SimTime) -> GroundTruth {
        let mut actors: Vec<(Point, f64)> = self
            .cars
            .iter()
            .filter(|(&id, _)| id != observer)
            .map(|(&id, car)| (self.position_of(id, car, t), Self::speed_of(car)))
            .collect();
        if let Some(a) = self.attacker {
            if a != observer {
                actors.push((ATTACKER_POS, 0.0));
            }
        }
        GroundTruth {
            actors,
            hazards: Vec::new(),
        }
    }

    fn finish(mut self) -> RunOutput {
        let travel = self.metrics.series("travel_time");
        let mut summary = BTreeMap::new();
        if !travel.is_empty() {
            let values: Vec<f64> = travel.iter().map(|&(_, v)| v).collect();
            summary.insert("mean_travel_s".into(), stats::mean(&values));

            // Peak congestion: worst 20-second bucket of departures.
            let mut buckets: BTreeMap<u64, Vec<f64>> = BTreeMap::new();
            for &(at, v) in &travel {
                buckets.entry((at / 20.0) as u64).or_default().push(v);
            }
            let peak = buckets
                .values()
                .map(|b| stats::mean(b))
                .fold(f64::MIN, f64::max);
            summary.insert("peak_travel_s".into(), peak);

            // Trend of travel time against entry time; flat in a healthy
            // junction, rising while service stays degraded.
            let points: Vec<(f64, f64)> = travel.iter().map(|&(at, v)| (at - v, v)).collect();
            let (slope, p) = stats::ols_slope(&points);
            summary.insert("travel_trend_slope".into(), slope);
            summary.insert("travel_trend_p".into(), p);
        }
        if let Some(s) = self.sanction_time {
            summary.insert("sanction_time_s".into(), s);
            summary.insert("recovery_time_s".into(), s - self.cfg.attack_start);
        }
        summary.insert("vehicles_served".into(), self.served_total as f64);

        RunOutput {
            config: self.cfg.clone(),
            metrics: std::mem::take(&mut self.metrics),
            audit: std::mem::take(&mut self.audit),
            trust_ledger: self.runtime.trust.export(),
            pot_ledger: self.runtime.pot.export(),
            summary,
        }
    }
}
