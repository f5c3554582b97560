//! Highway on-ramp merge under a phantom-vehicle attack.
//!
//! Geometry: a main lane runs along y = 0 from x = -200 to x = +200, with
//! speeds measured over the zone x in [0, 200]. An on-ramp runs parallel
//! at y = -10 and joins the main lane at x = 0; ramp vehicles yield at the
//! merge point until the main lane has a safe window.
//!
//! The attacker parks off the roadway at (60, 40) and broadcasts a forged
//! presence claim: a stopped vehicle at (60, 0), in the middle of the
//! measurement zone. Receivers close enough to examine the spot see that
//! nothing is there; receivers further away must decide what to do with
//! an unverifiable warning. Undefended they treat it as a real stopped
//! car and queue up behind empty asphalt. Defended they merely slow down
//! and file disagreeing stances, and traffic recovers once the voting
//! contract condemns the attacker.

use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Exp};

use crate::audit::AuditLog;
use crate::chain::id::{Point, RegionId, VehicleId};
use crate::chain::tx::Opinion;
use crate::consensus::sortition::derive_rng;
use crate::sim::agent::{follow_step, FollowParams, VehicleAgent, TICK_S};
use crate::sim::chain_runtime::RegionRuntime;
use crate::sim::config::{AttackMode, ScenarioConfig};
use crate::sim::event::{Claim, EventKind, EventQueue, Message};
use crate::sim::metrics::MetricSeries;
use crate::sim::net;
use crate::sim::sensing::{
    physical_verify, with_sensing_error, GroundTruth, Sensing, SensingTolerances,
};
use crate::sim::world::{chain_settings, draw_initial, stance_tx, Keyring, RunOutput};
use crate::time::{Millis, SimTime};

const REGION: RegionId = RegionId(0);
const LANE_START: f64 = -200.0;
const LANE_END: f64 = 200.0;
const ZONE: (f64, f64) = (0.0, 200.0);
const RAMP_Y: f64 = -10.0;
/// Ramp coordinate at which the head vehicle may take a merge window.
const MERGE_READY_R: f64 = -5.0;
const MERGE_WINDOW_AHEAD_M: f64 = 10.0;
const MERGE_WINDOW_BEHIND_M: f64 = 30.0;
/// A vehicle may not spawn while another sits within this much of the entry.
const ENTRY_CLEAR_M: f64 = 10.0;
/// Where the forged claim puts the phantom vehicle.
const PHANTOM_POS: Point = Point { x: 60.0, y: 0.0 };
/// Where the attacker actually sits: off the road, and far enough from its
/// own claim that examiners never mistake the parked attacker for the
/// phantom.
const ATTACKER_POS: Point = Point { x: 60.0, y: 40.0 };
/// Speed cap adopted by drivers who believe the hazard but keep driving.
const CAUTIOUS_SPEED: f64 = 10.0;
const REBROADCAST_EVERY_S: f64 = 5.0;
/// Identity index the attacker registers under.
const ATTACKER_INDEX: u32 = 0;
/// First index used for honest spawns.
const FIRST_SPAWN_INDEX: u32 = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Lane {
    Main,
    Ramp,
}

#[derive(Debug)]
struct Car {
    agent: VehicleAgent,
    lane: Lane,
    /// Lane coordinate: main-lane x, or ramp distance (negative before the
    /// merge point at 0).
    s: f64,
}

struct MergeWorld {
    cfg: ScenarioConfig,
    keys: Keyring,
    master: [u8; 32],
    runtime: RegionRuntime,
    audit: AuditLog,
    metrics: MetricSeries,
    queue: EventQueue,
    cars: BTreeMap<VehicleId, Car>,
    /// Arrivals waiting for the entry to clear, per stream.
    pending_spawns: [u32; 2],
    arrival_rngs: [ChaCha20Rng; 2],
    next_index: u32,
    next_msg_id: u64,
    attacker: Option<VehicleId>,
    /// Vehicles the ledger has condemned; their messages are ignored.
    condemned: BTreeSet<VehicleId>,
    /// receiver -> sender whose unverifiable claim the receiver accepted.
    believers: BTreeMap<VehicleId, VehicleId>,
    /// (receiver, sender) pairs where the receiver has already rejected a
    /// claim; rebroadcasts do not change their mind.
    disbelief: BTreeSet<(VehicleId, VehicleId)>,
    /// Message ids the attacker has already defended with a self-stance.
    defended_msgs: BTreeSet<u64>,
    sanction_time: Option<f64>,
    spawned_total: u64,
}

pub fn run(cfg: &ScenarioConfig) -> RunOutput {
    let master = Keyring::new(cfg.seed).master();
    let mut world = MergeWorld {
        cfg: cfg.clone(),
        keys: Keyring::new(cfg.seed),
        master,
        runtime: RegionRuntime::new(REGION, chain_settings(cfg)),
        audit: AuditLog::new(),
        metrics: MetricSeries::new(),
        queue: EventQueue::new(),
        cars: BTreeMap::new(),
        pending_spawns: [0, 0],
        arrival_rngs: [
            derive_rng(master, "arr/0"),
            derive_rng(master, "arr/1"),
        ],
        next_index: FIRST_SPAWN_INDEX,
        next_msg_id: 0,
        attacker: None,
        condemned: BTreeSet::new(),
        believers: BTreeMap::new(),
        disbelief: BTreeSet::new(),
        defended_msgs: BTreeSet::new(),
        sanction_time: None,
        spawned_total: 0,
    };
    world.setup();

    let end = SimTime::from_secs_f64(cfg.duration);
    let tick = Millis::from_secs_f64(TICK_S);
    let mut now = SimTime::ZERO;
    loop {
        while let Some((t, kind)) = world.queue.pop_due(now) {
            world.handle(t, kind);
        }
        if now >= end {
            break;
        }
        world.try_spawns(now);
        world.step_traffic();
        now += tick;
    }

    world.finish()
}

impl MergeWorld {
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
            let t = k as f64 * self.cfg.pot.t_pot.as_secs_f64();
            if t > duration {
                break;
            }
            self.queue.push(
                SimTime::from_secs_f64(t),
                EventKind::PotPeriodBoundary { period: k - 1 },
            );
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

        if self.cfg.mode != AttackMode::NoAttack {
            let id = VehicleId::new(REGION, ATTACKER_INDEX);
            let key = self.keys.keypair(id).public();
            let banked = self.cfg.initial_pot_mean * self.cfg.attacker_pot_factor;
            self.runtime
                .register_vehicle(id, key, 0, banked)
                .expect("attacker registers on an empty chain");
            self.attacker = Some(id);
            self.queue.push(
                SimTime::from_secs_f64(self.cfg.attack_start),
                EventKind::AttackTrigger,
            );
        }

        for stream in 0..2u8 {
            let first = self.next_arrival_gap(stream);
            self.queue
                .push(SimTime::ZERO + first, EventKind::VehicleArrival { stream });
        }
    }

    /// Stream 0 feeds the main lane at the configured rate; the ramp
    /// carries half as much traffic.
    fn next_arrival_gap(&mut self, stream: u8) -> Millis {
        let rate = match stream {
            0 => self.cfg.arrival_rate,
            _ => self.cfg.arrival_rate * 0.5,
        };
        let gap = Exp::new(rate)
            .expect("validated arrival rate")
            .sample(&mut self.arrival_rngs[stream as usize]);
        Millis::from_secs_f64(gap.max(1e-3))
    }

    fn handle(&mut self, t: SimTime, kind: EventKind) {
        match kind {
            EventKind::VehicleArrival { stream } => {
                self.pending_spawns[stream as usize] += 1;
                let gap = self.next_arrival_gap(stream);
                let next = t + gap;
                if next.as_secs_f64() <= self.cfg.duration {
                    self.queue.push(next, EventKind::VehicleArrival { stream });
                }
            }
            EventKind::AttackTrigger => self.on_attack(t),
            EventKind::MessageDelivery { receiver, message } => {
                self.on_delivery(t, receiver, &message)
            }
            EventKind::SubmitTx { tx } => self.runtime.submit_tx(*tx, t, &mut self.audit),
            EventKind::RoundBoundary => self.on_round(t),
            EventKind::PotPeriodBoundary { period } => self.on_period(t, period),
            EventKind::MetricSample => self.on_sample(t),
            _ => {}
        }
    }

    fn on_attack(&mut self, t: SimTime) {
        let Some(attacker) = self.attacker else {
            return;
        };
        if self.condemned.contains(&attacker) {
            return;
        }
        let msg = Message {
            id: self.next_msg_id,
            sender: attacker,
            position: PHANTOM_POS,
            speed: 0.0,
            sent_at: t,
            claim: Claim::Presence,
        };
        self.next_msg_id += 1;
        let agents: Vec<(VehicleId, Point)> = self
            .cars
            .values()
            .map(|c| (c.agent.id, c.agent.position))
            .collect();
        for (receiver, at) in net::broadcast(
            &msg,
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
        let next = t + Millis::from_secs_f64(REBROADCAST_EVERY_S);
        if next.as_secs_f64() <= self.cfg.duration {
            self.queue.push(next, EventKind::AttackTrigger);
        }
    }

    fn on_delivery(&mut self, t: SimTime, receiver: VehicleId, msg: &Message) {
        let Some(car) = self.cars.get(&receiver) else {
            return;
        };
        if self.condemned.contains(&msg.sender) || self.disbelief.contains(&(receiver, msg.sender))
        {
            return;
        }
        let observer = car.agent.position;
        let in_exam = observer.distance(msg.position) <= self.cfg.exam_range_m;
        match self.cfg.mode {
            AttackMode::NoAttack => {}
            AttackMode::AttackUndefended => {
                // No protocol to appeal to: drivers who can see the spot
                // know better, everyone else takes the warning seriously.
                if in_exam {
                    self.disbelief.insert((receiver, msg.sender));
                } else {
                    self.believers.insert(receiver, msg.sender);
                }
            }
            AttackMode::AttackDefended => {
                if !in_exam {
                    self.believers.insert(receiver, msg.sender);
                    return;
                }
                let truth = self.ground_truth(receiver);
                let verdict = physical_verify(
                    observer,
                    self.cfg.exam_range_m,
                    msg,
                    &truth,
                    &self.tolerances(),
                );
                let mut rng = derive_rng(self.master, &format!("sense/{}/{}", msg.id, receiver));
                match with_sensing_error(verdict, self.cfg.epsilon, &mut rng) {
                    Sensing::Disagree => {
                        self.disbelief.insert((receiver, msg.sender));
                        self.believers.remove(&receiver);
                        self.file_stance(t, receiver, msg, Opinion::Disagree);
                    }
                    Sensing::Agree => {
                        self.believers.insert(receiver, msg.sender);
                        self.file_stance(t, receiver, msg, Opinion::Agree);
                    }
                    Sensing::NoOpinion => {}
                }
            }
        }
    }

    /// Schedules a signed stance shortly after the examination, plus the
    /// attacker's one self-defending agreement per message: without it the
    /// vote would close one-sided and the verdict would say nothing about
    /// the attacker itself.
    fn file_stance(&mut self, t: SimTime, sender: VehicleId, msg: &Message, opinion: Opinion) {
        let jitter = Millis(
            derive_rng(self.master, &format!("jit/{}/{}", msg.id, sender)).gen_range(1..=500u64),
        );
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
            }
        }
        // Belief in a condemned sender's claims dissolves immediately.
        let condemned = &self.condemned;
        self.believers.retain(|_, sender| !condemned.contains(sender));
        self.metrics.push(
            t.as_secs_f64(),
            "round_committed",
            if report.committed { 1.0 } else { 0.0 },
        );
    }

    fn on_period(&mut self, t: SimTime, period: u64) {
        let outcome = self.runtime.period_boundary(period, t, &mut self.audit);
        let expected: BTreeSet<RegionId> = [REGION].into_iter().collect();
        let merged = crate::pot::merge_final_blocks(period, &[outcome.pre_block], &expected);
        self.runtime.finalize_period(&merged.finals[&REGION], t);
    }

    fn on_sample(&mut self, t: SimTime) {
        let speeds: Vec<f64> = self
            .cars
            .values()
            .filter(|c| c.lane == Lane::Main && c.s >= ZONE.0 && c.s <= ZONE.1)
            .map(|c| c.agent.speed)
            .collect();
        if !speeds.is_empty() {
            let mean = speeds.iter().sum::<f64>() / speeds.len() as f64;
            self.metrics.push(t.as_secs_f64(), "zone_mean_speed", mean);
        }
        self.metrics
            .push(t.as_secs_f64(), "active_vehicles", self.cars.len() as f64);
    }

    fn tolerances(&self) -> SensingTolerances {
        SensingTolerances {
            position_m: self.cfg.pos_tolerance_m,
            speed_ms: self.cfg.speed_tolerance_ms,
        }
    }

    /// What `observer` can actually sense: every other physical vehicle,
    /// including the attacker parked off-road. The observer itself is not
    /// an actor in its own ground truth, otherwise a driver stopped near
    /// the claimed spot would mistake itself for the phantom.
    fn ground_truth(&self, observer: VehicleId) -> GroundTruth {
        let mut actors: Vec<(Point, f64)> = self
            .cars
            .values()
            .filter(|c| c.agent.id != observer)
            .map(|c| (c.agent.position, c.agent.speed))
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

    fn try_spawns(&mut self, now: SimTime) {
        for stream in 0..2usize {
            while self.pending_spawns[stream] > 0 {
                let clear = self
                    .cars
                    .values()
                    .filter(|c| {
                        c.lane
                            == if stream == 0 {
                                Lane::Main
                            } else {
                                Lane::Ramp
                            }
                    })
                    .all(|c| c.s > LANE_START + ENTRY_CLEAR_M);
                if !clear {
                    break;
                }
                self.spawn(now, stream);
                self.pending_spawns[stream] -= 1;
            }
        }
    }

    fn spawn(&mut self, now: SimTime, stream: usize) {
        let id = VehicleId::new(REGION, self.next_index);
        self.next_index += 1;
        let attrs = draw_initial(self.master, id, &self.cfg);
        let key = self.keys.keypair(id).public();
        self.runtime
            .register_vehicle(id, key, attrs.trust_points, attrs.pot_credits)
            .expect("spawn indices never repeat");
        let (lane, position) = if stream == 0 {
            (Lane::Main, Point::new(LANE_START, 0.0))
        } else {
            (Lane::Ramp, Point::new(LANE_START, RAMP_Y))
        };
        let agent = VehicleAgent::new(
            id,
            REGION,
            position,
            attrs.desired_speed,
            true,
            self.cfg.comm_range_m,
            self.cfg.exam_range_m,
            now,
        );
        self.cars.insert(
            id,
            Car {
                agent,
                lane,
                s: LANE_START,
            },
        );
        self.spawned_total += 1;
    }

    fn is_cautious(&self, id: VehicleId) -> bool {
        self.cfg.mode == AttackMode::AttackDefended && self.believers.contains_key(&id)
    }

    /// Believers in the undefended world treat the phantom as a real
    /// stopped vehicle; only they get a gap against it.
    fn phantom_is_obstacle_for(&self, id: VehicleId) -> bool {
        self.cfg.mode == AttackMode::AttackUndefended && self.believers.contains_key(&id)
    }

    fn step_traffic(&mut self) {
        self.attempt_merge();
        self.advance_main();
        self.advance_ramp();
        self.cars.retain(|_, c| !c.agent.done);
    }

    /// The ramp head may enter the main lane once it is at the merge point
    /// and no main-lane vehicle is inside its safety window. Cautious
    /// drivers demand twice the window behind them.
    fn attempt_merge(&mut self) {
        let Some(head) = self
            .cars
            .values()
            .filter(|c| c.lane == Lane::Ramp)
            .max_by(|a, b| a.s.partial_cmp(&b.s).unwrap().then(b.agent.id.cmp(&a.agent.id)))
            .map(|c| c.agent.id)
        else {
            return;
        };
        let r = self.cars[&head].s;
        if r < MERGE_READY_R {
            return;
        }
        let behind = if self.is_cautious(head) {
            MERGE_WINDOW_BEHIND_M * 2.0
        } else {
            MERGE_WINDOW_BEHIND_M
        };
        let window_clear = !self.cars.values().any(|c| {
            c.lane == Lane::Main && c.s >= -behind && c.s <= MERGE_WINDOW_AHEAD_M
        });
        if window_clear {
            let car = self.cars.get_mut(&head).expect("head exists");
            car.lane = Lane::Main;
            car.s = 0.0;
            car.agent.position = Point::new(0.0, 0.0);
        }
    }

    fn advance_main(&mut self) {
        let params = FollowParams::default();
        let mut order: Vec<VehicleId> = self
            .cars
            .values()
            .filter(|c| c.lane == Lane::Main)
            .map(|c| c.agent.id)
            .collect();
        order.sort_by(|a, b| {
            let sa = self.cars[a].s;
            let sb = self.cars[b].s;
            sb.partial_cmp(&sa).unwrap().then(a.cmp(b))
        });

        let mut pred: Option<f64> = None;
        for id in order {
            let cautious = self.is_cautious(id);
            let phantom = self.phantom_is_obstacle_for(id);
            let car = self.cars.get_mut(&id).expect("ordered id exists");
            let s = car.s;
            let mut gap = pred.map(|p| p - s);
            if phantom && s < PHANTOM_POS.x {
                let to_phantom = PHANTOM_POS.x - s;
                gap = Some(gap.map_or(to_phantom, |g| g.min(to_phantom)));
            }
            let desired = if cautious {
                car.agent.desired_speed.min(CAUTIOUS_SPEED)
            } else {
                car.agent.desired_speed
            };
            let speed = follow_step(car.agent.speed, desired, gap, TICK_S, &params, cautious);
            let mut new_s = s + speed * TICK_S;
            if let Some(p) = pred {
                new_s = new_s.min((p - params.min_gap_m).max(s));
            }
            if phantom && s < PHANTOM_POS.x {
                new_s = new_s.min((PHANTOM_POS.x - params.min_gap_m).max(s));
            }
            car.agent.speed = (new_s - s) / TICK_S;
            car.s = new_s;
            car.agent.position = Point::new(new_s, 0.0);
            if new_s > LANE_END {
                car.agent.done = true;
            }
            pred = Some(new_s);
        }
    }

    fn advance_ramp(&mut self) {
        let params = FollowParams::default();
        let mut order: Vec<VehicleId> = self
            .cars
            .values()
            .filter(|c| c.lane == Lane::Ramp)
            .map(|c| c.agent.id)
            .collect();
        order.sort_by(|a, b| {
            let sa = self.cars[a].s;
            let sb = self.cars[b].s;
            sb.partial_cmp(&sa).unwrap().then(a.cmp(b))
        });

        let mut pred: Option<f64> = None;
        for id in order {
            let cautious = self.is_cautious(id);
            let car = self.cars.get_mut(&id).expect("ordered id exists");
            let s = car.s;
            // The head always yields toward the merge point; followers
            // keep their headway to the car ahead.
            let gap = match pred {
                Some(p) => Some(p - s),
                None => Some(0.0 - s),
            };
            let desired = if cautious {
                car.agent.desired_speed.min(CAUTIOUS_SPEED)
            } else {
                car.agent.desired_speed
            };
            let speed = follow_step(car.agent.speed, desired, gap, TICK_S, &params, cautious);
            let mut new_s = s + speed * TICK_S;
            let cap = match pred {
                Some(p) => p - params.min_gap_m,
                None => -0.5,
            };
            new_s = new_s.min(cap.max(s));
            car.agent.speed = (new_s - s) / TICK_S;
            car.s = new_s;
            car.agent.position = Point::new(new_s, RAMP_Y);
            pred = Some(new_s);
        }
    }

    fn finish(mut self) -> RunOutput {
        let split = self.cfg.attack_start;
        let pre = self
            .metrics
            .values_between("zone_mean_speed", 0.0, split);
        let post = self
            .metrics
            .values_between("zone_mean_speed", split + 1e-9, f64::INFINITY);
        let pre_mean = crate::sim::stats::mean(&pre);
        let post_mean = crate::sim::stats::mean(&post);

        let mut summary = BTreeMap::new();
        summary.insert("mean_zone_speed_pre_attack".into(), pre_mean);
        summary.insert("mean_zone_speed_post_attack".into(), post_mean);
        if !post.is_empty() && pre_mean > 0.0 {
            let recovered = post.iter().filter(|&&v| v >= 0.8 * pre_mean).count();
            summary.insert(
                "recovery_fraction".into(),
                recovered as f64 / post.len() as f64,
            );
        }
        if let Some(t) = self.sanction_time {
            summary.insert("sanction_time_s".into(), t);
        }
        summary.insert("vehicles_spawned".into(), self.spawned_total as f64);
        summary.insert("vehicles_active_at_end".into(), self.cars.len() as f64);

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
