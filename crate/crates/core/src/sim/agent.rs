//! Vehicle agents and the car-following rule that moves them.

use crate::chain::id::{Point, RegionId, VehicleId};
use crate::time::SimTime;

/// How conservatively an agent drives while the trustworthiness of what
/// it heard is unresolved.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BehaviorMode {
    Normal,
    Cautious,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VehicleAgent {
    pub id: VehicleId,
    pub position: Point,
    pub speed: f64,
    pub honest: bool,
    /// Set iff this identity was fabricated by the named vehicle.
    pub sybil_parent: Option<VehicleId>,
    pub comm_range: f64,
    pub exam_range: f64,
    pub active_region: RegionId,
    pub behavior_mode: BehaviorMode,
    pub desired_speed: f64,
    pub spawned_at: SimTime,
    pub done: bool,
}

impl VehicleAgent {
    /// An agent can only examine what it can also hear, so the
    /// examination range may not exceed the communication range.
    pub fn new(
        id: VehicleId,
        region: RegionId,
        position: Point,
        desired_speed: f64,
        honest: bool,
        comm_range: f64,
        exam_range: f64,
        spawned_at: SimTime,
    ) -> Self {
        assert!(
            exam_range <= comm_range,
            "exam range {exam_range} exceeds comm range {comm_range}"
        );
        VehicleAgent {
            id,
            position,
            speed: desired_speed,
            honest,
            sybil_parent: None,
            comm_range,
            exam_range,
            active_region: region,
            behavior_mode: BehaviorMode::Normal,
            desired_speed,
            spawned_at,
            done: false,
        }
    }
}

/// Fabricates `count` fresh identities controlled by `parent`. The clones
/// sit at the parent's position, carry its ranges, and start with no
/// travel history of their own (their chain records are registered empty
/// by the caller).
pub fn inject_sybils(parent: &VehicleAgent, count: u32, first_index: u32, now: SimTime) -> Vec<VehicleAgent> {
    (0..count)
        .map(|i| {
            let mut agent = VehicleAgent::new(
                VehicleId::new(parent.id.permanent_region, first_index + i),
                parent.active_region,
                parent.position,
                parent.desired_speed,
                false,
                parent.comm_range,
                parent.exam_range,
                now,
            );
            agent.sybil_parent = Some(parent.id);
            agent
        })
        .collect()
}

/// Mobility tick length in seconds.
pub const TICK_S: f64 = 0.1;

/// Longitudinal driving limits.
#[derive(Debug, Clone, Copy)]
pub struct FollowParams {
    /// Peak acceleration, m/s².
    pub accel: f64,
    /// Peak braking, m/s².
    pub brake: f64,
    /// Desired time headway to the leader, seconds.
    pub headway_s: f64,
    /// Standstill gap, meters.
    pub min_gap_m: f64,
}

impl Default for FollowParams {
    fn default() -> Self {
        FollowParams {
            accel: 2.0,
            brake: 4.0,
            headway_s: 1.5,
            min_gap_m: 2.0,
        }
    }
}

/// One 1-D car-following step: accelerate toward `desired` on a free
/// road, brake when the gap to the leader falls under the time-headway
/// requirement. Cautious driving halves acceleration and doubles the
/// required gap. Returns the new speed; never negative.
pub fn follow_step(
    speed: f64,
    desired: f64,
    gap: Option<f64>,
    dt: f64,
    p: &FollowParams,
    cautious: bool,
) -> f64 {
    let accel = if cautious { p.accel / 2.0 } else { p.accel };
    let gap_scale = if cautious { 2.0 } else { 1.0 };
    if let Some(gap) = gap {
        let required = (p.min_gap_m + speed * p.headway_s) * gap_scale;
        if gap < required {
            return (speed - p.brake * dt).max(0.0);
        }
    }
    (speed + accel * dt).min(desired).max(0.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn agent() -> VehicleAgent {
        VehicleAgent::new(
            VehicleId::new(RegionId(0), 1),
            RegionId(0),
            Point::new(0.0, 0.0),
            16.0,
            true,
            300.0,
            100.0,
            SimTime::ZERO,
        )
    }

    #[test]
    #[should_panic(expected = "exam range")]
    fn exam_range_beyond_comm_range_is_rejected() {
        VehicleAgent::new(
            VehicleId::new(RegionId(0), 1),
            RegionId(0),
            Point::new(0.0, 0.0),
            16.0,
            true,
            100.0,
            200.0,
            SimTime::ZERO,
        );
    }

    #[test]
    fn sybils_are_fresh_marked_identities() {
        let parent = agent();
        let sybils = inject_sybils(&parent, 2, 900, SimTime(5000));
        assert_eq!(sybils.len(), 2);
        for (i, s) in sybils.iter().enumerate() {
            assert_eq!(s.sybil_parent, Some(parent.id));
            assert_eq!(s.id, VehicleId::new(RegionId(0), 900 + i as u32));
            assert!(!s.honest);
            assert_ne!(s.id, parent.id);
        }
    }

    #[test]
    fn free_road_accelerates_and_caps_at_desired() {
        let p = FollowParams::default();
        let mut v = 10.0;
        for _ in 0..100 {
            v = follow_step(v, 16.0, None, TICK_S, &p, false);
        }
        assert_eq!(v, 16.0);
    }

    #[test]
    fn short_gap_brakes_to_a_stop() {
        // A gap below the minimum never clears, so braking wins every tick.
        let p = FollowParams::default();
        let mut v = 16.0;
        for _ in 0..100 {
            v = follow_step(v, 16.0, Some(1.0), TICK_S, &p, false);
        }
        assert_eq!(v, 0.0);
    }

    #[test]
    fn stopped_lead_leaves_only_a_crawl() {
        // With the gap barely above the minimum the speed oscillates around
        // the point where the headway requirement bites; it must stay at
        // crawling pace, never rebuild to road speed.
        let p = FollowParams::default();
        let mut v = 16.0;
        for _ in 0..100 {
            v = follow_step(v, 16.0, Some(3.0), TICK_S, &p, false);
        }
        assert!(v < 1.0, "still moving at {v} m/s behind a stopped lead");
    }

    #[test]
    fn cautious_driving_brakes_where_normal_accelerates() {
        let p = FollowParams::default();
        // Gap of 30 m at 16 m/s: normal requirement 26 m, cautious 52 m.
        let normal = follow_step(16.0, 16.0, Some(30.0), TICK_S, &p, false);
        let cautious = follow_step(16.0, 16.0, Some(30.0), TICK_S, &p, true);
        assert!(normal >= 16.0);
        assert!(cautious < 16.0);
    }

    #[test]
    fn speed_never_goes_negative() {
        let p = FollowParams::default();
        let v = follow_step(0.1, 16.0, Some(0.0), TICK_S, &p, false);
        assert_eq!(v, 0.0);
    }
}
