//! Regional message propagation.
//!
//! Delivery is reliable and bounded: every agent inside the sender's
//! communication range receives the message within the regional bound,
//! with a per-receiver delay drawn deterministically from the run seed so
//! replays schedule byte-identical deliveries.

use rand::Rng;

use crate::chain::id::{Point, VehicleId};
use crate::consensus::sortition::derive_rng;
use crate::time::{Millis, SimTime};

use super::event::Message;

/// Schedules the delivery of `message` to every listed agent within
/// `comm_range_m` of the sender's true position. Returns (receiver,
/// delivery time) pairs; each delay lies in (0, tb] milliseconds and
/// depends only on (seed, message id, receiver), not on iteration order.
pub fn broadcast(
    message: &Message,
    sender_pos: Point,
    comm_range_m: f64,
    agents: &[(VehicleId, Point)],
    now: SimTime,
    tb: Millis,
    seed: [u8; 32],
) -> Vec<(VehicleId, SimTime)> {
    let mut deliveries = Vec::new();
    for &(id, pos) in agents {
        if id == message.sender || sender_pos.distance(pos) > comm_range_m {
            continue;
        }
        let mut rng = derive_rng(seed, &format!("bcast/{}/{}", message.id, id));
        let delay = Millis(rng.gen_range(1..=tb.as_millis()));
        deliveries.push((id, now + delay));
    }
    deliveries
}
