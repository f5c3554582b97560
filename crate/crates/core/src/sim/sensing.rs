//! The physical-verification oracle.
//!
//! On-board sensing is out of scope, so an omniscient oracle compares a
//! message's claim against simulation ground truth. Observers can only
//! judge what lies inside their examination range; honest observers err
//! at a configurable rate, dishonest ones answer whatever their script
//! says (the scenarios handle that part).

use rand::Rng;

use crate::chain::id::Point;

use super::event::{Claim, Message};

/// An observer's conclusion about a claim.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sensing {
    Agree,
    Disagree,
    NoOpinion,
}

#[derive(Debug, Clone, Copy)]
pub struct SensingTolerances {
    pub position_m: f64,
    pub speed_ms: f64,
}

impl Default for SensingTolerances {
    fn default() -> Self {
        SensingTolerances {
            position_m: 5.0,
            speed_ms: 2.0,
        }
    }
}

/// What is actually out there.
#[derive(Debug, Clone, Default)]
pub struct GroundTruth {
    /// Real positions and speeds of every physical vehicle.
    pub actors: Vec<(Point, f64)>,
    /// Real hazards, by route number and location.
    pub hazards: Vec<(u8, Point)>,
}

/// Compares a claim against ground truth from one observer's viewpoint.
/// The subject outside the examination range yields `NoOpinion`;
/// otherwise the claim must match some real actor or hazard within the
/// tolerances to earn an `Agree`.
pub fn physical_verify(
    observer_pos: Point,
    exam_range_m: f64,
    message: &Message,
    truth: &GroundTruth,
    tol: &SensingTolerances,
) -> Sensing {
    if observer_pos.distance(message.position) > exam_range_m {
        return Sensing::NoOpinion;
    }
    let confirmed = match message.claim {
        Claim::Presence => truth.actors.iter().any(|&(pos, speed)| {
            pos.distance(message.position) <= tol.position_m
                && (speed - message.speed).abs() <= tol.speed_ms
        }),
        Claim::Hazard { route } => truth
            .hazards
            .iter()
            .any(|&(r, pos)| r == route && pos.distance(message.position) <= tol.position_m),
    };
    if confirmed {
        Sensing::Agree
    } else {
        Sensing::Disagree
    }
}

/// Applies an honest observer's sensing error: with probability
/// `epsilon` a definite opinion flips. `NoOpinion` never flips; not
/// seeing the subject is not a sensing error.
pub fn with_sensing_error(opinion: Sensing, epsilon: f64, rng: &mut impl Rng) -> Sensing {
    match opinion {
        Sensing::NoOpinion => Sensing::NoOpinion,
        definite => {
            if epsilon > 0.0 && rng.gen_bool(epsilon) {
                match definite {
                    Sensing::Agree => Sensing::Disagree,
                    Sensing::Disagree => Sensing::Agree,
                    Sensing::NoOpinion => unreachable!(),
                }
            } else {
                definite
            }
        }
    }
}
