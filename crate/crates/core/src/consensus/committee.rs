//! Committee selection and sizing.
//!
//! Each round derives a seed from (region, round, previous block hash),
//! then draws an ordered proposer list and a verifier set by stake-weighted
//! sortition on separate streams. Sizing finds the smallest committee whose
//! probability of seating a one-third adversarial bloc stays below the
//! target failure probability, by exact binomial tail.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use statrs::distribution::{Binomial, DiscreteCDF};
use thiserror::Error;

use crate::chain::crypto::{Digest, Hasher};
use crate::chain::id::{RegionId, VehicleId};

use super::sortition::{derive_rng, weighted_sample_without_replacement};
use super::stake::StakeView;

/// One round's selected committee.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Committee {
    pub round: u64,
    /// Candidate block producers, in selection (priority) order.
    pub proposers: Vec<VehicleId>,
    pub verifiers: BTreeSet<VehicleId>,
    pub seed: [u8; 32],
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum CommitteeError {
    #[error("no vehicle holds positive stake; the round is skipped")]
    AllZeroStakes,
}

/// The round's selection seed: digest of (region, round, previous hash).
pub fn round_seed(region: RegionId, round: u64, prev_hash: &Digest) -> [u8; 32] {
    let mut h = Hasher::new("dualchain/seed");
    h.update(&region);
    h.update(&round);
    h.update(prev_hash);
    h.finish().0
}

/// Draws the round's committee from a stake view. Proposers and verifiers
/// come from independent labeled streams of the same seed, so the two
/// groups may overlap, but within each the draw is without replacement.
pub fn select_committee(
    view: &StakeView,
    round: u64,
    seed: [u8; 32],
    eta_p: usize,
    eta_v: usize,
) -> Result<Committee, CommitteeError> {
    if view.stakes.values().all(|&w| w <= 0.0) {
        return Err(CommitteeError::AllZeroStakes);
    }
    let mut prop_rng = derive_rng(seed, "prop");
    let proposers = weighted_sample_without_replacement(&mut prop_rng, &view.stakes, eta_p);
    let mut verf_rng = derive_rng(seed, "verf");
    let verifiers = weighted_sample_without_replacement(&mut verf_rng, &view.stakes, eta_v)
        .into_iter()
        .collect();
    Ok(Committee {
        round,
        proposers,
        verifiers,
        seed,
    })
}

/// Result of committee sizing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CommitteeSize {
    /// Minimal committee size meeting the failure bound.
    Feasible(u64),
    /// No finite committee suffices (honest fraction at or below 2/3), or
    /// the required size exceeds any practical bound.
    Infeasible,
}

/// Upper bound on the sizing scan. For honest fractions meaningfully above
/// 2/3 the minimal size is tiny compared to this; a requirement beyond it
/// is reported infeasible rather than searched forever.
const MAX_COMMITTEE_SCAN: u64 = 100_000;

/// Smallest committee size `tau` such that the probability of drawing at
/// least `ceil(tau/3)` adversarial members (each independently adversarial
/// with probability `1 - h`) stays below `f`.
///
/// At `h <= 2/3` the adversarial expectation meets the one-third quota, so
/// the tail cannot vanish and the requirement is infeasible outright.
pub fn committee_size(h: f64, f: f64) -> CommitteeSize {
    assert!(h > 0.0 && h <= 1.0, "honest fraction must be in (0, 1]");
    assert!(f > 0.0 && f < 1.0, "failure probability must be in (0, 1)");
    if h <= 2.0 / 3.0 {
        return CommitteeSize::Infeasible;
    }
    let p_bad = 1.0 - h;
    for tau in 1..=MAX_COMMITTEE_SCAN {
        let quota = tau.div_ceil(3);
        let tail = if p_bad == 0.0 {
            0.0
        } else {
            // P[X >= quota] with X ~ Binomial(tau, p_bad).
            Binomial::new(p_bad, tau).unwrap().sf(quota - 1)
        };
        if tail < f {
            return CommitteeSize::Feasible(tau);
        }
    }
    CommitteeSize::Infeasible
}
