//! Stake computation: each vehicle's consensus weight from its two scores.
//!
//! Raw stake is `pot/(1 + M_pot) + tp/(1 + M_tp)`, where the means run over
//! the region's population being staked. The value is floored at zero:
//! sanctioned vehicles (trust exactly -1) can push the sum negative, and a
//! negative sampling weight is meaningless, so they simply carry no weight.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::chain::id::{RegionId, VehicleId};

/// A region's stake snapshot for one round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StakeView {
    pub region: RegionId,
    pub stakes: BTreeMap<VehicleId, f64>,
    pub mean_pot: f64,
    pub mean_tp: f64,
}

impl StakeView {
    pub fn get(&self, vehicle: VehicleId) -> f64 {
        self.stakes.get(&vehicle).copied().unwrap_or(0.0)
    }

    pub fn total(&self) -> f64 {
        self.stakes.values().sum()
    }

    pub fn is_empty(&self) -> bool {
        self.stakes.is_empty()
    }
}

/// Evaluates the stake formula over a population. Both maps must cover the
/// same vehicles; missing entries in either default to zero so partial
/// views stay usable.
pub fn compute_stake(
    region: RegionId,
    trust_points: &BTreeMap<VehicleId, i64>,
    pot_credits: &BTreeMap<VehicleId, f64>,
) -> StakeView {
    let population: Vec<VehicleId> = trust_points
        .keys()
        .chain(pot_credits.keys())
        .copied()
        .collect::<std::collections::BTreeSet<_>>()
        .into_iter()
        .collect();
    if population.is_empty() {
        return StakeView {
            region,
            stakes: BTreeMap::new(),
            mean_pot: 0.0,
            mean_tp: 0.0,
        };
    }

    let n = population.len() as f64;
    let tp_of = |v: &VehicleId| trust_points.get(v).copied().unwrap_or(0) as f64;
    let pot_of = |v: &VehicleId| pot_credits.get(v).copied().unwrap_or(0.0);
    let mean_tp = population.iter().map(tp_of).sum::<f64>() / n;
    let mean_pot = population.iter().map(pot_of).sum::<f64>() / n;

    // A mean of exactly -1 zeroes the denominator (every vehicle
    // sanctioned); that term then contributes nothing rather than blowing
    // up, matching the floor's intent that sanctions remove weight.
    let term = |value: f64, mean: f64| {
        let denom = 1.0 + mean;
        if denom.abs() < 1e-12 {
            0.0
        } else {
            value / denom
        }
    };

    let stakes = population
        .iter()
        .map(|v| {
            let raw = term(pot_of(v), mean_pot) + term(tp_of(v), mean_tp);
            (*v, raw.max(0.0))
        })
        .collect();
    StakeView {
        region,
        stakes,
        mean_pot,
        mean_tp,
    }
}
