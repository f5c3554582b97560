//! The slow chain's credit model: per-period message-count reports, travel
//! credits, discounted accumulation, regional pre-blocks, and the
//! cross-region merge that turns them into per-region final credit sets.
//!
//! Everything here is pure data-in/data-out; the simulator owns timing and
//! consensus, the ledger owns persistence.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chain::id::{RegionId, VehicleId};
use crate::time::Millis;

/// Tunables for the credit model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PotParams {
    /// Reporting period length.
    pub t_pot: Millis,
    /// How many most recent periods enter the discounted sum.
    pub n_sum: u32,
    /// Per-period discount base, in (0, 1].
    pub alpha: f64,
    /// Beacon rate used to bound plausible per-vehicle counts.
    pub f_m_hz: f64,
    /// Per-report entry cap; overflow keeps the highest counts.
    pub max_entries: usize,
    /// Relative slack before a count mismatch becomes a dispute.
    pub dispute_tolerance: f64,
}

impl Default for PotParams {
    fn default() -> Self {
        PotParams {
            t_pot: Millis::from_millis(24 * 60 * 60 * 1000),
            n_sum: 100,
            alpha: 0.9,
            f_m_hz: 10.0,
            max_entries: 500,
            dispute_tolerance: 0.05,
        }
    }
}

impl PotParams {
    /// Largest count one vehicle can plausibly produce in a period: the
    /// whole broadcast budget f_m · T_pot.
    pub fn count_budget(&self) -> u64 {
        (self.f_m_hz * self.t_pot.as_secs_f64()).floor() as u64
    }
}

/// One vehicle's message-count report for one period.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PotReport {
    pub reporter: VehicleId,
    pub period_index: u64,
    /// Message counts per observed sender.
    pub counts: BTreeMap<VehicleId, u64>,
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum PotError {
    #[error("reporter {0} counts its own messages")]
    SelfCount(VehicleId),
    #[error("count {count} for {vehicle} exceeds the broadcast budget {budget}")]
    CountBudget {
        vehicle: VehicleId,
        count: u64,
        budget: u64,
    },
}

impl PotReport {
    /// Shape checks: no self-crediting, and no count beyond what the beacon
    /// rate allows in one period.
    pub fn validate(&self, params: &PotParams) -> Result<(), PotError> {
        if self.counts.contains_key(&self.reporter) {
            return Err(PotError::SelfCount(self.reporter));
        }
        let budget = params.count_budget();
        for (&vehicle, &count) in &self.counts {
            if count > budget {
                return Err(PotError::CountBudget {
                    vehicle,
                    count,
                    budget,
                });
            }
        }
        Ok(())
    }
}

/// Keeps the `max_entries` highest counts, breaking ties toward the lower
/// vehicle id so the cap is deterministic.
pub fn cap_to_highest(
    counts: BTreeMap<VehicleId, u64>,
    max_entries: usize,
) -> BTreeMap<VehicleId, u64> {
    if counts.len() <= max_entries {
        return counts;
    }
    let mut entries: Vec<(VehicleId, u64)> = counts.into_iter().collect();
    entries.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
    entries.truncate(max_entries);
    entries.into_iter().collect()
}

/// Per-period credit totals plus any reporters whose conflicting duplicate
/// reports had to be dropped.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PeriodCredits {
    pub credits: BTreeMap<VehicleId, u64>,
    pub conflicting_reporters: Vec<VehicleId>,
}

/// Sums each vehicle's counts over all reporters for a period. A reporter's
/// first report wins; an exact duplicate is ignored silently, a conflicting
/// one is ignored and flagged for dispute.
pub fn compute_period_credits(reports: &[PotReport]) -> PeriodCredits {
    let mut first: BTreeMap<(VehicleId, u64), &PotReport> = BTreeMap::new();
    let mut out = PeriodCredits::default();
    for report in reports {
        match first.get(&(report.reporter, report.period_index)) {
            None => {
                first.insert((report.reporter, report.period_index), report);
            }
            Some(kept) => {
                if kept.counts != report.counts {
                    out.conflicting_reporters.push(report.reporter);
                }
                continue;
            }
        }
        for (&vehicle, &count) in &report.counts {
            *out.credits.entry(vehicle).or_insert(0) += count;
        }
    }
    out
}

/// Discounted accumulation over the trailing window: the sum of
/// `alpha^k · credits[at_period − k]` for k in 0..n_sum, with missing
/// periods contributing zero.
pub fn discounted_accumulation(
    periods: &BTreeMap<u64, u64>,
    at_period: u64,
    alpha: f64,
    n_sum: u32,
) -> f64 {
    assert!(alpha > 0.0 && alpha <= 1.0, "alpha must be in (0, 1]");
    assert!(n_sum >= 1, "the window must cover at least one period");
    let mut total = 0.0;
    let mut weight = 1.0;
    for k in 0..n_sum as u64 {
        let Some(period) = at_period.checked_sub(k) else {
            break;
        };
        if let Some(&credits) = periods.get(&period) {
            total += weight * credits as f64;
        }
        weight *= alpha;
    }
    total
}

/// One vehicle's credit history and its current discounted total.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PotRecord {
    pub vehicle: VehicleId,
    pub credits_by_period: BTreeMap<u64, u64>,
    pub accumulated: f64,
}

impl PotRecord {
    pub fn new(vehicle: VehicleId) -> Self {
        PotRecord {
            vehicle,
            credits_by_period: BTreeMap::new(),
            accumulated: 0.0,
        }
    }

    /// Records one period's credits and refreshes the discounted total at
    /// the newest period on record.
    pub fn accumulate(&mut self, period: u64, credits: u64, alpha: f64, n_sum: u32) {
        self.credits_by_period.insert(period, credits);
        let latest = *self.credits_by_period.keys().next_back().unwrap();
        self.accumulated = discounted_accumulation(&self.credits_by_period, latest, alpha, n_sum);
    }
}

/// A region's pre-consensus credit tally for one period. Entries for
/// vehicles whose permanent region is elsewhere are implicitly tagged for
/// export; `exports` groups them by destination.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreBlock {
    pub region: RegionId,
    pub period_index: u64,
    pub partial_credits: BTreeMap<VehicleId, u64>,
}

impl PreBlock {
    /// Foreign entries grouped by the region that must receive them.
    pub fn exports(&self) -> BTreeMap<RegionId, BTreeMap<VehicleId, u64>> {
        let mut out: BTreeMap<RegionId, BTreeMap<VehicleId, u64>> = BTreeMap::new();
        for (&vehicle, &credits) in &self.partial_credits {
            if vehicle.permanent_region != self.region {
                out.entry(vehicle.permanent_region)
                    .or_default()
                    .insert(vehicle, credits);
            }
        }
        out
    }

    /// Entries belonging to this region's own permanent vehicles.
    pub fn local_credits(&self) -> BTreeMap<VehicleId, u64> {
        self.partial_credits
            .iter()
            .filter(|(v, _)| v.permanent_region == self.region)
            .map(|(&v, &c)| (v, c))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PreBlockOutcome {
    pub pre_block: PreBlock,
    pub conflicting_reporters: Vec<VehicleId>,
}

/// Builds a region's pre-block from its collected reports for one period.
/// Reports for other periods are skipped defensively.
pub fn build_pre_block(region: RegionId, reports: &[PotReport], period: u64) -> PreBlockOutcome {
    let in_period: Vec<PotReport> = reports
        .iter()
        .filter(|r| r.period_index == period)
        .cloned()
        .collect();
    let credits = compute_period_credits(&in_period);
    PreBlockOutcome {
        pre_block: PreBlock {
            region,
            period_index: period,
            partial_credits: credits.credits,
        },
        conflicting_reporters: credits.conflicting_reporters,
    }
}

/// A region's merged, finalized credit set for one period: only its own
/// permanent vehicles, each summed across every region's pre-block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FinalCredits {
    pub region: RegionId,
    pub period_index: u64,
    pub credits: BTreeMap<VehicleId, u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MergeOutcome {
    pub finals: BTreeMap<RegionId, FinalCredits>,
    /// Regions expected to contribute a pre-block that did not.
    pub missing_regions: Vec<RegionId>,
    /// Regions that sent more than one pre-block; only the first counts.
    pub duplicate_regions: Vec<RegionId>,
}

/// Merges all regions' pre-blocks for one period into per-region final
/// credit sets. Credit mass is conserved: every pre-block entry lands in
/// exactly one final set, keyed by the vehicle's permanent region.
pub fn merge_final_blocks(
    period: u64,
    pre_blocks: &[PreBlock],
    expected_regions: &BTreeSet<RegionId>,
) -> MergeOutcome {
    let mut finals: BTreeMap<RegionId, FinalCredits> = expected_regions
        .iter()
        .map(|&r| {
            (
                r,
                FinalCredits {
                    region: r,
                    period_index: period,
                    credits: BTreeMap::new(),
                },
            )
        })
        .collect();
    let mut seen: BTreeSet<RegionId> = BTreeSet::new();
    let mut duplicate_regions = Vec::new();

    for pre in pre_blocks {
        debug_assert_eq!(pre.period_index, period);
        if !seen.insert(pre.region) {
            duplicate_regions.push(pre.region);
            continue;
        }
        for (&vehicle, &credits) in &pre.partial_credits {
            let home = vehicle.permanent_region;
            let entry = finals.entry(home).or_insert_with(|| FinalCredits {
                region: home,
                period_index: period,
                credits: BTreeMap::new(),
            });
            *entry.credits.entry(vehicle).or_insert(0) += credits;
        }
    }

    let missing_regions = expected_regions
        .iter()
        .copied()
        .filter(|r| !seen.contains(r))
        .collect();
    MergeOutcome {
        finals,
        missing_regions,
        duplicate_regions,
    }
}

/// One count that strayed outside the dispute tolerance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CountMismatch {
    pub vehicle: VehicleId,
    pub reported: u64,
    pub truth: u64,
}

/// Grounds for a dispute debate against a reporter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountDispute {
    pub reporter: VehicleId,
    pub period_index: u64,
    pub offending: Vec<CountMismatch>,
}

/// Compares a report against ground truth. Counts within the relative
/// tolerance pass; anything further off makes the reporter the subject of a
/// dispute. Entries absent from the report are never disputed, because the
/// per-report cap legitimately drops low-count vehicles.
pub fn flag_count_dispute(
    report: &PotReport,
    truth: &BTreeMap<VehicleId, u64>,
    tolerance: f64,
) -> Option<CountDispute> {
    let mut offending = Vec::new();
    for (&vehicle, &reported) in &report.counts {
        let actual = truth.get(&vehicle).copied().unwrap_or(0);
        let deviation = (reported as i128 - actual as i128).unsigned_abs() as f64;
        if deviation > tolerance * actual as f64 {
            offending.push(CountMismatch {
                vehicle,
                reported,
                truth: actual,
            });
        }
    }
    if offending.is_empty() {
        None
    } else {
        Some(CountDispute {
            reporter: report.reporter,
            period_index: report.period_index,
            offending,
        })
    }
}
