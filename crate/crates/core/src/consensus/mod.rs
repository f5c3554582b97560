//! Stake-weighted consensus: Eq.-3 stake computation, committee sortition,
//! exact-tail committee sizing, and the per-round quorum vote.

pub mod committee;
pub mod round;
pub mod sortition;
pub mod stake;

pub use committee::{committee_size, round_seed, select_committee, Committee, CommitteeError, CommitteeSize};
pub use round::{run_round, RoundOutcome};
pub use stake::{compute_stake, StakeView};
