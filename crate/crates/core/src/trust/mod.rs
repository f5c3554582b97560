//! The fast chain's contract machinery: instant voting on disagreements,
//! redress of past verdicts, and cross-region record transfer.

pub mod contract;
pub mod engine;
pub mod transfer;

pub use contract::{close_contract, ContractKind, ContractStatus, Verdict, VotingContract};
pub use engine::{RedressOutcome, TrustEngine};
pub use transfer::{plan_transfer, TransferError, TransferPlan};
