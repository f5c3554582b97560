//! The three traffic scenarios.
//!
//! Each scenario wires the same pieces together: Poisson arrivals, signed
//! message traffic over the lossy broadcast medium, physical verification
//! against ground truth, and one region runtime advancing its chains on
//! the block period. They differ in geometry and in what the attacker
//! tries to pull off.

pub mod intersection;
pub mod merge;
pub mod routes;
