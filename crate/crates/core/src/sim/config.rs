//! Run configuration for the three traffic scenarios.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::pot::PotParams;
use crate::time::Millis;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioKind {
    HighwayMerge,
    Intersection,
    RouteChoice,
}

/// How the merge scenario responds to the spoofed obstacle. The other
/// scenarios always run their trust machinery; `NoAttack` doubles as
/// their control mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttackMode {
    /// No attacker spawns at all.
    NoAttack,
    /// The attack runs and nobody processes trust evidence.
    AttackUndefended,
    /// The attack runs against the full trust pipeline.
    AttackDefended,
}

/// Everything a scenario run depends on. One flat struct covers all three
/// scenarios; fields that a scenario does not use are ignored by it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScenarioConfig {
    pub scenario: ScenarioKind,
    pub mode: AttackMode,
    /// Vehicles per second, per arrival stream.
    pub arrival_rate: f64,
    /// Round (block) period in seconds.
    pub t_lat: f64,
    /// Message propagation bound in milliseconds.
    pub tb_ms: u64,
    /// When the attacker acts, in seconds from run start.
    pub attack_start: f64,
    pub attacker_count: u32,
    pub sybil_count: u32,
    /// Chance an informed vehicle avoids a route with a reported hazard.
    pub reroute_probability: f64,
    pub seed: u64,
    /// Run length in seconds.
    pub duration: f64,
    /// Redress threshold on the stake margin.
    pub n_th: f64,
    /// Honest sensing error rate.
    pub epsilon: f64,
    pub comm_range_m: f64,
    pub exam_range_m: f64,
    /// Contract matching radius for stances about the same spot.
    pub match_radius_m: f64,
    pub pos_tolerance_m: f64,
    pub speed_tolerance_ms: f64,
    /// Proposer committee size.
    pub eta_p: usize,
    /// Verifier committee size.
    pub eta_v: usize,
    /// Metric sampling period in seconds.
    pub sample_every: f64,
    /// Travel-credit model settings.
    pub pot: PotParams,
    /// Mean initial trust points for honest locals (uniform on mean +/- 5).
    pub initial_tp_mean: f64,
    /// Mean initial travel credits for honest locals (uniform on mean +/- 50).
    pub initial_pot_mean: f64,
    /// Attacker travel credits as a multiple of the honest mean.
    pub attacker_pot_factor: f64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            scenario: ScenarioKind::HighwayMerge,
            mode: AttackMode::AttackDefended,
            arrival_rate: 0.2,
            t_lat: 22.0,
            tb_ms: 1000,
            attack_start: 40.0,
            attacker_count: 1,
            sybil_count: 0,
            reroute_probability: 0.9,
            seed: 1,
            duration: 180.0,
            n_th: 5.0,
            epsilon: 0.01,
            comm_range_m: 300.0,
            exam_range_m: 50.0,
            match_radius_m: 100.0,
            pos_tolerance_m: 5.0,
            speed_tolerance_ms: 2.0,
            eta_p: 3,
            eta_v: 15,
            sample_every: 1.0,
            pot: PotParams::default(),
            initial_tp_mean: 10.0,
            initial_pot_mean: 100.0,
            attacker_pot_factor: 0.5,
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("{field} must be strictly positive, got {value}")]
    NotPositive { field: &'static str, value: f64 },
    #[error("reroute_probability must lie in [0, 1], got {0}")]
    BadProbability(f64),
    #[error("epsilon must lie in [0, 1), got {0}")]
    BadEpsilon(f64),
    #[error("exam_range_m ({exam}) must not exceed comm_range_m ({comm})")]
    ExamBeyondComm { exam: f64, comm: f64 },
    #[error("committee sizes must be at least 1")]
    EmptyCommittee,
    #[error("route choice needs at least 2 sybil identities, got {0}")]
    TooFewSybils(u32),
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let positive: [(&'static str, f64); 9] = [
            ("arrival_rate", self.arrival_rate),
            ("t_lat", self.t_lat),
            ("tb_ms", self.tb_ms as f64),
            ("duration", self.duration),
            ("comm_range_m", self.comm_range_m),
            ("exam_range_m", self.exam_range_m),
            ("match_radius_m", self.match_radius_m),
            ("pos_tolerance_m", self.pos_tolerance_m),
            ("sample_every", self.sample_every),
        ];
        for (field, value) in positive {
            if !(value > 0.0) || !value.is_finite() {
                return Err(ConfigError::NotPositive { field, value });
            }
        }
        if !(0.0..=1.0).contains(&self.reroute_probability) {
            return Err(ConfigError::BadProbability(self.reroute_probability));
        }
        if !(0.0..1.0).contains(&self.epsilon) {
            return Err(ConfigError::BadEpsilon(self.epsilon));
        }
        if self.exam_range_m > self.comm_range_m {
            return Err(ConfigError::ExamBeyondComm {
                exam: self.exam_range_m,
                comm: self.comm_range_m,
            });
        }
        if self.eta_p == 0 || self.eta_v == 0 {
            return Err(ConfigError::EmptyCommittee);
        }
        if self.scenario == ScenarioKind::RouteChoice
            && self.mode != AttackMode::NoAttack
            && self.sybil_count < 2
        {
            return Err(ConfigError::TooFewSybils(self.sybil_count));
        }
        Ok(())
    }

    pub fn tb(&self) -> Millis {
        Millis::from_millis(self.tb_ms)
    }

    /// Highway merge at the reference arrival rate on both streams.
    pub fn merge(mode: AttackMode) -> Self {
        ScenarioConfig {
            mode,
            ..ScenarioConfig::default()
        }
    }

    /// Four-approach intersection; `t_lat` picks the recovery latency
    /// under study.
    pub fn intersection(t_lat: f64) -> Self {
        ScenarioConfig {
            scenario: ScenarioKind::Intersection,
            arrival_rate: 0.05,
            t_lat,
            attack_start: 60.0,
            duration: 300.0,
            // Everyone stopped near the junction can see the whole box.
            exam_range_m: 150.0,
            ..ScenarioConfig::default()
        }
    }

    /// Intersection control run: same geometry, no attacker.
    pub fn intersection_control(t_lat: f64) -> Self {
        ScenarioConfig {
            mode: AttackMode::NoAttack,
            ..ScenarioConfig::intersection(t_lat)
        }
    }

    /// Two parallel routes with a Sybil-backed fake hazard report.
    pub fn route_choice(arrival_rate: f64) -> Self {
        ScenarioConfig {
            scenario: ScenarioKind::RouteChoice,
            arrival_rate,
            attack_start: 60.0,
            duration: 1500.0,
            sybil_count: 2,
            // The attacker arrives with three times the regional mean in
            // banked travel credit, enough to win the early votes.
            attacker_pot_factor: 3.0,
            // High enough that the redress margin has to accumulate from
            // the thin post-diversion stream of dissenters, so the firing
            // time reflects how busy the road is rather than the initial
            // burst of drivers caught mid-route when the claim lands.
            n_th: 10.0,
            ..ScenarioConfig::default()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_validate() {
        ScenarioConfig::merge(AttackMode::NoAttack).validate().unwrap();
        ScenarioConfig::merge(AttackMode::AttackUndefended).validate().unwrap();
        ScenarioConfig::merge(AttackMode::AttackDefended).validate().unwrap();
        ScenarioConfig::intersection(22.0).validate().unwrap();
        ScenarioConfig::intersection(60.0).validate().unwrap();
        ScenarioConfig::intersection_control(22.0).validate().unwrap();
        ScenarioConfig::route_choice(0.2).validate().unwrap();
        ScenarioConfig::route_choice(0.33).validate().unwrap();
    }

    #[test]
    fn out_of_range_probability_is_rejected() {
        let mut cfg = ScenarioConfig::default();
        cfg.reroute_probability = 1.3;
        assert_eq!(cfg.validate(), Err(ConfigError::BadProbability(1.3)));
    }

    #[test]
    fn exam_range_may_not_exceed_comm_range() {
        let mut cfg = ScenarioConfig::default();
        cfg.exam_range_m = 400.0;
        assert!(matches!(cfg.validate(), Err(ConfigError::ExamBeyondComm { .. })));
    }

    #[test]
    fn route_choice_without_sybils_is_rejected() {
        let mut cfg = ScenarioConfig::route_choice(0.2);
        cfg.sybil_count = 1;
        assert_eq!(cfg.validate(), Err(ConfigError::TooFewSybils(1)));
        cfg.mode = AttackMode::NoAttack;
        cfg.validate().unwrap();
    }

    #[test]
    fn config_round_trips_through_toml() {
        let cfg = ScenarioConfig::route_choice(0.33);
        let text = toml::to_string(&cfg).unwrap();
        let back: ScenarioConfig = toml::from_str(&text).unwrap();
        assert_eq!(cfg, back);
    }

    #[test]
    fn partial_toml_fills_defaults() {
        let cfg: ScenarioConfig = toml::from_str("seed = 7\nduration = 50.0\n").unwrap();
        assert_eq!(cfg.seed, 7);
        assert_eq!(cfg.duration, 50.0);
        assert_eq!(cfg.t_lat, 22.0);
    }
}
