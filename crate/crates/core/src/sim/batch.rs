//! Batch execution of independent simulation runs.
//!
//! Each run is a pure function of its config (the seed lives inside the
//! config), so a batch is an embarrassingly parallel map. With the
//! `parallel` feature the runs fan out across cores; without it they run
//! one after another, producing byte-identical output.

use crate::parallel::map_batch;
use crate::sim::config::{ConfigError, ScenarioConfig};
use crate::sim::world::{run_scenario, RunOutput};

/// One run per seed, all other settings shared.
pub fn run_batch(base: &ScenarioConfig, seeds: &[u64]) -> Result<Vec<RunOutput>, ConfigError> {
    let configs: Vec<ScenarioConfig> = seeds
        .iter()
        .map(|&seed| {
            let mut cfg = base.clone();
            cfg.seed = seed;
            cfg
        })
        .collect();
    run_configs(&configs)
}

/// One run per config, for sweeps that vary more than the seed.
/// Validation happens up front so the parallel phase cannot fail.
pub fn run_configs(configs: &[ScenarioConfig]) -> Result<Vec<RunOutput>, ConfigError> {
    for cfg in configs {
        cfg.validate()?;
    }
    Ok(map_batch(configs, |cfg| {
        run_scenario(cfg).expect("config validated before the batch started")
    }))
}
