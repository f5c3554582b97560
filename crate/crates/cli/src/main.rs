//! Command-line front end: run scenarios, sweep the resource model, and
//! inspect exported chains.
//!
//! Exit codes: 0 success, 2 configuration or usage error, 3 runtime
//! invariant violation inside a simulation, 4 corrupted chain export.

use std::collections::BTreeSet;
use std::fs;
use std::panic::{self, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use sha2::{Digest as _, Sha256};

use dualchain_core::audit::{AuditEvent, AuditLog};
use dualchain_core::chain::id::VehicleId;
use dualchain_core::chain::ledger::{Ledger, LedgerExport};
use dualchain_core::chain::block::StateUpdate;
use dualchain_core::resource::{
    comm_sweep, cpu_sweep, latency_sweep, pot_sizing, storage_cost, storage_sweep, Feasibility,
    ResourceParams, TRAVEL_RECORDS_PER_TX, TRAVEL_RECORD_BYTES,
};
use dualchain_core::sim::{run_batch, AttackMode, RunOutput, ScenarioConfig};

const EXIT_CONFIG: u8 = 2;
const EXIT_RUNTIME: u8 = 3;
const EXIT_CORRUPT: u8 = 4;

#[derive(Parser)]
#[command(name = "dualchain", version, about = "Dual-chain trust framework toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario, or a seed sweep of it, and write the outputs.
    Run(RunArgs),
    /// Evaluate the deployment resource model over parameter grids.
    Analyze(AnalyzeArgs),
    /// Verify an exported chain and query its history.
    Inspect(InspectArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Named scenario preset. Run `dualchain run --help` for the list.
    #[arg(long, value_enum, conflicts_with = "config")]
    preset: Option<Preset>,
    /// TOML scenario config. Missing keys fall back to defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override the seed from the preset or config file.
    #[arg(long)]
    seed: Option<u64>,
    /// Sweep spec `seed=START:STEP:END` (inclusive); one run per value.
    #[arg(long)]
    sweep: Option<String>,
    /// Output directory. Created if absent.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Format of the metrics file.
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

#[derive(Args)]
struct AnalyzeArgs {
    /// Parameter set for the resource model.
    #[arg(long, value_enum, default_value_t = ParamPreset::Paper2020)]
    preset: ParamPreset,
    /// Override one sweep axis: `radius|honest|t_lat=START:STEP:END`.
    #[arg(long)]
    sweep: Option<String>,
    /// Output directory. Created if absent.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Format of the table files.
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

#[derive(Args)]
struct InspectArgs {
    /// Chain export (JSON) to verify and query.
    #[arg(long)]
    ledger: PathBuf,
    /// Audit log (JSON) from the same run; needed for --debate.
    #[arg(long)]
    audit: Option<PathBuf>,
    /// Print the block-by-block history of one vehicle, e.g. R0V12.
    #[arg(long)]
    vehicle: Option<String>,
    /// Print contract and redress activity about one debated vehicle.
    #[arg(long, requires = "audit")]
    debate: Option<String>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Clone, Copy, ValueEnum)]
enum Preset {
    /// Highway merge, no attacker.
    MergeNoattack,
    /// Highway merge, phantom braking attack, screening disabled.
    MergeUndefended,
    /// Highway merge, phantom braking attack, full defense.
    MergeDefended,
    /// Intersection fallback with 22 s rounds.
    #[value(name = "intersection-22")]
    Intersection22,
    /// Intersection fallback with 60 s rounds.
    #[value(name = "intersection-60")]
    Intersection60,
    /// Intersection with the signal left on (no attack, no fallback).
    IntersectionControl,
    /// Route choice under a fake hazard, 0.2 vehicles/s arrivals.
    RoutesG20,
    /// Route choice under a fake hazard, 0.33 vehicles/s arrivals.
    RoutesG33,
}

impl Preset {
    fn config(self) -> ScenarioConfig {
        match self {
            Preset::MergeNoattack => ScenarioConfig::merge(AttackMode::NoAttack),
            Preset::MergeUndefended => ScenarioConfig::merge(AttackMode::AttackUndefended),
            Preset::MergeDefended => ScenarioConfig::merge(AttackMode::AttackDefended),
            Preset::Intersection22 => ScenarioConfig::intersection(22.0),
            Preset::Intersection60 => ScenarioConfig::intersection(60.0),
            Preset::IntersectionControl => ScenarioConfig::intersection_control(22.0),
            Preset::RoutesG20 => ScenarioConfig::route_choice(0.2),
            Preset::RoutesG33 => ScenarioConfig::route_choice(0.33),
        }
    }

    fn name(self) -> &'static str {
        match self {
            Preset::MergeNoattack => "merge-noattack",
            Preset::MergeUndefended => "merge-undefended",
            Preset::MergeDefended => "merge-defended",
            Preset::Intersection22 => "intersection-22",
            Preset::Intersection60 => "intersection-60",
            Preset::IntersectionControl => "intersection-control",
            Preset::RoutesG20 => "routes-g20",
            Preset::RoutesG33 => "routes-g33",
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ParamPreset {
    /// 2020-era vehicle platform and urban region assumptions.
    Paper2020,
}

/// Provenance record written next to every run's outputs so a result can be
/// traced back to the exact effective configuration.
#[derive(Serialize)]
struct Manifest<'a> {
    tool_version: &'static str,
    scenario: String,
    source: &'a str,
    seed: u64,
    config_digest: String,
    out_dir: String,
}

fn main() -> ExitCode {
    match Cli::parse().command {
        Command::Run(args) => cmd_run(args),
        Command::Analyze(args) => cmd_analyze(args),
        Command::Inspect(args) => cmd_inspect(args),
    }
}

fn fail(code: u8, msg: &str) -> ExitCode {
    eprintln!("error: {msg}");
    ExitCode::from(code)
}

// ---------------------------------------------------------------------------
// run

fn cmd_run(args: RunArgs) -> ExitCode {
    let (mut cfg, source) = match (&args.preset, &args.config) {
        (Some(p), None) => (p.config(), p.name().to_string()),
        (None, Some(path)) => {
            let text = match fs::read_to_string(path) {
                Ok(t) => t,
                Err(e) => return fail(EXIT_CONFIG, &format!("cannot read {}: {e}", path.display())),
            };
            // toml errors carry line/column positions; pass them through.
            match toml::from_str::<ScenarioConfig>(&text) {
                Ok(c) => (c, path.display().to_string()),
                Err(e) => return fail(EXIT_CONFIG, &format!("{}: {e}", path.display())),
            }
        }
        _ => return fail(EXIT_CONFIG, "pass exactly one of --preset or --config"),
    };
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }

    let seeds: Vec<u64> = match &args.sweep {
        None => vec![cfg.seed],
        Some(spec) => match parse_sweep(spec) {
            Ok(("seed", grid)) => grid.iter().map(|v| *v as u64).collect(),
            Ok((key, _)) => {
                return fail(EXIT_CONFIG, &format!("run sweeps only support seed=..., got {key}"))
            }
            Err(e) => return fail(EXIT_CONFIG, &e),
        },
    };
    if seeds.is_empty() {
        println!("sweep range is empty; nothing to run");
        return ExitCode::SUCCESS;
    }

    if let Err(e) = cfg.validate() {
        return fail(EXIT_CONFIG, &e.to_string());
    }

    // A panic past validation means a broken simulator invariant, not a bad
    // input; distinguish it from a config error for scripting.
    let runs = match panic::catch_unwind(AssertUnwindSafe(|| run_batch(&cfg, &seeds))) {
        Ok(Ok(runs)) => runs,
        Ok(Err(e)) => return fail(EXIT_CONFIG, &e.to_string()),
        Err(_) => return fail(EXIT_RUNTIME, "simulation aborted on an internal invariant"),
    };

    let multi = runs.len() > 1;
    let mut summary_rows: Vec<(u64, &RunOutput)> = Vec::new();
    for run in &runs {
        let dir = if multi {
            args.out.join(format!("seed-{}", run.config.seed))
        } else {
            args.out.clone()
        };
        if let Err(e) = write_run(&dir, run, &source, args.format) {
            return fail(EXIT_RUNTIME, &e);
        }
        summary_rows.push((run.config.seed, run));
        let mut line = format!("seed {}:", run.config.seed);
        for (k, v) in &run.summary {
            line.push_str(&format!(" {k}={v:.3}"));
        }
        println!("{line}");
    }
    if multi {
        let csv = combined_summary_csv(&summary_rows);
        if let Err(e) = write_text(&args.out.join("summary.csv"), &csv) {
            return fail(EXIT_RUNTIME, &e);
        }
    }
    println!("wrote {}", args.out.display());
    ExitCode::SUCCESS
}

fn write_run(dir: &Path, run: &RunOutput, source: &str, format: Format) -> Result<(), String> {
    fs::create_dir_all(dir).map_err(|e| format!("cannot create {}: {e}", dir.display()))?;
    match format {
        Format::Csv => write_text(&dir.join("metrics.csv"), &run.metrics.to_csv())?,
        Format::Json => write_json(&dir.join("metrics.json"), &run.metrics)?,
    }
    write_json(&dir.join("audit.json"), &run.audit)?;
    write_json(&dir.join("trust_ledger.json"), &run.trust_ledger)?;
    write_json(&dir.join("pot_ledger.json"), &run.pot_ledger)?;
    write_json(&dir.join("summary.json"), &run.summary)?;

    let toml_text = toml::to_string(&run.config)
        .map_err(|e| format!("cannot serialize effective config: {e}"))?;
    write_text(&dir.join("config.toml"), &toml_text)?;
    let manifest = Manifest {
        tool_version: env!("CARGO_PKG_VERSION"),
        scenario: format!("{:?}", run.config.scenario),
        source,
        seed: run.config.seed,
        config_digest: hex::encode(Sha256::digest(toml_text.as_bytes())),
        out_dir: dir.display().to_string(),
    };
    write_json(&dir.join("manifest.json"), &manifest)
}

fn combined_summary_csv(rows: &[(u64, &RunOutput)]) -> String {
    let keys: BTreeSet<&str> = rows
        .iter()
        .flat_map(|(_, r)| r.summary.keys().map(String::as_str))
        .collect();
    let mut out = String::from("seed");
    for k in &keys {
        out.push(',');
        out.push_str(k);
    }
    out.push('\n');
    for (seed, run) in rows {
        out.push_str(&seed.to_string());
        for k in &keys {
            out.push(',');
            if let Some(v) = run.summary.get(*k) {
                out.push_str(&v.to_string());
            }
        }
        out.push('\n');
    }
    out
}

// ---------------------------------------------------------------------------
// analyze

fn cmd_analyze(args: AnalyzeArgs) -> ExitCode {
    let params = match args.preset {
        ParamPreset::Paper2020 => ResourceParams::paper_2020(),
    };

    let mut radii: Vec<f64> = grid(10.0, 10.0, 200.0);
    let mut honest: Vec<f64> = grid(0.68, 0.02, 1.0);
    let mut latencies: Vec<f64> = vec![11.0, 22.0, 44.0, 60.0, 88.0];
    let mut comm_radii = vec![params.region_radius_km];
    let comm_honest = vec![0.8];

    if let Some(spec) = &args.sweep {
        match parse_sweep(spec) {
            Ok(("radius", g)) => {
                radii = g.clone();
                comm_radii = g;
            }
            Ok(("honest", g)) => honest = g,
            Ok(("t_lat", g)) => latencies = g,
            Ok((key, _)) => {
                return fail(
                    EXIT_CONFIG,
                    &format!("unknown sweep axis {key}; expected radius, honest, or t_lat"),
                )
            }
            Err(e) => return fail(EXIT_CONFIG, &e),
        }
    }

    let latency = latency_sweep(&params, &radii);
    let cpu = cpu_sweep(&params, &honest);
    let comm = comm_sweep(&params, &comm_honest, &latencies, &comm_radii);
    let storage = storage_sweep(&params, &radii);
    let anchors = serde_json::json!({
        "storage": storage_cost(&params),
        "pot": pot_sizing(&params, TRAVEL_RECORD_BYTES, TRAVEL_RECORDS_PER_TX),
    });

    if let Err(e) = fs::create_dir_all(&args.out) {
        return fail(EXIT_RUNTIME, &format!("cannot create {}: {e}", args.out.display()));
    }
    let result = match args.format {
        Format::Csv => write_analyze_csv(&args.out, &latency, &cpu, &comm, &storage),
        Format::Json => write_analyze_json(&args.out, &latency, &cpu, &comm, &storage),
    }
    .and_then(|()| write_json(&args.out.join("anchors.json"), &anchors));
    if let Err(e) = result {
        return fail(EXIT_RUNTIME, &e);
    }
    println!(
        "wrote {} ({} latency, {} cpu, {} comm, {} storage rows)",
        args.out.display(),
        latency.len(),
        cpu.len(),
        comm.len(),
        storage.len()
    );
    ExitCode::SUCCESS
}

fn cell(f: Feasibility) -> String {
    match f.value() {
        Some(v) => v.to_string(),
        None => "infeasible".to_string(),
    }
}

fn write_analyze_csv(
    dir: &Path,
    latency: &[dualchain_core::resource::LatencyRow],
    cpu: &[dualchain_core::resource::CpuRow],
    comm: &[dualchain_core::resource::CommRow],
    storage: &[dualchain_core::resource::StorageRow],
) -> Result<(), String> {
    let mut t = String::from("region_radius_km,block_bytes,min_latency_s\n");
    for r in latency {
        t.push_str(&format!(
            "{},{},{}\n",
            r.region_radius_km,
            r.block_bytes,
            cell(r.min_latency_s)
        ));
    }
    write_text(&dir.join("latency.csv"), &t)?;

    let mut t = String::from("honest_fraction,utilization\n");
    for r in cpu {
        t.push_str(&format!("{},{}\n", r.honest_fraction, cell(r.utilization)));
    }
    write_text(&dir.join("cpu.csv"), &t)?;

    let mut t = String::from("honest_fraction,round_latency_s,region_radius_km,cost_bytes\n");
    for r in comm {
        t.push_str(&format!(
            "{},{},{},{}\n",
            r.honest_fraction,
            r.round_latency_s,
            r.region_radius_km,
            cell(r.cost_bytes)
        ));
    }
    write_text(&dir.join("comm.csv"), &t)?;

    let mut t = String::from(
        "region_radius_km,per_day_bytes,per_month_bytes,summary_bytes,with_summary_bytes,overhead_fraction\n",
    );
    for r in storage {
        t.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.region_radius_km,
            r.cost.per_day_bytes,
            r.cost.per_month_bytes,
            r.cost.summary_bytes,
            r.cost.with_summary_bytes,
            r.cost.overhead_fraction
        ));
    }
    write_text(&dir.join("storage.csv"), &t)
}

fn write_analyze_json(
    dir: &Path,
    latency: &[dualchain_core::resource::LatencyRow],
    cpu: &[dualchain_core::resource::CpuRow],
    comm: &[dualchain_core::resource::CommRow],
    storage: &[dualchain_core::resource::StorageRow],
) -> Result<(), String> {
    write_json(&dir.join("latency.json"), &latency)?;
    write_json(&dir.join("cpu.json"), &cpu)?;
    write_json(&dir.join("comm.json"), &comm)?;
    write_json(&dir.join("storage.json"), &storage)
}

// ---------------------------------------------------------------------------
// inspect

fn cmd_inspect(args: InspectArgs) -> ExitCode {
    let text = match fs::read_to_string(&args.ledger) {
        Ok(t) => t,
        Err(e) => return fail(EXIT_CONFIG, &format!("cannot read {}: {e}", args.ledger.display())),
    };
    let export: LedgerExport = match serde_json::from_str(&text) {
        Ok(x) => x,
        Err(e) => {
            return fail(EXIT_CORRUPT, &format!("{} is not a chain export: {e}", args.ledger.display()))
        }
    };
    let ledger = match Ledger::from_export(&export) {
        Ok(l) => l,
        Err(e) => return fail(EXIT_CORRUPT, &format!("corrupted chain: {e}")),
    };
    println!(
        "chain ok: region {} with {} blocks, head {}",
        export.region,
        ledger.blocks().len(),
        ledger.head_hash()
    );

    if let Some(raw) = &args.vehicle {
        let id: VehicleId = match raw.parse() {
            Ok(id) => id,
            Err(e) => return fail(EXIT_CONFIG, &e.to_string()),
        };
        let mut seen = false;
        for block in ledger.blocks() {
            for update in &block.state_updates {
                if update.vehicle() == id {
                    seen = true;
                    println!("round {:>4} t={} {}", block.round, block.timestamp, describe(update));
                }
            }
        }
        match ledger.record(id) {
            Some(rec) => println!(
                "final: trust_points={} pot_accumulated={:.3} active={}",
                rec.trust_points, rec.pot_accumulated, rec.active
            ),
            None if !seen => println!("no records for {id}"),
            None => println!("final: no surviving record (summarized out)"),
        }
    }

    if let Some(raw) = &args.debate {
        let id: VehicleId = match raw.parse() {
            Ok(id) => id,
            Err(e) => return fail(EXIT_CONFIG, &e.to_string()),
        };
        let path = args.audit.as_ref().expect("clap enforces --audit with --debate");
        let text = match fs::read_to_string(path) {
            Ok(t) => t,
            Err(e) => return fail(EXIT_CONFIG, &format!("cannot read {}: {e}", path.display())),
        };
        let log: AuditLog = match serde_json::from_str(&text) {
            Ok(l) => l,
            Err(e) => return fail(EXIT_CONFIG, &format!("{} is not an audit log: {e}", path.display())),
        };
        let mut seen = false;
        for entry in log.entries() {
            let line = match &entry.event {
                AuditEvent::ContractOpened { contract, debate, opened_at } if *debate == id => {
                    Some(format!("contract {contract} opened (anchor {opened_at})"))
                }
                AuditEvent::ContractClosed { contract, debate, verdict } if *debate == id => {
                    Some(format!("contract {contract} closed: {verdict}"))
                }
                AuditEvent::RedressEvaluated { debate, margin, fired } if *debate == id => {
                    let m = margin.map_or("none".to_string(), |m| format!("{m:.3}"));
                    Some(format!("redress evaluated: margin {m}, fired {fired}"))
                }
                _ => None,
            };
            if let Some(line) = line {
                seen = true;
                println!("t={} {line}", entry.time);
            }
        }
        if !seen {
            println!("no contract activity for {id}");
        }
    }
    ExitCode::SUCCESS
}

fn describe(update: &StateUpdate) -> String {
    match update {
        StateUpdate::TrustDelta { delta, .. } => format!("trust {delta:+}"),
        StateUpdate::TrustSet { value, .. } => format!("trust set to {value} (sanction)"),
        StateUpdate::Register { trust_points, pot_accumulated, .. } => {
            format!("registered with trust {trust_points}, credits {pot_accumulated:.3}")
        }
        StateUpdate::PotPeriod { period, credits, .. } => {
            format!("period {period} credits +{credits}")
        }
        StateUpdate::TransferIn { trust_points, pot_accumulated, .. } => {
            format!("transferred in with trust {trust_points}, credits {pot_accumulated:.3}")
        }
        StateUpdate::TransferOut { .. } => "transferred out".to_string(),
        StateUpdate::SummaryState { trust_points, pot_accumulated, active, .. } => {
            format!("summary: trust {trust_points}, credits {pot_accumulated:.3}, active {active}")
        }
    }
}

// ---------------------------------------------------------------------------
// shared helpers

/// Parses `key=START:STEP:END` into the key and the inclusive grid.
fn parse_sweep(spec: &str) -> Result<(&str, Vec<f64>), String> {
    let (key, range) = spec
        .split_once('=')
        .ok_or_else(|| format!("sweep spec {spec:?} must look like key=START:STEP:END"))?;
    let parts: Vec<&str> = range.split(':').collect();
    if parts.len() != 3 {
        return Err(format!("sweep range {range:?} must be START:STEP:END"));
    }
    let nums: Vec<f64> = parts
        .iter()
        .map(|p| p.parse::<f64>().map_err(|_| format!("bad number {p:?} in sweep range")))
        .collect::<Result<_, _>>()?;
    let (start, step, end) = (nums[0], nums[1], nums[2]);
    if !(step > 0.0) {
        return Err(format!("sweep step must be positive, got {step}"));
    }
    Ok((key, grid(start, step, end)))
}

fn grid(start: f64, step: f64, end: f64) -> Vec<f64> {
    let mut out = Vec::new();
    let mut i = 0u64;
    loop {
        // Multiply instead of accumulating so long grids don't drift.
        let v = start + step * i as f64;
        if v > end + 1e-9 {
            return out;
        }
        out.push(v);
        i += 1;
    }
}

fn write_text(path: &Path, text: &str) -> Result<(), String> {
    fs::write(path, text).map_err(|e| format!("cannot write {}: {e}", path.display()))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), String> {
    let text = serde_json::to_string_pretty(value)
        .map_err(|e| format!("cannot serialize {}: {e}", path.display()))?;
    fs::write(path, text).map_err(|e| format!("cannot write {}: {e}", path.display()))
}
