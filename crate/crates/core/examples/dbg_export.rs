use dualchain_core::chain::ledger::Ledger;
use dualchain_core::sim::{run_scenario, ScenarioConfig};

fn main() {
    let cfg = ScenarioConfig::intersection(22.0);
    let run = run_scenario(&cfg).unwrap();
    let export = &run.trust_ledger;
    println!("blocks: {}", export.blocks.len());
    for (i, w) in export.blocks.windows(2).enumerate() {
        let d = w[0].digest();
        if w[1].prev_hash != d {
            println!(
                "break at block {} (round {} kind {:?}, prev of next={} recomputed={})",
                i, w[0].round, w[0].kind, w[1].prev_hash, d
            );
            println!(
                "block {} txs={} updates={:?}",
                i,
                w[0].transactions.len(),
                w[0].state_updates
            );
        }
    }
    match Ledger::from_export(export) {
        Ok(_) => println!("from_export ok"),
        Err(e) => println!("from_export err: {e}"),
    }
    let json = serde_json::to_string(export).unwrap();
    let back: dualchain_core::chain::ledger::LedgerExport = serde_json::from_str(&json).unwrap();
    println!(
        "json round-trip blocks equal: {}",
        back.blocks == export.blocks
    );
    match Ledger::from_export(&back) {
        Ok(_) => println!("from_export after json ok"),
        Err(e) => println!("from_export after json err: {e}"),
    }
    for (i, (a, b)) in export.blocks.iter().zip(&back.blocks).enumerate() {
        if a != b {
            println!("first differing block: {i}");
            println!("  region  eq: {}", a.region == b.region);
            println!("  round   eq: {}", a.round == b.round);
            println!("  prev    eq: {}", a.prev_hash == b.prev_hash);
            println!("  kind    eq: {}", a.kind == b.kind);
            println!("  txs     eq: {}", a.transactions == b.transactions);
            println!("  updates eq: {}", a.state_updates == b.state_updates);
            println!("  propose eq: {}", a.proposer == b.proposer);
            println!("  time    eq: {}", a.timestamp == b.timestamp);
            for (j, (ta, tb)) in a.transactions.iter().zip(&b.transactions).enumerate() {
                if ta != tb {
                    println!("  first differing tx {j}:");
                    println!("    a: {ta:#?}");
                    println!("    b: {tb:#?}");
                    break;
                }
            }
            break;
        }
    }
}
