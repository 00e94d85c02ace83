//! The three-scenario comparison at desk scale: median PRR and PIR of the
//! platoon groups against background density.
//!
//! `cargo run --release --example scenario_sweep -- [seeds] [sim_time_s]`

use sidelink_sim::metrics::{aggregate, Metric};
use sidelink_sim::{sweep, GroupId, Scenario, SimConfig};

const COUNTS: [usize; 5] = [10, 50, 90, 130, 170];

fn main() -> sidelink_sim::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let n_seeds: u64 = args.first().and_then(|s| s.parse().ok()).unwrap_or(3);
    let secs: f64 = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(20.0);
    let seeds: Vec<u64> = (1..=n_seeds).collect();

    println!("{:<10} {:>5} {:>5} {:>10} {:>10} {:>10} {:>10}", "scenario", "count", "group", "PRR p5", "PRR p50", "PIR p50", "PIR p95");
    for scenario in Scenario::ALL {
        let base = SimConfig {
            scenario,
            sim_time_s: secs,
            ..SimConfig::default()
        };
        let runs = sweep(&base, &COUNTS, &seeds)?;
        let series = aggregate(runs.values(), base.metrics.pir_mode);
        for count in COUNTS {
            for g in [GroupId::A, GroupId::B] {
                let prr = series.get(count, g, Metric::Prr).expect("platoon PRR");
                let pir = series.get(count, g, Metric::Pir).expect("platoon PIR");
                println!(
                    "{:<10} {count:>5} {g:>5} {:>10.4} {:>10.4} {:>10.2} {:>10.2}",
                    scenario.name(),
                    prr.p5,
                    prr.p50,
                    pir.p50,
                    pir.p95
                );
            }
        }
        let cochannel: u64 = runs.values().map(|m| m.stats.same_group_cochannel).sum();
        println!("{:<10} same-group co-channel transmissions: {cochannel}", scenario.name());
    }
    Ok(())
}
