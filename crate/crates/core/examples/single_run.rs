//! One 60 s run of the mixed scenario with 90 background vehicles.
//!
//! `cargo run --release --example single_run -- [scenario] [count] [seed]`

use sidelink_sim::metrics::Metric;
use sidelink_sim::{run, GroupId, Scenario, SimConfig};

fn main() -> sidelink_sim::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let mut cfg = SimConfig {
        scenario: Scenario::parse(args.first().map_or("scenario3", String::as_str))?,
        seed: args.get(2).and_then(|s| s.parse().ok()).unwrap_or(1),
        ..SimConfig::default()
    };
    cfg.group_c.count = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(90);

    let store = run(&cfg)?;
    let s = &store.stats;
    println!("{}: {} UEs, {} slots", store.run_id, store.ues.len(), s.slots);
    println!(
        "generated {} packets, dropped {}, {} transmissions",
        s.packets_generated, s.packets_dropped, s.transmissions
    );
    for g in GroupId::ALL {
        let mode = cfg.scenario.mode_of(g);
        let series = sidelink_sim::metrics::aggregate([&store], cfg.metrics.pir_mode);
        let prr = series.get(cfg.group_c.count, g, Metric::Prr);
        let pir = series.get(cfg.group_c.count, g, Metric::Pir);
        println!(
            "group {g} ({mode:?}): PRR {:.4} (p5 {:.4}), PIR p50 {:.2} ms",
            store.group_prr(g).unwrap_or(f64::NAN),
            prr.map_or(f64::NAN, |r| r.p5),
            pir.map_or(f64::NAN, |r| r.p50),
        );
    }
    store.write_csv(std::io::sink())?;
    Ok(())
}
