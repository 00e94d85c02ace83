//! Scenario presets, TOML loading with command-line style overrides, and
//! the manifest that reproduces a run.

use sidelink_sim::config::{preset, valid_keys, ResolvedConfig};
use sidelink_sim::{GroupId, Scenario};

fn main() -> sidelink_sim::Result<()> {
    for s in Scenario::ALL {
        let cfg = preset(s.name())?;
        let modes: Vec<String> = GroupId::ALL
            .iter()
            .map(|&g| format!("{g}={:?}", cfg.scenario.mode_of(g)))
            .collect();
        println!("{}: {}", s.name(), modes.join(" "));
    }

    let file = "scenario = \"scenario3\"\nseed = 3\n\n[group_c]\ncount = 130\n\n[radio]\nshadowing_sigma_db = 0.0\n";
    let resolved = ResolvedConfig::from_toml_str(file, &[("seed".into(), "7".into())])?;
    println!("\nseed {} ({:?})", resolved.config.seed, resolved.provenance_of("seed").unwrap());
    println!("group_c.count {} ({:?})", resolved.config.group_c.count, resolved.provenance_of("group_c.count").unwrap());
    println!("pool.t2 {} ({:?})", resolved.config.pool.t2, resolved.provenance_of("pool.t2").unwrap());

    match ResolvedConfig::from_toml_str("[pool]\nt1 = 40\n", &[]) {
        Err(e) => println!("\nrejected: {e}"),
        Ok(_) => unreachable!("t1 > t2 must be rejected"),
    }
    println!("{} configurable keys", valid_keys().len());

    println!("\n{}", resolved.manifest());
    Ok(())
}
