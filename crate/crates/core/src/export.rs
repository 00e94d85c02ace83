//! Run directories on disk: per-run CSV plus a reproducible manifest, and
//! collection of those CSVs for aggregation.

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use crate::config::{Provenance, ResolvedConfig};
use crate::error::Result;
use crate::metrics::{aggregate_samples, read_run_csv, samples_from_rows, MetricsStore, PercentileSeries, PirMode};

pub const METRICS_FILE: &str = "metrics.csv";
pub const MANIFEST_FILE: &str = "manifest.toml";

/// Writes `metrics.csv` and `manifest.toml` into `dir`, creating it.
pub fn write_run(dir: &Path, resolved: &ResolvedConfig, store: &MetricsStore) -> Result<()> {
    fs::create_dir_all(dir)?;
    store.write_csv(BufWriter::new(File::create(dir.join(METRICS_FILE))?))?;
    fs::write(dir.join(MANIFEST_FILE), resolved.manifest())?;
    Ok(())
}

/// `resolved` with the sweep coordinates applied as flag values.
pub fn sweep_point(resolved: &ResolvedConfig, group_c_count: usize, seed: u64) -> ResolvedConfig {
    let mut out = resolved.clone();
    out.config.group_c.count = group_c_count;
    out.config.seed = seed;
    out.provenance.insert("group_c.count".into(), Provenance::Flag);
    out.provenance.insert("seed".into(), Provenance::Flag);
    out
}

/// Per-run CSVs under `path`: the file itself, or every `metrics.csv`
/// below a directory, sorted.
pub fn collect_run_csvs(path: &Path) -> Result<Vec<PathBuf>> {
    if path.is_file() {
        return Ok(vec![path.to_path_buf()]);
    }
    let mut out = Vec::new();
    let mut stack = vec![path.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in fs::read_dir(&dir)? {
            let p = entry?.path();
            if p.is_dir() {
                stack.push(p);
            } else if p.file_name().is_some_and(|n| n == METRICS_FILE) {
                out.push(p);
            }
        }
    }
    out.sort();
    Ok(out)
}

/// Percentile series over every per-run CSV found under `inputs`.
pub fn aggregate_paths(inputs: &[PathBuf], pir_mode: PirMode) -> Result<PercentileSeries> {
    let mut samples = Vec::new();
    for input in inputs {
        for csv in collect_run_csvs(input)? {
            let rows = read_run_csv(File::open(&csv)?)?;
            samples.extend(samples_from_rows(&rows, pir_mode)?);
        }
    }
    Ok(aggregate_samples(&samples))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::run;
    use crate::metrics::aggregate;

    #[test]
    fn csv_aggregation_matches_in_memory() {
        let dir = tempfile::tempdir().unwrap();
        let base = ResolvedConfig::from_toml_str("sim_time_s = 2.0\nscenario = \"scenario3\"\n", &[]).unwrap();
        let mut stores = Vec::new();
        for seed in [1, 2] {
            let point = sweep_point(&base, 20, seed);
            let m = run(&point.config).unwrap();
            write_run(&dir.path().join(&m.run_id), &point, &m).unwrap();
            stores.push(m);
        }
        for mode in [PirMode::PerPair, PirMode::PerUe] {
            let from_disk = aggregate_paths(&[dir.path().to_path_buf()], mode).unwrap();
            let in_memory = aggregate(&stores, mode);
            assert_eq!(from_disk, in_memory);
        }
        let manifest = fs::read_to_string(dir.path().join("scenario3-c20-s2").join(MANIFEST_FILE)).unwrap();
        let back = ResolvedConfig::from_toml_str(&manifest, &[]).unwrap();
        assert_eq!(back.config.seed, 2);
        assert_eq!(run(&back.config).unwrap(), stores[1]);
    }
}
