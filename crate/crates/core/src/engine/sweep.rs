//! Many independent runs over (background count, seed).

use std::collections::BTreeMap;

use rayon::prelude::*;

use crate::config::SimConfig;
use crate::error::{Error, Result};
use crate::metrics::MetricsStore;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct RunKey {
    pub group_c_count: usize,
    pub seed: u64,
}

fn configs(base: &SimConfig, counts: &[usize], seeds: &[u64]) -> Result<Vec<(RunKey, SimConfig)>> {
    if counts.is_empty() || seeds.is_empty() {
        return Err(Error::InvalidArgument("sweep needs at least one count and one seed".into()));
    }
    let mut out = Vec::with_capacity(counts.len() * seeds.len());
    for &count in counts {
        for &seed in seeds {
            let mut cfg = base.clone();
            cfg.group_c.count = count;
            cfg.seed = seed;
            cfg.validate()?;
            out.push((
                RunKey {
                    group_c_count: count,
                    seed,
                },
                cfg,
            ));
        }
    }
    Ok(out)
}

/// Cartesian product of `counts` and `seeds`, runs executed on the global
/// rayon pool. Duplicate keys collapse to one run.
pub fn sweep(base: &SimConfig, counts: &[usize], seeds: &[u64]) -> Result<BTreeMap<RunKey, MetricsStore>> {
    let jobs = configs(base, counts, seeds)?;
    jobs.into_par_iter()
        .map(|(k, cfg)| crate::engine::run(&cfg).map(|m| (k, m)))
        .collect()
}

/// [`sweep`] on a dedicated pool of `threads` workers.
pub fn sweep_with_threads(
    base: &SimConfig,
    counts: &[usize],
    seeds: &[u64],
    threads: usize,
) -> Result<BTreeMap<RunKey, MetricsStore>> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;
    pool.install(|| sweep(base, counts, seeds))
}
