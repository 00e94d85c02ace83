//! Packet reception ratio (PRR), packet inter-reception time (PIR) and
//! their percentile aggregation across UEs and seeds.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scenario::{GroupId, Scenario, UeId};

pub const RUN_CSV_HEADER: [&str; 7] = ["run_id", "group", "ue_id", "peer_id", "metric", "value", "unit"];
pub const AGGREGATE_CSV_HEADER: [&str; 7] = ["group_c_count", "group", "metric", "p5", "p50", "p95", "n_samples"];

/// One (packet, intended receiver) pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReceptionRecord {
    pub packet_id: u64,
    pub src: UeId,
    pub dst: UeId,
    pub sent_at: f64,
    /// Absent when none of the packet's transmissions decoded at `dst`.
    pub received_at: Option<f64>,
}

/// `N_received / N_sent` over (packet, receiver) pairs. `None` when there
/// is no intended receiver at all.
pub fn prr(records: &[ReceptionRecord]) -> Option<f64> {
    if records.is_empty() {
        return None;
    }
    let ok = records.iter().filter(|r| r.received_at.is_some()).count();
    Some(ok as f64 / records.len() as f64)
}

/// Mean gap between consecutive receptions (sorted, ms). `None` below two
/// receptions.
pub fn pir(receptions: &[f64]) -> Option<f64> {
    if receptions.len() < 2 {
        return None;
    }
    let sum: f64 = receptions.windows(2).map(|w| w[1] - w[0]).sum();
    Some(sum / (receptions.len() - 1) as f64)
}

/// Streaming accumulator for one (transmitter, receiver) pair.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct PairStats {
    pub sent: u64,
    pub received: u64,
    pub gap_sum_ms: f64,
    pub last_rx_ms: Option<f64>,
}

impl PairStats {
    pub fn record(&mut self, received_at: Option<f64>) {
        self.sent += 1;
        if let Some(t) = received_at {
            self.received += 1;
            if let Some(last) = self.last_rx_ms {
                debug_assert!(t >= last, "receptions out of order");
                self.gap_sum_ms += t - last;
            }
            self.last_rx_ms = Some(t);
        }
    }

    pub fn gaps(&self) -> u64 {
        self.received.saturating_sub(1)
    }

    pub fn prr(&self) -> Option<f64> {
        (self.sent > 0).then(|| self.received as f64 / self.sent as f64)
    }

    pub fn pir(&self) -> Option<f64> {
        (self.received >= 2).then(|| self.gap_sum_ms / self.gaps() as f64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UeMetrics {
    pub ue: UeId,
    pub group: GroupId,
    /// Intended receivers, aligned with `pairs`.
    pub peers: Vec<UeId>,
    pub pairs: Vec<PairStats>,
}

impl UeMetrics {
    pub fn prr(&self) -> Option<f64> {
        let sent: u64 = self.pairs.iter().map(|p| p.sent).sum();
        let received: u64 = self.pairs.iter().map(|p| p.received).sum();
        (sent > 0).then(|| received as f64 / sent as f64)
    }

    /// Every gap of every receiver pooled into one mean.
    pub fn pooled_pir(&self) -> Option<f64> {
        let gaps: u64 = self.pairs.iter().map(PairStats::gaps).sum();
        let sum: f64 = self.pairs.iter().map(|p| p.gap_sum_ms).sum();
        (gaps > 0).then(|| sum / gaps as f64)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunStats {
    pub slots: u64,
    pub transmissions: u64,
    pub packets_generated: u64,
    pub packets_dropped: u64,
    /// Slots x pairs of same-group scheduled UEs on overlapping subchannels.
    pub same_group_cochannel: u64,
    /// Decodes attempted by a UE transmitting in the same slot that
    /// succeeded; must stay zero.
    pub half_duplex_violations: u64,
    pub decodes: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsStore {
    pub run_id: String,
    pub scenario: Scenario,
    pub group_c_count: usize,
    pub seed: u64,
    pub ues: Vec<UeMetrics>,
    pub stats: RunStats,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Metric {
    Prr,
    Pir,
}

impl Metric {
    pub fn as_str(self) -> &'static str {
        match self {
            Metric::Prr => "prr",
            Metric::Pir => "pir",
        }
    }

    pub fn unit(self) -> &'static str {
        match self {
            Metric::Prr => "ratio",
            Metric::Pir => "ms",
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// How PIR samples are formed before taking percentiles.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PirMode {
    /// One PIR per (transmitter, receiver) pair.
    #[default]
    PerPair,
    /// One PIR per transmitter, all of its receivers' gaps pooled.
    PerUe,
}

impl PirMode {
    fn csv_metric(self) -> &'static str {
        match self {
            PirMode::PerPair => "pir",
            PirMode::PerUe => "pir_ue",
        }
    }
}

pub fn run_id(scenario: Scenario, group_c_count: usize, seed: u64) -> String {
    format!("{scenario}-c{group_c_count}-s{seed}")
}

/// Background count encoded in a run id (`...-c<count>-s<seed>`).
pub fn parse_run_count(run_id: &str) -> Option<usize> {
    run_id
        .rsplit('-')
        .find_map(|tok| tok.strip_prefix('c').and_then(|n| n.parse().ok()))
}

impl MetricsStore {
    pub fn group_ues(&self, group: GroupId) -> impl Iterator<Item = &UeMetrics> {
        self.ues.iter().filter(move |u| u.group == group)
    }

    /// Aggregate PRR of a whole group (all its pairs pooled).
    pub fn group_prr(&self, group: GroupId) -> Option<f64> {
        let (mut sent, mut recv) = (0u64, 0u64);
        for p in self.group_ues(group).flat_map(|u| &u.pairs) {
            sent += p.sent;
            recv += p.received;
        }
        (sent > 0).then(|| recv as f64 / sent as f64)
    }

    pub fn samples(&self, pir_mode: PirMode) -> Vec<Sample> {
        let mut out = Vec::new();
        for u in &self.ues {
            if let Some(v) = u.prr() {
                out.push(Sample::new(self.group_c_count, u.group, Metric::Prr, v));
            }
            match pir_mode {
                PirMode::PerPair => out.extend(
                    u.pairs
                        .iter()
                        .filter_map(PairStats::pir)
                        .map(|v| Sample::new(self.group_c_count, u.group, Metric::Pir, v)),
                ),
                PirMode::PerUe => out.extend(
                    u.pooled_pir()
                        .map(|v| Sample::new(self.group_c_count, u.group, Metric::Pir, v)),
                ),
            }
        }
        out
    }

    /// Per-run CSV: one `prr` row per UE, one `pir` row per pair and one
    /// `pir_ue` row per UE.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(RUN_CSV_HEADER)?;
        for u in &self.ues {
            let (g, id) = (u.group.as_str(), u.ue.to_string());
            if let Some(v) = u.prr() {
                wr.write_record([&self.run_id, g, &id, "", "prr", &v.to_string(), "ratio"])?;
            }
            for (peer, p) in u.peers.iter().zip(&u.pairs) {
                if let Some(v) = p.pir() {
                    wr.write_record([&self.run_id, g, &id, &peer.to_string(), "pir", &v.to_string(), "ms"])?;
                }
            }
            if let Some(v) = u.pooled_pir() {
                wr.write_record([&self.run_id, g, &id, "", "pir_ue", &v.to_string(), "ms"])?;
            }
        }
        wr.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample {
    pub group_c_count: usize,
    pub group: GroupId,
    pub metric: Metric,
    pub value: f64,
}

impl Sample {
    pub fn new(group_c_count: usize, group: GroupId, metric: Metric, value: f64) -> Self {
        Sample {
            group_c_count,
            group,
            metric,
            value,
        }
    }
}

/// Row of a per-run CSV.
#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct RunCsvRow {
    pub run_id: String,
    pub group: String,
    pub ue_id: usize,
    pub peer_id: Option<usize>,
    pub metric: String,
    pub value: f64,
    pub unit: String,
}

pub fn read_run_csv<R: Read>(r: R) -> Result<Vec<RunCsvRow>> {
    let mut rd = csv::Reader::from_reader(r);
    let headers = rd.headers()?.clone();
    if headers.iter().ne(RUN_CSV_HEADER) {
        return Err(Error::InvalidArgument(format!(
            "unexpected per-run CSV header `{}`",
            headers.iter().collect::<Vec<_>>().join(",")
        )));
    }
    rd.deserialize().map(|row| row.map_err(Error::from)).collect()
}

/// Samples contained in per-run CSV rows.
pub fn samples_from_rows(rows: &[RunCsvRow], pir_mode: PirMode) -> Result<Vec<Sample>> {
    let mut out = Vec::new();
    for row in rows {
        let metric = match row.metric.as_str() {
            "prr" => Metric::Prr,
            m if m == pir_mode.csv_metric() => Metric::Pir,
            _ => continue,
        };
        let count = parse_run_count(&row.run_id)
            .ok_or_else(|| Error::InvalidArgument(format!("run id `{}` carries no group C count", row.run_id)))?;
        let group = GroupId::parse(&row.group)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown group `{}`", row.group)))?;
        out.push(Sample::new(count, group, metric, row.value));
    }
    Ok(out)
}

/// Linear interpolation between order statistics (inclusive method):
/// position `p/100 * (n - 1)` in the sorted sample.
pub fn percentile(sorted: &[f64], p: f64) -> f64 {
    assert!(!sorted.is_empty(), "percentile of an empty sample");
    let pos = p / 100.0 * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PercentileRow {
    pub group_c_count: usize,
    pub group: GroupId,
    pub metric: Metric,
    pub p5: f64,
    pub p50: f64,
    pub p95: f64,
    pub n_samples: usize,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct PercentileSeries {
    pub rows: Vec<PercentileRow>,
}

impl PercentileSeries {
    pub fn get(&self, group_c_count: usize, group: GroupId, metric: Metric) -> Option<&PercentileRow> {
        self.rows
            .iter()
            .find(|r| r.group_c_count == group_c_count && r.group == group && r.metric == metric)
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(AGGREGATE_CSV_HEADER)?;
        for r in &self.rows {
            wr.write_record([
                r.group_c_count.to_string(),
                r.group.to_string(),
                r.metric.to_string(),
                r.p5.to_string(),
                r.p50.to_string(),
                r.p95.to_string(),
                r.n_samples.to_string(),
            ])?;
        }
        wr.flush()?;
        Ok(())
    }
}

/// Pools samples per (count, group, metric) and takes p5/p50/p95 of the
/// pooled values.
pub fn aggregate_samples(samples: &[Sample]) -> PercentileSeries {
    let mut pooled: BTreeMap<(usize, GroupId, Metric), Vec<f64>> = BTreeMap::new();
    for s in samples {
        pooled.entry((s.group_c_count, s.group, s.metric)).or_default().push(s.value);
    }
    let rows = pooled
        .into_iter()
        .map(|((count, group, metric), mut v)| {
            v.sort_by(f64::total_cmp);
            PercentileRow {
                group_c_count: count,
                group,
                metric,
                p5: percentile(&v, 5.0),
                p50: percentile(&v, 50.0),
                p95: percentile(&v, 95.0),
                n_samples: v.len(),
            }
        })
        .collect();
    PercentileSeries { rows }
}

pub fn aggregate<'a>(stores: impl IntoIterator<Item = &'a MetricsStore>, pir_mode: PirMode) -> PercentileSeries {
    let samples: Vec<Sample> = stores.into_iter().flat_map(|s| s.samples(pir_mode)).collect();
    aggregate_samples(&samples)
}
