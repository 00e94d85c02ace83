//! Simulation configuration: TOML files, command-line overrides and the
//! provenance of every resolved key.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use toml::{Table, Value};

use crate::error::{Error, Result};
use crate::grid::{tb_fits, PoolConfig};
use crate::metrics::PirMode;
use crate::mrd::GroupSchedConfig;
use crate::radio::RadioConfig;
use crate::scenario::{Scenario, MAX_BACKGROUND};
use crate::sps::SensingConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlatoonConfig {
    pub size: usize,
    pub rate_kbps: f64,
}

impl Default for PlatoonConfig {
    fn default() -> Self {
        PlatoonConfig { size: 8, rate_kbps: 24.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BackgroundConfig {
    pub count: usize,
    pub rate_kbps: f64,
    /// Lifts the [1, 170] bound on `count`.
    pub allow_out_of_range: bool,
}

impl Default for BackgroundConfig {
    fn default() -> Self {
        BackgroundConfig {
            count: 50,
            rate_kbps: 48.0,
            allow_out_of_range: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrafficConfig {
    pub payload_bytes: u32,
    /// Per-UE FIFO depth; overflow drops the oldest packet.
    pub queue_depth: usize,
}

impl Default for TrafficConfig {
    fn default() -> Self {
        TrafficConfig {
            payload_bytes: 300,
            queue_depth: 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetricsConfig {
    /// Broadcast audience radius.
    pub eval_range_m: f64,
    pub pir_mode: PirMode,
}

impl Default for MetricsConfig {
    fn default() -> Self {
        MetricsConfig {
            eval_range_m: 300.0,
            pir_mode: PirMode::PerPair,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub scenario: Scenario,
    pub seed: u64,
    pub sim_time_s: f64,
    pub inter_vehicle_gap_m: f64,
    pub inter_lane_gap_m: f64,
    pub highway_length_m: f64,
    pub lanes: u32,
    pub group_a: PlatoonConfig,
    pub group_b: PlatoonConfig,
    pub group_c: BackgroundConfig,
    pub traffic: TrafficConfig,
    pub pool: PoolConfig,
    pub radio: RadioConfig,
    pub mode2: SensingConfig,
    pub mode2d: GroupSchedConfig,
    pub metrics: MetricsConfig,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            scenario: Scenario::S1AllSensing,
            seed: 1,
            sim_time_s: 60.0,
            inter_vehicle_gap_m: 5.0,
            inter_lane_gap_m: 4.0,
            highway_length_m: 2000.0,
            lanes: 6,
            group_a: PlatoonConfig::default(),
            group_b: PlatoonConfig::default(),
            group_c: BackgroundConfig::default(),
            traffic: TrafficConfig::default(),
            pool: PoolConfig::default(),
            radio: RadioConfig::default(),
            mode2: SensingConfig::default(),
            mode2d: GroupSchedConfig::default(),
            metrics: MetricsConfig::default(),
        }
    }
}

impl SimConfig {
    pub fn total_slots(&self) -> u64 {
        (self.sim_time_s * 1000.0 / self.pool.slot_duration_ms).round() as u64
    }

    pub fn validate(&self) -> Result<()> {
        self.pool.validate()?;
        self.radio.validate()?;
        self.mode2.validate()?;
        self.mode2d.validate(&self.pool)?;
        if !(self.sim_time_s >= 0.0 && self.sim_time_s.is_finite()) {
            return Err(Error::invariant("sim_time_s >= 0", format!("got {}", self.sim_time_s)));
        }
        if !(self.inter_vehicle_gap_m > 0.0) || !(self.inter_lane_gap_m > 0.0) {
            return Err(Error::invariant(
                "gaps > 0",
                format!(
                    "inter_vehicle_gap_m={}, inter_lane_gap_m={}",
                    self.inter_vehicle_gap_m, self.inter_lane_gap_m
                ),
            ));
        }
        if self.lanes < 3 {
            return Err(Error::invariant("lanes >= 3", format!("got {}", self.lanes)));
        }
        for (name, g) in [("group_a", &self.group_a), ("group_b", &self.group_b)] {
            if g.size == 0 {
                return Err(Error::invariant("platoon size >= 1", format!("{name}.size = 0")));
            }
            let span = (g.size - 1) as f64 * self.inter_vehicle_gap_m;
            if span > self.highway_length_m {
                return Err(Error::invariant(
                    "platoon fits on the highway",
                    format!("{name} spans {span} m on a {} m highway", self.highway_length_m),
                ));
            }
        }
        if !self.group_c.allow_out_of_range && !(1..=MAX_BACKGROUND).contains(&self.group_c.count) {
            return Err(Error::invariant(
                "group_c.count in [1, 170]",
                format!("got {}; set group_c.allow_out_of_range = true to override", self.group_c.count),
            ));
        }
        for (name, rate) in [
            ("group_a.rate_kbps", self.group_a.rate_kbps),
            ("group_b.rate_kbps", self.group_b.rate_kbps),
            ("group_c.rate_kbps", self.group_c.rate_kbps),
        ] {
            if !(rate > 0.0 && rate.is_finite()) {
                return Err(Error::invariant("rate > 0", format!("{name} = {rate}")));
            }
        }
        if self.traffic.queue_depth == 0 {
            return Err(Error::invariant("traffic.queue_depth >= 1", "got 0"));
        }
        if !tb_fits(self.traffic.payload_bytes, &self.pool, self.pool.mcs)? {
            return Err(Error::invariant(
                "payload fits one transport block",
                format!(
                    "{} B exceeds the {}-subchannel capacity",
                    self.traffic.payload_bytes, self.pool.subchannels_per_tb
                ),
            ));
        }
        if !(self.metrics.eval_range_m > 0.0) {
            return Err(Error::invariant("metrics.eval_range_m > 0", format!("got {}", self.metrics.eval_range_m)));
        }
        if self.mode2d.leader_index >= self.group_a.size.min(self.group_b.size) {
            return Err(Error::invariant(
                "mode2d.leader_index < group size",
                format!("leader_index={}", self.mode2d.leader_index),
            ));
        }
        Ok(())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("SimConfig serializes to TOML")
    }
}

/// Config for a named scenario with every other key at its default.
pub fn preset(name: &str) -> Result<SimConfig> {
    Ok(SimConfig {
        scenario: Scenario::parse(name)?,
        ..SimConfig::default()
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Default,
    File,
    Flag,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResolvedConfig {
    pub config: SimConfig,
    /// Every leaf key (dotted path) and where its value came from.
    pub provenance: BTreeMap<String, Provenance>,
}

fn flatten(prefix: &str, table: &Table, out: &mut BTreeMap<String, Value>) {
    for (k, v) in table {
        let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
        match v {
            Value::Table(t) => flatten(&key, t, out),
            other => {
                out.insert(key, other.clone());
            }
        }
    }
}

fn insert_dotted(table: &mut Table, key: &str, value: Value) {
    let mut parts: Vec<&str> = key.split('.').collect();
    let leaf = parts.pop().expect("non-empty key");
    let mut cur = table;
    for p in parts {
        cur = cur
            .entry(p)
            .or_insert_with(|| Value::Table(Table::new()))
            .as_table_mut()
            .expect("valid keys never nest under a scalar");
    }
    cur.insert(leaf.to_string(), value);
}

/// Flag values are read as TOML literals; anything that does not parse as
/// one (e.g. `scenario3`) is taken as a bare string.
fn parse_flag_value(raw: &str) -> Value {
    toml::from_str::<Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| Value::String(raw.to_string()))
}

fn default_keys() -> BTreeMap<String, Value> {
    let table = Table::try_from(SimConfig::default()).expect("defaults serialize");
    let mut keys = BTreeMap::new();
    flatten("", &table, &mut keys);
    keys
}

/// All recognised dotted keys.
pub fn valid_keys() -> Vec<String> {
    default_keys().into_keys().collect()
}

impl ResolvedConfig {
    pub fn defaults() -> Self {
        Self::from_toml_str("", &[]).expect("defaults are valid")
    }

    /// Resolves defaults <- `text` <- `overrides` and validates the result.
    pub fn from_toml_str(text: &str, overrides: &[(String, String)]) -> Result<Self> {
        Self::resolve(text, overrides, Path::new("<inline>"))
    }

    fn resolve(text: &str, overrides: &[(String, String)], path: &Path) -> Result<Self> {
        let defaults = default_keys();
        let valid = || defaults.keys().cloned().collect::<Vec<_>>();
        let file: Table = toml::from_str(text).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        let mut file_keys = BTreeMap::new();
        flatten("", &file, &mut file_keys);

        let mut provenance: BTreeMap<String, Provenance> =
            defaults.keys().map(|k| (k.clone(), Provenance::Default)).collect();
        let mut merged = Table::new();
        for (k, v) in file_keys {
            if !defaults.contains_key(&k) {
                return Err(Error::UnknownKey { key: k, valid: valid() });
            }
            provenance.insert(k.clone(), Provenance::File);
            insert_dotted(&mut merged, &k, v);
        }
        for (k, raw) in overrides {
            if !defaults.contains_key(k) {
                return Err(Error::UnknownKey {
                    key: k.clone(),
                    valid: valid(),
                });
            }
            provenance.insert(k.clone(), Provenance::Flag);
            insert_dotted(&mut merged, k, parse_flag_value(raw));
        }
        let config: SimConfig = merged.try_into().map_err(|e: toml::de::Error| Error::Parse {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        config.validate()?;
        Ok(ResolvedConfig { config, provenance })
    }

    /// The effective configuration as TOML, each key annotated with where
    /// its value came from. Loading it back reproduces `config` exactly.
    pub fn manifest(&self) -> String {
        let mut out = String::from("# resolved simulation configuration\n");
        let non_default: Vec<_> = self
            .provenance
            .iter()
            .filter(|(_, p)| **p != Provenance::Default)
            .collect();
        if non_default.is_empty() {
            out.push_str("# every key at its default\n");
        }
        for (k, p) in non_default {
            let _ = writeln!(out, "# {k}: {}", format!("{p:?}").to_lowercase());
        }
        out.push('\n');
        out.push_str(&self.config.to_toml());
        out
    }

    pub fn provenance_of(&self, key: &str) -> Option<Provenance> {
        self.provenance.get(key).copied()
    }
}

/// Reads `path` (or nothing) and applies `overrides` as `key=value` flags.
pub fn load_config(path: Option<&Path>, overrides: &[(String, String)]) -> Result<ResolvedConfig> {
    match path {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| Error::Parse {
                path: p.to_path_buf(),
                message: e.to_string(),
            })?;
            ResolvedConfig::resolve(&text, overrides, p)
        }
        None => ResolvedConfig::from_toml_str("", overrides),
    }
}
