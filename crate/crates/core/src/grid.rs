//! Sidelink resource pool: slot/subchannel discretization, selection
//! windows and the transport block fit check.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Fraction of a transport block's resource elements spent on SCI and DMRS.
pub const CONTROL_OVERHEAD: f64 = 0.11;
const SUBCARRIERS_PER_PRB: u32 = 12;
const SYMBOLS_PER_SLOT: u32 = 14;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PoolConfig {
    pub slot_duration_ms: f64,
    pub reservation_period_slots: u32,
    pub num_subchannels: u32,
    pub prbs_per_subchannel: u32,
    pub t1: u32,
    pub t2: u32,
    pub subchannels_per_tb: u32,
    pub mcs: u8,
    /// Total transmissions per transport block (initial + blind retransmissions).
    pub sl_tx_trans_num: u32,
    pub bandwidth_mhz: u32,
    pub scs_khz: u32,
}

impl Default for PoolConfig {
    fn default() -> Self {
        PoolConfig {
            slot_duration_ms: 1.0,
            reservation_period_slots: 50,
            num_subchannels: 21,
            prbs_per_subchannel: 10,
            t1: 2,
            t2: 32,
            subchannels_per_tb: 1,
            mcs: 14,
            sl_tx_trans_num: 3,
            bandwidth_mhz: 40,
            scs_khz: 15,
        }
    }
}

/// Maximum transmission bandwidth configuration (PRBs) for 15 kHz SCS.
fn max_prbs(bandwidth_mhz: u32, scs_khz: u32) -> Option<u32> {
    if scs_khz != 15 {
        return None;
    }
    Some(match bandwidth_mhz {
        5 => 25,
        10 => 52,
        15 => 79,
        20 => 106,
        25 => 133,
        30 => 160,
        40 => 216,
        50 => 270,
        _ => return None,
    })
}

/// Modulation order and code rate for the supported MCS indices.
pub fn mcs_params(mcs: u8) -> Option<(u32, f64)> {
    match mcs {
        14 => Some((4, 616.0 / 1024.0)),
        _ => None,
    }
}

impl PoolConfig {
    pub fn total_prbs(&self) -> Option<u32> {
        max_prbs(self.bandwidth_mhz, self.scs_khz)
    }

    pub fn validate(&self) -> Result<()> {
        if self.slot_duration_ms != 1.0 || self.scs_khz != 15 {
            return Err(Error::invariant(
                "numerology 0 (15 kHz, 1 ms slots)",
                format!("slot_duration_ms={}, scs_khz={}", self.slot_duration_ms, self.scs_khz),
            ));
        }
        if self.t1 < 1 || self.t1 >= self.t2 || self.t2 > self.reservation_period_slots {
            return Err(Error::invariant(
                "1 <= t1 < t2 <= reservation_period",
                format!(
                    "t1={}, t2={}, reservation_period={}",
                    self.t1, self.t2, self.reservation_period_slots
                ),
            ));
        }
        let total = self.total_prbs().ok_or_else(|| {
            Error::invariant(
                "supported bandwidth",
                format!("{} MHz at {} kHz", self.bandwidth_mhz, self.scs_khz),
            )
        })?;
        if self.num_subchannels == 0 || self.prbs_per_subchannel == 0 {
            return Err(Error::invariant("non-empty pool", "num_subchannels and prbs_per_subchannel must be > 0"));
        }
        if self.num_subchannels * self.prbs_per_subchannel > total {
            return Err(Error::invariant(
                "num_subchannels * prbs_per_subchannel <= bandwidth PRBs",
                format!(
                    "{} * {} > {total}",
                    self.num_subchannels, self.prbs_per_subchannel
                ),
            ));
        }
        if self.subchannels_per_tb < 1 || self.subchannels_per_tb > self.num_subchannels {
            return Err(Error::invariant(
                "1 <= subchannels_per_tb <= num_subchannels",
                format!("subchannels_per_tb={}", self.subchannels_per_tb),
            ));
        }
        if mcs_params(self.mcs).is_none() {
            return Err(Error::invariant("supported MCS", format!("mcs={} (supported: 14)", self.mcs)));
        }
        if self.sl_tx_trans_num < 1 || self.sl_tx_trans_num > self.t2 - self.t1 + 1 {
            return Err(Error::invariant(
                "1 <= sl_tx_trans_num <= selection window length",
                format!("sl_tx_trans_num={}", self.sl_tx_trans_num),
            ));
        }
        Ok(())
    }

    pub fn rri(&self) -> u64 {
        u64::from(self.reservation_period_slots)
    }

    /// Bandwidth occupied by one transport block, in Hz.
    pub fn tb_bandwidth_hz(&self) -> f64 {
        f64::from(self.subchannels_per_tb * self.prbs_per_subchannel * SUBCARRIERS_PER_PRB * self.scs_khz) * 1e3
    }

    /// Subchannel index of the first subchannel a TB may start on, inclusive
    /// range of valid starts.
    pub fn max_start_subchannel(&self) -> u32 {
        self.num_subchannels - self.subchannels_per_tb
    }

    pub fn slot_in_period(&self, slot: u64) -> u32 {
        (slot % self.rri()) as u32
    }
}

/// One schedulable unit: a subchannel in a slot of the reservation period.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct SlResource {
    pub slot: u32,
    pub subchannel: u32,
}

impl SlResource {
    pub const fn new(slot: u32, subchannel: u32) -> Self {
        SlResource { slot, subchannel }
    }
}

/// Every resource of the pool in (slot, subchannel) lexicographic order.
pub fn pool_resources(cfg: &PoolConfig) -> Vec<SlResource> {
    (0..cfg.reservation_period_slots)
        .flat_map(|s| (0..cfg.num_subchannels).map(move |c| SlResource::new(s, c)))
        .collect()
}

/// Inclusive range of absolute slots.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SlotWindow {
    pub start: u64,
    pub end: u64,
}

impl SlotWindow {
    pub fn len(&self) -> u64 {
        self.end + 1 - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end < self.start
    }

    pub fn contains(&self, slot: u64) -> bool {
        (self.start..=self.end).contains(&slot)
    }

    pub fn slots(&self) -> std::ops::RangeInclusive<u64> {
        self.start..=self.end
    }
}

/// Candidate slots for a grant triggered at `now`: `[now + t1, now + t2]`.
pub fn selection_window(now: u64, cfg: &PoolConfig) -> SlotWindow {
    SlotWindow {
        start: now + u64::from(cfg.t1),
        end: now + u64::from(cfg.t2),
    }
}

/// Bytes one transport block carries at `mcs`, floored.
pub fn tb_capacity_bytes(cfg: &PoolConfig, mcs: u8) -> Result<u32> {
    let (qm, rate) = mcs_params(mcs).ok_or_else(|| Error::InvalidArgument(format!("unsupported MCS {mcs}")))?;
    let res = f64::from(cfg.prbs_per_subchannel * cfg.subchannels_per_tb * SUBCARRIERS_PER_PRB * SYMBOLS_PER_SLOT);
    let bits = res * f64::from(qm) * rate * (1.0 - CONTROL_OVERHEAD);
    Ok((bits / 8.0).floor() as u32)
}

pub fn tb_fits(payload: u32, cfg: &PoolConfig, mcs: u8) -> Result<bool> {
    if payload == 0 {
        return Err(Error::InvalidArgument("payload must be > 0 bytes".into()));
    }
    Ok(payload <= tb_capacity_bytes(cfg, mcs)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn default_pool_cardinality() {
        let cfg = PoolConfig::default();
        cfg.validate().unwrap();
        assert_eq!(pool_resources(&cfg).len(), 1050);
    }

    #[test]
    fn minimal_pool() {
        let cfg = PoolConfig {
            reservation_period_slots: 1,
            num_subchannels: 1,
            ..PoolConfig::default()
        };
        assert_eq!(pool_resources(&cfg), vec![SlResource::new(0, 0)]);
    }

    #[test]
    fn lexicographic_order() {
        let cfg = PoolConfig {
            num_subchannels: 2,
            ..PoolConfig::default()
        };
        let r = pool_resources(&cfg);
        assert_eq!(&r[..3], &[SlResource::new(0, 0), SlResource::new(0, 1), SlResource::new(1, 0)]);
        assert!(r.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn selection_window_bounds() {
        let cfg = PoolConfig::default();
        assert_eq!(selection_window(100, &cfg), SlotWindow { start: 102, end: 132 });
        assert_eq!(selection_window(0, &cfg), SlotWindow { start: 2, end: 32 });
        assert_eq!(selection_window(0, &cfg).len(), 31);
    }

    #[test]
    fn transport_block_fit() {
        let cfg = PoolConfig::default();
        // 10 PRB * 12 * 14 * 4 * (616/1024) * 0.89 / 8 = 449.7
        assert_eq!(tb_capacity_bytes(&cfg, 14).unwrap(), 449);
        assert!(tb_fits(300, &cfg, 14).unwrap());
        assert!(!tb_fits(5000, &cfg, 14).unwrap());
        assert!(tb_fits(0, &cfg, 14).is_err());
    }

    #[test]
    fn validation_rejects_bad_windows() {
        let bad = PoolConfig {
            t1: 40,
            ..PoolConfig::default()
        };
        assert!(matches!(bad.validate(), Err(Error::Invariant { .. })));
        let zero_t1 = PoolConfig {
            t1: 0,
            ..PoolConfig::default()
        };
        assert!(zero_t1.validate().is_err());
        let too_wide = PoolConfig {
            num_subchannels: 22,
            ..PoolConfig::default()
        };
        assert!(too_wide.validate().is_err());
    }

    proptest! {
        #[test]
        fn slot_mapping_is_total(slot in 0u64..10_000_000) {
            let cfg = PoolConfig::default();
            let s = cfg.slot_in_period(slot);
            prop_assert!(s < cfg.reservation_period_slots);
            prop_assert_eq!(u64::from(s), slot % 50);
        }

        #[test]
        fn window_never_includes_now(now in 0u64..1_000_000, t1 in 1u32..20, extra in 1u32..30) {
            let cfg = PoolConfig { t1, t2: t1 + extra, ..PoolConfig::default() };
            let w = selection_window(now, &cfg);
            prop_assert!(w.start > now);
            prop_assert_eq!(w.len(), u64::from(extra) + 1);
        }
    }
}
