//! Link budget, co-channel SINR and threshold capture decoding.

use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::rng::SimRng;
use crate::scenario::{Position, UeDesc, UeId};

/// Distances below this are clamped before evaluating the pathloss law.
pub const MIN_DISTANCE_M: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkBudget {
    pub tx_power_dbm: f64,
    pub carrier_freq_ghz: f64,
    pub noise_figure_db: f64,
    pub thermal_noise_dbm_hz: f64,
    pub shadowing_sigma_db: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RadioConfig {
    pub tx_power_dbm: f64,
    pub carrier_freq_ghz: f64,
    pub noise_figure_db: f64,
    pub thermal_noise_dbm_hz: f64,
    pub shadowing_sigma_db: f64,
    /// Minimum SINR at which a transport block (and its reservation) decodes.
    pub capture_threshold_db: f64,
}

impl Default for RadioConfig {
    fn default() -> Self {
        RadioConfig {
            tx_power_dbm: 23.0,
            carrier_freq_ghz: 5.9,
            noise_figure_db: 9.0,
            thermal_noise_dbm_hz: -174.0,
            shadowing_sigma_db: 3.0,
            capture_threshold_db: 6.5,
        }
    }
}

impl RadioConfig {
    pub fn budget(&self) -> LinkBudget {
        LinkBudget {
            tx_power_dbm: self.tx_power_dbm,
            carrier_freq_ghz: self.carrier_freq_ghz,
            noise_figure_db: self.noise_figure_db,
            thermal_noise_dbm_hz: self.thermal_noise_dbm_hz,
            shadowing_sigma_db: self.shadowing_sigma_db,
        }
    }

    pub fn validate(&self) -> crate::Result<()> {
        if !(self.carrier_freq_ghz > 0.0) || !self.tx_power_dbm.is_finite() {
            return Err(crate::Error::invariant(
                "tx power and carrier frequency positive",
                format!("tx_power_dbm={}, carrier_freq_ghz={}", self.tx_power_dbm, self.carrier_freq_ghz),
            ));
        }
        if !(self.shadowing_sigma_db >= 0.0) {
            return Err(crate::Error::invariant(
                "radio.shadowing_sigma_db >= 0",
                format!("got {}", self.shadowing_sigma_db),
            ));
        }
        if !self.capture_threshold_db.is_finite() || !self.noise_figure_db.is_finite() {
            return Err(crate::Error::invariant("finite radio parameters", "threshold and noise figure"));
        }
        Ok(())
    }
}

pub fn db_to_lin(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn lin_to_db(lin: f64) -> f64 {
    10.0 * lin.log10()
}

/// Free-space style highway line-of-sight law,
/// `32.4 + 20 log10(d) + 20 log10(f_GHz)`, with `d` clamped to 1 m.
pub fn pathloss_db(distance_m: f64, freq_ghz: f64) -> f64 {
    let d = distance_m.max(MIN_DISTANCE_M);
    32.4 + 20.0 * d.log10() + 20.0 * freq_ghz.log10()
}

pub fn noise_dbm(budget: &LinkBudget, bandwidth_hz: f64) -> f64 {
    budget.thermal_noise_dbm_hz + 10.0 * bandwidth_hz.log10() + budget.noise_figure_db
}

/// Received power of `tx` at `rx`. `shadow_db` is a loss (positive values
/// attenuate).
///
/// Panics if `tx` and `rx` are the same UE.
pub fn rx_power_dbm(tx: &UeDesc, rx: &UeDesc, budget: &LinkBudget, shadow_db: f64) -> f64 {
    assert_ne!(tx.id, rx.id, "a UE has no link to itself");
    budget.tx_power_dbm - pathloss_db(tx.position.distance(&rx.position), budget.carrier_freq_ghz) - shadow_db
}

/// `S / (N + sum I)` evaluated in the linear domain, returned in dB.
pub fn slot_sinr(signal_dbm: f64, interferers_dbm: &[f64], noise_dbm: f64) -> f64 {
    let interference: f64 = interferers_dbm.iter().map(|&i| db_to_lin(i)).sum();
    lin_to_db(db_to_lin(signal_dbm) / (db_to_lin(noise_dbm) + interference))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RxState {
    Listening,
    Transmitting,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RxCause {
    Ok,
    BelowThreshold,
    HalfDuplex,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RxOutcome {
    pub rsrp_dbm: f64,
    pub sinr_db: f64,
    pub decoded: bool,
    pub cause: RxCause,
}

/// Capture rule: a listening receiver decodes iff `sinr >= threshold`
/// (inclusive). A transmitting receiver decodes nothing.
pub fn decode(sinr_db: f64, threshold_db: f64, state: RxState) -> (bool, RxCause) {
    match state {
        RxState::Transmitting => (false, RxCause::HalfDuplex),
        RxState::Listening if sinr_db >= threshold_db => (true, RxCause::Ok),
        RxState::Listening => (false, RxCause::BelowThreshold),
    }
}

/// Per-run radio environment: the static received-power table for every
/// ordered pair of UEs plus noise and capture threshold.
#[derive(Debug, Clone)]
pub struct RadioEnv {
    n: usize,
    rx_mw: Vec<f64>,
    noise_mw: f64,
    threshold_db: f64,
    threshold_lin: f64,
}

impl RadioEnv {
    /// Builds the gain table. Shadowing is drawn once per unordered pair,
    /// so `a -> b` and `b -> a` see the same loss.
    pub fn new(
        ues: &[UeDesc],
        budget: &LinkBudget,
        bandwidth_hz: f64,
        threshold_db: f64,
        rng: &mut SimRng,
    ) -> RadioEnv {
        let n = ues.len();
        let mut rx_mw = vec![0.0; n * n];
        let shadow = (budget.shadowing_sigma_db > 0.0)
            .then(|| Normal::new(0.0, budget.shadowing_sigma_db).expect("sigma validated"));
        for i in 0..n {
            for j in (i + 1)..n {
                let s = shadow.as_ref().map_or(0.0, |d| d.sample(rng));
                let p = rx_power_dbm(&ues[i], &ues[j], budget, s);
                rx_mw[i * n + j] = db_to_lin(p);
                rx_mw[j * n + i] = db_to_lin(p);
            }
        }
        RadioEnv {
            n,
            rx_mw,
            noise_mw: db_to_lin(noise_dbm(budget, bandwidth_hz)),
            threshold_db,
            threshold_lin: db_to_lin(threshold_db),
        }
    }

    /// Environment from an explicit received-power table (`table[tx][rx]`,
    /// dBm). Diagonal entries are ignored.
    pub fn from_table(table: &[Vec<f64>], noise_dbm: f64, threshold_db: f64) -> RadioEnv {
        let n = table.len();
        let mut rx_mw = vec![0.0; n * n];
        for (i, row) in table.iter().enumerate() {
            assert_eq!(row.len(), n, "received-power table must be square");
            for (j, &p) in row.iter().enumerate() {
                if i != j {
                    rx_mw[i * n + j] = db_to_lin(p);
                }
            }
        }
        RadioEnv {
            n,
            rx_mw,
            noise_mw: db_to_lin(noise_dbm),
            threshold_db,
            threshold_lin: db_to_lin(threshold_db),
        }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn threshold_db(&self) -> f64 {
        self.threshold_db
    }

    pub fn noise_dbm(&self) -> f64 {
        lin_to_db(self.noise_mw)
    }

    #[inline]
    pub fn rx_mw(&self, tx: UeId, rx: UeId) -> f64 {
        self.rx_mw[tx.0 * self.n + rx.0]
    }

    pub fn rx_power_dbm(&self, tx: UeId, rx: UeId) -> f64 {
        lin_to_db(self.rx_mw(tx, rx))
    }

    fn interference_mw(&self, rx: UeId, wanted: UeId, co_channel: &[UeId]) -> f64 {
        co_channel
            .iter()
            .filter(|&&i| i != wanted && i != rx)
            .map(|&i| self.rx_mw(i, rx))
            .sum()
    }

    /// Fast path of [`RadioEnv::outcome`] for a listening receiver.
    /// `co_channel` may include `wanted` itself; it is skipped.
    #[inline]
    pub fn decodes(&self, rx: UeId, wanted: UeId, co_channel: &[UeId]) -> bool {
        let s = self.rx_mw(wanted, rx);
        s >= self.threshold_lin * (self.noise_mw + self.interference_mw(rx, wanted, co_channel))
    }

    pub fn sinr_db(&self, rx: UeId, wanted: UeId, co_channel: &[UeId]) -> f64 {
        let s = self.rx_mw(wanted, rx);
        lin_to_db(s / (self.noise_mw + self.interference_mw(rx, wanted, co_channel)))
    }

    pub fn outcome(&self, rx: UeId, wanted: UeId, co_channel: &[UeId], state: RxState) -> RxOutcome {
        let sinr = self.sinr_db(rx, wanted, co_channel);
        let (decoded, cause) = decode(sinr, self.threshold_db, state);
        RxOutcome {
            rsrp_dbm: self.rx_power_dbm(wanted, rx),
            sinr_db: sinr,
            decoded,
            cause,
        }
    }
}

/// Convenience for tests and examples: distance-only received power.
pub fn rx_power_at(budget: &LinkBudget, a: Position, b: Position) -> f64 {
    budget.tx_power_dbm - pathloss_db(a.distance(&b), budget.carrier_freq_ghz)
}
