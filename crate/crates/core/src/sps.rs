//! Mode 2: sensing-based semi-persistent resource selection.
//!
//! A UE looks back over the last `t0` slots, collects the reservations it
//! could decode, projects them one reservation period ahead and drops every
//! candidate of its selection window that they hit with RSRP above the
//! exclusion threshold. If fewer than `candidate_floor` of the window
//! survives, the threshold is raised by `threshold_step_db` and the
//! exclusion redone.

use rand::seq::IndexedRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{PoolConfig, SlResource, SlotWindow};
use crate::ledger::SlotLedger;
use crate::radio::RadioEnv;
use crate::rng::SimRng;
use crate::scenario::UeId;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SensingConfig {
    pub t0_slots: u32,
    pub rsrp_threshold_dbm: f64,
    pub threshold_step_db: f64,
    pub candidate_floor: f64,
    pub prob_keep: f64,
    pub counter_min: u32,
    pub counter_max: u32,
}

impl Default for SensingConfig {
    fn default() -> Self {
        SensingConfig {
            t0_slots: 100,
            rsrp_threshold_dbm: -128.0,
            threshold_step_db: 3.0,
            candidate_floor: 0.2,
            prob_keep: 0.0,
            counter_min: 5,
            counter_max: 15,
        }
    }
}

impl SensingConfig {
    pub fn validate(&self) -> Result<()> {
        if self.t0_slots == 0 {
            return Err(Error::invariant("mode2.t0_slots >= 1", "got 0"));
        }
        if !(self.threshold_step_db > 0.0) {
            return Err(Error::invariant("mode2.threshold_step_db > 0", format!("got {}", self.threshold_step_db)));
        }
        if !(self.candidate_floor > 0.0 && self.candidate_floor <= 1.0) {
            return Err(Error::invariant("mode2.candidate_floor in (0, 1]", format!("got {}", self.candidate_floor)));
        }
        if !(0.0..=1.0).contains(&self.prob_keep) {
            return Err(Error::invariant("mode2.prob_keep in [0, 1]", format!("got {}", self.prob_keep)));
        }
        if self.counter_min < 1 || self.counter_min > self.counter_max {
            return Err(Error::invariant(
                "1 <= mode2.counter_min <= mode2.counter_max",
                format!("counter_min={}, counter_max={}", self.counter_min, self.counter_max),
            ));
        }
        if !self.rsrp_threshold_dbm.is_finite() {
            return Err(Error::invariant("finite mode2.rsrp_threshold_dbm", "got non-finite"));
        }
        Ok(())
    }
}

/// A decoded reservation announcement.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SensingRecord {
    pub slot: u64,
    pub resource: SlResource,
    pub width: u32,
    pub measured_rsrp: f64,
    /// Last absolute slot covered by the announced reservation.
    pub reserved_until: u64,
}

/// A blind retransmission relative to the grant's first transmission.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Retx {
    pub offset: u32,
    pub subchannel: u32,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Grant {
    pub resource: SlResource,
    /// Absolute slot of the first transmission occasion.
    pub first_slot: u64,
    pub rri: u32,
    pub reselection_counter: u32,
    pub retx: Vec<Retx>,
}

impl Grant {
    /// (slot offset, subchannel) of every transmission in one occasion,
    /// the first transmission at offset 0.
    pub fn pattern(&self) -> impl Iterator<Item = (u32, u32)> + '_ {
        std::iter::once((0, self.resource.subchannel)).chain(self.retx.iter().map(|r| (r.offset, r.subchannel)))
    }

    pub fn span(&self) -> u32 {
        self.retx.iter().map(|r| r.offset).max().unwrap_or(0)
    }
}

/// Reservations `ue` decoded during `[now - t0, now)`. Slots in which `ue`
/// itself transmitted yield nothing.
pub fn sense(ue: UeId, ledger: &SlotLedger, now: u64, t0: u32, rri: u32, env: &RadioEnv) -> Vec<SensingRecord> {
    let mut out = Vec::new();
    let mut co = Vec::new();
    for rec in ledger.range(now.saturating_sub(u64::from(t0)), now) {
        if rec.transmitted(ue) {
            continue;
        }
        for e in rec.txs.iter().filter(|e| e.reservation) {
            rec.co_channel(e, &mut co);
            if env.decodes(ue, e.tx, &co) {
                out.push(SensingRecord {
                    slot: rec.slot,
                    resource: e.resource,
                    width: e.width,
                    measured_rsrp: env.rx_power_dbm(e.tx, ue),
                    reserved_until: rec.slot + u64::from(rri),
                });
            }
        }
    }
    out
}

/// A candidate in absolute time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Candidate {
    pub slot: u64,
    pub subchannel: u32,
}

impl Candidate {
    pub fn resource(&self, rri: u32) -> SlResource {
        SlResource::new((self.slot % u64::from(rri)) as u32, self.subchannel)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CandidateSet {
    pub candidates: Vec<Candidate>,
    /// Exclusion threshold in force when the floor was met.
    pub threshold_dbm: f64,
    /// Number of resources in the window before exclusion.
    pub total: usize,
}

/// Window resources left after RSRP-based exclusion, relaxing the
/// threshold in `threshold_step_db` increments until at least
/// `candidate_floor` of the window remains.
///
/// A record excludes a candidate when the candidate lies a whole number of
/// reservation periods after the record (up to `reserved_until`), their
/// subchannels overlap and the measured RSRP reaches the threshold.
pub fn candidate_resources(
    records: &[SensingRecord],
    window: SlotWindow,
    threshold_dbm: f64,
    pool: &PoolConfig,
    sensing: &SensingConfig,
) -> CandidateSet {
    let starts = pool.max_start_subchannel() + 1;
    let all: Vec<Candidate> = window
        .slots()
        .flat_map(|slot| (0..starts).map(move |subchannel| Candidate { slot, subchannel }))
        .collect();
    let total = all.len();
    let required = (sensing.candidate_floor * total as f64).ceil() as usize;
    let rri = pool.rri();
    let width = pool.subchannels_per_tb;

    // Strongest reservation hitting each candidate.
    let mut strongest = vec![f64::NEG_INFINITY; total];
    for r in records {
        let mut slot = r.slot + rri;
        while slot <= r.reserved_until && slot <= window.end {
            if slot >= window.start {
                let row = ((slot - window.start) * u64::from(starts)) as usize;
                let lo = (r.resource.subchannel + 1).saturating_sub(width);
                let hi = (r.resource.subchannel + r.width - 1).min(starts - 1);
                for sc in lo..=hi {
                    let s = &mut strongest[row + sc as usize];
                    *s = s.max(r.measured_rsrp);
                }
            }
            slot += rri;
        }
    }

    let mut threshold = threshold_dbm;
    loop {
        let remaining = strongest.iter().filter(|&&s| s < threshold).count();
        if remaining >= required {
            let candidates = all
                .iter()
                .zip(&strongest)
                .filter(|(_, &s)| s < threshold)
                .map(|(c, _)| *c)
                .collect();
            return CandidateSet {
                candidates,
                threshold_dbm: threshold,
                total,
            };
        }
        threshold += sensing.threshold_step_db;
    }
}

pub fn draw_counter(sensing: &SensingConfig, rng: &mut SimRng) -> u32 {
    rng.random_range(sensing.counter_min..=sensing.counter_max)
}

/// Picks an initial resource uniformly among `candidates`, then
/// `sl_tx_trans_num - 1` retransmission slots uniformly among the other
/// candidate slots at most `t2 - t1 + 1` slots away (one candidate
/// subchannel drawn per slot). Transmissions are ordered in time; the
/// earliest becomes the grant's anchor.
pub fn select_grant(
    candidates: &[Candidate],
    rng: &mut SimRng,
    pool: &PoolConfig,
    sensing: &SensingConfig,
) -> Result<Grant> {
    let initial = *candidates
        .choose(rng)
        .ok_or_else(|| Error::InvalidArgument("empty candidate set".into()))?;
    let reach = u64::from(pool.t2 - pool.t1 + 1);

    let mut slots: Vec<u64> = candidates
        .iter()
        .map(|c| c.slot)
        .filter(|&s| s != initial.slot && s.abs_diff(initial.slot) <= reach)
        .collect();
    slots.dedup();

    let n_retx = (pool.sl_tx_trans_num as usize - 1).min(slots.len());
    let mut txs = vec![initial];
    for &slot in slots.choose_multiple(rng, n_retx) {
        let in_slot: Vec<&Candidate> = candidates.iter().filter(|c| c.slot == slot).collect();
        txs.push(**in_slot.choose(rng).expect("slot taken from candidates"));
    }
    txs.sort();

    let anchor = txs[0];
    Ok(Grant {
        resource: anchor.resource(pool.reservation_period_slots),
        first_slot: anchor.slot,
        rri: pool.reservation_period_slots,
        reselection_counter: draw_counter(sensing, rng),
        retx: txs[1..]
            .iter()
            .map(|c| Retx {
                offset: (c.slot - anchor.slot) as u32,
                subchannel: c.subchannel,
            })
            .collect(),
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Reselection {
    /// Same resources, fresh counter.
    Keep(Grant),
    /// Caller must sense and select anew.
    Reselect,
}

/// Decision taken when a grant's counter reaches zero.
pub fn maybe_reselect(grant: &Grant, prob_keep: f64, sensing: &SensingConfig, rng: &mut SimRng) -> Reselection {
    debug_assert_eq!(grant.reselection_counter, 0);
    if rng.random::<f64>() < prob_keep {
        Reselection::Keep(Grant {
            reselection_counter: draw_counter(sensing, rng),
            ..grant.clone()
        })
    } else {
        Reselection::Reselect
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::selection_window;
    use crate::ledger::{SlotRecord, TxEntry};
    use crate::rng;

    fn record(slot: u64, sc: u32, rsrp: f64) -> SensingRecord {
        SensingRecord {
            slot,
            resource: SlResource::new((slot % 50) as u32, sc),
            width: 1,
            measured_rsrp: rsrp,
            reserved_until: slot + 50,
        }
    }

    fn tx(ue: usize, slot: u64, sc: u32) -> TxEntry {
        TxEntry {
            tx: UeId(ue),
            resource: SlResource::new((slot % 50) as u32, sc),
            width: 1,
            packet_id: 0,
            reservation: true,
        }
    }

    fn env3() -> RadioEnv {
        // UE 0 senses; UE 1 is received at -70 dBm, UE 2 at -75 dBm.
        let t = vec![
            vec![0.0, -70.0, -75.0],
            vec![-70.0, 0.0, -80.0],
            vec![-75.0, -80.0, 0.0],
        ];
        RadioEnv::from_table(&t, -102.0, 6.5)
    }

    #[test]
    fn empty_ledger_senses_nothing() {
        let l = SlotLedger::new(100);
        assert!(sense(UeId(0), &l, 500, 100, 50, &env3()).is_empty());
    }

    #[test]
    fn single_neighbour_reservation() {
        let mut l = SlotLedger::new(100);
        l.push(SlotRecord {
            slot: 410,
            txs: vec![tx(1, 410, 3)],
            outcomes: vec![],
        });
        let recs = sense(UeId(0), &l, 450, 100, 50, &env3());
        assert_eq!(recs.len(), 1);
        assert_eq!(recs[0].resource, SlResource::new(10, 3));
        assert!((recs[0].measured_rsrp + 70.0).abs() < 1e-9);
        assert_eq!(recs[0].reserved_until, 460);
    }

    #[test]
    fn half_duplex_slots_are_blind() {
        let mut l = SlotLedger::new(100);
        l.push(SlotRecord {
            slot: 410,
            txs: vec![tx(1, 410, 3), tx(0, 410, 7)],
            outcomes: vec![],
        });
        l.push(SlotRecord {
            slot: 411,
            txs: vec![tx(2, 411, 3)],
            outcomes: vec![],
        });
        let recs = sense(UeId(0), &l, 450, 100, 50, &env3());
        assert_eq!(recs.len(), 1);
        assert_eq!(recs[0].slot, 411);
    }

    #[test]
    fn collided_announcement_is_not_decoded() {
        let mut l = SlotLedger::new(100);
        // -70 vs -75 dBm on the same subchannel: SIR 5 dB < 6.5 dB.
        l.push(SlotRecord {
            slot: 420,
            txs: vec![tx(1, 420, 2), tx(2, 420, 2)],
            outcomes: vec![],
        });
        assert!(sense(UeId(0), &l, 450, 100, 50, &env3()).is_empty());
    }

    #[test]
    fn stale_records_fall_outside_sensing_window() {
        let mut l = SlotLedger::new(1000);
        l.push(SlotRecord {
            slot: 100,
            txs: vec![tx(1, 100, 0)],
            outcomes: vec![],
        });
        assert!(sense(UeId(0), &l, 300, 100, 50, &env3()).is_empty());
    }

    #[test]
    fn no_records_keeps_whole_window() {
        let pool = PoolConfig::default();
        let w = selection_window(100, &pool);
        let set = candidate_resources(&[], w, -128.0, &pool, &SensingConfig::default());
        assert_eq!(set.candidates.len(), 31 * 21);
        assert_eq!(set.total, 651);
        assert_eq!(set.threshold_dbm, -128.0);
    }

    #[test]
    fn one_reserved_resource_in_small_window() {
        let pool = PoolConfig {
            num_subchannels: 2,
            ..PoolConfig::default()
        };
        let w = selection_window(100, &pool);
        // Sensed at slot 60, projected to 110 which lies in [102, 132].
        let set = candidate_resources(&[record(60, 1, -90.0)], w, -128.0, &pool, &SensingConfig::default());
        assert_eq!(set.total, 62);
        assert_eq!(set.candidates.len(), 61);
        assert!(!set.candidates.contains(&Candidate { slot: 110, subchannel: 1 }));
    }

    #[test]
    fn projection_only_reaches_one_period() {
        let pool = PoolConfig::default();
        let w = selection_window(100, &pool);
        // 10 + 50 = 60 lies before the window; nothing is excluded.
        let set = candidate_resources(&[record(10, 1, -60.0)], w, -128.0, &pool, &SensingConfig::default());
        assert_eq!(set.candidates.len(), 651);
    }

    #[test]
    fn threshold_steps_until_floor_met() {
        // Two-subchannel pool, window of 31 slots = 62 resources; floor 20%
        // needs 13 survivors. Reserve everything with RSRP rising by 1 dB
        // per resource from -100 dBm.
        let pool = PoolConfig {
            num_subchannels: 2,
            ..PoolConfig::default()
        };
        let w = selection_window(100, &pool);
        let mut recs = Vec::new();
        let mut rsrp = -100.0;
        for slot in w.slots() {
            for sc in 0..2 {
                recs.push(record(slot - 50, sc, rsrp));
                rsrp += 1.0;
            }
        }
        let set = candidate_resources(&recs, w, -128.0, &pool, &SensingConfig::default());
        // Hand count: threshold T keeps resources with rsrp < T, i.e.
        // ceil(T + 100) of them. -128 + 3k >= -87 first at k = 14 -> -86,
        // which keeps 14 resources (-100 .. -87).
        assert_eq!(set.threshold_dbm, -86.0);
        assert_eq!(set.candidates.len(), 14);
        assert!(set.candidates.len() >= 13);
    }

    #[test]
    fn single_candidate_is_chosen() {
        let pool = PoolConfig::default();
        let only = [Candidate { slot: 120, subchannel: 4 }];
        let g = select_grant(&only, &mut rng::stream(1, 9), &pool, &SensingConfig::default()).unwrap();
        assert_eq!(g.first_slot, 120);
        assert_eq!(g.resource, SlResource::new(20, 4));
        assert!(g.retx.is_empty());
    }

    #[test]
    fn empty_candidates_is_an_error() {
        let pool = PoolConfig::default();
        assert!(select_grant(&[], &mut rng::stream(1, 9), &pool, &SensingConfig::default()).is_err());
    }

    #[test]
    fn selection_is_deterministic_and_well_formed() {
        let pool = PoolConfig::default();
        let sensing = SensingConfig::default();
        let set = candidate_resources(&[], selection_window(1000, &pool), -128.0, &pool, &sensing);
        let a = select_grant(&set.candidates, &mut rng::stream(5, 9), &pool, &sensing).unwrap();
        let b = select_grant(&set.candidates, &mut rng::stream(5, 9), &pool, &sensing).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.retx.len(), 2);
        assert!((5..=15).contains(&a.reselection_counter));
        let offsets: Vec<u32> = a.retx.iter().map(|r| r.offset).collect();
        assert!(offsets.windows(2).all(|w| w[0] < w[1]));
        assert!(offsets[0] > 0 && a.span() <= 31);
        assert!((1002..=1032).contains(&a.first_slot));
    }

    #[test]
    fn reselection_extremes() {
        let sensing = SensingConfig::default();
        let g = Grant {
            resource: SlResource::new(3, 3),
            first_slot: 53,
            rri: 50,
            reselection_counter: 0,
            retx: vec![],
        };
        let mut r = rng::stream(2, 9);
        for _ in 0..200 {
            assert_eq!(maybe_reselect(&g, 0.0, &sensing, &mut r), Reselection::Reselect);
            match maybe_reselect(&g, 1.0, &sensing, &mut r) {
                Reselection::Keep(k) => {
                    assert_eq!(k.resource, g.resource);
                    assert!((5..=15).contains(&k.reselection_counter));
                }
                Reselection::Reselect => panic!("prob_keep = 1 must keep"),
            }
        }
    }
}
