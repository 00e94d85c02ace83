//! Slot-by-slot simulation loop.
//!
//! Each slot runs, in order: grant expiry and renewal, traffic generation,
//! transmission, reception and logging.

mod sweep;
pub mod traffic;

use std::collections::VecDeque;

use crate::config::SimConfig;
use crate::error::Result;
use crate::grid::{selection_window, SlResource};
use crate::ledger::{OutcomeEntry, SlotLedger, SlotRecord, TxEntry};
use crate::metrics::{run_id, MetricsStore, PairStats, RunStats, UeMetrics};
use crate::mrd::{GroupLedger, GroupScheduler, Member};
use crate::radio::{RadioEnv, RxState};
use crate::rng::{self, SimRng};
use crate::scenario::{
    apply_scenario, build_platoons, scatter_background, AllocMode, GroupId, LaneLayout, Position, Topology, UeId,
};
use crate::sps::{candidate_resources, maybe_reselect, select_grant, sense, Grant, Reselection};

pub use sweep::{sweep, sweep_with_threads, RunKey};
use traffic::{period_slots, Packet, TrafficSource};

/// Highway with both platoons centred on its midpoint and the background
/// vehicles scattered over the remaining lanes.
pub fn build_topology(cfg: &SimConfig) -> Result<Topology> {
    let layout = LaneLayout {
        lane_gap: cfg.inter_lane_gap_m,
        lanes: cfg.lanes,
    };
    let longest = cfg.group_a.size.max(cfg.group_b.size).saturating_sub(1) as f64;
    let anchor = Position::new(
        cfg.highway_length_m / 2.0 - longest * cfg.inter_vehicle_gap_m / 2.0,
        f64::from(layout.platoon_lane()) * layout.lane_gap,
    );
    let platoons = build_platoons(
        cfg.group_a.size,
        cfg.group_b.size,
        cfg.inter_vehicle_gap_m,
        cfg.inter_lane_gap_m,
        anchor,
    )?;
    let mut topo_rng = rng::stream(cfg.seed, rng::STREAM_TOPOLOGY);
    let background = scatter_background(
        cfg.group_c.count,
        cfg.highway_length_m,
        &layout.background_lanes(),
        cfg.group_c.allow_out_of_range,
        &mut topo_rng,
    )?;
    let topo = Topology::assemble(vec![platoons, background], cfg.highway_length_m, cfg.lanes);
    apply_scenario(cfg.scenario, topo, cfg.mode2d.leader_index)
}

/// Intended receivers: the rest of the platoon for groupcast, every UE
/// within `range` for broadcast.
pub fn audience(topo: &Topology, ue: UeId, range: f64) -> Vec<UeId> {
    let me = &topo.ues[ue.index()];
    topo.ues
        .iter()
        .filter(|u| u.id != ue)
        .filter(|u| match me.group {
            GroupId::C => u.position.distance(&me.position) <= range,
            g => u.group == g,
        })
        .map(|u| u.id)
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct PlannedTx {
    slot: u64,
    subchannel: u32,
    reservation: bool,
}

#[derive(Debug, Clone)]
struct InFlight {
    packet: Packet,
    txs: Vec<PlannedTx>,
    next: usize,
    /// Reception time per audience member.
    received: Vec<Option<f64>>,
}

#[derive(Debug, Clone)]
struct SpsState {
    grant: Grant,
    next_occasion: u64,
    /// The current occasion is the last one of this grant.
    announces: bool,
    /// Slot at which to sense and select again.
    reselect_at: Option<u64>,
}

#[derive(Debug, Clone)]
struct UeState {
    id: UeId,
    group: GroupId,
    mode: AllocMode,
    traffic: TrafficSource,
    first_packet: u64,
    queue: VecDeque<Packet>,
    rng: SimRng,
    sps: Option<SpsState>,
    in_flight: Option<InFlight>,
    audience: Vec<UeId>,
    pairs: Vec<PairStats>,
}

impl UeState {
    fn finalize(&mut self) {
        if let Some(f) = self.in_flight.take() {
            for (p, r) in self.pairs.iter_mut().zip(f.received) {
                p.record(r);
            }
        }
    }
}

/// A single run in progress. [`run`] drives it to completion; examples and
/// tests can also step it slot by slot.
#[derive(Debug)]
pub struct Simulation {
    cfg: SimConfig,
    topo: Topology,
    env: RadioEnv,
    ues: Vec<UeState>,
    schedulers: Vec<(GroupScheduler, SimRng)>,
    ledger: SlotLedger,
    slot: u64,
    end: u64,
    stats: RunStats,
    record_outcomes: bool,
    transmitting: Vec<bool>,
}

impl Simulation {
    /// `cfg` must be valid (see [`SimConfig::validate`]).
    pub fn new(cfg: &SimConfig) -> Result<Self> {
        cfg.validate()?;
        let topo = build_topology(cfg)?;
        let mut shadow_rng = rng::stream(cfg.seed, rng::STREAM_SHADOWING);
        let env = RadioEnv::new(
            &topo.ues,
            &cfg.radio.budget(),
            cfg.pool.tb_bandwidth_hz(),
            cfg.radio.capture_threshold_db,
            &mut shadow_rng,
        );

        let ues = topo
            .ues
            .iter()
            .map(|u| {
                let mut rng = rng::ue_stream(cfg.seed, u.id.index());
                let rate = match u.group {
                    GroupId::A => cfg.group_a.rate_kbps,
                    GroupId::B => cfg.group_b.rate_kbps,
                    GroupId::C => cfg.group_c.rate_kbps,
                };
                let period = period_slots(cfg.traffic.payload_bytes, rate, cfg.pool.slot_duration_ms);
                let traffic = TrafficSource::new(u.id, period, &mut rng);
                let audience = audience(&topo, u.id, cfg.metrics.eval_range_m);
                UeState {
                    id: u.id,
                    group: u.group,
                    mode: topo.mode_of(u.group),
                    first_packet: traffic.next_slot(),
                    traffic,
                    queue: VecDeque::with_capacity(cfg.traffic.queue_depth),
                    rng,
                    sps: None,
                    in_flight: None,
                    pairs: vec![PairStats::default(); audience.len()],
                    audience,
                }
            })
            .collect();

        let mut schedulers = Vec::new();
        for spec in topo.groups.iter().filter(|g| g.mode == AllocMode::Mode2dScheduled) {
            let members = topo
                .members(spec.group_id)
                .map(|u| Member {
                    id: u.id,
                    position: u.position,
                })
                .collect();
            let ledger = GroupLedger::new(
                spec.group_id,
                members,
                u64::from(cfg.mode2d.t_r_slots),
                cfg.mode2d.p_reselect,
            );
            let mut sched = GroupScheduler::new(ledger, &cfg.pool, &cfg.mode2d)?;
            sched.bootstrap(0)?;
            schedulers.push((sched, rng::group_stream(cfg.seed, spec.group_id.index())));
        }

        let n = topo.ues.len();
        Ok(Simulation {
            ledger: SlotLedger::new(cfg.mode2.t0_slots as usize + 1),
            end: cfg.total_slots(),
            cfg: cfg.clone(),
            topo,
            env,
            ues,
            schedulers,
            slot: 0,
            stats: RunStats::default(),
            record_outcomes: false,
            transmitting: vec![false; n],
        })
    }

    /// Keep a per-(tx, rx) outcome for every receiver in the slot ledger.
    pub fn record_outcomes(&mut self, on: bool) {
        self.record_outcomes = on;
    }

    pub fn topology(&self) -> &Topology {
        &self.topo
    }

    pub fn radio(&self) -> &RadioEnv {
        &self.env
    }

    pub fn ledger(&self) -> &SlotLedger {
        &self.ledger
    }

    pub fn slot(&self) -> u64 {
        self.slot
    }

    pub fn is_done(&self) -> bool {
        self.slot >= self.end
    }

    pub fn stats(&self) -> &RunStats {
        &self.stats
    }

    /// Resources currently granted to scheduled `ue`, if any.
    pub fn scheduled_grant(&self, ue: UeId) -> Option<Vec<SlResource>> {
        self.schedulers
            .iter()
            .find_map(|(s, _)| s.grant(ue))
            .map(|g| g.resources().collect())
    }

    /// Runs one slot. Returns false once the run is over.
    pub fn step(&mut self) -> Result<bool> {
        if self.is_done() {
            return Ok(false);
        }
        let slot = self.slot;
        self.expire_and_renew(slot)?;
        self.generate(slot);
        let txs = self.transmit(slot);
        let outcomes = self.receive(slot, &txs);
        self.log(slot, txs, outcomes);
        self.slot += 1;
        Ok(true)
    }

    /// Runs to the end and returns the collected metrics.
    pub fn run(mut self) -> Result<MetricsStore> {
        while self.step()? {}
        Ok(self.finish())
    }

    pub fn finish(mut self) -> MetricsStore {
        for u in &mut self.ues {
            u.finalize();
        }
        self.stats.slots = self.slot;
        MetricsStore {
            run_id: run_id(self.cfg.scenario, self.cfg.group_c.count, self.cfg.seed),
            scenario: self.cfg.scenario,
            group_c_count: self.cfg.group_c.count,
            seed: self.cfg.seed,
            ues: self
                .ues
                .into_iter()
                .map(|u| UeMetrics {
                    ue: u.id,
                    group: u.group,
                    peers: u.audience,
                    pairs: u.pairs,
                })
                .collect(),
            stats: self.stats,
        }
    }

    fn expire_and_renew(&mut self, slot: u64) -> Result<()> {
        let ues = &self.ues;
        for (sched, rng) in &mut self.schedulers {
            sched.tick(slot, rng, |id| ues[id.index()].in_flight.is_none());
        }

        let pool = &self.cfg.pool;
        let sensing = &self.cfg.mode2;
        for u in self.ues.iter_mut().filter(|u| u.mode == AllocMode::Mode2Sensing) {
            if let Some(s) = &mut u.sps {
                if s.reselect_at.is_some_and(|at| at <= slot) {
                    u.sps = None;
                } else if s.next_occasion == slot {
                    s.grant.reselection_counter = s.grant.reselection_counter.saturating_sub(1);
                    s.announces = true;
                    if s.grant.reselection_counter == 0 {
                        match maybe_reselect(&s.grant, sensing.prob_keep, sensing, &mut u.rng) {
                            Reselection::Keep(g) => s.grant = g,
                            Reselection::Reselect => {
                                s.announces = false;
                                s.reselect_at = Some(slot + u64::from(s.grant.span()) + 1);
                            }
                        }
                    }
                }
            }
            if u.sps.is_none() && slot >= u.first_packet {
                let records = sense(u.id, &self.ledger, slot, sensing.t0_slots, pool.reservation_period_slots, &self.env);
                let window = selection_window(slot, pool);
                let set = candidate_resources(&records, window, sensing.rsrp_threshold_dbm, pool, sensing);
                let grant = select_grant(&set.candidates, &mut u.rng, pool, sensing)?;
                u.sps = Some(SpsState {
                    next_occasion: grant.first_slot,
                    grant,
                    announces: true,
                    reselect_at: None,
                });
            }
        }
        Ok(())
    }

    fn generate(&mut self, slot: u64) {
        let depth = self.cfg.traffic.queue_depth;
        for u in &mut self.ues {
            while let Some(p) = u.traffic.traffic_next(slot) {
                self.stats.packets_generated += 1;
                if u.queue.len() == depth {
                    u.queue.pop_front();
                    self.stats.packets_dropped += 1;
                    for pair in &mut u.pairs {
                        pair.record(None);
                    }
                }
                u.queue.push_back(p);
            }
        }
    }

    fn transmit(&mut self, slot: u64) -> Vec<TxEntry> {
        let rri = self.cfg.pool.reservation_period_slots;
        let width = self.cfg.pool.subchannels_per_tb;
        let mut txs = Vec::new();
        for u in &mut self.ues {
            let plan: Option<Vec<PlannedTx>> = match u.mode {
                AllocMode::Mode2Sensing => u.sps.as_mut().and_then(|s| {
                    (s.next_occasion == slot).then(|| {
                        s.next_occasion += u64::from(rri);
                        s.grant
                            .pattern()
                            .map(|(off, sc)| PlannedTx {
                                slot: slot + u64::from(off),
                                subchannel: sc,
                                reservation: s.announces,
                            })
                            .collect()
                    })
                }),
                AllocMode::Mode2dScheduled => self
                    .schedulers
                    .iter()
                    .find_map(|(s, _)| s.grant(u.id))
                    .filter(|g| slot % u64::from(rri) == u64::from(g.primary.slot))
                    .map(|g| {
                        g.resources()
                            .map(|r| PlannedTx {
                                slot: slot + u64::from((r.slot + rri - g.primary.slot) % rri),
                                subchannel: r.subchannel,
                                reservation: true,
                            })
                            .collect()
                    }),
            };
            if let Some(plan) = plan {
                if u.in_flight.is_none() {
                    if let Some(packet) = u.queue.pop_front() {
                        u.in_flight = Some(InFlight {
                            packet,
                            txs: plan,
                            next: 0,
                            received: vec![None; u.audience.len()],
                        });
                    }
                }
            }
            if let Some(f) = &u.in_flight {
                if let Some(t) = f.txs.get(f.next).filter(|t| t.slot == slot) {
                    txs.push(TxEntry {
                        tx: u.id,
                        resource: SlResource::new((slot % u64::from(rri)) as u32, t.subchannel),
                        width,
                        packet_id: f.packet.id,
                        reservation: t.reservation,
                    });
                }
            }
        }
        txs
    }

    fn receive(&mut self, slot: u64, txs: &[TxEntry]) -> Vec<OutcomeEntry> {
        for t in txs {
            self.transmitting[t.tx.index()] = true;
        }
        let rx_time = (slot + 1) as f64 * self.cfg.pool.slot_duration_ms;
        let mut co = Vec::new();
        let mut outcomes = Vec::new();
        for (i, e) in txs.iter().enumerate() {
            co.clear();
            co.extend(txs.iter().filter(|t| t.overlaps(e)).map(|t| t.tx));

            for other in &txs[i + 1..] {
                if other.overlaps(e)
                    && self.ues[e.tx.index()].group == self.ues[other.tx.index()].group
                    && self.ues[e.tx.index()].mode == AllocMode::Mode2dScheduled
                {
                    self.stats.same_group_cochannel += 1;
                }
            }

            let u = &mut self.ues[e.tx.index()];
            let f = u.in_flight.as_mut().expect("transmitter has a packet in flight");
            for (k, &rx) in u.audience.iter().enumerate() {
                if f.received[k].is_some() || self.transmitting[rx.index()] {
                    continue;
                }
                if self.env.decodes(rx, e.tx, &co) {
                    f.received[k] = Some(rx_time);
                    self.stats.decodes += 1;
                }
            }

            if self.record_outcomes {
                for rx in (0..self.env.len()).map(UeId).filter(|&r| r != e.tx) {
                    let state = if self.transmitting[rx.index()] {
                        RxState::Transmitting
                    } else {
                        RxState::Listening
                    };
                    let o = self.env.outcome(rx, e.tx, &co, state);
                    if o.decoded && state == RxState::Transmitting {
                        self.stats.half_duplex_violations += 1;
                    }
                    outcomes.push(OutcomeEntry {
                        tx: e.tx,
                        rx,
                        decoded: o.decoded,
                        cause: o.cause,
                    });
                }
            }
        }
        // Audience receptions must respect half-duplex as well.
        for e in txs {
            let u = &self.ues[e.tx.index()];
            if let Some(f) = &u.in_flight {
                for (k, &rx) in u.audience.iter().enumerate() {
                    if f.received[k] == Some(rx_time) && self.transmitting[rx.index()] {
                        self.stats.half_duplex_violations += 1;
                    }
                }
            }
        }
        outcomes
    }

    fn log(&mut self, slot: u64, txs: Vec<TxEntry>, outcomes: Vec<OutcomeEntry>) {
        for t in &txs {
            self.transmitting[t.tx.index()] = false;
            let u = &mut self.ues[t.tx.index()];
            let f = u.in_flight.as_mut().expect("transmitter has a packet in flight");
            f.next += 1;
            if f.next == f.txs.len() {
                u.finalize();
            }
        }
        self.stats.transmissions += txs.len() as u64;
        self.ledger.push(SlotRecord { slot, txs, outcomes });
    }
}

/// Runs `cfg` to completion. Deterministic: identical configs give
/// identical stores.
pub fn run(cfg: &SimConfig) -> Result<MetricsStore> {
    Simulation::new(cfg)?.run()
}
