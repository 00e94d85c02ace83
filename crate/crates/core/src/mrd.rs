//! Mode 2d group scheduling with the Maximum Reuse Distance rule.
//!
//! For a requesting member `i` the leader scores every resource `r` by the
//! distance from `i` to the closest group member already using `r`
//! (infinite when nobody does) and hands out the best-scoring resource.
//! Ties go to the earliest resource in pool order. Only members of the same
//! group enter the score.

use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{PoolConfig, SlResource};
use crate::rng::SimRng;
use crate::scenario::{GroupId, Position, UeId};

pub fn euclidean_distance(a: Position, b: Position) -> f64 {
    ((a.x - b.x).powi(2) + (a.y - b.y).powi(2)).sqrt()
}

/// Which subchannels a scheduled group may hand out.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Subpool {
    /// Every subchannel of the pool.
    Full,
    /// Pool split into one contiguous block per platoon (A low, B high).
    Auto,
    /// Inclusive subchannel range shared by every scheduled group.
    Range(u32, u32),
}

impl Subpool {
    pub fn parse(s: &str) -> Result<Subpool> {
        match s.trim() {
            "full" => Ok(Subpool::Full),
            "auto" => Ok(Subpool::Auto),
            r => {
                let (lo, hi) = r
                    .split_once("..")
                    .ok_or_else(|| Error::Config(format!("mode2d.subpool: expected full, auto or LO..HI, got `{r}`")))?;
                let parse = |v: &str| {
                    v.trim()
                        .parse::<u32>()
                        .map_err(|_| Error::Config(format!("mode2d.subpool: bad bound `{v}`")))
                };
                Ok(Subpool::Range(parse(lo)?, parse(hi)?))
            }
        }
    }

    /// Inclusive subchannel range group `g` schedules on.
    pub fn range_for(self, g: GroupId, num_subchannels: u32) -> (u32, u32) {
        match self {
            Subpool::Full => (0, num_subchannels - 1),
            Subpool::Range(lo, hi) => (lo, hi),
            Subpool::Auto => {
                let half = num_subchannels / 2;
                match g {
                    GroupId::A => (0, half.max(1) - 1),
                    _ => (half, num_subchannels - 1),
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GroupSchedConfig {
    /// Reselection period `T_r` of a member's grant.
    pub t_r_slots: u32,
    pub p_reselect: f64,
    pub leader_index: usize,
    /// `full`, `auto` or `LO..HI`.
    pub subpool: String,
    /// Keep members out of slots in which another member transmits.
    pub half_duplex_aware: bool,
}

impl Default for GroupSchedConfig {
    fn default() -> Self {
        GroupSchedConfig {
            t_r_slots: 500,
            p_reselect: 0.2,
            leader_index: 0,
            subpool: "auto".into(),
            half_duplex_aware: true,
        }
    }
}

impl GroupSchedConfig {
    pub fn subpool(&self) -> Result<Subpool> {
        Subpool::parse(&self.subpool)
    }

    pub fn validate(&self, pool: &PoolConfig) -> Result<()> {
        if self.t_r_slots == 0 {
            return Err(Error::invariant("mode2d.t_r_slots >= 1", "got 0"));
        }
        if !(0.0..=1.0).contains(&self.p_reselect) {
            return Err(Error::invariant("mode2d.p_reselect in [0, 1]", format!("got {}", self.p_reselect)));
        }
        match self.subpool()? {
            Subpool::Range(lo, hi) if lo > hi || hi > pool.max_start_subchannel() => Err(Error::invariant(
                "mode2d.subpool within pool subchannels",
                format!("{lo}..{hi} with {} subchannels", pool.num_subchannels),
            )),
            Subpool::Auto if pool.num_subchannels < 2 * pool.subchannels_per_tb => Err(Error::invariant(
                "mode2d.subpool = auto needs room for two groups",
                format!("{} subchannels", pool.num_subchannels),
            )),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Member {
    pub id: UeId,
    pub position: Position,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MemberGrant {
    pub primary: SlResource,
    /// Blind retransmission resources, in transmission order.
    pub retx: Vec<SlResource>,
    /// Absolute slot at which the reselection timer fires.
    pub expires_at: u64,
}

impl MemberGrant {
    pub fn resources(&self) -> impl Iterator<Item = SlResource> + '_ {
        std::iter::once(self.primary).chain(self.retx.iter().copied())
    }
}

/// The leader's view of its group's resource usage.
#[derive(Debug, Clone)]
pub struct GroupLedger {
    pub group_id: GroupId,
    members: Vec<Member>,
    /// Primary resource -> members holding it.
    assignment: BTreeMap<SlResource, BTreeSet<UeId>>,
    /// Any resource (primary or retransmission) -> members using it.
    usage: BTreeMap<SlResource, BTreeSet<UeId>>,
    grants: BTreeMap<UeId, MemberGrant>,
    pub reselection_period: u64,
    pub p_reselect: f64,
}

impl GroupLedger {
    pub fn new(group_id: GroupId, members: Vec<Member>, reselection_period: u64, p_reselect: f64) -> Self {
        GroupLedger {
            group_id,
            members,
            assignment: BTreeMap::new(),
            usage: BTreeMap::new(),
            grants: BTreeMap::new(),
            reselection_period,
            p_reselect,
        }
    }

    pub fn members(&self) -> &[Member] {
        &self.members
    }

    fn position(&self, id: UeId) -> Option<Position> {
        self.members.iter().find(|m| m.id == id).map(|m| m.position)
    }

    pub fn grant(&self, id: UeId) -> Option<&MemberGrant> {
        self.grants.get(&id)
    }

    pub fn assignment(&self) -> &BTreeMap<SlResource, BTreeSet<UeId>> {
        &self.assignment
    }

    /// Members using `r` in any role.
    pub fn holders(&self, r: &SlResource) -> impl Iterator<Item = UeId> + '_ {
        self.usage.get(r).into_iter().flatten().copied()
    }

    /// Distance from `requester` to the nearest other member using `r`;
    /// infinite if there is none.
    pub fn score(&self, requester: UeId, r: &SlResource) -> f64 {
        let Some(at) = self.position(requester) else {
            return f64::NAN;
        };
        self.holders(r)
            .filter(|&j| j != requester)
            .filter_map(|j| self.position(j))
            .map(|p| euclidean_distance(at, p))
            .fold(f64::INFINITY, f64::min)
    }

    /// Argmax of [`GroupLedger::score`] over `pool`; the first resource in
    /// `pool` order wins ties. Does not modify the ledger.
    pub fn mrd_choose(&self, requester: UeId, pool: &[SlResource]) -> Option<SlResource> {
        let mut best: Option<(SlResource, f64)> = None;
        for r in pool {
            let s = self.score(requester, r);
            if best.is_none_or(|(_, b)| s > b) {
                best = Some((*r, s));
            }
        }
        best.map(|(r, _)| r)
    }

    /// Drops every resource `member` holds.
    pub fn release(&mut self, member: UeId) -> Option<MemberGrant> {
        let g = self.grants.remove(&member)?;
        if let Some(set) = self.assignment.get_mut(&g.primary) {
            set.remove(&member);
            if set.is_empty() {
                self.assignment.remove(&g.primary);
            }
        }
        for r in g.resources() {
            if let Some(set) = self.usage.get_mut(&r) {
                set.remove(&member);
                if set.is_empty() {
                    self.usage.remove(&r);
                }
            }
        }
        Some(g)
    }

    fn insert(&mut self, member: UeId, grant: MemberGrant) {
        self.assignment.entry(grant.primary).or_default().insert(member);
        for r in grant.resources() {
            self.usage.entry(r).or_default().insert(member);
        }
        self.grants.insert(member, grant);
    }

    fn check_member(&self, id: UeId) -> Result<()> {
        if self.position(id).is_none() {
            return Err(Error::InvalidArgument(format!("UE {id} is not a member of group {}", self.group_id)));
        }
        Ok(())
    }

    /// Assigns `requester` the maximum-reuse-distance resource of `pool`.
    /// A member that already holds a grant is released first, so its own
    /// entry never counts against it.
    pub fn mrd_assign(&mut self, requester: UeId, pool: &[SlResource], now: u64) -> Result<SlResource> {
        self.check_member(requester)?;
        self.release(requester);
        let r = self
            .mrd_choose(requester, pool)
            .ok_or_else(|| Error::InvalidArgument("empty resource pool".into()))?;
        self.insert(
            requester,
            MemberGrant {
                primary: r,
                retx: Vec::new(),
                expires_at: now + self.reselection_period,
            },
        );
        Ok(r)
    }

    /// Initial allocation: members in list order, one resource each.
    pub fn leader_bootstrap(&mut self, pool: &[SlResource], now: u64) -> Result<Vec<(UeId, SlResource)>> {
        let ids: Vec<UeId> = self.members.iter().map(|m| m.id).collect();
        ids.into_iter()
            .map(|id| self.mrd_assign(id, pool, now).map(|r| (id, r)))
            .collect()
    }

    /// Members whose reselection timer has fired by `now`, in list order.
    pub fn expired(&self, now: u64) -> Vec<UeId> {
        self.members
            .iter()
            .filter(|m| self.grants.get(&m.id).is_some_and(|g| g.expires_at <= now))
            .map(|m| m.id)
            .collect()
    }

    fn roll(&self, rng: &mut SimRng) -> bool {
        rng.random::<f64>() < self.p_reselect
    }

    fn renew(&mut self, member: UeId, now: u64) {
        if let Some(g) = self.grants.get_mut(&member) {
            g.expires_at = now + self.reselection_period;
        }
    }

    /// For each expired member: with probability `p_reselect` reassign via
    /// [`GroupLedger::mrd_assign`], otherwise keep the resource and restart
    /// the timer. Returns the reassignments.
    pub fn tick_reselection(&mut self, now: u64, pool: &[SlResource], rng: &mut SimRng) -> Vec<(UeId, SlResource)> {
        let mut changes = Vec::new();
        for id in self.expired(now) {
            if self.roll(rng) {
                let r = self.mrd_assign(id, pool, now).expect("expired member belongs to group");
                changes.push((id, r));
            } else {
                self.renew(id, now);
            }
        }
        changes
    }
}

/// Group leader as driven by the engine: MRD over the group's subpool,
/// half-duplex-aware slot filtering and blind retransmission resources.
#[derive(Debug, Clone)]
pub struct GroupScheduler {
    pub ledger: GroupLedger,
    pool: Vec<SlResource>,
    rri: u32,
    retx_count: usize,
    retx_reach: u32,
    half_duplex_aware: bool,
}

impl GroupScheduler {
    pub fn new(ledger: GroupLedger, pool_cfg: &PoolConfig, cfg: &GroupSchedConfig) -> Result<Self> {
        let (lo, hi) = cfg.subpool()?.range_for(ledger.group_id, pool_cfg.num_subchannels);
        let hi = hi.min(pool_cfg.max_start_subchannel());
        let pool = crate::grid::pool_resources(pool_cfg)
            .into_iter()
            .filter(|r| (lo..=hi).contains(&r.subchannel))
            .collect();
        Ok(GroupScheduler {
            ledger,
            pool,
            rri: pool_cfg.reservation_period_slots,
            retx_count: pool_cfg.sl_tx_trans_num as usize - 1,
            retx_reach: pool_cfg.t2 - pool_cfg.t1 + 1,
            half_duplex_aware: cfg.half_duplex_aware,
        })
    }

    pub fn pool(&self) -> &[SlResource] {
        &self.pool
    }

    fn busy_slots(&self, member: UeId) -> BTreeSet<u32> {
        if !self.half_duplex_aware {
            return BTreeSet::new();
        }
        self.ledger
            .grants
            .iter()
            .filter(|(&id, _)| id != member)
            .flat_map(|(_, g)| g.resources().map(|r| r.slot))
            .collect()
    }

    /// (Re)allocates every resource of `member`.
    pub fn allocate(&mut self, member: UeId, now: u64) -> Result<MemberGrant> {
        self.ledger.check_member(member)?;
        self.ledger.release(member);
        let busy = self.busy_slots(member);
        let free: Vec<SlResource> = self.pool.iter().copied().filter(|r| !busy.contains(&r.slot)).collect();
        let primary_pool = if free.is_empty() { &self.pool } else { &free };
        let primary = self.ledger.mrd_assign(member, primary_pool, now)?;

        let mut used_slots: BTreeSet<u32> = BTreeSet::from([primary.slot]);
        let mut retx = Vec::with_capacity(self.retx_count);
        for _ in 0..self.retx_count {
            let candidates: Vec<SlResource> = (1..=self.retx_reach)
                .map(|off| SlResource::new((primary.slot + off) % self.rri, primary.subchannel))
                .filter(|r| !busy.contains(&r.slot) && !used_slots.contains(&r.slot))
                .collect();
            let Some(r) = self.ledger.mrd_choose(member, &candidates) else {
                break;
            };
            used_slots.insert(r.slot);
            retx.push(r);
        }
        // Retransmissions in time order after the primary.
        retx.sort_by_key(|r| (r.slot + self.rri - primary.slot) % self.rri);
        let mut grant = self.ledger.release(member).expect("just assigned");
        grant.retx = retx;
        self.ledger.insert(member, grant.clone());
        Ok(grant)
    }

    pub fn bootstrap(&mut self, now: u64) -> Result<()> {
        let ids: Vec<UeId> = self.ledger.members.iter().map(|m| m.id).collect();
        for id in ids {
            self.allocate(id, now)?;
        }
        Ok(())
    }

    /// Timer expiry for members accepted by `eligible`; members that are
    /// not eligible yet are revisited on a later call. Returns members whose
    /// resources were reallocated.
    pub fn tick(&mut self, now: u64, rng: &mut SimRng, eligible: impl Fn(UeId) -> bool) -> Vec<UeId> {
        let mut changed = Vec::new();
        for id in self.ledger.expired(now) {
            if !eligible(id) {
                continue;
            }
            if self.ledger.roll(rng) {
                self.allocate(id, now).expect("expired member belongs to group");
                changed.push(id);
            } else {
                self.ledger.renew(id, now);
            }
        }
        changed
    }

    pub fn grant(&self, member: UeId) -> Option<&MemberGrant> {
        self.ledger.grant(member)
    }
}
