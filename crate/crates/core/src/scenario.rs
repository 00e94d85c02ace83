//! Static highway topology: two platoons (groups A and B) in adjacent lanes
//! plus randomly scattered background vehicles (group C).

use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::SimRng;

/// Upper bound of the background vehicle sweep.
pub const MAX_BACKGROUND: usize = 170;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct UeId(pub usize);

impl UeId {
    pub fn index(self) -> usize {
        self.0
    }
}

impl fmt::Display for UeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Meters; `x` runs along the highway, `y` across the lanes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Position {
    pub x: f64,
    pub y: f64,
}

impl Position {
    pub const fn new(x: f64, y: f64) -> Self {
        Position { x, y }
    }

    pub fn distance(&self, other: &Position) -> f64 {
        crate::mrd::euclidean_distance(*self, *other)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum GroupId {
    A,
    B,
    C,
}

impl GroupId {
    pub const ALL: [GroupId; 3] = [GroupId::A, GroupId::B, GroupId::C];

    pub fn as_str(self) -> &'static str {
        match self {
            GroupId::A => "A",
            GroupId::B => "B",
            GroupId::C => "C",
        }
    }

    pub fn parse(s: &str) -> Option<GroupId> {
        match s {
            "A" | "a" => Some(GroupId::A),
            "B" | "b" => Some(GroupId::B),
            "C" | "c" => Some(GroupId::C),
            _ => None,
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for GroupId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum AllocMode {
    Mode2Sensing,
    Mode2dScheduled,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Cast {
    Groupcast,
    Broadcast,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Role {
    Leader,
    Member,
    Independent,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupSpec {
    pub group_id: GroupId,
    pub size: usize,
    pub mode: AllocMode,
    pub cast: Cast,
    /// Index into the group's member list; present iff the group is scheduled.
    pub leader_index: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Scenario {
    #[serde(rename = "scenario1", alias = "S1_AllSensing")]
    S1AllSensing,
    #[serde(rename = "scenario2", alias = "S2_AllScheduled")]
    S2AllScheduled,
    #[serde(rename = "scenario3", alias = "S3_Mixed")]
    S3Mixed,
}

impl Scenario {
    pub const ALL: [Scenario; 3] = [Scenario::S1AllSensing, Scenario::S2AllScheduled, Scenario::S3Mixed];

    pub fn name(self) -> &'static str {
        match self {
            Scenario::S1AllSensing => "scenario1",
            Scenario::S2AllScheduled => "scenario2",
            Scenario::S3Mixed => "scenario3",
        }
    }

    pub fn parse(name: &str) -> Result<Scenario> {
        match name {
            "scenario1" | "S1_AllSensing" | "s1" => Ok(Scenario::S1AllSensing),
            "scenario2" | "S2_AllScheduled" | "s2" => Ok(Scenario::S2AllScheduled),
            "scenario3" | "S3_Mixed" | "s3" => Ok(Scenario::S3Mixed),
            other => Err(Error::Config(format!(
                "unknown scenario preset `{other}` (expected scenario1, scenario2 or scenario3)"
            ))),
        }
    }

    /// Allocation mode of a group under this scenario. Group C is always
    /// sensing-based background traffic.
    pub fn mode_of(self, group: GroupId) -> AllocMode {
        use AllocMode::*;
        match (self, group) {
            (_, GroupId::C) => Mode2Sensing,
            (Scenario::S1AllSensing, _) => Mode2Sensing,
            (Scenario::S2AllScheduled, _) => Mode2dScheduled,
            (Scenario::S3Mixed, GroupId::A) => Mode2dScheduled,
            (Scenario::S3Mixed, GroupId::B) => Mode2Sensing,
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A vehicle before ids are assigned.
#[derive(Debug, Clone, PartialEq)]
pub struct PlacedUe {
    pub position: Position,
    pub group: GroupId,
    pub role: Role,
}

#[derive(Debug, Clone, PartialEq)]
pub struct UeDesc {
    pub id: UeId,
    pub position: Position,
    pub group: GroupId,
    pub role: Role,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Topology {
    pub ues: Vec<UeDesc>,
    pub groups: Vec<GroupSpec>,
    pub highway_length: f64,
    pub lane_count: u32,
}

impl Topology {
    /// Assigns dense ids in fragment order. Group specs default to sensing;
    /// [`apply_scenario`] sets the modes.
    pub fn assemble(fragments: Vec<Vec<PlacedUe>>, highway_length: f64, lane_count: u32) -> Topology {
        let ues: Vec<UeDesc> = fragments
            .into_iter()
            .flatten()
            .enumerate()
            .map(|(i, p)| UeDesc {
                id: UeId(i),
                position: p.position,
                group: p.group,
                role: p.role,
            })
            .collect();
        let groups = GroupId::ALL
            .iter()
            .filter_map(|&g| {
                let size = ues.iter().filter(|u| u.group == g).count();
                (size > 0).then(|| GroupSpec {
                    group_id: g,
                    size,
                    mode: AllocMode::Mode2Sensing,
                    cast: if g == GroupId::C { Cast::Broadcast } else { Cast::Groupcast },
                    leader_index: None,
                })
            })
            .collect();
        Topology {
            ues,
            groups,
            highway_length,
            lane_count,
        }
    }

    pub fn len(&self) -> usize {
        self.ues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ues.is_empty()
    }

    pub fn members(&self, group: GroupId) -> impl Iterator<Item = &UeDesc> {
        self.ues.iter().filter(move |u| u.group == group)
    }

    pub fn group(&self, group: GroupId) -> Option<&GroupSpec> {
        self.groups.iter().find(|g| g.group_id == group)
    }

    pub fn mode_of(&self, group: GroupId) -> AllocMode {
        self.group(group).map_or(AllocMode::Mode2Sensing, |g| g.mode)
    }

    pub fn leaders(&self) -> impl Iterator<Item = &UeDesc> {
        self.ues.iter().filter(|u| u.role == Role::Leader)
    }
}

/// Lane layout: lane `k` sits at `y = k * lane_gap`. The two platoons take
/// the middle pair of lanes, background vehicles use the rest.
#[derive(Debug, Clone, PartialEq)]
pub struct LaneLayout {
    pub lane_gap: f64,
    pub lanes: u32,
}

impl LaneLayout {
    pub fn platoon_lane(&self) -> u32 {
        self.lanes / 2 - 1
    }

    pub fn background_lanes(&self) -> Vec<f64> {
        let a = self.platoon_lane();
        (0..self.lanes)
            .filter(|&k| k != a && k != a + 1)
            .map(|k| k as f64 * self.lane_gap)
            .collect()
    }
}

/// Places group A at `anchor` and group B one lane over, both platoons with
/// a uniform gap between consecutive vehicle centers.
pub fn build_platoons(
    size_a: usize,
    size_b: usize,
    inter_vehicle_gap: f64,
    inter_lane_gap: f64,
    anchor: Position,
) -> Result<Vec<PlacedUe>> {
    if size_a == 0 || size_b == 0 {
        return Err(Error::invariant("platoon size >= 1", format!("got A={size_a}, B={size_b}")));
    }
    if !(inter_vehicle_gap > 0.0) || !(inter_lane_gap > 0.0) {
        return Err(Error::invariant(
            "gaps > 0",
            format!("inter_vehicle_gap={inter_vehicle_gap}, inter_lane_gap={inter_lane_gap}"),
        ));
    }
    let row = |size: usize, y: f64, group: GroupId| {
        (0..size).map(move |k| PlacedUe {
            position: Position::new(anchor.x + k as f64 * inter_vehicle_gap, y),
            group,
            role: Role::Member,
        })
    };
    Ok(row(size_a, anchor.y, GroupId::A)
        .chain(row(size_b, anchor.y + inter_lane_gap, GroupId::B))
        .collect())
}

/// Drops `count` independent vehicles uniformly along the highway, each in a
/// uniformly chosen background lane.
pub fn scatter_background(
    count: usize,
    highway_length: f64,
    lanes_y: &[f64],
    allow_out_of_range: bool,
    rng: &mut SimRng,
) -> Result<Vec<PlacedUe>> {
    if !allow_out_of_range && !(1..=MAX_BACKGROUND).contains(&count) {
        return Err(Error::invariant(
            "group_c.count in [1, 170]",
            format!("got {count}; set group_c.allow_out_of_range = true to override"),
        ));
    }
    if lanes_y.is_empty() {
        return Err(Error::invariant("at least one background lane", "lanes must be >= 3"));
    }
    Ok((0..count)
        .map(|_| {
            let x = rng.random_range(0.0..=highway_length);
            let y = lanes_y[rng.random_range(0..lanes_y.len())];
            PlacedUe {
                position: Position::new(x, y),
                group: GroupId::C,
                role: Role::Independent,
            }
        })
        .collect())
}

/// Sets per-group allocation modes and leader roles for a scenario.
pub fn apply_scenario(scenario: Scenario, mut topo: Topology, leader_index: usize) -> Result<Topology> {
    for g in GroupId::ALL {
        if topo.group(g).is_none() {
            return Err(Error::Config(format!("topology has no group {g}")));
        }
    }
    for spec in &mut topo.groups {
        spec.mode = scenario.mode_of(spec.group_id);
        spec.leader_index = match spec.mode {
            AllocMode::Mode2dScheduled => {
                if leader_index >= spec.size {
                    return Err(Error::invariant(
                        "mode2d.leader_index < group size",
                        format!("leader_index={leader_index}, group {} has {}", spec.group_id, spec.size),
                    ));
                }
                Some(leader_index)
            }
            AllocMode::Mode2Sensing => None,
        };
    }
    let specs = topo.groups.clone();
    for spec in &specs {
        let ids: Vec<UeId> = topo.members(spec.group_id).map(|u| u.id).collect();
        for (k, id) in ids.into_iter().enumerate() {
            let ue = &mut topo.ues[id.index()];
            ue.role = match (spec.group_id, spec.leader_index) {
                (GroupId::C, _) => Role::Independent,
                (_, Some(l)) if l == k => Role::Leader,
                _ => Role::Member,
            };
        }
    }
    Ok(topo)
}
