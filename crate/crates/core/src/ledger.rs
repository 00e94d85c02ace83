//! Rolling per-slot record of sidelink transmissions.

use std::collections::VecDeque;

use crate::grid::SlResource;
use crate::radio::RxCause;
use crate::scenario::UeId;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TxEntry {
    pub tx: UeId,
    /// Resource in reservation-period coordinates; `resource.subchannel` is
    /// the first subchannel of the transport block.
    pub resource: SlResource,
    pub width: u32,
    pub packet_id: u64,
    /// Whether the SCI of this transmission announces a reservation for the
    /// next period.
    pub reservation: bool,
}

impl TxEntry {
    pub fn overlaps(&self, other: &TxEntry) -> bool {
        let (a0, a1) = (self.resource.subchannel, self.resource.subchannel + self.width);
        let (b0, b1) = (other.resource.subchannel, other.resource.subchannel + other.width);
        a0 < b1 && b0 < a1
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OutcomeEntry {
    pub tx: UeId,
    pub rx: UeId,
    pub decoded: bool,
    pub cause: RxCause,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SlotRecord {
    pub slot: u64,
    pub txs: Vec<TxEntry>,
    /// Only filled when outcome recording is enabled on the engine.
    pub outcomes: Vec<OutcomeEntry>,
}

impl SlotRecord {
    pub fn transmitted(&self, ue: UeId) -> bool {
        self.txs.iter().any(|t| t.tx == ue)
    }

    /// Transmitters whose transport block overlaps `entry` (including
    /// `entry.tx` itself).
    pub fn co_channel(&self, entry: &TxEntry, out: &mut Vec<UeId>) {
        out.clear();
        out.extend(self.txs.iter().filter(|t| t.overlaps(entry)).map(|t| t.tx));
    }
}

/// Keeps the most recent `capacity` slots.
#[derive(Debug, Clone)]
pub struct SlotLedger {
    capacity: usize,
    slots: VecDeque<SlotRecord>,
}

impl SlotLedger {
    pub fn new(capacity: usize) -> Self {
        SlotLedger {
            capacity: capacity.max(1),
            slots: VecDeque::with_capacity(capacity.max(1) + 1),
        }
    }

    pub fn push(&mut self, record: SlotRecord) {
        debug_assert!(self.slots.back().is_none_or(|b| b.slot < record.slot));
        if self.slots.len() == self.capacity {
            self.slots.pop_front();
        }
        self.slots.push_back(record);
    }

    /// Records with `from <= slot < to`, oldest first.
    pub fn range(&self, from: u64, to: u64) -> impl Iterator<Item = &SlotRecord> {
        self.slots.iter().filter(move |r| r.slot >= from && r.slot < to)
    }

    pub fn get(&self, slot: u64) -> Option<&SlotRecord> {
        self.slots.iter().find(|r| r.slot == slot)
    }

    pub fn iter(&self) -> impl Iterator<Item = &SlotRecord> {
        self.slots.iter()
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }
}
