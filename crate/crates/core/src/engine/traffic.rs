//! Periodic packet sources.

use rand::Rng;

use crate::rng::SimRng;
use crate::scenario::UeId;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Packet {
    /// Unique per run: transmitter id in the high half, sequence below.
    pub id: u64,
    pub src: UeId,
    pub created_at: u64,
}

/// Generation period in slots: `payload * 8 / rate`.
pub fn period_slots(payload_bytes: u32, rate_kbps: f64, slot_ms: f64) -> f64 {
    f64::from(payload_bytes) * 8.0 / rate_kbps / slot_ms
}

/// Constant-rate source with a per-UE random phase.
#[derive(Debug, Clone)]
pub struct TrafficSource {
    src: UeId,
    period: f64,
    /// Generation instant of the next packet, in fractional slots.
    next: f64,
    seq: u64,
}

impl TrafficSource {
    /// First packet at an offset drawn uniformly from `[0, period)`.
    pub fn new(src: UeId, period_slots: f64, rng: &mut SimRng) -> Self {
        assert!(period_slots > 0.0, "traffic period must be positive");
        TrafficSource {
            src,
            period: period_slots,
            next: rng.random_range(0.0..period_slots),
            seq: 0,
        }
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    /// Slot of the next generation.
    pub fn next_slot(&self) -> u64 {
        self.next.floor() as u64
    }

    /// The packet due in slot `now`, if any. Call repeatedly when the period
    /// is shorter than a slot.
    pub fn traffic_next(&mut self, now: u64) -> Option<Packet> {
        if self.next_slot() > now {
            return None;
        }
        let p = Packet {
            id: ((self.src.0 as u64) << 32) | self.seq,
            src: self.src,
            created_at: now,
        };
        self.seq += 1;
        self.next += self.period;
        Some(p)
    }
}
