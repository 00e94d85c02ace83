//! Seeded random streams.
//!
//! Every consumer of randomness gets its own ChaCha stream derived from the
//! run seed, so adding a draw in one place never shifts the numbers seen by
//! another (and two UEs never share generator state).

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

pub const STREAM_TOPOLOGY: u64 = 1;
pub const STREAM_SHADOWING: u64 = 2;
pub const STREAM_TRAFFIC: u64 = 3;
const STREAM_GROUP_BASE: u64 = 1 << 16;
const STREAM_UE_BASE: u64 = 1 << 32;

pub fn stream(seed: u64, stream: u64) -> SimRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

pub fn ue_stream(seed: u64, ue: usize) -> SimRng {
    stream(seed, STREAM_UE_BASE + ue as u64)
}

pub fn group_stream(seed: u64, group: usize) -> SimRng {
    stream(seed, STREAM_GROUP_BASE + group as u64)
}
