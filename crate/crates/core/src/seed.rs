//! Seed fan-out. A master seed is split into named, independent streams so
//! that runs differing only in scheme or agent see the same topology, data
//! and fading.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream labels.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    Topology = 1,
    Data = 2,
    Fading = 3,
    Sampler = 4,
    AgentInit = 5,
    Exploration = 6,
    Replay = 7,
    ModelInit = 8,
}

/// SplitMix64 finaliser.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// `mix64(mix64(master) ^ label)`.
pub fn derive(master: u64, label: u64) -> u64 {
    mix64(mix64(master) ^ label)
}

pub fn stream_seed(master: u64, stream: Stream) -> u64 {
    derive(master, stream as u64)
}

pub fn stream_rng(master: u64, stream: Stream) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(stream_seed(master, stream))
}

/// Per-episode seed of a stream.
pub fn episode_seed(master: u64, stream: Stream, episode: u64) -> u64 {
    derive(stream_seed(master, stream), episode)
}
