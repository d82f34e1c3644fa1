//! Seeded random streams.
//!
//! Every sampling routine takes an explicit [`Stream`]. Replications that
//! run concurrently get disjoint child streams from [`child_stream`]:
//!
//! ```text
//! key    = splitmix64(root XOR fnv1a64(tag))
//! stream = ChaCha8(seed_from_u64(key)), stream id = index
//! ```
//!
//! The tag names the purpose ("coverage", "check-L5.4", ...) and the index is
//! the replicate number, so the same `(root, tag, index)` always yields the
//! same sequence no matter how the work is scheduled.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Stream = ChaCha8Rng;

pub fn stream_from_seed(seed: u64) -> Stream {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn child_stream(root: u64, tag: &str, index: u64) -> Stream {
    let mut rng = ChaCha8Rng::seed_from_u64(splitmix64(root ^ fnv1a64(tag.as_bytes())));
    rng.set_stream(index);
    rng
}

fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
