//! Deterministic random streams.
//!
//! Every stochastic quantity is drawn from a ChaCha8 generator keyed by a
//! 64-bit seed and a stream number. Cell `j` of a lattice owns its own stream,
//! so the triple drawn for a cell does not depend on traversal order or on
//! how work is split across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream reserved for the global lattice shift.
pub const SHIFT_STREAM: u64 = 0;

pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn zigzag(v: i64) -> u64 {
    ((v << 1) ^ (v >> 63)) as u64
}

fn spread_bits(v: u32) -> u64 {
    let mut x = v as u64;
    x = (x | (x << 16)) & 0x0000_ffff_0000_ffff;
    x = (x | (x << 8)) & 0x00ff_00ff_00ff_00ff;
    x = (x | (x << 4)) & 0x0f0f_0f0f_0f0f_0f0f;
    x = (x | (x << 2)) & 0x3333_3333_3333_3333;
    x = (x | (x << 1)) & 0x5555_5555_5555_5555;
    x
}

/// Stream number owned by lattice cell `(j1, j2)`; distinct for
/// `|j1|, |j2| < 2^31` and never equal to [`SHIFT_STREAM`].
pub fn cell_stream(j1: i64, j2: i64) -> u64 {
    let a = spread_bits(zigzag(j1) as u32);
    let b = spread_bits(zigzag(j2) as u32);
    1 + (a | (b << 1))
}

/// SplitMix64 finalizer, used to derive child seeds (ensemble members,
/// Monte Carlo batches) from a parent seed.
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed.wrapping_add(0x9e37_79b9_7f4a_7c15u64.wrapping_mul(index.wrapping_add(1)));
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
