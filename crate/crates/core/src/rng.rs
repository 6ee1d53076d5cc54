//! Replicate streams. Each `(seed, n, replicate)` triple maps to its own
//! ChaCha8 stream, so the draws of one replicate never depend on how many
//! others ran before it or on which thread ran it.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

// splitmix64 finalizer
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Key for a `(seed, n)` cell of an experiment grid.
pub fn cell_key(seed: u64, n: u64) -> [u8; 32] {
    let mut key = [0u8; 32];
    let mut state = mix(seed) ^ mix(n.wrapping_add(0x5851_f42d_4c95_7f2d));
    for chunk in key.chunks_exact_mut(8) {
        state = mix(state);
        chunk.copy_from_slice(&state.to_le_bytes());
    }
    key
}

pub fn replicate_stream(seed: u64, n: u64, replicate: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::from_seed(cell_key(seed, n));
    rng.set_stream(replicate);
    rng
}
