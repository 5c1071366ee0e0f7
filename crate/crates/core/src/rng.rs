//! Counter-based random substreams.
//!
//! Every replicate draws from its own ChaCha8 stream keyed by
//! `(seed, domain)` with the replicate index as the stream id, so the
//! values a replicate sees never depend on how work is scheduled.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream domains. Distinct domains under one seed are independent.
pub mod domain {
    pub const CHAOS_DRAWS: u64 = 1;
    pub const SURROGATE: u64 = 2;
    pub const ITO_ORACLE: u64 = 3;
    pub const SPHERE_FIELD: u64 = 4;
    pub const FAMILY_ROW: u64 = 5;
    pub const BL_FLOOR: u64 = 6;
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives a child seed from `(seed, tag)`.
pub fn derive_seed(seed: u64, tag: u64) -> u64 {
    let mut s = seed ^ splitmix64(&mut tag.wrapping_mul(0xD6E8_FEB8_6659_FD93));
    splitmix64(&mut s)
}

/// The generator for replicate `index` of stream `domain` under `seed`.
pub fn substream(seed: u64, domain: u64, index: u64) -> ChaCha8Rng {
    let mut state = derive_seed(seed, domain);
    let mut key = [0u8; 32];
    for chunk in key.chunks_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(index);
    rng
}
