//! Deterministic random streams.
//!
//! Every random draw in the crate goes through a ChaCha8 generator keyed by
//! the run seed. Independent consumers get disjoint ChaCha streams: the
//! 64-bit stream id packs a purpose tag in the high 32 bits and a consumer
//! index (split number, iteration, ...) in the low 32 bits, so adding a
//! consumer never shifts the numbers another consumer sees.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Purpose tags for stream splitting.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u32)]
pub enum Purpose {
    Split = 1,
    KFold = 2,
    Synth = 3,
    Shots = 4,
    HpoInit = 5,
    HpoCandidates = 6,
    Sampling = 7,
}

pub fn stream(seed: u64, purpose: Purpose, index: u32) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((purpose as u64) << 32) | u64::from(index));
    rng
}
