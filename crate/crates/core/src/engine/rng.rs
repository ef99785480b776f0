//! Counter-based random streams.
//!
//! Every replication draws from a ChaCha8 stream keyed by the run seed, with
//! the replication index as the stream id and the draw counter partitioned
//! into disjoint domains. Any single replication can therefore be replayed
//! without generating the ones before it, and arrival sampling never shares
//! words with policy coins.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Domain {
    Arrivals = 0,
    Policy = 1,
    Relabel = 2,
}

/// Words reserved per domain (the ChaCha word counter is 68 bits).
const DOMAIN_SHIFT: u32 = 64;

pub fn stream(seed: u64, replication: u64, domain: Domain) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(replication);
    rng.set_word_pos((domain as u128) << DOMAIN_SHIFT);
    rng
}
