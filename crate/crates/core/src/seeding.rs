//! Deterministic random streams.
//!
//! Every random draw comes from a ChaCha8 stream identified by
//! `(master seed, purpose, round, index)`. The first three are mixed with
//! SplitMix64 into the ChaCha key; the episode index selects the ChaCha
//! stream. Results therefore do not depend on how episodes are scheduled
//! across worker threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// What a stream is used for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Purpose {
    Evaluate,
    Estimate,
    Validate,
}

impl Purpose {
    fn tag(self) -> u64 {
        match self {
            Purpose::Evaluate => 0x6576_616c,
            Purpose::Estimate => 0x6573_7469,
            Purpose::Validate => 0x7661_6c69,
        }
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Random stream for episode `index` of `round` of the given purpose.
pub fn stream(master: u64, purpose: Purpose, round: u64, index: u64) -> ChaCha8Rng {
    let key = splitmix64(splitmix64(splitmix64(master) ^ purpose.tag()) ^ round);
    let mut rng = ChaCha8Rng::seed_from_u64(key);
    rng.set_stream(index);
    rng
}
