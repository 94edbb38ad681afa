//! Named random streams.
//!
//! Every draw in a run comes from a ChaCha stream keyed by
//! `(seed, component, step, index)`, so results do not depend on how
//! particles are scheduled across worker threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// Which part of the pipeline a stream feeds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Component {
    Prior = 1,
    Propagate = 2,
    Resample = 3,
    Kernel = 4,
    Observe = 5,
    Predict = 6,
    Simulate = 7,
    Replicate = 8,
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derive the seed word for a named stream.
pub fn derive(seed: u64, component: Component, step: u64, index: u64) -> u64 {
    let mut h = splitmix(seed);
    h = splitmix(h ^ component as u64);
    h = splitmix(h ^ step);
    splitmix(h ^ index)
}

pub fn stream(seed: u64, component: Component, step: u64, index: u64) -> StreamRng {
    StreamRng::seed_from_u64(derive(seed, component, step, index))
}
