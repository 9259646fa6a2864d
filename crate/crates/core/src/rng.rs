//! Seed fan-out.
//!
//! Every random draw in the crate comes from a ChaCha8 generator keyed by the
//! user seed, with the ChaCha stream id selecting the consuming component.
//! Two components never share a keystream, and a component's draws do not
//! depend on how many values any other component consumed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream ids of the components that consume randomness.
pub mod stream {
    pub const SAMPLE: u64 = 1;
    pub const ROTATION: u64 = 2;
    pub const NOISE: u64 = 3;
    pub const RANDOM_PAIRS: u64 = 4;
    /// Offset for per-scale streams: scale `t` uses `SCALE_BASE + t`.
    pub const SCALE_BASE: u64 = 1 << 32;
}

/// Returns the generator for `component` under `seed`.
pub fn component_rng(seed: u64, component: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(component);
    rng
}
