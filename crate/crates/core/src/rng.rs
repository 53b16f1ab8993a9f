use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Independent, reproducible random stream `id` derived from `seed`.
pub fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

/// Stream ids used across the crate.
pub mod ids {
    pub const LAYOUT: u64 = 0;
    pub const DYNAMICS: u64 = 1;
    pub const INIT: u64 = 2;
    pub const EXPLORATION: u64 = 3;
    pub const REPLAY: u64 = 4;
    pub const SCENARIO_DRAW: u64 = 5;
}
