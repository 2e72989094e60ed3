//! Seed derivation for reproducible, schedule-independent random streams.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Purpose tags so that independent consumers of one user seed never share
/// a stream.
#[derive(Debug, Clone, Copy)]
#[repr(u64)]
pub enum Purpose {
    Design = 1,
    Simulator = 2,
    Optimizer = 3,
    Posterior = 4,
    InputSample = 5,
    Oracle = 6,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed for `purpose` derived from a user seed.
pub fn derive_seed(seed: u64, purpose: Purpose) -> u64 {
    splitmix64(seed ^ splitmix64(purpose as u64))
}

/// Independent stream `stream` of the generator for `(seed, purpose)`.
pub fn stream_rng(seed: u64, purpose: Purpose, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, purpose));
    rng.set_stream(stream);
    rng
}
