//! Seeding scheme.
//!
//! Every random stream is a ChaCha8 generator keyed by the experiment's root
//! seed; independent streams (one per trajectory, per q value, ...) are
//! selected with the generator's 64-bit stream id. Results are therefore
//! identical for any thread count.

use rand::{Rng, SeedableRng};
pub use rand_chacha::ChaCha8Rng as SimRng;

/// The generator for `stream` under `root_seed`.
pub fn stream_rng(root_seed: u64, stream: u64) -> SimRng {
    let mut rng = SimRng::seed_from_u64(root_seed);
    rng.set_stream(stream);
    rng
}

/// Stream id for trajectory `index` of job `job` (e.g. the position in a q sweep).
pub fn stream_id(job: u32, index: u32) -> u64 {
    ((job as u64) << 32) | index as u64
}

/// Exponential variate with the given rate, by inversion.
#[inline]
pub fn exponential<R: Rng + ?Sized>(rng: &mut R, rate: f64) -> f64 {
    let u: f64 = rng.random();
    -crate::math::ln(1.0 - u) / rate
}
