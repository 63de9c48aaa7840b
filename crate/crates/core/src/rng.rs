//! Seeded, splittable random streams.
//!
//! Every random quantity is drawn from a ChaCha8 stream keyed by a 64-bit
//! seed (expanded with `SeedableRng::seed_from_u64`) and selected by a 64-bit
//! stream id. ChaCha output is defined bit-for-bit independently of platform,
//! so a `(seed, stream)` pair names one fixed sequence.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Generator identification recorded in reports and manifests.
pub const GENERATOR: &str =
    "ChaCha8Rng (rand_chacha 0.9, seed_from_u64 + set_stream); normals: rand_distr 0.5 StandardNormal";

pub type StreamRng = ChaCha8Rng;

pub fn substream(seed: u64, stream: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
