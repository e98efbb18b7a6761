//! Counter-based random streams.
//!
//! A parallel sweep must produce the same configuration regardless of how
//! sites are split across workers, so every site's uniform draw is a pure
//! function of `(seed, sweep, site)`: the ChaCha8 key comes from the seed,
//! the stream id is the sweep counter and the word position is `2 * site`.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Generator positioned at the draw of `first_site` in stream `stream`.
/// Successive `next_u64` calls yield the draws of the following sites.
pub fn site_stream(seed: u64, stream: u64, first_site: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng.set_word_pos(2 * first_site as u128);
    rng
}

/// Uniform in `[0, 1)` with 53 random bits.
#[inline]
pub fn unit_f64(bits: u64) -> f64 {
    (bits >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// The uniform draw of a single site; slow reference for [`site_stream`].
pub fn site_uniform(seed: u64, stream: u64, site: usize) -> f64 {
    unit_f64(site_stream(seed, stream, site).next_u64())
}

/// SplitMix64 finaliser, used to derive independent seeds for auxiliary
/// generators (Glauber baseline, initial states) from a user seed.
pub fn derive_seed(seed: u64, tag: u64) -> u64 {
    let mut z = seed ^ tag.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
