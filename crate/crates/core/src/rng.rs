//! Counter-based random substreams.
//!
//! Every random quantity in the simulator is drawn from a ChaCha8 stream that
//! is addressed by `(master seed, path)`, where the path names what is being
//! drawn (`[TAG_FADING, drop, trial, l, j, k]` and so on). The key is derived
//! from the master seed alone and the path selects the 64-bit ChaCha stream
//! id, so a draw never depends on which worker produced it or in what order.

use nalgebra::Complex;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub const TAG_POSITION: u64 = 0x706f_7369;
pub const TAG_SHADOWING: u64 = 0x7368_6164;
pub const TAG_FADING: u64 = 0x6661_6469;
pub const TAG_NOISE: u64 = 0x6e6f_6973;
pub const TAG_SYMBOLS: u64 = 0x7379_6d62;

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Folds a path of words into one 64-bit stream id.
pub fn stream_id(path: &[u64]) -> u64 {
    path.iter()
        .fold(0x243f_6a88_85a3_08d3, |acc, &w| splitmix64(acc ^ splitmix64(w)))
}

/// Opens the substream `path` of `seed`.
pub fn substream(seed: u64, path: &[u64]) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream_id(path));
    rng
}

/// One CN(0, 1) sample: independent N(0, 1/2) real and imaginary parts.
#[inline]
pub fn complex_normal<R: rand::Rng + ?Sized>(rng: &mut R) -> Complex<f64> {
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    Complex::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}
