//! Counter-based pseudo-random numbers.
//!
//! Every draw is a pure function of `(seed, stream, i, j)`, so results do not
//! depend on evaluation order and entries can be sampled concurrently without
//! changing the output. The generator is a splitmix64 finalizer chain over the
//! key words, which is statistically solid for sampling decisions at this
//! scale and trivially portable.

/// Stream used for Bernoulli keep/drop decisions in the sparsifiers.
pub const STREAM_BERNOULLI: u64 = 0x5350_4152_5345_4e42; // "SPARSENB"-ish tag
/// Stream used for the Gaussian test matrix of the randomized range finder.
pub const STREAM_GAUSSIAN: u64 = 0x5241_4e47_4546_4e44; // "RANGEFND"-ish tag

const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;

#[inline]
fn splitmix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Raw 64-bit output for the key `(seed, stream, i, j)`.
#[inline]
pub fn key_u64(seed: u64, stream: u64, i: u64, j: u64) -> u64 {
    let mut state = splitmix(seed ^ GOLDEN);
    state = splitmix(state ^ stream);
    state = splitmix(state.wrapping_add(GOLDEN) ^ i);
    state = splitmix(state.wrapping_add(GOLDEN) ^ j);
    state
}

/// Uniform draw in `[0, 1)` for the key `(seed, stream, i, j)`.
#[inline]
pub fn uniform(seed: u64, stream: u64, i: u64, j: u64) -> f64 {
    // 53 high bits -> [0, 1) with full double precision.
    (key_u64(seed, stream, i, j) >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Standard normal draw for the key `(seed, stream, i, j)` via Box-Muller.
#[inline]
pub fn normal(seed: u64, stream: u64, i: u64, j: u64) -> f64 {
    // Shift into (0, 1] so the log is always finite.
    let u1 = ((key_u64(seed, stream, i, 2 * j) >> 11) as f64 + 1.0) * (1.0 / (1u64 << 53) as f64);
    let u2 = (key_u64(seed, stream, i, 2 * j + 1) >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}
