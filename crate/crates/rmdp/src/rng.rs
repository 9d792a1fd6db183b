//! Counter-based deterministic random streams.
//!
//! Every draw is a pure function of the key `(seed, h, s, a, draw_index)`,
//! so sampling gives identical results under any parallel schedule and any
//! sampling order. Mixing is the splitmix64 finalizer applied per absorbed
//! key word; not cryptographic, but plenty for simulation.

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

#[inline]
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// 64 uniform bits for the keyed substream.
#[inline]
pub fn stream_u64(seed: u64, h: u64, s: u64, a: u64, draw: u64) -> u64 {
    let mut z = seed ^ GOLDEN;
    for w in [h, s, a, draw] {
        z = mix64(z ^ w.wrapping_add(1).wrapping_mul(GOLDEN));
    }
    z
}

/// Uniform draw in `[0, 1)` with 53 random bits.
#[inline]
pub fn stream_unit(seed: u64, h: u64, s: u64, a: u64, draw: u64) -> f64 {
    (stream_u64(seed, h, s, a, draw) >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}
