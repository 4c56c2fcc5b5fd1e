//! Seed mixing shared by the planner and the instance generator.
//!
//! The mixer is the SplitMix64 output step:
//!
//! ```text
//! mix(x):
//!     z = x + 0x9E3779B97F4A7C15            (wrapping)
//!     z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
//!     z = (z ^ (z >> 27)) * 0x94D049BB133111EB
//!     return z ^ (z >> 31)
//! ```
//!
//! A word sequence `w0, w1, ..., wk` is folded as
//! `h = mix(w0); h = mix(h ^ mix(wi))` for each following word. Every step is
//! a bijection of the last word for a fixed prefix, so sequences that differ
//! only in their last word never collide.

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

pub fn mix(x: u64) -> u64 {
    let mut z = x.wrapping_add(GOLDEN_GAMMA);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn mix_words(words: &[u64]) -> u64 {
    let mut iter = words.iter();
    let mut h = match iter.next() {
        Some(&w) => mix(w),
        None => return mix(0),
    };
    for &w in iter {
        h = mix(h ^ mix(w));
    }
    h
}
