//! Deterministic, splittable randomness.
//!
//! Every sampling operation in the crate takes an injected `&mut impl Rng`.
//! Streams are ChaCha12 generators derived from a 64-bit master seed through
//! SplitMix64 mixing, so a run is a pure function of its seed: sessions get
//! independent streams keyed by index, and the post-processing stages
//! (sample selection, distillation) get their own sub-streams. Nothing
//! depends on thread scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

/// The concrete generator used throughout.
pub type Stream = ChaCha12Rng;

/// SplitMix64 finalizer; good avalanche for cheap seed derivation.
pub fn mix64(mut v: u64) -> u64 {
    v = v.wrapping_add(0x9E37_79B9_7F4A_7C15);
    v = (v ^ (v >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    v = (v ^ (v >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    v ^ (v >> 31)
}

/// Derive a child seed from a parent seed and a stream label.
pub fn derive_seed(parent: u64, label: u64) -> u64 {
    mix64(parent ^ mix64(label))
}

/// A fresh stream for the given seed.
pub fn stream(seed: u64) -> Stream {
    ChaCha12Rng::seed_from_u64(seed)
}

/// Stream labels for the fixed sub-streams of a session.
pub mod label {
    pub const ROUNDS: u64 = 0x0052_4F55_4E44_5300;
    pub const CLASSIFY: u64 = 0x0043_4C41_5353_0000;
    pub const DISTILL: u64 = 0x0044_4953_5400_0000;
}
