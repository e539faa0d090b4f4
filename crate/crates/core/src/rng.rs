//! Seeded, platform-independent pseudo-random numbers.
//!
//! All seeded operations use xoshiro256++ seeded through SplitMix64
//! (`Xoshiro256PlusPlus::seed_from_u64`). Its output depends only on the
//! 64-bit seed, never on the host's word size or endianness.

use rand::SeedableRng;
use rand_xoshiro::Xoshiro256PlusPlus;

pub type SeededRng = Xoshiro256PlusPlus;

pub fn seeded(seed: u64) -> SeededRng {
    Xoshiro256PlusPlus::seed_from_u64(seed)
}
