//! Seeded RNG helpers over a ChaCha8 stream.
//!
//! Sampling and shuffling are implemented directly on `Rng::next_u64`
//! so the byte-for-byte behavior is pinned by this crate, not by whichever
//! algorithms a rand release ships.

use rand_core::Rng;

pub(crate) type SeededRng = rand_chacha::ChaCha8Rng;

pub(crate) fn seeded(seed: u64) -> SeededRng {
    use rand_chacha::rand_core::SeedableRng;
    SeededRng::seed_from_u64(seed)
}

/// Uniform integer in `[0, bound)` via rejection sampling (no modulo bias).
pub(crate) fn below(rng: &mut impl Rng, bound: u64) -> u64 {
    assert!(bound > 0);
    let zone = u64::MAX - (u64::MAX - bound + 1) % bound;
    loop {
        let raw = rng.next_u64();
        if raw <= zone {
            return raw % bound;
        }
    }
}

/// Uniform f64 in `[0, 1)` with 53 random bits.
pub(crate) fn unit_f64(rng: &mut impl Rng) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

pub(crate) fn bernoulli(rng: &mut impl Rng, p: f64) -> bool {
    unit_f64(rng) < p
}

pub(crate) fn choose<'a, T>(rng: &mut impl Rng, items: &'a [T]) -> &'a T {
    &items[below(rng, items.len() as u64) as usize]
}

/// In-place Fisher-Yates shuffle.
pub(crate) fn shuffle<T>(rng: &mut impl Rng, items: &mut [T]) {
    for i in (1..items.len()).rev() {
        let j = below(rng, (i + 1) as u64) as usize;
        items.swap(i, j);
    }
}
