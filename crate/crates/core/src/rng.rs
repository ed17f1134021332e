//! The one seeded generator behind every sampling decision. Its name is
//! written into emitted metadata so a changed generator is detectable.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub const GENERATOR: &str = "chacha8-v1";

pub fn seeded(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Shuffles a copy of `items` and keeps the first `n`.
pub fn shuffled_prefix<T: Clone>(items: &[T], n: usize, rng: &mut ChaCha8Rng) -> Vec<T> {
    let mut v = items.to_vec();
    v.shuffle(rng);
    v.truncate(n);
    v
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_in_seed() {
        let items: Vec<u32> = (0..50).collect();
        let a = shuffled_prefix(&items, 10, &mut seeded(7));
        let b = shuffled_prefix(&items, 10, &mut seeded(7));
        let c = shuffled_prefix(&items, 10, &mut seeded(8));
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_eq!(shuffled_prefix(&items, 100, &mut seeded(1)).len(), 50);
    }
}
