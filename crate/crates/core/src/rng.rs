//! Seeded, platform-independent random stream shared by every run.

use rand::{Rng as _, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// ChaCha8 stream keyed by a 64-bit seed.
///
/// The `ChaCha8` output sequence is specified independently of the host, so
/// identical seeds and call sequences give identical draws everywhere.
#[derive(Debug, Clone)]
pub struct Rng {
    seed: u64,
    inner: ChaCha8Rng,
}

impl Rng {
    pub const ALGORITHM: &'static str = "chacha8";

    pub fn new(seed: u64) -> Self {
        Self { seed, inner: ChaCha8Rng::seed_from_u64(seed) }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Number of 32-bit words consumed so far.
    pub fn draw_counter(&self) -> u128 {
        self.inner.get_word_pos()
    }

    /// Uniform in `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        self.inner.random::<f64>()
    }

    pub fn standard_normal(&mut self) -> f64 {
        rand_distr::Distribution::sample(&rand_distr::StandardNormal, &mut self.inner)
    }

    /// Derives an independent stream, e.g. one per seed of an experiment.
    pub fn fork(&mut self) -> Rng {
        let seed = self.inner.next_u64();
        Rng::new(seed)
    }
}

impl RngCore for Rng {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.inner.fill_bytes(dst)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_stream() {
        let mut a = Rng::new(42);
        let mut b = Rng::new(42);
        for _ in 0..100 {
            assert_eq!(a.next_u64(), b.next_u64());
        }
        assert_eq!(a.draw_counter(), 200);
    }

    #[test]
    fn known_first_words() {
        // Freezes the stream so a dependency bump that changes it is caught.
        let mut r = Rng::new(0);
        let first = r.next_u64();
        assert_eq!(first, 13_080_132_717_333_068_652);
        assert_eq!(Rng::new(0).uniform(), 0.7090754154265618);
        let mut again = Rng::new(0);
        assert_eq!(first, again.next_u64());
        assert_ne!(first, Rng::new(1).next_u64());
    }
}
