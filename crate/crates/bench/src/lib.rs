//! Benchmark helpers: deterministic instance generators shared by the
//! criterion targets.

use rand_free::LcgRng;
use specflow_core::Signal;

mod rand_free {
    /// Tiny deterministic generator so the benches do not depend on the
    /// rand crate at library level.
    pub struct LcgRng(u64);

    impl LcgRng {
        pub fn new(seed: u64) -> Self {
            LcgRng(seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407))
        }

        pub fn next_f64(&mut self) -> f64 {
            self.0 = self.0.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((self.0 >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
        }
    }
}

/// A reproducible random signal in [-1, 1]^n.
pub fn random_signal(n: usize, seed: u64) -> Signal {
    let mut rng = LcgRng::new(seed);
    Signal::new((0..n).map(|_| rng.next_f64()).collect()).expect("finite")
}
