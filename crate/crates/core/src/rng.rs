//! Deterministic random source shared by every stochastic step.
//!
//! All shuffles, bootstrap draws, subsamples and simulated noise are driven by
//! `SplitMix64` so that another implementation can reproduce fold assignments
//! and datasets bit-for-bit. The algorithm (version 1) is:
//!
//! ```text
//! state  <- state + 0x9E3779B97F4A7C15          (wrapping)
//! z      <- state
//! z      <- (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9 (wrapping)
//! z      <- (z ^ (z >> 27)) * 0x94D049BB133111EB (wrapping)
//! output <- z ^ (z >> 31)
//! ```
//!
//! Derived draws:
//! - `next_f64`: `(next_u64 >> 11) * 2^-53`, uniform on `[0, 1)`.
//! - `below(n)`: `next_u64 % n`. The modulo bias is below `n / 2^64` and is
//!   accepted so the rule stays a one-liner in any language.
//! - `normal`: Box-Muller, cosine branch only. `u1 = 1 - next_f64()` (in `(0, 1]`),
//!   `u2 = next_f64()`, `z = sqrt(-2 ln u1) * cos(2 pi u2)`. Two draws per normal.
//! - `shuffle`: Fisher-Yates from the back: for `i = n-1 .. 1`, `j = below(i+1)`,
//!   swap `i` and `j`.

/// Version tag of the generator and derived-draw rules above.
pub const RNG_VERSION: &str = "splitmix64-v1";

#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        Self { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform integer in `[0, n)`. `n` must be non-zero.
    pub fn below(&mut self, n: usize) -> usize {
        debug_assert!(n > 0);
        (self.next_u64() % n as u64) as usize
    }

    /// Standard normal draw.
    pub fn normal(&mut self) -> f64 {
        let u1 = 1.0 - self.next_f64();
        let u2 = self.next_f64();
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }

    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.below(i + 1);
            items.swap(i, j);
        }
    }

    /// Seed for an independent child stream (used for per-tree and per-fold seeds).
    pub fn fork(&mut self) -> u64 {
        self.next_u64()
    }
}
