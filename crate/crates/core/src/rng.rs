//! Counter-based random number generation.
//!
//! Every draw is a pure function of `(seed, stream, counter)`, so noise
//! consumed at step `k`, coordinate `i` of a Markov chain (or record `i`,
//! slot `j` of a dataset) does not depend on evaluation order. This is what
//! makes checkpoint/resume and multi-threaded gradient evaluation bit-exact.

/// SplitMix64 finalizer; full-period bijective mixer on `u64`.
#[inline]
fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Stateless counter-keyed generator.
#[derive(Debug, Clone, Copy)]
pub struct CounterRng {
    seed: u64,
}

impl CounterRng {
    pub fn new(seed: u64) -> Self {
        CounterRng { seed }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    #[inline]
    fn word(&self, stream: u64, counter: u64) -> u64 {
        // Sequentially absorb the key words; each absorption is a bijection
        // of the running state, keyed by the next word.
        let h = splitmix(self.seed);
        let h = splitmix(h ^ stream);
        splitmix(h ^ counter)
    }

    /// Uniform draw in the open interval (0, 1).
    #[inline]
    pub fn uniform(&self, stream: u64, counter: u64) -> f64 {
        // 53-bit mantissa, offset by half an ulp so 0 is never returned.
        ((self.word(stream, counter) >> 11) as f64 + 0.5) * (1.0 / 9007199254740992.0)
    }

    /// Standard normal draw via Box-Muller; consumes counters `2c` and `2c+1`.
    #[inline]
    pub fn standard_normal(&self, stream: u64, counter: u64) -> f64 {
        let u1 = self.uniform(stream, 2 * counter);
        let u2 = self.uniform(stream, 2 * counter + 1);
        (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
    }
}
