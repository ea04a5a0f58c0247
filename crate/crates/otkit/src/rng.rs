//! Counter-based pseudo-random generator used for all synthetic sampling.
//!
//! The generator is SplitMix64: the state advances by a fixed odd constant
//! and each output is a finalizer of the counter.  It is specified here in
//! full so that golden files and seeded tests are reproducible on every
//! platform: only 64-bit integer arithmetic is involved.

#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        Self { state: seed }
    }

    /// Derives an independent stream, e.g. one per trial in a sweep.
    pub fn stream(seed: u64, stream: u64) -> Self {
        let mut root = Self::new(seed);
        let mut s = root.next_u64();
        for _ in 0..2 {
            s = s.wrapping_add(stream.wrapping_mul(0x9e37_79b9_7f4a_7c15));
            s = Self::mix(s);
        }
        Self { state: s }
    }

    fn mix(mut z: u64) -> u64 {
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^ (z >> 31)
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9e37_79b9_7f4a_7c15);
        Self::mix(self.state)
    }

    /// Uniform double in [0, 1), 53 bits of precision.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform double in (0, 1]; never returns exactly zero.
    pub fn next_f64_open(&mut self) -> f64 {
        1.0 - self.next_f64()
    }

    /// Uniform integer in [0, n).
    pub fn next_index(&mut self, n: usize) -> usize {
        (self.next_u64() % n as u64) as usize
    }
}
