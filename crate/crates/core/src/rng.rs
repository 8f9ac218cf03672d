//! Seeded deterministic random numbers.
//!
//! Hand-rolled splitmix64 instead of an external RNG crate: the instruction
//! ids, expected signatures, and Monte-Carlo campaigns must reproduce
//! byte-for-byte across releases, and the counter-based derivation below is
//! what makes parallel campaigns independent of worker count.

/// splitmix64 stream.
#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        Self { state: seed }
    }

    /// Independent stream for sample `index` of a seeded campaign. Sample i
    /// draws from `derive(seed, i)` no matter which worker runs it.
    pub fn derive(seed: u64, index: u64) -> Self {
        let mut r = Self::new(seed ^ mix(index.wrapping_mul(0xA076_1D64_78BD_642F)));
        r.next_u64();
        r
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        mix(self.state)
    }

    pub fn next_u32(&mut self) -> u32 {
        (self.next_u64() >> 32) as u32
    }

    /// Uniform draw in `0..n`. The modulo bias is below 2^-32 for every n
    /// used here, far under campaign noise.
    pub fn next_range(&mut self, n: u64) -> u64 {
        debug_assert!(n > 0);
        self.next_u64() % n
    }

    /// Nonzero 32-bit value.
    pub fn next_u32_nonzero(&mut self) -> u32 {
        loop {
            let v = self.next_u32();
            if v != 0 {
                return v;
            }
        }
    }

    /// `count` distinct values from `0..n`, ascending.
    pub fn distinct(&mut self, n: u64, count: usize) -> Vec<u64> {
        debug_assert!((count as u64) <= n);
        let mut picked = Vec::with_capacity(count);
        while picked.len() < count {
            let v = self.next_range(n);
            if !picked.contains(&v) {
                picked.push(v);
            }
        }
        picked.sort_unstable();
        picked
    }
}

fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
