//! Per-trajectory random streams.
//!
//! Stream `(master_seed, stream_id)` is xoshiro256++ seeded with
//! `splitmix64(master_seed ^ splitmix64(stream_id ^ STREAM_SALT))`, the 256-bit
//! state being expanded from that key by `Xoshiro256PlusPlus::seed_from_u64`
//! (itself SplitMix64). A stream depends on nothing else, so trajectories are
//! reproducible under any scheduling.

use rand::{RngCore, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;

const STREAM_SALT: u64 = 0x6a09_e667_f3bc_c909;

/// One step of the SplitMix64 output function.
pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[derive(Clone, Debug)]
pub struct RngStream {
    inner: Xoshiro256PlusPlus,
    stream_id: u64,
}

impl RngStream {
    pub fn new(master_seed: u64, stream_id: u64) -> Self {
        let key = splitmix64(master_seed ^ splitmix64(stream_id ^ STREAM_SALT));
        RngStream { inner: Xoshiro256PlusPlus::seed_from_u64(key), stream_id }
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    /// Uniform integer in `[0, n)` by 128-bit multiply-shift; bias at most `n / 2^64`.
    #[inline(always)]
    pub fn below(&mut self, n: usize) -> usize {
        ((self.inner.next_u64() as u128 * n as u128) >> 64) as usize
    }

    #[inline]
    pub fn next_bit(&mut self) -> bool {
        self.inner.next_u64() >> 63 == 1
    }

    /// Uniform in `[0, 1)` with 53 bits of resolution.
    #[inline]
    pub fn unit(&mut self) -> f64 {
        (self.inner.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }
}

impl RngCore for RngStream {
    #[inline(always)]
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }
    #[inline(always)]
    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }
    fn fill_bytes(&mut self, dest: &mut [u8]) {
        self.inner.fill_bytes(dest)
    }
    fn try_fill_bytes(&mut self, dest: &mut [u8]) -> Result<(), rand::Error> {
        self.inner.try_fill_bytes(dest)
    }
}
