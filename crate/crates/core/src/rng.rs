//! Counter-addressed random streams.
//!
//! A stream is keyed by `(seed, chain)`. Randomness for a given step is read
//! from a fixed offset `counter << 32` inside the ChaCha keystream, so the
//! numbers drawn at step `n` of chain `c` do not depend on how many numbers
//! were drawn before it or on which thread ran the chain.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Separates independent uses of the same user seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Domain {
    Sampler = 0x5a3c_91e1_0000_0001,
    Bootstrap = 0x5a3c_91e1_0000_0002,
    Diagnostics = 0x5a3c_91e1_0000_0003,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[derive(Debug, Clone)]
pub struct CounterRng {
    rng: ChaCha8Rng,
}

impl CounterRng {
    pub fn new(seed: u64, chain: u64, domain: Domain) -> Self {
        let mut key = [0u8; 32];
        let mut state = seed ^ domain as u64;
        for chunk in key.chunks_mut(8) {
            state = splitmix64(state);
            chunk.copy_from_slice(&state.to_le_bytes());
        }
        let mut rng = ChaCha8Rng::from_seed(key);
        rng.set_stream(chain);
        Self { rng }
    }

    /// Positions the stream at the block reserved for `counter` and returns it.
    pub fn at(&mut self, counter: u64) -> &mut ChaCha8Rng {
        self.rng.set_word_pos((counter as u128) << 32);
        &mut self.rng
    }

    pub fn normals_at(&mut self, counter: u64, out: &mut [f64]) {
        let rng = self.at(counter);
        fill_normals(rng, out);
    }
}

pub fn fill_normals<R: Rng + ?Sized>(rng: &mut R, out: &mut [f64]) {
    for v in out {
        *v = rng.sample(StandardNormal);
    }
}
