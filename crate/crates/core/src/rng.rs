//! Keyed random streams.
//!
//! Every episode owns four named substreams (instance means, reward noise,
//! policy noise and self-play policy noise). A stream is a ChaCha8 generator
//! whose seed is a hash of `(seed, phase, batch, index, substream)`, so any
//! episode can be replayed bit-for-bit without touching the others and the
//! results never depend on how episodes are scheduled across threads.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Phase {
    Train,
    Eval,
    Study,
}

impl Phase {
    fn tag(self) -> u64 {
        match self {
            Phase::Train => 0x7472_6169_6e00_0001,
            Phase::Eval => 0x6576_616c_0000_0002,
            Phase::Study => 0x7374_7564_7900_0003,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Substream {
    /// True arm means.
    Theta,
    /// The K x T reward-noise panel.
    RewardNoise,
    /// Pseudo-action draws of the learner.
    Policy,
    /// Pseudo-action draws of the independent self-play run.
    SelfPlay,
    /// Auxiliary draws (random epochs, bootstrap resampling).
    Auxiliary,
}

impl Substream {
    fn tag(self) -> u64 {
        match self {
            Substream::Theta => 1,
            Substream::RewardNoise => 2,
            Substream::Policy => 3,
            Substream::SelfPlay => 4,
            Substream::Auxiliary => 5,
        }
    }
}

/// Identifies one simulated episode: the `index`-th instance of batch `batch`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct EpisodeKey {
    pub seed: u64,
    pub phase: Phase,
    pub batch: u64,
    pub index: u64,
}

impl EpisodeKey {
    pub fn new(seed: u64, phase: Phase, batch: u64, index: u64) -> Self {
        Self {
            seed,
            phase,
            batch,
            index,
        }
    }

    pub fn stream(&self, substream: Substream) -> RandomStream {
        let mut h = splitmix64(self.seed ^ 0x243f_6a88_85a3_08d3);
        h = splitmix64(h ^ self.phase.tag());
        h = splitmix64(h ^ self.batch.wrapping_mul(0x9e37_79b9_7f4a_7c15));
        h = splitmix64(h ^ self.index.wrapping_mul(0xc2b2_ae3d_27d4_eb4f));
        h = splitmix64(h ^ substream.tag());
        RandomStream::from_key(h)
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// A deterministic source of uniform and standard-normal variates.
#[derive(Clone, Debug)]
pub struct RandomStream {
    rng: ChaCha8Rng,
}

impl RandomStream {
    pub fn from_key(key: u64) -> Self {
        let mut seed = [0u8; 32];
        let mut h = key;
        for chunk in seed.chunks_exact_mut(8) {
            h = splitmix64(h);
            chunk.copy_from_slice(&h.to_le_bytes());
        }
        Self {
            rng: ChaCha8Rng::from_seed(seed),
        }
    }

    #[inline]
    pub fn standard_normal(&mut self) -> f64 {
        self.rng.sample(StandardNormal)
    }

    pub fn fill_standard_normal(&mut self, out: &mut [f64]) {
        for x in out {
            *x = self.standard_normal();
        }
    }

    /// Uniform index in `0..n`.
    pub fn index(&mut self, n: usize) -> usize {
        self.rng.random_range(0..n)
    }

    pub fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }
}
