//! Counter-based random streams.
//!
//! A stream is ChaCha8 keyed by the four words `(master seed, experiment,
//! trial, generator)`, so the draws of a stream depend only on its id and never
//! on scheduling or worker count.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Experiment ids reserved for library-internal sampling.
pub mod experiment_ids {
    pub const VARIANCE: u64 = 1;
    pub const MEAN_SEMIGROUP: u64 = 2;
    pub const CHEBYSHEV: u64 = 3;
    pub const EMPIRICAL_MEAN: u64 = 4;
    pub const EXAMPLE_ONE: u64 = 11;
    pub const EXAMPLE_TWO: u64 = 12;
    pub const EXAMPLE_THREE: u64 = 13;
    pub const CERTIFICATES: u64 = 21;
    /// LLN runs use `LLN_BASE + index of n in the n-list`.
    pub const LLN_BASE: u64 = 1_000;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct StreamId {
    pub experiment: u64,
    pub trial: u64,
    pub generator: u64,
}

impl StreamId {
    pub fn new(experiment: u64, trial: u64, generator: u64) -> Self {
        StreamId { experiment, trial, generator }
    }
}

#[derive(Debug, Clone)]
pub struct RngStream {
    id: StreamId,
    inner: ChaCha8Rng,
}

impl RngStream {
    pub fn new(master_seed: u64, id: StreamId) -> Self {
        let mut key = [0u8; 32];
        for (chunk, word) in key
            .chunks_exact_mut(8)
            .zip([master_seed, id.experiment, id.trial, id.generator])
        {
            chunk.copy_from_slice(&word.to_le_bytes());
        }
        RngStream {
            id,
            inner: ChaCha8Rng::from_seed(key),
        }
    }

    pub fn id(&self) -> StreamId {
        self.id
    }

    /// Uniform on `[0, 1)` with 53 random bits.
    pub fn uniform(&mut self) -> f64 {
        (self.inner.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform on `[lo, hi)`.
    pub fn uniform_in(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    /// Uniform on `{-1, 1}`.
    pub fn sign(&mut self) -> i64 {
        if self.inner.next_u64() & 1 == 0 {
            -1
        } else {
            1
        }
    }

    /// `P{xi = k} = 2^-k`, `k >= 1`: the index of the first head in fair coin flips.
    pub fn geometric_half(&mut self) -> u64 {
        let mut offset = 0u64;
        loop {
            let bits = self.inner.next_u64();
            if bits != 0 {
                return offset + bits.trailing_zeros() as u64 + 1;
            }
            offset += 64;
        }
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

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

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_id_same_draws() {
        let id = StreamId::new(3, 17, 5);
        let a: Vec<u64> = (0..8).map({
            let mut r = RngStream::new(42, id);
            move |_| r.next_u64()
        }).collect();
        let b: Vec<u64> = (0..8).map({
            let mut r = RngStream::new(42, id);
            move |_| r.next_u64()
        }).collect();
        assert_eq!(a, b);
    }

    #[test]
    fn distinct_ids_differ() {
        let mut a = RngStream::new(42, StreamId::new(0, 1, 0));
        let mut b = RngStream::new(42, StreamId::new(0, 0, 1));
        let mut c = RngStream::new(43, StreamId::new(0, 1, 0));
        let x = a.next_u64();
        assert_ne!(x, b.next_u64());
        assert_ne!(x, c.next_u64());
    }

    #[test]
    fn geometric_mean_is_two() {
        let mut r = RngStream::new(7, StreamId::new(0, 0, 0));
        let n = 100_000;
        let draws: Vec<u64> = (0..n).map(|_| r.geometric_half()).collect();
        assert!(draws.iter().all(|&k| k >= 1));
        let mean = draws.iter().sum::<u64>() as f64 / n as f64;
        // Var = 2, so sigma of the mean is sqrt(2/n).
        assert!((mean - 2.0).abs() < 5.0 * (2.0 / n as f64).sqrt(), "{mean}");
        let ones = draws.iter().filter(|&&k| k == 1).count() as f64 / n as f64;
        assert!((ones - 0.5).abs() < 5.0 * (0.25 / n as f64).sqrt());
    }

    #[test]
    fn uniform_range() {
        let mut r = RngStream::new(1, StreamId::new(1, 1, 1));
        for _ in 0..1000 {
            let u = r.uniform();
            assert!((0.0..1.0).contains(&u));
            assert!(matches!(r.sign(), -1 | 1));
        }
    }
}
