use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma};

use crate::error::{Error, Result};

/// Seedable random stream identified by `(master_seed, stream_id)`.
///
/// Backed by ChaCha8, whose 64-bit stream selector gives each stream an
/// independent sequence. The same pair always yields the same draws, so work
/// can be handed to any thread once its stream is assigned.
#[derive(Debug, Clone)]
pub struct RngStream {
    master_seed: u64,
    stream_id: u64,
    rng: ChaCha8Rng,
}

impl RngStream {
    pub fn new(master_seed: u64, stream_id: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
        rng.set_stream(stream_id);
        RngStream {
            master_seed,
            stream_id,
            rng,
        }
    }

    /// Stream whose id is derived from a path of labels, e.g.
    /// `[purpose, replicate, subsample]`.
    pub fn derive(master_seed: u64, path: &[u64]) -> Self {
        RngStream::new(master_seed, stream_id(path))
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    /// Uniform draw on `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        self.rng.random::<f64>()
    }

    pub fn uniform_range(&mut self, lo: f64, hi: f64) -> f64 {
        if hi <= lo {
            return lo;
        }
        lo + (hi - lo) * self.uniform()
    }

    /// Uniform integer in `0..n`.
    pub fn index(&mut self, n: usize) -> usize {
        self.rng.random_range(0..n)
    }

    pub fn standard_normal(&mut self) -> f64 {
        rand_distr::StandardNormal.sample(&mut self.rng)
    }

    /// Gamma draw with the given shape and rate (mean `shape / rate`).
    pub fn gamma(&mut self, shape: f64, rate: f64) -> Result<f64> {
        sample_gamma(shape, rate, self)
    }

    /// `k` distinct indices from `0..n`, in draw order.
    pub fn sample_without_replacement(&mut self, n: usize, k: usize) -> Vec<usize> {
        rand::seq::index::sample(&mut self.rng, n, k).into_vec()
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.rng.fill_bytes(dst)
    }
}

/// Mixes a label path into a single stream id (splitmix64 finalizer chain).
pub fn stream_id(path: &[u64]) -> u64 {
    let mut acc: u64 = 0x6A09_E667_F3BC_C908;
    for &p in path {
        acc = splitmix64(acc ^ splitmix64(p.wrapping_add(0x9E37_79B9_7F4A_7C15)));
    }
    acc
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// One draw from Gamma(shape, rate).
pub fn sample_gamma(shape: f64, rate: f64, rng: &mut RngStream) -> Result<f64> {
    if !(shape > 0.0 && rate > 0.0) || !shape.is_finite() || !rate.is_finite() {
        return Err(Error::Domain(format!(
            "gamma needs shape > 0 and rate > 0, got ({shape}, {rate})"
        )));
    }
    let dist = Gamma::new(shape, 1.0 / rate).map_err(|e| Error::Domain(e.to_string()))?;
    Ok(dist.sample(&mut rng.rng))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_pair_same_sequence() {
        let mut a = RngStream::new(7, 3);
        let mut b = RngStream::new(7, 3);
        let xs: Vec<f64> = (0..16).map(|_| a.uniform()).collect();
        let ys: Vec<f64> = (0..16).map(|_| b.uniform()).collect();
        assert_eq!(xs, ys);
    }

    #[test]
    fn streams_differ() {
        let mut a = RngStream::new(7, 3);
        let mut b = RngStream::new(7, 4);
        let mut c = RngStream::new(8, 3);
        let x = a.next_u64();
        assert_ne!(x, b.next_u64());
        assert_ne!(x, c.next_u64());
        assert_ne!(stream_id(&[1, 2]), stream_id(&[2, 1]));
        assert_ne!(stream_id(&[1]), stream_id(&[1, 0]));
    }

    #[test]
    fn gamma_rejects_bad_parameters() {
        let mut r = RngStream::new(0, 0);
        assert!(sample_gamma(0.0, 1.0, &mut r).is_err());
        assert!(sample_gamma(1.0, -1.0, &mut r).is_err());
    }

    #[test]
    fn gamma_is_reproducible() {
        let mut a = RngStream::new(11, 0);
        let mut b = RngStream::new(11, 0);
        for _ in 0..100 {
            assert_eq!(a.gamma(5.0, 100.0).unwrap(), b.gamma(5.0, 100.0).unwrap());
        }
    }

    #[test]
    fn without_replacement_is_distinct() {
        let mut r = RngStream::new(1, 1);
        let mut s = r.sample_without_replacement(50, 25);
        s.sort_unstable();
        s.dedup();
        assert_eq!(s.len(), 25);
    }
}
