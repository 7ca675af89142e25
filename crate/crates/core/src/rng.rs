//! Counter-style random streams.
//!
//! Every stream is a ChaCha8 keystream whose key packs the master seed, the
//! experiment cell and a domain tag, and whose stream id is the replication
//! index. Draws therefore depend only on `(seed, cell, domain, replication)`,
//! never on scheduling.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

use crate::normal::fast_quantile;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Domain {
    Noise = 1,
    Support = 2,
    Permutation = 3,
    Gumbel = 4,
    Matrix = 5,
}

pub fn stream(seed: u64, cell: u64, domain: Domain, replication: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[0..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&cell.to_le_bytes());
    key[16..24].copy_from_slice(&(domain as u64).to_le_bytes());
    key[24..32].copy_from_slice(b"maxconc1");
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(replication);
    rng
}

/// Uniform on the open interval (0, 1) with 53 bits.
#[inline]
pub fn uniform_open<R: RngCore>(rng: &mut R) -> f64 {
    ((rng.next_u64() >> 11) as f64 + 0.5) * (1.0 / 9_007_199_254_740_992.0)
}

#[inline]
pub fn standard_normal<R: RngCore>(rng: &mut R) -> f64 {
    fast_quantile(uniform_open(rng))
}

pub fn fill_normal<R: RngCore>(rng: &mut R, out: &mut [f64]) {
    for x in out {
        *x = standard_normal(rng);
    }
}

/// Integer in `[0, n)` by widening multiply.
#[inline]
pub fn index_below<R: RngCore>(rng: &mut R, n: usize) -> usize {
    ((rng.next_u64() as u128 * n as u128) >> 64) as usize
}

/// Fisher–Yates shuffle of `0..n`.
pub fn shuffled_indices<R: RngCore>(rng: &mut R, n: usize) -> Vec<usize> {
    let mut v: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        let j = index_below(rng, i + 1);
        v.swap(i, j);
    }
    v
}
