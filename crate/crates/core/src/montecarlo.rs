//! Seeded, chunked Monte Carlo.
//!
//! A run of `count` samples is cut into fixed-size chunks. Chunk `c` draws
//! from `ChaCha8Rng` seeded with the run seed and switched to stream `c`, so
//! the sample stream does not depend on how chunks are scheduled. Chunk
//! results are merged in chunk order.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

pub const CHUNK: usize = 1 << 14;

pub type McRng = ChaCha8Rng;

/// Generator for chunk `chunk` of the run seeded by `seed`.
pub fn chunk_rng(seed: u64, chunk: u64) -> McRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(chunk);
    rng
}

/// Derive an independent seed for a named sub-task.
pub fn derive_seed(seed: u64, tag: u64) -> u64 {
    splitmix64(seed ^ splitmix64(tag.wrapping_add(0x5851_f42d_4c95_7f2d)))
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Fill `out` with a uniform point on the unit sphere (normalized Gaussian).
pub fn fill_sphere<R: Rng + ?Sized>(rng: &mut R, out: &mut [f64]) {
    loop {
        let mut r2 = 0.0;
        for v in out.iter_mut() {
            let z: f64 = rng.sample(StandardNormal);
            *v = z;
            r2 += z * z;
        }
        // The zero vector has probability zero; redraw rather than divide by it.
        if r2 > 1e-300 {
            let inv = 1.0 / r2.sqrt();
            out.iter_mut().for_each(|v| *v *= inv);
            return;
        }
    }
}

pub fn fill_gaussian<R: Rng + ?Sized>(rng: &mut R, out: &mut [f64]) {
    for v in out.iter_mut() {
        *v = rng.sample(StandardNormal);
    }
}

/// Running mean and variance (Welford), mergeable across chunks.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Welford {
    pub count: u64,
    pub mean: f64,
    m2: f64,
}

impl Welford {
    pub fn push(&mut self, x: f64) {
        self.count += 1;
        let d = x - self.mean;
        self.mean += d / self.count as f64;
        self.m2 += d * (x - self.mean);
    }

    pub fn merge(&mut self, other: &Welford) {
        if other.count == 0 {
            return;
        }
        if self.count == 0 {
            *self = *other;
            return;
        }
        let n = (self.count + other.count) as f64;
        let d = other.mean - self.mean;
        self.mean += d * other.count as f64 / n;
        self.m2 += other.m2 + d * d * self.count as f64 * other.count as f64 / n;
        self.count += other.count;
    }

    /// Unbiased sample variance.
    pub fn variance(&self) -> f64 {
        if self.count < 2 {
            return 0.0;
        }
        self.m2 / (self.count - 1) as f64
    }

    /// Standard error of the mean.
    pub fn std_error(&self) -> f64 {
        if self.count == 0 {
            return 0.0;
        }
        (self.variance() / self.count as f64).sqrt()
    }
}

/// Run `per_chunk(rng, len, acc)` over every chunk of a `count`-sample run
/// and merge the per-chunk accumulators in chunk order.
///
/// `A` is any accumulator; `merge` folds chunk results left to right.
pub fn run_chunks<A, F, M>(count: usize, seed: u64, per_chunk: F, merge: M) -> A
where
    A: Default + Send,
    F: Fn(&mut McRng, usize, &mut A) + Sync,
    M: Fn(&mut A, A),
{
    let chunks = count.div_ceil(CHUNK);
    let parts: Vec<A> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let len = CHUNK.min(count - c * CHUNK);
            let mut rng = chunk_rng(seed, c as u64);
            let mut acc = A::default();
            per_chunk(&mut rng, len, &mut acc);
            acc
        })
        .collect();
    let mut total = A::default();
    for p in parts {
        merge(&mut total, p);
    }
    total
}

/// Means of `k` statistics computed from each sample by `sample`.
pub fn mc_means<F>(count: usize, seed: u64, k: usize, sample: F) -> Vec<Welford>
where
    F: Fn(&mut McRng, &mut [f64]) + Sync,
{
    run_chunks(
        count,
        seed,
        |rng, len, acc: &mut Vec<Welford>| {
            acc.resize(k, Welford::default());
            let mut buf = vec![0.0; k];
            for _ in 0..len {
                sample(rng, &mut buf);
                for (w, &x) in acc.iter_mut().zip(&buf) {
                    w.push(x);
                }
            }
        },
        |total, part| {
            total.resize(k, Welford::default());
            for (t, p) in total.iter_mut().zip(&part) {
                t.merge(p);
            }
        },
    )
}

/// Mean of one statistic.
pub fn mc_mean<F>(count: usize, seed: u64, sample: F) -> Welford
where
    F: Fn(&mut McRng) -> f64 + Sync,
{
    mc_means(count, seed, 1, |rng, out| out[0] = sample(rng))[0]
}
