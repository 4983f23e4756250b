//! Seeded RNG streams and deterministic parallel reduction.
//!
//! Every stochastic routine takes an explicit stream so that reruns with the
//! same seed are bit-identical no matter how many worker threads rayon uses:
//! trials are split into fixed-size blocks, each block accumulates in trial
//! order, and blocks are merged in block order.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{RngExt as _, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use std::f64::consts::FRAC_1_SQRT_2;

pub type Rng = ChaCha8Rng;

/// Independent stream `stream` of the generator seeded with `seed`.
pub fn stream(seed: u64, stream: u64) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream.into());
    rng
}

/// Standard real Gaussian N(0, 1).
pub fn randn(rng: &mut Rng) -> f64 {
    rng.sample(StandardNormal)
}

/// Standard circularly-symmetric complex Gaussian CN(0, 1).
pub fn crandn(rng: &mut Rng) -> Complex64 {
    Complex64::new(randn(rng) * FRAC_1_SQRT_2, randn(rng) * FRAC_1_SQRT_2)
}

pub fn crandn_vector(rng: &mut Rng, n: usize) -> DVector<Complex64> {
    DVector::from_fn(n, |_, _| crandn(rng))
}

pub fn crandn_matrix(rng: &mut Rng, rows: usize, cols: usize) -> DMatrix<Complex64> {
    // Column-major fill so the draw order is part of the contract.
    DMatrix::from_fn(rows, cols, |_, _| crandn(rng))
}

/// Uniform angle in [-pi, pi).
pub fn uniform_phase(rng: &mut Rng) -> f64 {
    rng.random_range(-std::f64::consts::PI..std::f64::consts::PI)
}

/// Trials per parallel block; fixed so the reduction tree never depends on
/// the thread count.
pub const TRIAL_BLOCK: u64 = 256;

/// Runs `n_trials` independent trials and folds their outputs in trial order.
///
/// `eval` receives the global trial index and must derive all randomness from
/// it (e.g. via [`stream`]). The fold order is: sequential inside each block
/// of [`TRIAL_BLOCK`] trials, then sequential across blocks.
pub fn parallel_trials<A, F>(n_trials: u64, init: impl Fn() -> A + Sync, eval: F) -> A
where
    A: Send + Merge,
    F: Fn(u64, &mut A) + Sync,
{
    let n_blocks = n_trials.div_ceil(TRIAL_BLOCK);
    let partials: Vec<A> = (0..n_blocks)
        .into_par_iter()
        .map(|b| {
            let mut acc = init();
            let lo = b * TRIAL_BLOCK;
            let hi = (lo + TRIAL_BLOCK).min(n_trials);
            for t in lo..hi {
                eval(t, &mut acc);
            }
            acc
        })
        .collect();
    let mut iter = partials.into_iter();
    let mut total = iter.next().unwrap_or_else(&init);
    for p in iter {
        total = merge_with(total, p);
    }
    total
}

// The accumulator merge used by `parallel_trials`.
pub trait Merge {
    fn merge(self, other: Self) -> Self;
}

fn merge_with<A>(a: A, b: A) -> A
where
    A: Merge,
{
    a.merge(b)
}

impl Merge for f64 {
    fn merge(self, other: Self) -> Self {
        self + other
    }
}

impl Merge for DVector<Complex64> {
    fn merge(self, other: Self) -> Self {
        self + other
    }
}

impl Merge for DMatrix<Complex64> {
    fn merge(self, other: Self) -> Self {
        self + other
    }
}

impl Merge for DVector<f64> {
    fn merge(self, other: Self) -> Self {
        self + other
    }
}

impl Merge for DMatrix<f64> {
    fn merge(self, other: Self) -> Self {
        self + other
    }
}

impl<T: Merge> Merge for Vec<T> {
    fn merge(self, other: Self) -> Self {
        self.into_iter()
            .zip(other)
            .map(|(a, b)| a.merge(b))
            .collect()
    }
}

impl<A: Merge, B: Merge> Merge for (A, B) {
    fn merge(self, other: Self) -> Self {
        (self.0.merge(other.0), self.1.merge(other.1))
    }
}

impl<A: Merge, B: Merge, C: Merge> Merge for (A, B, C) {
    fn merge(self, other: Self) -> Self {
        (
            self.0.merge(other.0),
            self.1.merge(other.1),
            self.2.merge(other.2),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn streams_are_independent_and_reproducible() {
        let a: Vec<f64> = {
            let mut r = stream(7, 0);
            (0..8).map(|_| randn(&mut r)).collect()
        };
        let b: Vec<f64> = {
            let mut r = stream(7, 0);
            (0..8).map(|_| randn(&mut r)).collect()
        };
        let c: Vec<f64> = {
            let mut r = stream(7, 1);
            (0..8).map(|_| randn(&mut r)).collect()
        };
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn crandn_is_unit_variance() {
        let mut r = stream(3, 0);
        let n = 200_000;
        let mut pow = 0.0;
        for _ in 0..n {
            pow += crandn(&mut r).norm_sqr();
        }
        let mean = pow / n as f64;
        assert!((mean - 1.0).abs() < 0.01, "mean power {mean}");
    }

    #[test]
    fn parallel_trials_is_thread_count_invariant() {
        let run = |threads: usize| -> f64 {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap();
            pool.install(|| {
                parallel_trials(
                    1000,
                    || 0.0f64,
                    |t, acc| {
                        let mut r = stream(11, t);
                        *acc += randn(&mut r) * 1e-3 + (t as f64).sin();
                    },
                )
            })
        };
        let one = run(1);
        let four = run(4);
        assert_eq!(one.to_bits(), four.to_bits());
    }
}
