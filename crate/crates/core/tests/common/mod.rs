#![allow(dead_code)]

use std::sync::atomic::{AtomicU64, Ordering};

use mses::bench::Objective;
use nalgebra::DMatrix;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Entries uniform in [-1, 1).
pub fn random_matrix(rng: &mut impl Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.gen_range(-1.0..1.0))
}

/// Counts every objective call independently of the engine.
pub struct Counting<'a, O: Objective> {
    pub inner: &'a O,
    pub calls: AtomicU64,
}

impl<'a, O: Objective> Counting<'a, O> {
    pub fn new(inner: &'a O) -> Self {
        Self {
            inner,
            calls: AtomicU64::new(0),
        }
    }

    pub fn calls(&self) -> u64 {
        self.calls.load(Ordering::SeqCst)
    }
}

impl<O: Objective> Objective for Counting<'_, O> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn lower(&self) -> &[f64] {
        self.inner.lower()
    }

    fn upper(&self) -> &[f64] {
        self.inner.upper()
    }

    fn value(&self, x: &[f64]) -> f64 {
        self.calls.fetch_add(1, Ordering::SeqCst);
        self.inner.value(x)
    }
}
