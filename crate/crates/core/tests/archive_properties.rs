use std::collections::VecDeque;

use mses::archive::Archive;
use proptest::prelude::*;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn linf(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Runs `inserts` random insertions against a plain queue model.
fn stress(seed: u64, inserts: usize, capacity: usize, tol: f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut archive = Archive::new(capacity, tol);
    let mut model: VecDeque<Vec<f64>> = VecDeque::new();
    for _ in 0..inserts {
        // a coarse grid plus jitter below and above the tolerance makes duplicates common
        let x: Vec<f64> = (0..3)
            .map(|_| {
                let grid = f64::from(rng.gen_range(0..6u8));
                let jitter = if rng.gen_bool(0.5) { tol * 0.5 } else { tol * 4.0 };
                grid + if rng.gen_bool(0.3) { jitter } else { 0.0 }
            })
            .collect();
        let duplicate = model.iter().any(|e| linf(e, &x) <= tol);
        let stored = archive.insert(x.clone());
        assert_eq!(stored, capacity > 0 && !duplicate);
        if stored {
            model.push_back(x);
            if model.len() > capacity {
                model.pop_front();
            }
        }
        assert!(archive.len() <= capacity);
        let entries: Vec<&[f64]> = archive.entries().collect();
        assert_eq!(entries.len(), model.len());
        for (a, b) in entries.iter().zip(&model) {
            assert_eq!(*a, b.as_slice());
        }
    }
    let entries: Vec<&[f64]> = archive.entries().collect();
    for i in 0..entries.len() {
        for j in i + 1..entries.len() {
            assert!(linf(entries[i], entries[j]) > tol);
        }
    }
}

#[test]
fn ten_thousand_insertions_capacity_one_hundred() {
    stress(2024, 10_000, 100, 1e-12);
    stress(7, 10_000, 100, 1e-3);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn matches_queue_model(seed in any::<u64>(), capacity in 0usize..40, tol in prop::sample::select(vec![0.0, 1e-12, 1e-2])) {
        stress(seed, 500, capacity, tol);
    }
}
