mod common;

use mses::optimizers::{sample_initial, step, OptimizerParams, Population};
use mses::Result;
use proptest::prelude::*;

fn evaluated(np: usize, dim: usize, seed: u64) -> Population {
    let lower = vec![-5.0; dim];
    let upper = vec![5.0; dim];
    let mut pop = sample_initial(np, &lower, &upper, &mut common::rng(seed)).unwrap();
    pop.evaluate_all(&mut |x: &mut [f64]| -> Result<f64> { Ok(sphere(x)) })
        .unwrap();
    pop
}

fn sphere(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum()
}

fn params(llso: bool) -> OptimizerParams {
    if llso {
        OptimizerParams::llso()
    } else {
        OptimizerParams::de()
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn step_reports_its_evaluations_and_keeps_the_best(
        llso in any::<bool>(),
        np in 8usize..40,
        dim in 1usize..12,
        seed in any::<u64>(),
        generations in 1usize..5,
    ) {
        let params = params(llso);
        let mut pop = evaluated(np, dim, seed);
        let mut rng = common::rng(seed ^ 0xabc);
        for _ in 0..generations {
            let before = pop.best_fitness();
            let mut calls = 0usize;
            let report = step(&mut pop, &params, &mut rng, &mut |x: &mut [f64]| -> Result<f64> {
                calls += 1;
                Ok(sphere(x))
            })
            .unwrap();
            prop_assert!(report.completed);
            prop_assert_eq!(report.evaluations, calls);
            prop_assert!(pop.best_fitness() <= before);
            for (m, f) in pop.members.iter().zip(&pop.fitness) {
                prop_assert_eq!(*f, sphere(m));
            }
        }
    }

    #[test]
    fn step_is_a_function_of_population_params_and_seed(
        llso in any::<bool>(),
        np in 8usize..30,
        dim in 1usize..8,
        seed in any::<u64>(),
    ) {
        let params = params(llso);
        let run = || {
            let mut pop = evaluated(np, dim, seed);
            let mut rng = common::rng(seed.wrapping_add(1));
            let report = step(&mut pop, &params, &mut rng, &mut |x: &mut [f64]| -> Result<f64> {
                Ok(sphere(x))
            })
            .unwrap();
            (pop, report.evaluations)
        };
        prop_assert_eq!(run(), run());
    }

    #[test]
    fn budget_stop_commits_partial_work(
        llso in any::<bool>(),
        np in 8usize..30,
        seed in any::<u64>(),
        allowance in 0usize..8,
    ) {
        let params = params(llso);
        let mut pop = evaluated(np, 4, seed);
        let before = pop.best_fitness();
        let mut left = allowance;
        let report = step(&mut pop, &params, &mut common::rng(seed), &mut |x: &mut [f64]| -> Result<f64> {
            if left == 0 {
                return Err(mses::Error::BudgetExhausted);
            }
            left -= 1;
            Ok(sphere(x))
        })
        .unwrap();
        prop_assert!(!report.completed || report.evaluations <= allowance);
        prop_assert_eq!(report.evaluations, allowance - left);
        prop_assert!(pop.best_fitness() <= before);
    }
}
