use std::ops::ControlFlow;
use std::sync::Mutex;

use otdr_split::de::{self, DeConfig, RunOptions};
use proptest::prelude::*;

fn rosenbrock(x: &[f64]) -> f64 {
    x.windows(2)
        .map(|w| 100.0 * (w[1] - w[0] * w[0]).powi(2) + (1.0 - w[0]).powi(2))
        .sum()
}

#[test]
fn every_evaluated_genome_is_inside_the_bounds() {
    let bounds = vec![(-1.0, 2.0), (0.5, 0.75), (-30.0, -10.0)];
    let seen = Mutex::new(Vec::new());
    let config = DeConfig {
        population_size: 20,
        generations: 50,
        scale_factor: 2.0,
        ..DeConfig::new(bounds.clone())
    };
    de::run(
        |g| {
            seen.lock().unwrap().push(g.to_vec());
            g.iter().sum::<f64>()
        },
        &config,
    )
    .unwrap();
    let seen = seen.into_inner().unwrap();
    assert_eq!(seen.len(), 20 * 51);
    for g in &seen {
        for (v, &(lo, hi)) in g.iter().zip(&bounds) {
            assert!((lo..=hi).contains(v), "{v} outside [{lo}, {hi}]");
        }
    }
}

#[test]
fn worker_count_does_not_change_the_run() {
    let base = DeConfig {
        population_size: 40,
        generations: 120,
        seed: 9,
        ..DeConfig::new(vec![(-2.0, 2.0); 3])
    };
    let runs: Vec<_> = [1, 3, 8]
        .into_iter()
        .map(|workers| {
            de::run(
                rosenbrock,
                &DeConfig {
                    workers,
                    ..base.clone()
                },
            )
            .unwrap()
        })
        .collect();
    assert_eq!(runs[0], runs[1]);
    assert_eq!(runs[0], runs[2]);
}

#[test]
fn seeds_matter() {
    let a = de::run(
        rosenbrock,
        &DeConfig {
            seed: 1,
            generations: 10,
            ..DeConfig::new(vec![(-2.0, 2.0); 3])
        },
    )
    .unwrap();
    let b = de::run(
        rosenbrock,
        &DeConfig {
            seed: 2,
            generations: 10,
            ..DeConfig::new(vec![(-2.0, 2.0); 3])
        },
    )
    .unwrap();
    assert_ne!(a.best.genome, b.best.genome);
}

#[test]
fn nan_objective_never_wins() {
    let config = DeConfig {
        population_size: 10,
        generations: 30,
        ..DeConfig::new(vec![(-1.0, 1.0)])
    };
    let out = de::run(|g| if g[0] > 0.0 { f64::NAN } else { -g[0] }, &config).unwrap();
    assert!(out.best_fitness().is_finite());
    assert!(out.best.genome[0] <= 0.0);
}

#[test]
fn seeded_genome_is_kept_when_optimal() {
    let config = DeConfig {
        population_size: 10,
        generations: 5,
        ..DeConfig::new(vec![(-5.0, 5.0); 2])
    };
    let options = RunOptions {
        initial: vec![vec![0.0, 0.0]],
        ..RunOptions::default()
    };
    let out = de::run_with(|g| g.iter().map(|v| v * v).sum(), &config, options).unwrap();
    assert_eq!(out.best_fitness(), 0.0);
    assert_eq!(out.history, vec![0.0; 6]);
}

#[test]
fn callback_can_stop_early() {
    let config = DeConfig {
        population_size: 10,
        generations: 100,
        ..DeConfig::new(vec![(-5.0, 5.0); 2])
    };
    let options = RunOptions {
        on_generation: Some(Box::new(|g, _| {
            if g == 7 {
                ControlFlow::Break(())
            } else {
                ControlFlow::Continue(())
            }
        })),
        ..RunOptions::default()
    };
    let out = de::run_with(|g| g.iter().map(|v| v * v).sum(), &config, options).unwrap();
    assert_eq!(out.generations, 7);
    assert_eq!(out.history.len(), 8);
}

#[test]
fn rejects_bad_configs() {
    let ok = DeConfig::new(vec![(0.0, 1.0)]);
    let f = |g: &[f64]| g[0];
    assert!(de::run(
        f,
        &DeConfig {
            population_size: 3,
            ..ok.clone()
        }
    )
    .is_err());
    assert!(de::run(
        f,
        &DeConfig {
            crossover_rate: 1.5,
            ..ok.clone()
        }
    )
    .is_err());
    assert!(de::run(
        f,
        &DeConfig {
            workers: 0,
            ..ok.clone()
        }
    )
    .is_err());
    assert!(de::run(
        f,
        &DeConfig {
            bounds: vec![],
            ..ok.clone()
        }
    )
    .is_err());
    assert!(de::run(
        f,
        &DeConfig {
            bounds: vec![(1.0, 0.0)],
            ..ok
        }
    )
    .is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn history_never_increases(seed in any::<u64>(), cr in 0.0f64..=1.0, eta in 0.01f64..1.5) {
        let config = DeConfig {
            population_size: 12,
            generations: 40,
            crossover_rate: cr,
            scale_factor: eta,
            seed,
            workers: 2,
            ..DeConfig::new(vec![(-3.0, 3.0); 4])
        };
        let out = de::run(rosenbrock, &config).unwrap();
        prop_assert_eq!(out.history.len(), 41);
        prop_assert!(out.history.windows(2).all(|w| w[1] <= w[0]));
        prop_assert_eq!(*out.history.last().unwrap(), out.best_fitness());
    }
}
