//! Classical differential evolution (rand/1/bin) over bounded real vectors.
//!
//! Each generation builds one trial per population member: three distinct
//! donors `r1, r2, r3` (all different from the target) form the mutant
//! `r1 + eta (r2 - r3)`, binomial crossover mixes it with the target (one
//! forced index always comes from the mutant), and the trial replaces the
//! target when its fitness is lower or equal.
//!
//! All random draws of a generation happen serially, before any fitness is
//! computed. Fitness evaluations then run on a pool of `workers` threads, so
//! the worker count changes wall time and nothing else.

use std::ops::ControlFlow;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct DeConfig {
    pub population_size: usize,
    pub generations: usize,
    pub crossover_rate: f64,
    pub scale_factor: f64,
    pub seed: u64,
    pub workers: usize,
    /// Inclusive `[lo, hi]` per dimension.
    pub bounds: Vec<(f64, f64)>,
}

impl DeConfig {
    /// 100 individuals, 400 generations, `C = 0.3`, `eta = 0.05`, 4 workers.
    pub fn new(bounds: Vec<(f64, f64)>) -> Self {
        DeConfig {
            population_size: 100,
            generations: 400,
            crossover_rate: 0.3,
            scale_factor: 0.05,
            seed: 0,
            workers: 4,
            bounds,
        }
    }

    pub fn dimension(&self) -> usize {
        self.bounds.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.population_size < 4 {
            return Err(Error::Parameter(format!(
                "population needs at least 4 individuals, got {}",
                self.population_size
            )));
        }
        if !(0.0..=1.0).contains(&self.crossover_rate) {
            return Err(Error::Parameter(format!(
                "crossover rate must be in [0, 1], got {}",
                self.crossover_rate
            )));
        }
        if !(self.scale_factor.is_finite() && self.scale_factor > 0.0) {
            return Err(Error::Parameter(format!(
                "scale factor must be positive, got {}",
                self.scale_factor
            )));
        }
        if self.workers == 0 {
            return Err(Error::Parameter("at least one worker is required".into()));
        }
        if self.bounds.is_empty() {
            return Err(Error::Parameter("genome dimension must be >= 1".into()));
        }
        for (j, &(lo, hi)) in self.bounds.iter().enumerate() {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(Error::Parameter(format!(
                    "dimension {j}: bounds [{lo}, {hi}] are not an interval"
                )));
            }
        }
        Ok(())
    }
}

/// A candidate solution. `fitness` is `None` until evaluated; lower is better.
#[derive(Debug, Clone, PartialEq)]
pub struct Individual {
    pub genome: Vec<f64>,
    pub fitness: Option<f64>,
}

impl Individual {
    pub fn new(genome: Vec<f64>) -> Self {
        Individual {
            genome,
            fitness: None,
        }
    }

    pub fn evaluated(genome: Vec<f64>, fitness: f64) -> Self {
        Individual {
            genome,
            fitness: Some(fitness),
        }
    }

    pub fn is_evaluated(&self) -> bool {
        self.fitness.is_some()
    }
}

fn clamp_to(value: f64, (lo, hi): (f64, f64)) -> f64 {
    value.clamp(lo, hi)
}

/// Differential mutation `r1 + eta (r2 - r3)`, clamped into `bounds`.
pub fn mutate(r1: &[f64], r2: &[f64], r3: &[f64], eta: f64, bounds: &[(f64, f64)]) -> Result<Vec<f64>> {
    let n = r1.len();
    for len in [r2.len(), r3.len(), bounds.len()] {
        if len != n {
            return Err(Error::Dimension {
                expected: n,
                actual: len,
            });
        }
    }
    Ok((0..n)
        .map(|j| clamp_to(r1[j] + eta * (r2[j] - r3[j]), bounds[j]))
        .collect())
}

/// Binomial crossover. `forced` (0-based) always takes the mutant value; any
/// other component does so when its uniform draw in `(0, 1]` is `<= rate`.
/// Exactly one draw per component is consumed from `rng`.
pub fn crossover<R: Rng + ?Sized>(
    target: &[f64],
    mutant: &[f64],
    rate: f64,
    forced: usize,
    rng: &mut R,
) -> Result<Vec<f64>> {
    if target.len() != mutant.len() {
        return Err(Error::Dimension {
            expected: target.len(),
            actual: mutant.len(),
        });
    }
    if forced >= target.len() {
        return Err(Error::Range(format!(
            "forced index {forced} outside a genome of {}",
            target.len()
        )));
    }
    Ok(target
        .iter()
        .zip(mutant)
        .enumerate()
        .map(|(j, (&t, &m))| {
            let u: f64 = 1.0 - rng.random::<f64>();
            if u <= rate || j == forced {
                m
            } else {
                t
            }
        })
        .collect())
}

/// Greedy replacement; equal fitness favours the trial.
pub fn select(target: Individual, trial: Individual) -> Result<Individual> {
    match (target.fitness, trial.fitness) {
        (Some(f_target), Some(f_trial)) => {
            if !f_trial.is_nan() && f_trial <= f_target {
                Ok(trial)
            } else {
                Ok(target)
            }
        }
        _ => Err(Error::Unevaluated),
    }
}

/// Three distinct population indices, none equal to `target`.
pub fn pick_donors<R: Rng + ?Sized>(rng: &mut R, population: usize, target: usize) -> [usize; 3] {
    debug_assert!(population >= 4 && target < population);
    let picked = index::sample(rng, population - 1, 3);
    let mut donors = [0; 3];
    for (slot, i) in donors.iter_mut().zip(picked.iter()) {
        *slot = if i >= target { i + 1 } else { i };
    }
    donors
}

/// Result of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct DeOutcome {
    /// Lowest-fitness individual ever evaluated.
    pub best: Individual,
    /// Population-best fitness: the initial population, then once per
    /// completed generation.
    pub history: Vec<f64>,
    pub generations: usize,
}

impl DeOutcome {
    pub fn best_fitness(&self) -> f64 {
        self.best.fitness.unwrap_or(f64::INFINITY)
    }
}

/// Extra knobs for [`run_with`].
#[derive(Default)]
pub struct RunOptions<'a> {
    /// Genomes placed at the front of the initial population (clamped).
    pub initial: Vec<Vec<f64>>,
    /// Called after every generation with the generation number and the
    /// current best; `Break` stops the run.
    #[allow(clippy::type_complexity)]
    pub on_generation: Option<Box<dyn FnMut(usize, &Individual) -> ControlFlow<()> + 'a>>,
}

/// Runs exactly `config.generations` generations.
pub fn run<F>(objective: F, config: &DeConfig) -> Result<DeOutcome>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    run_with(objective, config, RunOptions::default())
}

pub fn run_with<F>(objective: F, config: &DeConfig, mut options: RunOptions<'_>) -> Result<DeOutcome>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    config.validate()?;
    let dim = config.dimension();
    let pop = config.population_size;
    for g in &options.initial {
        if g.len() != dim {
            return Err(Error::Dimension {
                expected: dim,
                actual: g.len(),
            });
        }
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.workers)
        .build()
        .map_err(|e| Error::Parameter(format!("worker pool: {e}")))?;
    let evaluate = |genomes: &[Vec<f64>]| -> Vec<f64> {
        pool.install(|| genomes.par_iter().map(|g| objective(g)).collect())
    };

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut genomes: Vec<Vec<f64>> = (0..pop)
        .map(|_| {
            config
                .bounds
                .iter()
                .map(|&(lo, hi)| rng.random_range(lo..=hi))
                .collect()
        })
        .collect();
    for (slot, seeded) in genomes.iter_mut().zip(&options.initial) {
        *slot = seeded
            .iter()
            .zip(&config.bounds)
            .map(|(&v, &b)| clamp_to(v, b))
            .collect();
    }
    let fitness = evaluate(&genomes);
    let mut population: Vec<Individual> = genomes
        .into_iter()
        .zip(fitness)
        .map(|(g, f)| Individual::evaluated(g, if f.is_nan() { f64::INFINITY } else { f }))
        .collect();

    let mut best = best_of(&population).clone();
    let mut history = Vec::with_capacity(config.generations + 1);
    history.push(best.fitness.unwrap_or(f64::INFINITY));

    let mut completed = 0;
    for generation in 1..=config.generations {
        let mut trials = Vec::with_capacity(pop);
        for i in 0..pop {
            let [r1, r2, r3] = pick_donors(&mut rng, pop, i);
            let forced = rng.random_range(0..dim);
            let mutant = mutate(
                &population[r1].genome,
                &population[r2].genome,
                &population[r3].genome,
                config.scale_factor,
                &config.bounds,
            )?;
            trials.push(crossover(
                &population[i].genome,
                &mutant,
                config.crossover_rate,
                forced,
                &mut rng,
            )?);
        }
        let fitness = evaluate(&trials);
        population = population
            .into_iter()
            .zip(trials.into_iter().zip(fitness))
            .map(|(target, (genome, f))| select(target, Individual::evaluated(genome, f)))
            .collect::<Result<_>>()?;

        let current = best_of(&population);
        if current.fitness < best.fitness {
            best = current.clone();
        }
        history.push(best.fitness.unwrap_or(f64::INFINITY));
        completed = generation;

        if let Some(callback) = options.on_generation.as_mut() {
            if callback(generation, &best).is_break() {
                break;
            }
        }
    }

    Ok(DeOutcome {
        best,
        history,
        generations: completed,
    })
}

fn best_of(population: &[Individual]) -> &Individual {
    population
        .iter()
        .reduce(|a, b| if b.fitness < a.fitness { b } else { a })
        .expect("population is never empty")
}
