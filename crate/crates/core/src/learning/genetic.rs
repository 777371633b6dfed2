//! Micro genetic algorithm over simplex-constrained weight vectors.
//!
//! Genotypes are [`WeightVector`]s. Each generation drops the least fit
//! individual from the reproduction pool, keeps the best individual seen so
//! far, and refills the population by single-point crossover followed by
//! point mutation. A collapsed population is restarted around the best.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::weights::WeightVector;

use super::{FeatureMatrix, LearningError};

/// Every pairwise L1 distance below this counts as a collapsed population.
const COLLAPSE_DISTANCE: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GpConfig {
    pub population_size: usize,
    pub max_iterations: usize,
    pub tolerance: f64,
    pub mutation_threshold: f64,
    pub seed: u64,
}

impl Default for GpConfig {
    fn default() -> Self {
        Self {
            population_size: 7,
            max_iterations: 1000,
            tolerance: 1e-3,
            mutation_threshold: 0.2,
            seed: 0,
        }
    }
}

impl GpConfig {
    pub const MIN_POPULATION: usize = 5;
    pub const MAX_POPULATION: usize = 11;

    pub fn validate(&self) -> Result<(), LearningError> {
        if !(Self::MIN_POPULATION..=Self::MAX_POPULATION).contains(&self.population_size) {
            return Err(LearningError::InvalidConfig(format!(
                "population size {} outside {}..={}",
                self.population_size,
                Self::MIN_POPULATION,
                Self::MAX_POPULATION
            )));
        }
        if self.max_iterations == 0 {
            return Err(LearningError::InvalidConfig("max_iterations must be positive".into()));
        }
        if self.tolerance.is_nan() || self.tolerance < 0.0 {
            return Err(LearningError::InvalidConfig(format!("tolerance {}", self.tolerance)));
        }
        if !(0.0..=1.0).contains(&self.mutation_threshold) {
            return Err(LearningError::InvalidConfig(format!(
                "mutation threshold {}",
                self.mutation_threshold
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GpRunReport {
    pub best_weights: WeightVector,
    pub best_fitness: f64,
    pub iterations_used: usize,
    /// Best fitness seen up to and including each generation.
    pub fitness_trace: Vec<f64>,
    pub restarts: usize,
}

pub fn crossover(
    a: &WeightVector,
    b: &WeightVector,
    seed: u64,
) -> Result<(WeightVector, WeightVector), LearningError> {
    crossover_with(a, b, &mut ChaCha8Rng::seed_from_u64(seed))
}

/// Swaps the suffixes after a split point drawn uniformly from `0..=len`.
pub(crate) fn crossover_with(
    a: &WeightVector,
    b: &WeightVector,
    rng: &mut impl Rng,
) -> Result<(WeightVector, WeightVector), LearningError> {
    if a.len() != b.len() {
        return Err(LearningError::LengthMismatch(a.len(), b.len()));
    }
    let split = rng.gen_range(0..=a.len());
    Ok(crossover_at(a, b, split))
}

pub(crate) fn crossover_at(a: &WeightVector, b: &WeightVector, split: usize) -> (WeightVector, WeightVector) {
    let (a, b) = (a.as_slice(), b.as_slice());
    let child = |head: &[f64], tail: &[f64]| {
        let mut genes = head[..split].to_vec();
        genes.extend_from_slice(&tail[split..]);
        WeightVector::normalized_or_uniform(genes)
    };
    (child(a, b), child(b, a))
}

pub fn mutate(w: &WeightVector, threshold: f64, seed: u64) -> WeightVector {
    mutate_with(w, threshold, &mut ChaCha8Rng::seed_from_u64(seed))
}

/// Picks one gene; with probability `threshold` it is redrawn from `[0, 1)`.
pub(crate) fn mutate_with(w: &WeightVector, threshold: f64, rng: &mut impl Rng) -> WeightVector {
    if w.is_empty() {
        return w.clone();
    }
    let position = rng.gen_range(0..w.len());
    if !rng.gen_bool(threshold.clamp(0.0, 1.0)) {
        return w.clone();
    }
    let mut genes = w.as_slice().to_vec();
    genes[position] = rng.gen::<f64>();
    WeightVector::normalized_or_uniform(genes)
}

/// Indices of the reproduction pool: everyone but the least fit individual
/// (lowest index on ties).
pub fn select(fitness: &[f64]) -> Result<Vec<usize>, LearningError> {
    if fitness.is_empty() {
        return Err(LearningError::EmptyPopulation);
    }
    let mut worst = 0;
    for (i, &f) in fitness.iter().enumerate().skip(1) {
        if f > fitness[worst] {
            worst = i;
        }
    }
    Ok((0..fitness.len()).filter(|&i| i != worst).collect())
}

fn random_genotype(len: usize, rng: &mut impl Rng) -> WeightVector {
    WeightVector::normalized_or_uniform((0..len).map(|_| rng.gen::<f64>()).collect())
}

fn collapsed(population: &[WeightVector]) -> bool {
    population
        .iter()
        .enumerate()
        .all(|(i, a)| population[i + 1..].iter().all(|b| a.l1_distance(b) < COLLAPSE_DISTANCE))
}

pub fn run_gp(matrix: &FeatureMatrix, config: &GpConfig) -> Result<GpRunReport, LearningError> {
    config.validate()?;
    if matrix.is_empty() {
        return Err(LearningError::EmptyTrainingSet);
    }
    let width = matrix.width();
    if width == 0 {
        return Err(LearningError::InvalidConfig("feature rows are empty".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let size = config.population_size;
    let mut population: Vec<WeightVector> = (0..size).map(|_| random_genotype(width, &mut rng)).collect();

    let mut best = population[0].clone();
    let mut best_fitness = f64::INFINITY;
    let mut trace = Vec::new();
    let mut restarts = 0;

    for generation in 1..=config.max_iterations {
        let fitness: Vec<f64> = population.iter().map(|w| matrix.mse(w)).collect();
        for (w, &f) in population.iter().zip(&fitness) {
            if f < best_fitness {
                best_fitness = f;
                best = w.clone();
            }
        }
        trace.push(best_fitness);
        if best_fitness < config.tolerance || generation == config.max_iterations {
            break;
        }

        if collapsed(&population) {
            restarts += 1;
            population = std::iter::once(best.clone())
                .chain((1..size).map(|_| random_genotype(width, &mut rng)))
                .collect();
            continue;
        }

        let pool = select(&fitness)?;
        let mut next = Vec::with_capacity(size);
        next.push(best.clone());
        while next.len() < size {
            let a = &population[pool[rng.gen_range(0..pool.len())]];
            let b = &population[pool[rng.gen_range(0..pool.len())]];
            let (c1, c2) = crossover_with(a, b, &mut rng)?;
            next.push(mutate_with(&c1, config.mutation_threshold, &mut rng));
            if next.len() < size {
                next.push(mutate_with(&c2, config.mutation_threshold, &mut rng));
            }
        }
        population = next;
    }

    Ok(GpRunReport {
        best_weights: best,
        best_fitness,
        iterations_used: trace.len(),
        fitness_trace: trace,
        restarts,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn w(v: &[f64]) -> WeightVector {
        WeightVector::from_normalized(v.to_vec()).unwrap()
    }

    #[test]
    fn crossover_examples() {
        let (a, b) = (w(&[1.0, 0.0]), w(&[0.0, 1.0]));
        let (c1, c2) = crossover_at(&a, &b, 1);
        assert_eq!(c1, w(&[0.5, 0.5]));
        assert_eq!(c2, w(&[0.5, 0.5]));
        for split in [0, 2] {
            let (c1, c2) = crossover_at(&a, &b, split);
            let mut got = [c1, c2];
            got.sort_by(|x, y| x.get(0).total_cmp(&y.get(0)));
            assert_eq!(got, [b.clone(), a.clone()]);
        }
        let p = w(&[0.2, 0.3, 0.5]);
        for seed in 0..10 {
            let (c1, c2) = crossover(&p, &p, seed).unwrap();
            assert_eq!((c1, c2), (p.clone(), p.clone()));
        }
        assert!(crossover(&a, &w(&[1.0]), 0).is_err());
    }

    #[test]
    fn mutation_examples() {
        let p = w(&[0.2, 0.3, 0.5]);
        assert_eq!(mutate(&p, 0.0, 4), p);
        for seed in 0..20 {
            assert_eq!(mutate(&w(&[1.0]), 1.0, seed), w(&[1.0]));
            assert_eq!(mutate(&p, 0.7, seed), mutate(&p, 0.7, seed));
            assert!(mutate(&p, 1.0, seed).is_on_simplex());
        }
    }

    #[test]
    fn selection_examples() {
        assert_eq!(select(&[0.1, 0.9]).unwrap(), vec![0]);
        assert_eq!(select(&[0.4, 0.4, 0.4]).unwrap(), vec![1, 2]);
        assert!(select(&[0.3]).unwrap().is_empty());
        assert_eq!(select(&[]).unwrap_err(), LearningError::EmptyPopulation);
    }

    #[test]
    fn loose_tolerance_stops_after_one_generation() {
        let m = FeatureMatrix::from_parts(vec![vec![0.2, 0.9], vec![0.7, 0.1]], vec![1.0, 0.0]).unwrap();
        let cfg = GpConfig {
            tolerance: 1.0,
            ..GpConfig::default()
        };
        let report = run_gp(&m, &cfg).unwrap();
        assert_eq!(report.iterations_used, 1);
    }

    #[test]
    fn finds_the_informative_metric() {
        let rows = vec![vec![0.9, 0.1], vec![0.8, 0.7], vec![0.1, 0.2], vec![0.0, 0.9]];
        let m = FeatureMatrix::from_parts(rows, vec![1.0, 1.0, 0.0, 0.0]).unwrap();
        let report = run_gp(&m, &GpConfig::default()).unwrap();
        assert!(report.best_weights.get(0) > 0.95, "{:?}", report.best_weights);
        assert!(report.fitness_trace.windows(2).all(|p| p[1] <= p[0]));
    }

    #[test]
    fn invalid_configs() {
        let m = FeatureMatrix::from_parts(vec![vec![0.5]], vec![1.0]).unwrap();
        for cfg in [
            GpConfig { population_size: 4, ..GpConfig::default() },
            GpConfig { population_size: 12, ..GpConfig::default() },
            GpConfig { tolerance: -1.0, ..GpConfig::default() },
            GpConfig { mutation_threshold: 1.5, ..GpConfig::default() },
        ] {
            assert!(matches!(run_gp(&m, &cfg), Err(LearningError::InvalidConfig(_))));
        }
        let empty = FeatureMatrix::from_parts(vec![], vec![]).unwrap();
        assert_eq!(run_gp(&empty, &GpConfig::default()).unwrap_err(), LearningError::EmptyTrainingSet);
    }

    #[test]
    fn collapsed_population_restarts() {
        // single metric: every genotype is (1.0), so the population is collapsed
        let m = FeatureMatrix::from_parts(vec![vec![0.5]], vec![1.0]).unwrap();
        let cfg = GpConfig {
            max_iterations: 5,
            ..GpConfig::default()
        };
        let report = run_gp(&m, &cfg).unwrap();
        assert_eq!(report.restarts, 4);
        assert_eq!(report.best_fitness, 0.25);
    }
}
