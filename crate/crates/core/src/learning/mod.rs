//! Weight learning: labelled training sets and the micro genetic optimiser.
//!
//! Training runs over a [`FeatureMatrix`] computed once per training set, so
//! fitness evaluation never touches the graph again.

mod genetic;
mod training;

pub use genetic::{crossover, mutate, run_gp, select, GpConfig, GpRunReport};
pub use training::{
    build_training_set, fitness, FeatureMatrix, Provenance, Standard, TrainingInstance, TrainingSet,
};

use thiserror::Error;

use crate::graph::GraphError;
use crate::metrics::{MetricError, PredictionMode};

#[derive(Error, Debug, Clone, PartialEq)]
pub enum LearningError {
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error("training set size must be even, got {0}")]
    OddSize(usize),
    #[error("need {needed} positive instances, only {available} available")]
    InsufficientPositives { needed: usize, available: usize },
    #[error("{standard} standard needs {needed} negative instances, only {available} available")]
    InsufficientNegatives {
        standard: Standard,
        needed: usize,
        available: usize,
    },
    #[error("training set is empty")]
    EmptyTrainingSet,
    #[error("training set is for {set} prediction but the ensemble is for {ensemble}")]
    ModeMismatch { set: PredictionMode, ensemble: PredictionMode },
    #[error("vectors differ in length: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("population is empty")]
    EmptyPopulation,
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

/// Like [`build_training_set`], but shrinks the request to the largest
/// even size the graph can fill when `max_size` is too ambitious. Fails
/// only when not even one positive and one negative are available.
pub fn build_training_set_up_to(
    g: &crate::graph::KnowledgeGraph,
    mode: crate::metrics::PredictionMode,
    standard: Standard,
    max_size: usize,
    seed: u64,
) -> Result<TrainingSet, LearningError> {
    let mut size = max_size - max_size % 2;
    loop {
        match build_training_set(g, mode, standard, size, seed) {
            Err(
                LearningError::InsufficientPositives { available, .. }
                | LearningError::InsufficientNegatives { available, .. },
            ) if available > 0 && available < size / 2 => size = 2 * available,
            other => return other,
        }
    }
}

/// Trains a weight vector for `ensemble` from a fresh training set.
pub fn train(
    g: &crate::graph::KnowledgeGraph,
    ensemble: &crate::metrics::MetricEnsemble,
    standard: Standard,
    size: usize,
    config: &GpConfig,
) -> Result<GpRunReport, LearningError> {
    let set = build_training_set(g, ensemble.mode(), standard, size, config.seed)?;
    let matrix = FeatureMatrix::build(g, ensemble, &set)?;
    run_gp(&matrix, config)
}
