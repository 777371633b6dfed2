//! Ranking candidate links with the weighted metric ensemble.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::candidates::{
    existence_candidates, semantic_candidates, CandidateError, ExistenceCandidateSet, SemanticCandidateSet,
};
use crate::graph::{KnowledgeGraph, NodeId};
use crate::metrics::{MetricEnsemble, MetricError, PredictionMode};
use crate::ontology::RelationId;
use crate::weights::WeightVector;

pub const DEFAULT_CANDIDATE_SIZE: usize = 30;
pub const DEFAULT_TOP_K: usize = 10;

#[derive(Error, Debug, Clone, PartialEq)]
pub enum PredictError {
    #[error(transparent)]
    Candidates(#[from] CandidateError),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error("ensemble is for {actual} prediction, {expected} requested")]
    ModeMismatch {
        expected: PredictionMode,
        actual: PredictionMode,
    },
    #[error("review batch of {0} is too small, need at least 3")]
    BatchTooSmall(usize),
    #[error("nothing to review: both sources are empty")]
    NothingToReview,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    Genetic,
    Baseline,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Recommendation {
    pub subject: NodeId,
    pub object: NodeId,
    /// Present in semantic mode only.
    pub relation: Option<RelationId>,
    pub score: f64,
    pub source: Source,
    /// 1-based position in the list it was returned in.
    pub rank: usize,
}

impl Recommendation {
    fn key(&self) -> (NodeId, NodeId, Option<RelationId>) {
        (self.subject, self.object, self.relation)
    }

    /// The non-target end of the link.
    pub fn other(&self, target: NodeId) -> NodeId {
        if self.subject == target {
            self.object
        } else {
            self.subject
        }
    }
}

fn check_mode(ensemble: &MetricEnsemble, expected: PredictionMode) -> Result<(), PredictError> {
    if ensemble.mode() != expected {
        return Err(PredictError::ModeMismatch {
            expected,
            actual: ensemble.mode(),
        });
    }
    Ok(())
}

/// Sorts by descending score, then by the non-target node id, then by
/// relation id, and assigns ranks.
fn rank(target: NodeId, mut recs: Vec<Recommendation>) -> Vec<Recommendation> {
    recs.sort_by(|a, b| {
        b.score
            .total_cmp(&a.score)
            .then(a.other(target).cmp(&b.other(target)))
            .then(a.relation.cmp(&b.relation))
    });
    for (i, r) in recs.iter_mut().enumerate() {
        r.rank = i + 1;
    }
    recs
}

/// Scores every existence candidate and returns them ranked.
pub fn rank_existence(
    g: &KnowledgeGraph,
    ensemble: &MetricEnsemble,
    weights: &WeightVector,
    set: &ExistenceCandidateSet,
) -> Result<Vec<Recommendation>, PredictError> {
    check_mode(ensemble, PredictionMode::Existence)?;
    ensemble.check_weights(weights)?;
    let recs = set
        .nodes()
        .map(|v| {
            Ok(Recommendation {
                subject: set.target,
                object: v,
                relation: None,
                score: ensemble.combined_similarity(weights, g, set.target, v, None)?.value(),
                source: Source::Genetic,
                rank: 0,
            })
        })
        .collect::<Result<Vec<_>, MetricError>>()?;
    Ok(rank(set.target, recs))
}

/// Scores every semantic candidate triplet and returns them ranked.
pub fn rank_semantic(
    g: &KnowledgeGraph,
    ensemble: &MetricEnsemble,
    weights: &WeightVector,
    set: &SemanticCandidateSet,
) -> Result<Vec<Recommendation>, PredictError> {
    check_mode(ensemble, PredictionMode::Semantic)?;
    ensemble.check_weights(weights)?;
    let recs = set
        .candidates
        .iter()
        .map(|c| {
            let t = c.triplet(set.target);
            Ok(Recommendation {
                subject: t.subject,
                object: t.object,
                relation: Some(t.relation),
                score: ensemble
                    .combined_similarity(weights, g, t.subject, t.object, Some(t.relation))?
                    .value(),
                source: Source::Genetic,
                rank: 0,
            })
        })
        .collect::<Result<Vec<_>, MetricError>>()?;
    Ok(rank(set.target, recs))
}

pub fn predict_existence(
    g: &KnowledgeGraph,
    u: NodeId,
    k: usize,
    ensemble: &MetricEnsemble,
    weights: &WeightVector,
    candidate_size: usize,
    seed: u64,
) -> Result<Vec<Recommendation>, PredictError> {
    let set = existence_candidates(g, u, candidate_size, seed)?;
    let mut ranked = rank_existence(g, ensemble, weights, &set)?;
    ranked.truncate(k);
    Ok(ranked)
}

pub fn predict_type(
    g: &KnowledgeGraph,
    u: NodeId,
    k: usize,
    ensemble: &MetricEnsemble,
    weights: &WeightVector,
    candidate_size: usize,
    seed: u64,
) -> Result<Vec<Recommendation>, PredictError> {
    let set = semantic_candidates(g, u, candidate_size, seed)?;
    let mut ranked = rank_semantic(g, ensemble, weights, &set)?;
    ranked.truncate(k);
    Ok(ranked)
}

/// Drops recommendations scoring below `threshold`. Off unless called.
pub fn apply_threshold(recs: Vec<Recommendation>, threshold: f64) -> Vec<Recommendation> {
    recs.into_iter().filter(|r| r.score >= threshold).collect()
}

/// Builds a review batch of `total` items: `⌊total/3⌋` drawn uniformly from
/// the whole baseline pool, the rest from the top of the genetic ranking.
///
/// The baseline draw happens first and over the full pool, so its hit rate
/// is an unbiased estimate of the baseline method. The genetic side skips
/// items the baseline already drew and moves further down its ranking. A
/// short side is backfilled by the other. The batch is shuffled by `seed`
/// and ranks give the presentation order.
pub fn interleave_for_review(
    genetic: &[Recommendation],
    baseline: &[Recommendation],
    total: usize,
    seed: u64,
) -> Result<Vec<Recommendation>, PredictError> {
    if total < 3 {
        return Err(PredictError::BatchTooSmall(total));
    }
    if genetic.is_empty() && baseline.is_empty() {
        return Err(PredictError::NothingToReview);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut taken = BTreeSet::new();
    let mut batch = Vec::with_capacity(total);

    let baseline_quota = total / 3;
    let drawn: Vec<Recommendation> = baseline
        .choose_multiple(&mut rng, baseline_quota.min(baseline.len()))
        .copied()
        .collect();
    for r in drawn {
        if taken.insert(r.key()) {
            batch.push(Recommendation {
                source: Source::Baseline,
                ..r
            });
        }
    }

    for r in genetic {
        if batch.len() >= total {
            break;
        }
        if taken.insert(r.key()) {
            batch.push(Recommendation {
                source: Source::Genetic,
                ..*r
            });
        }
    }

    if batch.len() < total {
        let mut rest: Vec<&Recommendation> = baseline.iter().filter(|r| !taken.contains(&r.key())).collect();
        rest.shuffle(&mut rng);
        for r in rest {
            if batch.len() >= total {
                break;
            }
            taken.insert(r.key());
            batch.push(Recommendation {
                source: Source::Baseline,
                ..*r
            });
        }
    }

    batch.shuffle(&mut rng);
    for (i, r) in batch.iter_mut().enumerate() {
        r.rank = i + 1;
    }
    Ok(batch)
}
