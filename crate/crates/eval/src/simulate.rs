//! The review loop with a simulated reviewer who accepts exactly the
//! held-out links.

use std::collections::{BTreeMap, BTreeSet};

use kglf_core::candidates::{existence_candidates, semantic_candidates};
use kglf_core::feedback::FeedbackEvent;
use kglf_core::graph::{KnowledgeGraph, NodeId, Timestamp, Triplet};
use kglf_core::learning::{build_training_set_up_to, FeatureMatrix, GpConfig, LearningError, Standard};
use kglf_core::metrics::{MetricEnsemble, PredictionMode};
use kglf_core::predictor::{interleave_for_review, rank_existence, rank_semantic, Recommendation, Source};
use kglf_core::ontology::RelationId;
use kglf_core::WeightVector;
use serde::{Deserialize, Serialize};

use crate::stats::ks_statistic;
use crate::EvalError;

/// How the genetic side of a batch is scored.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "weights")]
pub enum Scoring {
    /// Uniform weights until the first retrain, learned weights after.
    Learned,
    /// A fixed weight vector, never retrained.
    Fixed(Vec<f64>),
    /// Every candidate scores zero, so the ranking is the tie order.
    Zero,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimulationConfig {
    pub mode: PredictionMode,
    pub batch_size: usize,
    pub candidate_size: usize,
    pub retrain_every: usize,
    pub training_size: usize,
    pub gp: GpConfig,
    pub scoring: Scoring,
    pub seed: u64,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        Self {
            mode: PredictionMode::Existence,
            batch_size: 9,
            candidate_size: kglf_core::predictor::DEFAULT_CANDIDATE_SIZE,
            retrain_every: 200,
            training_size: 200,
            gp: GpConfig::default(),
            scoring: Scoring::Learned,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainingRound {
    pub at_feedback: usize,
    pub standard: Standard,
    pub size: usize,
    pub best_fitness: f64,
    pub iterations: usize,
}

/// One reviewed item.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Review {
    pub subject: String,
    pub object: String,
    pub relation: Option<String>,
    pub source: Source,
    pub score: f64,
    pub accepted: bool,
    /// Whether the weights had been trained at least once.
    pub trained: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub seed: u64,
    pub mode: PredictionMode,
    pub feedback_budget: usize,
    pub feedback_used: usize,
    pub hidden_total: usize,
    pub hidden_found: usize,
    pub reviewed_genetic: usize,
    pub reviewed_baseline: usize,
    pub tp_genetic: f64,
    pub fp_genetic: f64,
    pub tp_baseline: f64,
    pub fp_baseline: f64,
    /// `tp_genetic / tp_baseline`; absent when the baseline found nothing.
    pub uplift: Option<f64>,
    pub final_weights: BTreeMap<String, f64>,
    pub trainings: Vec<TrainingRound>,
    /// Scores of reviewed items after the first training round.
    pub positive_scores: Vec<f64>,
    pub negative_scores: Vec<f64>,
    pub ks_statistic: f64,
    pub reviews: Vec<Review>,
}

fn fraction(part: usize, whole: usize) -> f64 {
    if whole == 0 {
        0.0
    } else {
        part as f64 / whole as f64
    }
}

/// What the reviewer knows: the held-out links, in the mode's terms.
struct Oracle {
    mode: PredictionMode,
    /// unordered pair -> hidden triplet
    pairs: BTreeMap<(NodeId, NodeId), Triplet>,
    triplets: BTreeSet<Triplet>,
}

impl Oracle {
    /// Keeps only what a generator could ever propose: unlinked pairs in
    /// existence mode, extra relations on linked pairs in semantic mode.
    fn new(mode: PredictionMode, visible: &KnowledgeGraph, hidden: &[Triplet]) -> Self {
        let mut pairs = BTreeMap::new();
        let mut triplets = BTreeSet::new();
        for t in hidden.iter().filter(|t| t.subject != t.object) {
            let linked = visible.are_linked(t.subject, t.object);
            match mode {
                PredictionMode::Existence if !linked => {
                    pairs.entry(key(t.subject, t.object)).or_insert(*t);
                }
                PredictionMode::Semantic if linked && !visible.has_link(t.subject, t.object, t.relation) => {
                    triplets.insert(*t);
                }
                _ => {}
            }
        }
        Self { mode, pairs, triplets }
    }

    /// The link to add if the reviewer accepts `r`.
    fn judge(&self, r: &Recommendation) -> Option<Triplet> {
        match (self.mode, r.relation) {
            (PredictionMode::Semantic, Some(j)) => {
                let t = Triplet::new(r.subject, r.object, j);
                self.triplets.contains(&t).then_some(t)
            }
            _ => self.pairs.get(&key(r.subject, r.object)).copied(),
        }
    }

    fn found(&mut self, t: &Triplet) {
        self.triplets.remove(t);
        self.pairs.remove(&key(t.subject, t.object));
    }

    fn targets(&self) -> BTreeSet<NodeId> {
        match self.mode {
            PredictionMode::Existence => self.pairs.keys().flat_map(|&(a, b)| [a, b]).collect(),
            PredictionMode::Semantic => self.triplets.iter().flat_map(|t| [t.subject, t.object]).collect(),
        }
    }

    fn remaining(&self) -> usize {
        match self.mode {
            PredictionMode::Existence => self.pairs.len(),
            PredictionMode::Semantic => self.triplets.len(),
        }
    }
}

fn key(a: NodeId, b: NodeId) -> (NodeId, NodeId) {
    (a.min(b), a.max(b))
}

fn retrain(
    g: &KnowledgeGraph,
    ensemble: &MetricEnsemble,
    config: &SimulationConfig,
    seed: u64,
) -> Result<Option<(WeightVector, TrainingRound)>, EvalError> {
    let mode = ensemble.mode();
    let rejections = g
        .non_links()
        .filter(|nl| nl.relation.is_some() == (mode == PredictionMode::Semantic))
        .count();
    let half = config.training_size / 2;
    // gold once enough rejections exist, silver before that
    let standard = if rejections >= half { Standard::Gold } else { Standard::Silver };
    let set = match build_training_set_up_to(g, mode, standard, 2 * half, seed) {
        Ok(set) => set,
        Err(LearningError::InsufficientPositives { .. } | LearningError::InsufficientNegatives { .. }) => return Ok(None),
        Err(e) => return Err(e.into()),
    };
    let size = set.len();
    let matrix = FeatureMatrix::build(g, ensemble, &set)?;
    let gp = GpConfig {
        seed,
        ..config.gp.clone()
    };
    let report = kglf_core::learning::run_gp(&matrix, &gp)?;
    let round = TrainingRound {
        at_feedback: 0,
        standard,
        size,
        best_fitness: report.best_fitness,
        iterations: report.iterations_used,
    };
    Ok(Some((report.best_weights, round)))
}

fn rank_batch(
    g: &KnowledgeGraph,
    ensemble: &MetricEnsemble,
    weights: &WeightVector,
    config: &SimulationConfig,
    target: NodeId,
    seed: u64,
) -> Result<(Vec<Recommendation>, Vec<Recommendation>), EvalError> {
    let mut ranked = match config.mode {
        PredictionMode::Existence => {
            let set = existence_candidates(g, target, config.candidate_size, seed)?;
            rank_existence(g, ensemble, weights, &set)?
        }
        PredictionMode::Semantic => {
            let set = semantic_candidates(g, target, config.candidate_size, seed)?;
            rank_semantic(g, ensemble, weights, &set)?
        }
    };
    if config.scoring == Scoring::Zero {
        // every score ties, so the order falls back to node then relation id
        for r in &mut ranked {
            r.score = 0.0;
        }
        ranked.sort_by_key(|r| (r.other(target), r.relation));
        for (i, r) in ranked.iter_mut().enumerate() {
            r.rank = i + 1;
        }
    }
    let baseline = ranked
        .iter()
        .map(|r| Recommendation {
            source: Source::Baseline,
            ..*r
        })
        .collect();
    Ok((ranked, baseline))
}

fn relation_key(g: &KnowledgeGraph, j: Option<RelationId>) -> Option<String> {
    j.map(|j| g.ontology().relation(j).key.clone())
}

/// Runs the review loop until `budget` feedback events have been given or
/// no hidden link is left to find.
pub fn simulate(
    visible: &KnowledgeGraph,
    hidden: &[Triplet],
    budget: usize,
    config: &SimulationConfig,
) -> Result<ExperimentReport, EvalError> {
    if budget == 0 {
        return Err(EvalError::InvalidConfig("feedback budget must be at least 1".into()));
    }
    if hidden.is_empty() {
        return Err(EvalError::InvalidConfig("nothing is hidden".into()));
    }
    if config.batch_size < 3 || config.retrain_every == 0 {
        return Err(EvalError::InvalidConfig("batch_size must be >= 3 and retrain_every >= 1".into()));
    }
    config.gp.validate()?;

    let mut g = visible.clone();
    let ensemble = MetricEnsemble::default_for(config.mode);
    let mut weights = match &config.scoring {
        Scoring::Fixed(w) => WeightVector::from_raw(w.clone()).map_err(|e| EvalError::InvalidConfig(e.to_string()))?,
        _ => WeightVector::uniform(ensemble.len()),
    };
    ensemble.check_weights(&weights)?;
    let mut oracle = Oracle::new(config.mode, visible, hidden);
    if oracle.remaining() == 0 {
        return Err(EvalError::InvalidConfig(format!("no hidden link is findable in {} mode", config.mode.as_str())));
    }
    let hidden_total = oracle.remaining();

    let mut clock: Timestamp = g.latest_timestamp().unwrap_or(0) + 60_000;
    let mut reviews: Vec<Review> = Vec::new();
    let mut trainings = Vec::new();
    let mut trained = false;
    let mut since_train = 0;
    let mut last_target: Option<NodeId> = None;
    let mut round: u64 = 0;
    let mut idle_rounds = 0;

    while reviews.len() < budget {
        let targets = oracle.targets();
        if targets.is_empty() || idle_rounds > targets.len() {
            break;
        }
        // round-robin over nodes that still have something hidden
        let target = last_target
            .and_then(|t| targets.range((std::ops::Bound::Excluded(t), std::ops::Bound::Unbounded)).next())
            .or_else(|| targets.iter().next())
            .copied()
            .expect("non-empty");
        last_target = Some(target);
        round += 1;
        let seed = config.seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(round);

        let (genetic, baseline) = rank_batch(&g, &ensemble, &weights, config, target, seed)?;
        if genetic.is_empty() {
            idle_rounds += 1;
            continue;
        }
        idle_rounds = 0;
        let batch = interleave_for_review(&genetic, &baseline, config.batch_size, seed)?;

        for r in batch {
            if reviews.len() >= budget {
                break;
            }
            let verdict = oracle.judge(&r);
            let event = FeedbackEvent {
                subject: g.node_key(r.subject).to_string(),
                object: g.node_key(r.object).to_string(),
                relation: match (config.mode, verdict) {
                    (PredictionMode::Semantic, _) => relation_key(&g, r.relation),
                    (PredictionMode::Existence, Some(t)) => relation_key(&g, Some(t.relation)),
                    (PredictionMode::Existence, None) => None,
                },
                accepted: verdict.is_some(),
                timestamp: clock,
                mode: config.mode,
            };
            clock += 60_000;
            // the hidden triplet keeps its own orientation when accepted
            let event = match verdict {
                Some(t) => FeedbackEvent {
                    subject: g.node_key(t.subject).to_string(),
                    object: g.node_key(t.object).to_string(),
                    ..event
                },
                None => event,
            };
            event.apply(&mut g)?;
            if let Some(t) = verdict {
                oracle.found(&t);
            }
            reviews.push(Review {
                subject: g.node_key(r.subject).to_string(),
                object: g.node_key(r.object).to_string(),
                relation: relation_key(&g, r.relation),
                source: r.source,
                score: r.score,
                accepted: verdict.is_some(),
                trained,
            });
            since_train += 1;
            if since_train >= config.retrain_every && config.scoring == Scoring::Learned {
                since_train = 0;
                let train_seed = seed ^ reviews.len() as u64;
                if let Some((w, mut t)) = retrain(&g, &ensemble, config, train_seed)? {
                    weights = w;
                    t.at_feedback = reviews.len();
                    trainings.push(t);
                    trained = true;
                }
                // new weights apply from the next batch onwards
            }
        }
    }

    let count = |src: Source, acc: bool| reviews.iter().filter(|r| r.source == src && r.accepted == acc).count();
    let (tp_g, fp_g) = (count(Source::Genetic, true), count(Source::Genetic, false));
    let (tp_b, fp_b) = (count(Source::Baseline, true), count(Source::Baseline, false));
    let tp_genetic = fraction(tp_g, tp_g + fp_g);
    let tp_baseline = fraction(tp_b, tp_b + fp_b);
    let (positive_scores, negative_scores): (Vec<_>, Vec<_>) = {
        let post: Vec<&Review> = reviews.iter().filter(|r| r.trained).collect();
        (
            post.iter().filter(|r| r.accepted).map(|r| r.score).collect(),
            post.iter().filter(|r| !r.accepted).map(|r| r.score).collect(),
        )
    };
    Ok(ExperimentReport {
        seed: config.seed,
        mode: config.mode,
        feedback_budget: budget,
        feedback_used: reviews.len(),
        hidden_total,
        hidden_found: hidden_total - oracle.remaining(),
        reviewed_genetic: tp_g + fp_g,
        reviewed_baseline: tp_b + fp_b,
        tp_genetic,
        fp_genetic: if tp_g + fp_g == 0 { 0.0 } else { 1.0 - tp_genetic },
        tp_baseline,
        fp_baseline: if tp_b + fp_b == 0 { 0.0 } else { 1.0 - tp_baseline },
        uplift: (tp_baseline > 0.0).then(|| tp_genetic / tp_baseline),
        final_weights: ensemble
            .names()
            .into_iter()
            .map(String::from)
            .zip(weights.as_slice().iter().copied())
            .collect(),
        trainings,
        ks_statistic: ks_statistic(&positive_scores, &negative_scores),
        positive_scores,
        negative_scores,
        reviews,
    })
}
