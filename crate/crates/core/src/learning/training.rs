use std::collections::BTreeSet;

use rand::seq::{IteratorRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::candidates::schema_linkable;
use crate::graph::{KnowledgeGraph, LinkOrigin, LinkRecord, NodeId, Triplet};
use crate::metrics::{MetricEnsemble, PredictionMode};
use crate::ontology::RelationId;
use crate::weights::WeightVector;

use super::LearningError;

/// Where a negative instance comes from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Standard {
    /// Negatives are recorded user rejections.
    Gold,
    /// Negatives are unobserved, schema-compatible links.
    Silver,
}

impl Standard {
    pub fn as_str(self) -> &'static str {
        match self {
            Standard::Gold => "gold",
            Standard::Silver => "silver",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "gold" => Some(Standard::Gold),
            "silver" => Some(Standard::Silver),
            _ => None,
        }
    }
}

impl std::fmt::Display for Standard {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    ObservedLink,
    UserAccept,
    UserReject,
    SilverNegative,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TrainingInstance {
    pub subject: NodeId,
    pub object: NodeId,
    pub relation: Option<RelationId>,
    pub label: bool,
    pub provenance: Provenance,
}

impl TrainingInstance {
    pub fn target(&self) -> f64 {
        if self.label {
            1.0
        } else {
            0.0
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainingSet {
    pub mode: PredictionMode,
    pub standard: Standard,
    pub instances: Vec<TrainingInstance>,
}

impl TrainingSet {
    pub fn len(&self) -> usize {
        self.instances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instances.is_empty()
    }

    pub fn positives(&self) -> usize {
        self.instances.iter().filter(|i| i.label).count()
    }
}

fn unordered(a: NodeId, b: NodeId) -> (NodeId, NodeId) {
    if a <= b {
        (a, b)
    } else {
        (b, a)
    }
}

fn origin_provenance(origin: LinkOrigin) -> Provenance {
    match origin {
        LinkOrigin::Observed => Provenance::ObservedLink,
        LinkOrigin::Accepted => Provenance::UserAccept,
    }
}

/// Samples `size / 2` positives from the realised links and `size / 2`
/// negatives according to `standard`.
///
/// Existence instances are unordered node pairs without a relation; semantic
/// instances are triplets.
pub fn build_training_set(
    g: &KnowledgeGraph,
    mode: PredictionMode,
    standard: Standard,
    size: usize,
    seed: u64,
) -> Result<TrainingSet, LearningError> {
    if !size.is_multiple_of(2) {
        return Err(LearningError::OddSize(size));
    }
    let half = size / 2;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let positive_pool = positive_pool(g, mode);
    if positive_pool.len() < half {
        return Err(LearningError::InsufficientPositives {
            needed: half,
            available: positive_pool.len(),
        });
    }

    let negatives = match standard {
        Standard::Gold => {
            let pool = gold_pool(g, mode);
            if pool.len() < half {
                return Err(LearningError::InsufficientNegatives {
                    standard,
                    needed: half,
                    available: pool.len(),
                });
            }
            pool.choose_multiple(&mut rng, half).copied().collect::<Vec<_>>()
        }
        Standard::Silver => silver_negatives(g, mode, half, &mut rng)?,
    };

    let mut instances: Vec<TrainingInstance> = positive_pool.choose_multiple(&mut rng, half).copied().collect();
    instances.extend(negatives);
    instances.shuffle(&mut rng);
    Ok(TrainingSet {
        mode,
        standard,
        instances,
    })
}

/// Self-loops are left out: every metric compares two distinct nodes.
fn positive_pool(g: &KnowledgeGraph, mode: PredictionMode) -> Vec<TrainingInstance> {
    match mode {
        PredictionMode::Semantic => g
            .links()
            .filter(|(t, _)| t.subject != t.object)
            .map(|(t, r)| TrainingInstance {
                subject: t.subject,
                object: t.object,
                relation: Some(t.relation),
                label: true,
                provenance: origin_provenance(r.origin),
            })
            .collect(),
        PredictionMode::Existence => {
            let mut seen = BTreeSet::new();
            let mut pool = Vec::new();
            for (t, r) in g.links().filter(|(t, _)| t.subject != t.object) {
                if seen.insert(unordered(t.subject, t.object)) {
                    pool.push(TrainingInstance {
                        subject: t.subject,
                        object: t.object,
                        relation: None,
                        label: true,
                        provenance: origin_provenance(r.origin),
                    });
                }
            }
            pool
        }
    }
}

fn gold_pool(g: &KnowledgeGraph, mode: PredictionMode) -> Vec<TrainingInstance> {
    let mut seen = BTreeSet::new();
    g.non_links()
        .filter(|nl| match mode {
            PredictionMode::Existence => nl.relation.is_none() && seen.insert(unordered(nl.subject, nl.object)),
            PredictionMode::Semantic => nl.relation.is_some(),
        })
        .map(|nl| TrainingInstance {
            subject: nl.subject,
            object: nl.object,
            relation: nl.relation,
            label: false,
            provenance: Provenance::UserReject,
        })
        .collect()
}

fn silver_negative(subject: NodeId, object: NodeId, relation: Option<RelationId>) -> TrainingInstance {
    TrainingInstance {
        subject,
        object,
        relation,
        label: false,
        provenance: Provenance::SilverNegative,
    }
}

/// Uniform draws over unobserved, schema-compatible pairs (existence) or
/// triplets (semantic). Rejection sampling first; a full enumeration takes
/// over when the graph is too dense for it to make progress.
fn silver_negatives(
    g: &KnowledgeGraph,
    mode: PredictionMode,
    half: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<TrainingInstance>, LearningError> {
    if half == 0 {
        return Ok(Vec::new());
    }
    let n = g.node_count();
    let relations: Vec<RelationId> = g.ontology().relation_ids().collect();
    let insufficient = |available| LearningError::InsufficientNegatives {
        standard: Standard::Silver,
        needed: half,
        available,
    };
    if n < 2 || relations.is_empty() {
        return Err(insufficient(0));
    }
    let o = g.ontology();
    let valid_pair = |u: NodeId, v: NodeId| u != v && !g.are_linked(u, v) && schema_linkable(g, u, v);
    let valid_triplet = |u: NodeId, v: NodeId, j: RelationId| {
        u != v && o.admits(j, g.concept_of(u), g.concept_of(v)) && !g.has_link(u, v, j)
    };

    let mut chosen: BTreeSet<(NodeId, NodeId, Option<RelationId>)> = BTreeSet::new();
    let mut out = Vec::with_capacity(half);
    let attempts = 64 * half + 1024;
    for _ in 0..attempts {
        if out.len() == half {
            return Ok(out);
        }
        let u = NodeId(rng.gen_range(0..n as u32));
        let v = NodeId(rng.gen_range(0..n as u32));
        match mode {
            PredictionMode::Existence => {
                if valid_pair(u, v) && chosen.insert((unordered(u, v).0, unordered(u, v).1, None)) {
                    out.push(silver_negative(u, v, None));
                }
            }
            PredictionMode::Semantic => {
                let j = relations[rng.gen_range(0..relations.len())];
                if valid_triplet(u, v, j) && chosen.insert((u, v, Some(j))) {
                    out.push(silver_negative(u, v, Some(j)));
                }
            }
        }
    }

    // dense graph: enumerate what is left and sample from it
    let ids: Vec<NodeId> = g.node_ids().collect();
    let rest: Vec<TrainingInstance> = match mode {
        PredictionMode::Existence => ids
            .iter()
            .flat_map(|&u| ids.iter().filter(move |&&v| u < v).map(move |&v| (u, v)))
            .filter(|&(u, v)| valid_pair(u, v) && !chosen.contains(&(u, v, None)))
            .map(|(u, v)| silver_negative(u, v, None))
            .collect(),
        PredictionMode::Semantic => ids
            .iter()
            .flat_map(|&u| ids.iter().map(move |&v| (u, v)))
            .flat_map(|(u, v)| relations.iter().map(move |&j| (u, v, j)))
            .filter(|&(u, v, j)| valid_triplet(u, v, j) && !chosen.contains(&(u, v, Some(j))))
            .map(|(u, v, j)| silver_negative(u, v, Some(j)))
            .collect(),
    };
    let missing = half - out.len();
    if rest.len() < missing {
        return Err(insufficient(out.len() + rest.len()));
    }
    out.extend(rest.into_iter().choose_multiple(rng, missing));
    Ok(out)
}

/// Metric values for every training instance, aligned with an ensemble.
///
/// Positives are scored with their own link(s) held out: in existence mode
/// every link between the pair, in semantic mode the triplet itself. This
/// puts them on the same footing as unrealised candidates at prediction time.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureMatrix {
    pub rows: Vec<Vec<f64>>,
    pub targets: Vec<f64>,
}

impl FeatureMatrix {
    pub fn build(g: &KnowledgeGraph, ensemble: &MetricEnsemble, set: &TrainingSet) -> Result<Self, LearningError> {
        if set.mode != ensemble.mode() {
            return Err(LearningError::ModeMismatch {
                set: set.mode,
                ensemble: ensemble.mode(),
            });
        }
        let mut work = g.clone();
        let mut rows = Vec::with_capacity(set.len());
        for inst in &set.instances {
            let held = if inst.label { hold_out(&mut work, inst)? } else { Vec::new() };
            let row = ensemble.features(&work, inst.subject, inst.object, inst.relation);
            for (t, r) in held {
                work.add_link_with_origin(t.subject, t.object, t.relation, r.timestamp, r.origin)?;
            }
            rows.push(row?);
        }
        Ok(Self {
            rows,
            targets: set.instances.iter().map(TrainingInstance::target).collect(),
        })
    }

    pub fn from_parts(rows: Vec<Vec<f64>>, targets: Vec<f64>) -> Result<Self, LearningError> {
        if rows.len() != targets.len() {
            return Err(LearningError::LengthMismatch(rows.len(), targets.len()));
        }
        if let Some(first) = rows.first() {
            if let Some(bad) = rows.iter().find(|r| r.len() != first.len()) {
                return Err(LearningError::LengthMismatch(first.len(), bad.len()));
            }
        }
        Ok(Self { rows, targets })
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Number of metrics per row.
    pub fn width(&self) -> usize {
        self.rows.first().map_or(0, Vec::len)
    }

    /// Mean squared error of `Σ a_i s_i` against the labels.
    pub fn mse(&self, weights: &WeightVector) -> f64 {
        if self.rows.is_empty() {
            return 0.0;
        }
        let total: f64 = self
            .rows
            .iter()
            .zip(&self.targets)
            .map(|(row, y)| (weights.dot(row) - y).powi(2))
            .sum();
        total / self.rows.len() as f64
    }
}

fn hold_out(g: &mut KnowledgeGraph, inst: &TrainingInstance) -> Result<Vec<(Triplet, LinkRecord)>, LearningError> {
    let (u, v) = (inst.subject, inst.object);
    let triplets: Vec<Triplet> = match inst.relation {
        Some(j) => vec![Triplet::new(u, v, j)],
        None => {
            let mut ts: Vec<Triplet> = g.relations_between(u, v)?.into_iter().map(|j| Triplet::new(u, v, j)).collect();
            ts.extend(g.relations_between(v, u)?.into_iter().map(|j| Triplet::new(v, u, j)));
            ts
        }
    };
    let mut held = Vec::with_capacity(triplets.len());
    for t in triplets {
        let record = g.remove_link(t.subject, t.object, t.relation)?;
        held.push((t, record));
    }
    Ok(held)
}

/// MSE of `weights` on `set`, recomputing every metric.
pub fn fitness(
    g: &KnowledgeGraph,
    weights: &WeightVector,
    set: &TrainingSet,
    ensemble: &MetricEnsemble,
) -> Result<f64, LearningError> {
    ensemble.check_weights(weights)?;
    Ok(FeatureMatrix::build(g, ensemble, set)?.mse(weights))
}
