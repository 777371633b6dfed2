//! Baseline candidate generators.
//!
//! Existence candidates mix exploitation (half drawn from the two-hop
//! neighbourhood) with exploration (the rest drawn from the whole graph).
//! Semantic candidates walk the target's neighbours and attach one relation
//! that could still be realised between the pair.
//!
//! Both generators skip pairs the user already rejected and nodes the schema
//! cannot link to the target at all.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{GraphError, KnowledgeGraph, NodeId, Triplet};
use crate::ontology::RelationId;

#[derive(Error, Debug, Clone, PartialEq, Eq)]
pub enum CandidateError {
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("candidate set size {0} is too small")]
    TooSmall(usize),
}

/// Which pool an existence candidate was drawn from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CandidatePool {
    TwoHop,
    Global,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ExistenceCandidate {
    pub node: NodeId,
    pub pool: CandidatePool,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ExistenceCandidateSet {
    pub target: NodeId,
    pub candidates: Vec<ExistenceCandidate>,
    pub requested_size: usize,
}

impl ExistenceCandidateSet {
    pub fn nodes(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.candidates.iter().map(|c| c.node)
    }

    pub fn len(&self) -> usize {
        self.candidates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.candidates.is_empty()
    }
}

/// Whether the target is the subject or the object of the proposed link.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Orientation {
    TargetSubject,
    TargetObject,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SemanticCandidate {
    pub node: NodeId,
    pub relation: RelationId,
    pub orientation: Orientation,
}

impl SemanticCandidate {
    pub fn triplet(&self, target: NodeId) -> Triplet {
        match self.orientation {
            Orientation::TargetSubject => Triplet::new(target, self.node, self.relation),
            Orientation::TargetObject => Triplet::new(self.node, target, self.relation),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SemanticCandidateSet {
    pub target: NodeId,
    pub candidates: Vec<SemanticCandidate>,
    pub requested_size: usize,
}

impl SemanticCandidateSet {
    pub fn len(&self) -> usize {
        self.candidates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.candidates.is_empty()
    }
}

/// Whether some relation admits the pair in either orientation.
pub(crate) fn schema_linkable(g: &KnowledgeGraph, u: NodeId, v: NodeId) -> bool {
    let o = g.ontology();
    let (cu, cv) = (g.concept_of(u), g.concept_of(v));
    o.relation_ids().any(|j| o.admits(j, cu, cv) || o.admits(j, cv, cu))
}

fn eligible(g: &KnowledgeGraph, u: NodeId, v: NodeId) -> bool {
    v != u && !g.are_linked(u, v) && !g.is_rejected_pair(u, v) && schema_linkable(g, u, v)
}

pub fn existence_candidates(
    g: &KnowledgeGraph,
    u: NodeId,
    n: usize,
    seed: u64,
) -> Result<ExistenceCandidateSet, CandidateError> {
    g.check_node(u)?;
    if n < 2 {
        return Err(CandidateError::TooSmall(n));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let two_hop: Vec<NodeId> = g
        .gamma(u)
        .keys()
        .flat_map(|&t| g.gamma(t).keys().copied())
        .filter(|&v| eligible(g, u, v))
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();

    let quota = n.div_ceil(2);
    let mut candidates: Vec<ExistenceCandidate> = two_hop
        .choose_multiple(&mut rng, quota.min(two_hop.len()))
        .map(|&node| ExistenceCandidate {
            node,
            pool: CandidatePool::TwoHop,
        })
        .collect();

    let chosen: BTreeSet<NodeId> = candidates.iter().map(|c| c.node).collect();
    let global: Vec<NodeId> = g
        .node_ids()
        .filter(|v| !chosen.contains(v) && eligible(g, u, *v))
        .collect();
    let remaining = n - candidates.len();
    candidates.extend(
        global
            .choose_multiple(&mut rng, remaining.min(global.len()))
            .map(|&node| ExistenceCandidate {
                node,
                pool: CandidatePool::Global,
            }),
    );

    Ok(ExistenceCandidateSet {
        target: u,
        candidates,
        requested_size: n,
    })
}

pub fn semantic_candidates(
    g: &KnowledgeGraph,
    u: NodeId,
    n: usize,
    seed: u64,
) -> Result<SemanticCandidateSet, CandidateError> {
    g.check_node(u)?;
    if n < 1 {
        return Err(CandidateError::TooSmall(n));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut neighbors: Vec<NodeId> = g.gamma(u).keys().copied().filter(|&c| c != u).collect();
    neighbors.shuffle(&mut rng);

    let o = g.ontology();
    let cu = g.concept_of(u);
    let mut candidates = Vec::new();
    for c in neighbors {
        let cc = g.concept_of(c);
        let options: Vec<(RelationId, Orientation)> = o
            .relation_ids()
            .filter_map(|j| {
                let as_subject = o.admits(j, cu, cc) && !g.has_link(u, c, j) && !g.is_non_link(u, c, Some(j));
                let as_object = o.admits(j, cc, cu) && !g.has_link(c, u, j) && !g.is_non_link(c, u, Some(j));
                if as_subject {
                    Some((j, Orientation::TargetSubject))
                } else if as_object {
                    Some((j, Orientation::TargetObject))
                } else {
                    None
                }
            })
            .collect();
        if let Some(&(relation, orientation)) = options.choose(&mut rng) {
            candidates.push(SemanticCandidate {
                node: c,
                relation,
                orientation,
            });
            if candidates.len() >= n {
                break;
            }
        }
    }
    Ok(SemanticCandidateSet {
        target: u,
        candidates,
        requested_size: n,
    })
}
