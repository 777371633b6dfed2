//! Ontology- and relation-aware metrics.

use std::collections::BTreeSet;

use crate::graph::{GraphError, KnowledgeGraph, NodeId};
use crate::ontology::RelationId;

use super::topology::unordered_pairs;
use super::{MetricError, SimilarityScore};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum AoVariant {
    Aor,
    Aorr,
    Aorc,
}

/// Largest overlap of `j`'s unordered pair set with any other relation's,
/// relative to `|E(j)|`. Zero for an unused relation.
pub fn conditional_probability(g: &KnowledgeGraph, j: RelationId) -> Result<SimilarityScore, MetricError> {
    g.ontology().check_relation(j)?;
    SimilarityScore::from_raw(conditional_probability_raw(g, j))
}

pub fn taxonomy_similarity(g: &KnowledgeGraph, u: NodeId, v: NodeId) -> Result<SimilarityScore, MetricError> {
    g.check_node(u)?;
    g.check_node(v)?;
    SimilarityScore::from_raw(taxonomy_raw(g, u, v))
}

pub fn relational_similarity(g: &KnowledgeGraph, u: NodeId, v: NodeId) -> Result<SimilarityScore, MetricError> {
    g.check_node(u)?;
    g.check_node(v)?;
    SimilarityScore::from_raw(relational_raw(g, u, v))
}

pub fn arr(g: &KnowledgeGraph, u: NodeId, v: NodeId) -> Result<SimilarityScore, MetricError> {
    distinct(g, u, v)?;
    SimilarityScore::from_raw(arr_raw(g, u, v))
}

pub fn ao_relation(g: &KnowledgeGraph, u: NodeId, v: NodeId, variant: AoVariant) -> Result<SimilarityScore, MetricError> {
    distinct(g, u, v)?;
    let value = match variant {
        AoVariant::Aor => aor_raw(g, u, v),
        AoVariant::Aorr => aor_raw(g, v, u),
        AoVariant::Aorc => 0.5 * (aor_raw(g, u, v) + aor_raw(g, v, u)),
    };
    SimilarityScore::from_raw(value)
}

fn distinct(g: &KnowledgeGraph, u: NodeId, v: NodeId) -> Result<(), MetricError> {
    g.check_node(u)?;
    g.check_node(v)?;
    if u == v {
        return Err(GraphError::InvalidArgument("similarity needs two distinct nodes".into()).into());
    }
    Ok(())
}

pub(crate) fn conditional_probability_raw(g: &KnowledgeGraph, j: RelationId) -> f64 {
    let own = unordered_pairs(g, j);
    if own.is_empty() {
        return 0.0;
    }
    g.ontology()
        .relation_ids()
        .filter(|&i| i != j)
        .map(|i| {
            let other = unordered_pairs(g, i);
            own.intersection(&other).count()
        })
        .max()
        .map_or(0.0, |best| best as f64 / own.len() as f64)
}

/// Jaccard overlap of the two nodes' concept cotopies.
pub(crate) fn taxonomy_raw(g: &KnowledgeGraph, u: NodeId, v: NodeId) -> f64 {
    let o = g.ontology();
    let (cu, cv) = (g.concept_of(u), g.concept_of(v));
    let common = o.common_ancestor_count(cu, cv);
    let a = o.depth(cu) as usize + 1;
    let b = o.depth(cv) as usize + 1;
    common as f64 / (a + b - common) as f64
}

/// Mean over `a ∈ from` of the best taxonomy match in `to`.
fn best_match(g: &KnowledgeGraph, from: &BTreeSet<NodeId>, to: &BTreeSet<NodeId>) -> f64 {
    if from.is_empty() || to.is_empty() {
        return 0.0;
    }
    let total: f64 = from
        .iter()
        .map(|&a| to.iter().map(|&b| taxonomy_raw(g, a, b)).fold(0.0, f64::max))
        .sum();
    total / from.len() as f64
}

/// Averages the best-match taxonomy similarity of the nodes' neighbour sets
/// over every shared relation context: relations both nodes are subjects of
/// (outgoing) and relations both are objects of (incoming).
pub(crate) fn relational_raw(g: &KnowledgeGraph, u: NodeId, v: NodeId) -> f64 {
    let mut total = 0.0;
    let mut contexts = 0usize;

    let out_v: BTreeSet<RelationId> = g.out_relations(v).collect();
    for j in g.out_relations(u).filter(|j| out_v.contains(j)) {
        total += best_match(g, g.out_rel(u, j), g.out_rel(v, j));
        contexts += 1;
    }
    let in_v: BTreeSet<RelationId> = g.in_relations(v).collect();
    for j in g.in_relations(u).filter(|j| in_v.contains(j)) {
        total += best_match(g, g.in_rel(u, j), g.in_rel(v, j));
        contexts += 1;
    }
    if contexts == 0 {
        0.0
    } else {
        total / contexts as f64
    }
}

pub(crate) fn arr_raw(g: &KnowledgeGraph, u: NodeId, v: NodeId) -> f64 {
    let ju: Vec<RelationId> = g.out_relations(u).collect();
    if ju.is_empty() {
        return 0.0;
    }
    let jv: BTreeSet<RelationId> = g.out_relations(v).collect();
    ju.iter().filter(|j| jv.contains(j)).count() as f64 / ju.len() as f64
}

/// Share of Γ(v) whose concept equals the concept of `u`.
pub(crate) fn aor_raw(g: &KnowledgeGraph, u: NodeId, v: NodeId) -> f64 {
    let gv = g.gamma(v);
    if gv.is_empty() {
        return 0.0;
    }
    let cu = g.concept_of(u);
    gv.keys().filter(|&&z| g.concept_of(z) == cu).count() as f64 / gv.len() as f64
}
