//! Neighbourhood-overlap, path and multi-relational structure metrics.

use std::collections::{BTreeMap, BTreeSet};

use crate::graph::{GraphError, KnowledgeGraph, NodeId};
use crate::ontology::RelationId;

use super::{MetricError, SimilarityScore};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum OverlapKind {
    Jaccard,
    AdamicAdar,
    ResourceAllocation,
    HubPromoted,
    HubDepressed,
    Lhn,
    Salton,
    Sorensen,
}

impl OverlapKind {
    pub const ALL: [OverlapKind; 8] = [
        OverlapKind::Jaccard,
        OverlapKind::AdamicAdar,
        OverlapKind::ResourceAllocation,
        OverlapKind::HubPromoted,
        OverlapKind::HubDepressed,
        OverlapKind::Lhn,
        OverlapKind::Salton,
        OverlapKind::Sorensen,
    ];
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum DimensionKind {
    Node,
    Edge,
}

fn distinct_pair(g: &KnowledgeGraph, u: NodeId, v: NodeId) -> Result<(), MetricError> {
    g.check_node(u)?;
    g.check_node(v)?;
    if u == v {
        return Err(GraphError::InvalidArgument("similarity needs two distinct nodes".into()).into());
    }
    Ok(())
}

pub fn neighborhood_overlap(
    g: &KnowledgeGraph,
    kind: OverlapKind,
    u: NodeId,
    v: NodeId,
) -> Result<SimilarityScore, MetricError> {
    distinct_pair(g, u, v)?;
    SimilarityScore::from_raw(overlap_raw(g, kind, u, v))
}

pub fn shortest_path_similarity(g: &KnowledgeGraph, u: NodeId, v: NodeId) -> Result<SimilarityScore, MetricError> {
    distinct_pair(g, u, v)?;
    SimilarityScore::from_raw(shortest_path_raw(g, u, v, super::DEFAULT_PATH_CAP))
}

pub fn focci_distance(g: &KnowledgeGraph, u: NodeId, v: NodeId) -> Result<SimilarityScore, MetricError> {
    distinct_pair(g, u, v)?;
    SimilarityScore::from_raw(focci_raw(g, u, v))
}

/// Node or edge share of relation `j`. Fails on an empty graph.
pub fn dimension_connectivity(
    g: &KnowledgeGraph,
    kind: DimensionKind,
    j: RelationId,
) -> Result<SimilarityScore, MetricError> {
    g.ontology().check_relation(j)?;
    let empty = match kind {
        DimensionKind::Node => g.node_count() == 0,
        DimensionKind::Edge => g.link_count() == 0,
    };
    if empty {
        return Err(GraphError::InvalidArgument("dimension connectivity of an empty graph".into()).into());
    }
    SimilarityScore::from_raw(dimension_raw(g, kind, j))
}

pub fn mr_link_propagation(
    g: &KnowledgeGraph,
    u: NodeId,
    v: NodeId,
    j: RelationId,
    damping: f64,
) -> Result<SimilarityScore, MetricError> {
    distinct_pair(g, u, v)?;
    g.ontology().check_relation(j)?;
    super::MetricParams::Propagation { damping }.validate()?;
    SimilarityScore::from_raw(mr_propagation_raw(g, u, v, j, damping))
}

/// Iterates Γ(u) ∩ Γ(v), yielding each common neighbour's degree.
fn common_neighbors<'a>(
    gu: &'a BTreeMap<NodeId, u32>,
    gv: &'a BTreeMap<NodeId, u32>,
) -> impl Iterator<Item = NodeId> + 'a {
    let (small, large) = if gu.len() <= gv.len() { (gu, gv) } else { (gv, gu) };
    small.keys().copied().filter(move |z| large.contains_key(z))
}

pub(crate) fn overlap_raw(g: &KnowledgeGraph, kind: OverlapKind, u: NodeId, v: NodeId) -> f64 {
    let (gu, gv) = (g.gamma(u), g.gamma(v));
    let (ku, kv) = (gu.len() as f64, gv.len() as f64);
    let common: Vec<NodeId> = common_neighbors(gu, gv).collect();
    if common.is_empty() {
        return 0.0;
    }
    let inter = common.len() as f64;
    match kind {
        OverlapKind::Jaccard => inter / (ku + kv - inter),
        OverlapKind::AdamicAdar => {
            // |Γ(z)| >= 2 for every common neighbour, so each term is <= 1/ln 2
            let sum: f64 = common
                .iter()
                .map(|&z| 1.0 / (g.gamma(z).len() as f64).ln())
                .sum();
            sum * std::f64::consts::LN_2 / inter
        }
        OverlapKind::ResourceAllocation => {
            let sum: f64 = common.iter().map(|&z| 1.0 / g.gamma(z).len() as f64).sum();
            sum * 2.0 / inter
        }
        OverlapKind::HubPromoted => inter / ku.min(kv),
        OverlapKind::HubDepressed => inter / ku.max(kv),
        OverlapKind::Lhn => inter / (ku * kv),
        OverlapKind::Salton => inter / (ku * kv).sqrt(),
        OverlapKind::Sorensen => 2.0 * inter / (ku + kv),
    }
}

pub(crate) fn shortest_path_raw(g: &KnowledgeGraph, u: NodeId, v: NodeId, cap: usize) -> f64 {
    match g.bounded_distance(u, v, cap) {
        Some(len) => (1.0 - (len as f64 - 1.0) / cap as f64).max(0.0),
        None => 0.0,
    }
}

/// Γ(z, inverse(j)): nodes reaching `z` through `j`, plus the `inverse_of`
/// neighbours of `z` when the schema declares an inverse.
fn inverse_neighborhood_size(g: &KnowledgeGraph, z: NodeId, j: RelationId) -> usize {
    let reach = g.in_rel(z, j);
    match g.ontology().relation(j).inverse_of {
        Some(inv) => {
            let extra = g.out_rel(z, inv);
            reach.len() + extra.iter().filter(|x| !reach.contains(x)).count()
        }
        None => reach.len(),
    }
}

pub(crate) fn focci_raw(g: &KnowledgeGraph, u: NodeId, v: NodeId) -> f64 {
    let ju: BTreeSet<RelationId> = g.out_relations(u).collect();
    let mut best: f64 = 0.0;
    for j in g.out_relations(v).filter(|j| ju.contains(j)) {
        for z in common_neighbors(g.gamma_rel(u, j), g.gamma_rel(v, j)) {
            let n = inverse_neighborhood_size(g, z, j);
            if n > 0 {
                best = best.max(1.0 / n as f64);
            }
        }
    }
    best
}

pub(crate) fn dimension_raw(g: &KnowledgeGraph, kind: DimensionKind, j: RelationId) -> f64 {
    match kind {
        DimensionKind::Node if g.node_count() > 0 => g.subject_count(j) as f64 / g.node_count() as f64,
        DimensionKind::Edge if g.link_count() > 0 => g.link_count_of(j) as f64 / g.link_count() as f64,
        _ => 0.0,
    }
}

pub(crate) fn unordered_pairs(g: &KnowledgeGraph, j: RelationId) -> BTreeSet<(NodeId, NodeId)> {
    g.relation_pair_set(j)
        .map(|s| s.iter().map(|&(a, b)| if a <= b { (a, b) } else { (b, a) }).collect())
        .unwrap_or_default()
}

/// Jaccard overlap of the unordered pair sets of two relations.
fn relation_overlap(g: &KnowledgeGraph, i: RelationId, x: RelationId) -> f64 {
    let (a, b) = (unordered_pairs(g, i), unordered_pairs(g, x));
    let inter = a.intersection(&b).count();
    let union = a.len() + b.len() - inter;
    if union == 0 {
        0.0
    } else {
        inter as f64 / union as f64
    }
}

/// One propagation step towards the candidate link `(u, v, i)`:
///
/// `β·w(v,u,i)/deg(v,i) + β·Σ_{x≠i} σ(i,x)·w(v,u,x)/deg(v,x) / (|R ∪ {i}| − 1)`
///
/// with seed score 1, binary weights `w` (any link between u and v through
/// the relation), `deg(v,x) = |Γ(v,x)|`, `σ` the pair-set Jaccard overlap and
/// `R` the relations linking u and v. Clamped to `[0, 1]`.
pub(crate) fn mr_propagation_raw(g: &KnowledgeGraph, u: NodeId, v: NodeId, i: RelationId, beta: f64) -> f64 {
    let mut linked: BTreeSet<RelationId> = BTreeSet::new();
    if let Ok(rs) = g.relations_between(u, v) {
        linked.extend(rs);
    }
    if let Ok(rs) = g.relations_between(v, u) {
        linked.extend(rs);
    }
    let degree = |x: RelationId| g.gamma_rel(v, x).len() as f64;

    let direct = if linked.contains(&i) { beta / degree(i) } else { 0.0 };

    let dims = linked.len() + usize::from(!linked.contains(&i));
    let cross = if dims > 1 {
        let sum: f64 = linked
            .iter()
            .filter(|&&x| x != i)
            .map(|&x| relation_overlap(g, i, x) / degree(x))
            .sum();
        beta * sum / (dims - 1) as f64
    } else {
        0.0
    };
    (direct + cross).clamp(0.0, 1.0)
}
