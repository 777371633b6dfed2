//! In-memory heterogeneous, multi-relational directed graph.
//!
//! Links are directed `(subject, object, relation)` triplets carrying an epoch
//! millisecond timestamp. Neighbourhood queries (`neighbors`,
//! `neighbors_by_relation`, `degree`) treat links as undirected, while
//! `active_relations`, `relations_between`, `pairs_of_relation` and
//! `subjects_of_relation` keep the subject/object direction.
//!
//! Confirmed non-links (rejections) are kept alongside the link set; a triplet
//! is never in both at once.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ontology::{ConceptId, Ontology, RelationId};

/// Milliseconds since the Unix epoch.
pub type Timestamp = i64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct NodeId(pub u32);

impl NodeId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Triplet {
    pub subject: NodeId,
    pub object: NodeId,
    pub relation: RelationId,
}

impl Triplet {
    pub fn new(subject: NodeId, object: NodeId, relation: RelationId) -> Self {
        Self {
            subject,
            object,
            relation,
        }
    }
}

#[derive(Error, Debug, Clone, PartialEq, Eq)]
pub enum GraphError {
    #[error("unknown concept {0}")]
    UnknownConcept(String),
    #[error("unknown relation {0}")]
    UnknownRelation(String),
    #[error("unknown node {0}")]
    UnknownNode(String),
    #[error("duplicate identifier '{0}'")]
    DuplicateKey(String),
    #[error("link {0} already exists")]
    DuplicateLink(String),
    #[error("link {0} does not exist")]
    MissingLink(String),
    #[error("schema violation: {0}")]
    SchemaViolation(String),
    #[error("cannot record non-link {0}: the link exists")]
    LinkExists(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Node {
    pub key: String,
    pub concept: ConceptId,
    pub label: String,
    pub attributes: BTreeMap<String, String>,
}

/// How a link entered the graph.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LinkOrigin {
    Observed,
    Accepted,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LinkRecord {
    pub timestamp: Timestamp,
    pub origin: LinkOrigin,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NonLinkKey {
    pub subject: NodeId,
    pub object: NodeId,
    /// `None` records that no link of any relation exists between the pair.
    pub relation: Option<RelationId>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct NonLink {
    pub subject: NodeId,
    pub object: NodeId,
    pub relation: Option<RelationId>,
    pub timestamp: Timestamp,
}

#[derive(Clone, Debug, Default)]
struct Adjacency {
    out: BTreeMap<RelationId, BTreeSet<NodeId>>,
    inc: BTreeMap<RelationId, BTreeSet<NodeId>>,
    // undirected neighbour -> number of links shared with it
    neighbors: BTreeMap<NodeId, u32>,
    by_relation: BTreeMap<RelationId, BTreeMap<NodeId, u32>>,
}

#[derive(Clone, Debug)]
pub struct KnowledgeGraph {
    ontology: Ontology,
    nodes: Vec<Node>,
    node_keys: HashMap<String, NodeId>,
    adjacency: Vec<Adjacency>,
    links: BTreeMap<Triplet, LinkRecord>,
    pair_relations: HashMap<(NodeId, NodeId), BTreeSet<RelationId>>,
    relation_pairs: BTreeMap<RelationId, BTreeSet<(NodeId, NodeId)>>,
    relation_subjects: BTreeMap<RelationId, BTreeMap<NodeId, u32>>,
    timestamps: BTreeMap<Timestamp, u32>,
    non_links: BTreeMap<NonLinkKey, Timestamp>,
}

/// Graphs are equal when schema, nodes (with their ids), links and
/// non-links agree; the derived indexes follow from those.
impl PartialEq for KnowledgeGraph {
    fn eq(&self, other: &Self) -> bool {
        self.ontology == other.ontology
            && self.nodes == other.nodes
            && self.links == other.links
            && self.non_links == other.non_links
    }
}

static EMPTY_NEIGHBORS: BTreeMap<NodeId, u32> = BTreeMap::new();
static EMPTY_SET: BTreeSet<NodeId> = BTreeSet::new();

impl KnowledgeGraph {
    pub fn new(ontology: Ontology) -> Self {
        Self {
            ontology,
            nodes: Vec::new(),
            node_keys: HashMap::new(),
            adjacency: Vec::new(),
            links: BTreeMap::new(),
            pair_relations: HashMap::new(),
            relation_pairs: BTreeMap::new(),
            relation_subjects: BTreeMap::new(),
            timestamps: BTreeMap::new(),
            non_links: BTreeMap::new(),
        }
    }

    pub fn ontology(&self) -> &Ontology {
        &self.ontology
    }

    /// Schema edits are only allowed while they cannot invalidate stored links.
    pub fn ontology_mut(&mut self) -> Option<&mut Ontology> {
        if self.links.is_empty() {
            Some(&mut self.ontology)
        } else {
            None
        }
    }

    // ---------------------------------------------------------------- nodes

    /// Adds a node whose label equals its key.
    pub fn add_node(&mut self, concept: ConceptId, key: impl Into<String>) -> Result<NodeId, GraphError> {
        let key = key.into();
        self.insert_node(Node {
            label: key.clone(),
            key,
            concept,
            attributes: BTreeMap::new(),
        })
    }

    pub fn insert_node(&mut self, node: Node) -> Result<NodeId, GraphError> {
        if !self.ontology.has_concept(node.concept) {
            return Err(GraphError::UnknownConcept(format!("#{}", node.concept.0)));
        }
        if self.node_keys.contains_key(&node.key) {
            return Err(GraphError::DuplicateKey(node.key));
        }
        let id = NodeId(self.nodes.len() as u32);
        self.node_keys.insert(node.key.clone(), id);
        self.nodes.push(node);
        self.adjacency.push(Adjacency::default());
        Ok(id)
    }

    pub fn node(&self, id: NodeId) -> Result<&Node, GraphError> {
        self.nodes.get(id.index()).ok_or_else(|| unknown_node(id))
    }

    pub fn node_mut(&mut self, id: NodeId) -> Result<&mut Node, GraphError> {
        self.nodes.get_mut(id.index()).ok_or_else(|| unknown_node(id))
    }

    pub fn node_id(&self, key: &str) -> Option<NodeId> {
        self.node_keys.get(key).copied()
    }

    pub fn node_key(&self, id: NodeId) -> &str {
        &self.nodes[id.index()].key
    }

    pub fn concept_of(&self, id: NodeId) -> ConceptId {
        self.nodes[id.index()].concept
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn node_ids(&self) -> impl Iterator<Item = NodeId> {
        (0..self.nodes.len() as u32).map(NodeId)
    }

    pub fn nodes(&self) -> impl Iterator<Item = (NodeId, &Node)> {
        self.nodes.iter().enumerate().map(|(i, n)| (NodeId(i as u32), n))
    }

    pub fn contains_node(&self, id: NodeId) -> bool {
        id.index() < self.nodes.len()
    }

    /// Nodes whose concept is `concept` or one of its descendants.
    pub fn nodes_of_concept(&self, concept: ConceptId) -> Vec<NodeId> {
        self.nodes()
            .filter(|(_, n)| self.ontology.is_descendant_or_equal(n.concept, concept))
            .map(|(id, _)| id)
            .collect()
    }

    // ---------------------------------------------------------------- links

    pub fn add_link(&mut self, u: NodeId, v: NodeId, j: RelationId, t: Timestamp) -> Result<(), GraphError> {
        self.add_link_with_origin(u, v, j, t, LinkOrigin::Observed)
    }

    pub fn add_link_with_origin(
        &mut self,
        u: NodeId,
        v: NodeId,
        j: RelationId,
        t: Timestamp,
        origin: LinkOrigin,
    ) -> Result<(), GraphError> {
        self.check_node(u)?;
        self.check_node(v)?;
        self.ontology.check_relation(j)?;
        let triplet = Triplet::new(u, v, j);
        if self.links.contains_key(&triplet) {
            return Err(GraphError::DuplicateLink(self.describe(&triplet)));
        }
        self.check_schema(u, v, j)?;

        self.links.insert(triplet, LinkRecord { timestamp: t, origin });
        self.pair_relations.entry((u, v)).or_default().insert(j);
        self.relation_pairs.entry(j).or_default().insert((u, v));
        *self.relation_subjects.entry(j).or_default().entry(u).or_insert(0) += 1;
        *self.timestamps.entry(t).or_insert(0) += 1;

        self.adjacency[u.index()].out.entry(j).or_default().insert(v);
        self.adjacency[v.index()].inc.entry(j).or_default().insert(u);
        // a self-loop is one link, counted once
        for (a, b) in endpoints(u, v) {
            let adj = &mut self.adjacency[a.index()];
            *adj.neighbors.entry(b).or_insert(0) += 1;
            *adj.by_relation.entry(j).or_default().entry(b).or_insert(0) += 1;
        }

        // an acceptance overrides earlier rejections of the same fact
        self.non_links.remove(&NonLinkKey { subject: u, object: v, relation: Some(j) });
        self.non_links.remove(&NonLinkKey { subject: u, object: v, relation: None });
        self.non_links.remove(&NonLinkKey { subject: v, object: u, relation: None });
        Ok(())
    }

    pub fn remove_link(&mut self, u: NodeId, v: NodeId, j: RelationId) -> Result<LinkRecord, GraphError> {
        let triplet = Triplet::new(u, v, j);
        let record = self
            .links
            .remove(&triplet)
            .ok_or_else(|| GraphError::MissingLink(self.describe(&triplet)))?;

        remove_from_set_map(&mut self.pair_relations, &(u, v), &j);
        if let Some(pairs) = self.relation_pairs.get_mut(&j) {
            pairs.remove(&(u, v));
            if pairs.is_empty() {
                self.relation_pairs.remove(&j);
            }
        }
        if let Some(subjects) = self.relation_subjects.get_mut(&j) {
            decrement(subjects, &u);
            if subjects.is_empty() {
                self.relation_subjects.remove(&j);
            }
        }
        decrement(&mut self.timestamps, &record.timestamp);

        remove_from_set_map(&mut self.adjacency[u.index()].out, &j, &v);
        remove_from_set_map(&mut self.adjacency[v.index()].inc, &j, &u);
        for (a, b) in endpoints(u, v) {
            let adj = &mut self.adjacency[a.index()];
            decrement(&mut adj.neighbors, &b);
            if let Some(m) = adj.by_relation.get_mut(&j) {
                decrement(m, &b);
                if m.is_empty() {
                    adj.by_relation.remove(&j);
                }
            }
        }
        Ok(record)
    }

    pub fn has_link(&self, u: NodeId, v: NodeId, j: RelationId) -> bool {
        self.links.contains_key(&Triplet::new(u, v, j))
    }

    /// Whether any link joins `u` and `v`, in either direction.
    pub fn are_linked(&self, u: NodeId, v: NodeId) -> bool {
        self.adjacency
            .get(u.index())
            .is_some_and(|a| a.neighbors.contains_key(&v))
    }

    pub fn link(&self, triplet: &Triplet) -> Option<&LinkRecord> {
        self.links.get(triplet)
    }

    pub fn links(&self) -> impl Iterator<Item = (&Triplet, &LinkRecord)> {
        self.links.iter()
    }

    pub fn link_count(&self) -> usize {
        self.links.len()
    }

    /// |E_j|
    pub fn link_count_of(&self, j: RelationId) -> usize {
        self.relation_pairs.get(&j).map_or(0, BTreeSet::len)
    }

    pub fn latest_timestamp(&self) -> Option<Timestamp> {
        self.timestamps.keys().next_back().copied()
    }

    // ------------------------------------------------------------ non-links

    pub fn record_non_link(
        &mut self,
        u: NodeId,
        v: NodeId,
        j: Option<RelationId>,
        t: Timestamp,
    ) -> Result<(), GraphError> {
        self.check_node(u)?;
        self.check_node(v)?;
        if let Some(j) = j {
            self.ontology.check_relation(j)?;
            if self.has_link(u, v, j) {
                return Err(GraphError::LinkExists(self.describe(&Triplet::new(u, v, j))));
            }
        } else if self.are_linked(u, v) {
            return Err(GraphError::LinkExists(format!(
                "({}, {}, *)",
                self.node_key(u),
                self.node_key(v)
            )));
        }
        self.non_links.insert(NonLinkKey { subject: u, object: v, relation: j }, t);
        Ok(())
    }

    pub fn is_non_link(&self, u: NodeId, v: NodeId, j: Option<RelationId>) -> bool {
        self.non_links
            .contains_key(&NonLinkKey { subject: u, object: v, relation: j })
    }

    /// Whether the unordered pair was rejected in existence mode.
    pub fn is_rejected_pair(&self, u: NodeId, v: NodeId) -> bool {
        self.is_non_link(u, v, None) || self.is_non_link(v, u, None)
    }

    pub fn non_links(&self) -> impl Iterator<Item = NonLink> + '_ {
        self.non_links.iter().map(|(k, &t)| NonLink {
            subject: k.subject,
            object: k.object,
            relation: k.relation,
            timestamp: t,
        })
    }

    pub fn non_link_count(&self) -> usize {
        self.non_links.len()
    }

    // -------------------------------------------------------------- queries

    /// Γ(u): distinct nodes sharing at least one link with `u`, either direction.
    pub fn neighbors(&self, u: NodeId) -> Result<Vec<NodeId>, GraphError> {
        self.check_node(u)?;
        Ok(self.gamma(u).keys().copied().collect())
    }

    /// Γ(u, j), undirected.
    pub fn neighbors_by_relation(&self, u: NodeId, j: RelationId) -> Result<Vec<NodeId>, GraphError> {
        self.check_node(u)?;
        self.ontology.check_relation(j)?;
        Ok(self.gamma_rel(u, j).keys().copied().collect())
    }

    /// k_u: number of distinct neighbours.
    pub fn degree(&self, u: NodeId) -> Result<usize, GraphError> {
        self.check_node(u)?;
        Ok(self.gamma(u).len())
    }

    /// J(u): relations in which `u` is the subject of at least one link.
    pub fn active_relations(&self, u: NodeId) -> Result<Vec<RelationId>, GraphError> {
        self.check_node(u)?;
        Ok(self.adjacency[u.index()].out.keys().copied().collect())
    }

    /// J(u, v): relations realised with `u` as subject and `v` as object.
    pub fn relations_between(&self, u: NodeId, v: NodeId) -> Result<Vec<RelationId>, GraphError> {
        self.check_node(u)?;
        self.check_node(v)?;
        Ok(self
            .pair_relations
            .get(&(u, v))
            .map(|s| s.iter().copied().collect())
            .unwrap_or_default())
    }

    /// E(j): directed (subject, object) pairs connected by `j`.
    pub fn pairs_of_relation(&self, j: RelationId) -> Result<Vec<(NodeId, NodeId)>, GraphError> {
        self.ontology.check_relation(j)?;
        Ok(self
            .relation_pairs
            .get(&j)
            .map(|s| s.iter().copied().collect())
            .unwrap_or_default())
    }

    /// N(j): subjects of `j`.
    pub fn subjects_of_relation(&self, j: RelationId) -> Result<Vec<NodeId>, GraphError> {
        self.ontology.check_relation(j)?;
        Ok(self
            .relation_subjects
            .get(&j)
            .map(|s| s.keys().copied().collect())
            .unwrap_or_default())
    }

    /// Minimal hop count between `u` and `v` over undirected neighbourhoods,
    /// or `None` when no path of at most `cap` hops exists.
    pub fn shortest_path_len(&self, u: NodeId, v: NodeId, cap: usize) -> Result<Option<usize>, GraphError> {
        self.check_node(u)?;
        self.check_node(v)?;
        if u == v {
            return Err(GraphError::InvalidArgument("shortest path needs two distinct nodes".into()));
        }
        if cap == 0 {
            return Err(GraphError::InvalidArgument("hop cap must be at least 1".into()));
        }
        Ok(self.bounded_distance(u, v, cap))
    }

    pub(crate) fn bounded_distance(&self, u: NodeId, v: NodeId, cap: usize) -> Option<usize> {
        if self.gamma(u).contains_key(&v) {
            return Some(1);
        }
        let mut dist = vec![usize::MAX; self.nodes.len()];
        let mut queue = VecDeque::new();
        dist[u.index()] = 0;
        queue.push_back(u);
        while let Some(x) = queue.pop_front() {
            let d = dist[x.index()];
            if d >= cap {
                break;
            }
            for &y in self.gamma(x).keys() {
                if dist[y.index()] == usize::MAX {
                    if y == v {
                        return Some(d + 1);
                    }
                    dist[y.index()] = d + 1;
                    queue.push_back(y);
                }
            }
        }
        None
    }

    /// Upwards cotopy of concept `c`, including `c` and the root.
    pub fn concept_ancestors(&self, c: ConceptId) -> Result<Vec<ConceptId>, GraphError> {
        if !self.ontology.has_concept(c) {
            return Err(GraphError::UnknownConcept(format!("#{}", c.0)));
        }
        Ok(self.ontology.ancestors(c))
    }

    /// Relations admitting `u` as subject and `v` as object.
    pub fn compatible_relations(&self, u: NodeId, v: NodeId) -> Result<Vec<RelationId>, GraphError> {
        self.check_node(u)?;
        self.check_node(v)?;
        let (cu, cv) = (self.concept_of(u), self.concept_of(v));
        Ok(self
            .ontology
            .relation_ids()
            .filter(|&j| self.ontology.admits(j, cu, cv))
            .filter(|&j| u != v || self.ontology.relation(j).allow_self_loops)
            .collect())
    }

    /// Most recent timestamp of any link between `x` and `c`, either direction.
    pub fn pair_latest_time(&self, x: NodeId, c: NodeId) -> Option<Timestamp> {
        self.pair_links(x, c).map(|(_, r)| r.timestamp).max()
    }

    /// Number of links between `x` and `c`, counted in both directions.
    pub fn pair_multiplicity(&self, x: NodeId, c: NodeId) -> usize {
        self.gamma(x).get(&c).map_or(0, |&m| m as usize)
    }

    /// Most recent timestamp of any link incident to `v`.
    pub fn last_link_time(&self, v: NodeId) -> Option<Timestamp> {
        self.gamma(v)
            .keys()
            .filter_map(|&c| self.pair_latest_time(v, c))
            .max()
    }

    fn pair_links(&self, x: NodeId, c: NodeId) -> impl Iterator<Item = (Triplet, &LinkRecord)> + '_ {
        let forward = self.pair_relations.get(&(x, c)).into_iter().flatten().map(move |&j| Triplet::new(x, c, j));
        let backward = self.pair_relations.get(&(c, x)).into_iter().flatten().map(move |&j| Triplet::new(c, x, j));
        forward
            .chain(backward)
            .filter_map(move |t| self.links.get(&t).map(|r| (t, r)))
    }

    // ------------------------------------------------- crate-internal access

    pub(crate) fn gamma(&self, u: NodeId) -> &BTreeMap<NodeId, u32> {
        self.adjacency.get(u.index()).map_or(&EMPTY_NEIGHBORS, |a| &a.neighbors)
    }

    pub(crate) fn gamma_rel(&self, u: NodeId, j: RelationId) -> &BTreeMap<NodeId, u32> {
        self.adjacency
            .get(u.index())
            .and_then(|a| a.by_relation.get(&j))
            .unwrap_or(&EMPTY_NEIGHBORS)
    }

    pub(crate) fn out_rel(&self, u: NodeId, j: RelationId) -> &BTreeSet<NodeId> {
        self.adjacency[u.index()].out.get(&j).unwrap_or(&EMPTY_SET)
    }

    pub(crate) fn in_rel(&self, u: NodeId, j: RelationId) -> &BTreeSet<NodeId> {
        self.adjacency[u.index()].inc.get(&j).unwrap_or(&EMPTY_SET)
    }

    pub(crate) fn out_relations(&self, u: NodeId) -> impl Iterator<Item = RelationId> + '_ {
        self.adjacency[u.index()].out.keys().copied()
    }

    pub(crate) fn in_relations(&self, u: NodeId) -> impl Iterator<Item = RelationId> + '_ {
        self.adjacency[u.index()].inc.keys().copied()
    }

    pub(crate) fn relation_pair_set(&self, j: RelationId) -> Option<&BTreeSet<(NodeId, NodeId)>> {
        self.relation_pairs.get(&j)
    }

    pub(crate) fn subject_count(&self, j: RelationId) -> usize {
        self.relation_subjects.get(&j).map_or(0, BTreeMap::len)
    }

    pub(crate) fn check_node(&self, u: NodeId) -> Result<(), GraphError> {
        if self.contains_node(u) {
            Ok(())
        } else {
            Err(unknown_node(u))
        }
    }

    fn check_schema(&self, u: NodeId, v: NodeId, j: RelationId) -> Result<(), GraphError> {
        let rel = self.ontology.relation(j);
        if u == v && !rel.allow_self_loops {
            return Err(GraphError::SchemaViolation(format!(
                "relation '{}' does not allow self-loops on '{}'",
                rel.key,
                self.node_key(u)
            )));
        }
        let (cu, cv) = (self.concept_of(u), self.concept_of(v));
        if !self.ontology.is_descendant_or_equal(cu, rel.domain) {
            return Err(GraphError::SchemaViolation(format!(
                "subject '{}' of concept '{}' outside domain '{}' of '{}'",
                self.node_key(u),
                self.ontology.concept(cu).key,
                self.ontology.concept(rel.domain).key,
                rel.key
            )));
        }
        if !self.ontology.is_descendant_or_equal(cv, rel.range) {
            return Err(GraphError::SchemaViolation(format!(
                "object '{}' of concept '{}' outside range '{}' of '{}'",
                self.node_key(v),
                self.ontology.concept(cv).key,
                self.ontology.concept(rel.range).key,
                rel.key
            )));
        }
        Ok(())
    }

    pub fn describe(&self, t: &Triplet) -> String {
        format!(
            "({}, {}, {})",
            self.node_key(t.subject),
            self.node_key(t.object),
            self.ontology.relation(t.relation).key
        )
    }
}

/// Both orientations of a link, or just one for a self-loop.
fn endpoints(u: NodeId, v: NodeId) -> impl Iterator<Item = (NodeId, NodeId)> {
    [(u, v), (v, u)].into_iter().take(if u == v { 1 } else { 2 })
}

fn unknown_node(id: NodeId) -> GraphError {
    GraphError::UnknownNode(format!("#{}", id.0))
}

fn decrement<K: Ord>(map: &mut BTreeMap<K, u32>, key: &K) {
    if let Some(c) = map.get_mut(key) {
        *c -= 1;
        if *c == 0 {
            map.remove(key);
        }
    }
}

fn remove_from_set_map<M, K, V>(map: &mut M, key: &K, value: &V)
where
    M: SetMap<K, V>,
{
    map.remove_value(key, value);
}

trait SetMap<K, V> {
    fn remove_value(&mut self, key: &K, value: &V);
}

impl<K: Ord, V: Ord> SetMap<K, V> for BTreeMap<K, BTreeSet<V>> {
    fn remove_value(&mut self, key: &K, value: &V) {
        if let Some(s) = self.get_mut(key) {
            s.remove(value);
            if s.is_empty() {
                self.remove(key);
            }
        }
    }
}

impl<K: std::hash::Hash + Eq, V: Ord> SetMap<K, V> for HashMap<K, BTreeSet<V>> {
    fn remove_value(&mut self, key: &K, value: &V) {
        if let Some(s) = self.get_mut(key) {
            s.remove(value);
            if s.is_empty() {
                self.remove(key);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{f1, F1};

    fn ids(g: &KnowledgeGraph, keys: &[&str]) -> Vec<NodeId> {
        let mut v: Vec<_> = keys.iter().map(|k| g.node_id(k).unwrap()).collect();
        v.sort();
        v
    }

    #[test]
    fn fresh_node_has_empty_neighbourhood() {
        let F1 { mut graph, person, .. } = f1();
        let n = graph.add_node(person, "p9").unwrap();
        assert!(graph.neighbors(n).unwrap().is_empty());
        assert_eq!(graph.degree(n).unwrap(), 0);
    }

    #[test]
    fn add_node_unknown_concept() {
        let F1 { mut graph, .. } = f1();
        assert!(matches!(
            graph.add_node(ConceptId(99), "x"),
            Err(GraphError::UnknownConcept(_))
        ));
    }

    #[test]
    fn node_count() {
        let mut o = Ontology::new("root");
        let c = o.add_concept("C", "C", o.root()).unwrap();
        let mut g = KnowledgeGraph::new(o);
        for i in 0..5 {
            g.add_node(c, format!("n{i}")).unwrap();
        }
        assert_eq!(g.node_count(), 5);
    }

    #[test]
    fn undirected_neighbourhood_after_add() {
        let F1 { graph: g, .. } = f1();
        let (p1, p2) = (g.node_id("p1").unwrap(), g.node_id("p2").unwrap());
        assert!(g.neighbors(p1).unwrap().contains(&p2));
        assert!(g.neighbors(p2).unwrap().contains(&p1));
    }

    #[test]
    fn duplicate_link_rejected() {
        let F1 { mut graph, knows, .. } = f1();
        let (p1, p2) = (graph.node_id("p1").unwrap(), graph.node_id("p2").unwrap());
        let before = graph.link_count();
        assert!(matches!(
            graph.add_link(p1, p2, knows, 7),
            Err(GraphError::DuplicateLink(_))
        ));
        assert_eq!(graph.link_count(), before);
    }

    #[test]
    fn schema_violation() {
        let F1 { mut graph, waited_at, .. } = f1();
        let (p1, p3) = (graph.node_id("p1").unwrap(), graph.node_id("p3").unwrap());
        assert!(matches!(
            graph.add_link(p1, p3, waited_at, 1),
            Err(GraphError::SchemaViolation(_))
        ));
    }

    #[test]
    fn self_loops_forbidden_by_default() {
        let F1 { mut graph, knows, .. } = f1();
        let p1 = graph.node_id("p1").unwrap();
        assert!(graph.add_link(p1, p1, knows, 1).is_err());
        assert!(graph.relations_between(p1, p1).unwrap().is_empty());
    }

    #[test]
    fn fixture_neighbourhoods() {
        let F1 { graph: g, waited_at, .. } = f1();
        let p2 = g.node_id("p2").unwrap();
        assert_eq!(g.neighbors(p2).unwrap(), ids(&g, &["p1", "s1", "p3"]));
        let s1 = g.node_id("s1").unwrap();
        assert_eq!(
            g.neighbors_by_relation(s1, waited_at).unwrap(),
            ids(&g, &["p1", "p2", "p3"])
        );
        assert_eq!(g.degree(g.node_id("s2").unwrap()).unwrap(), 0);
    }

    #[test]
    fn fixture_direction_aware_queries() {
        let F1 { graph: g, knows, waited_at, .. } = f1();
        let n = |k| g.node_id(k).unwrap();
        assert_eq!(g.active_relations(n("p1")).unwrap(), vec![knows, waited_at]);
        assert_eq!(g.active_relations(n("p3")).unwrap(), vec![waited_at]);
        assert!(g.active_relations(n("s2")).unwrap().is_empty());
        assert_eq!(g.relations_between(n("p1"), n("p2")).unwrap(), vec![knows]);
        assert!(g.relations_between(n("p2"), n("p1")).unwrap().is_empty());
        let mut pairs = vec![(n("p1"), n("s1")), (n("p2"), n("s1")), (n("p3"), n("s1"))];
        pairs.sort();
        assert_eq!(g.pairs_of_relation(waited_at).unwrap(), pairs);
        assert_eq!(g.subjects_of_relation(knows).unwrap(), ids(&g, &["p1", "p2"]));
    }

    #[test]
    fn unused_relation_is_empty() {
        let F1 { mut graph, person, .. } = f1();
        // schema is frozen once links exist
        assert!(graph.ontology_mut().is_none());
        let mut o = Ontology::new("root");
        let c = o.add_concept("C", "C", o.root()).unwrap();
        let j = o.add_relation("j", "j", c, c).unwrap();
        let g = KnowledgeGraph::new(o);
        assert!(g.pairs_of_relation(j).unwrap().is_empty());
        assert!(g.subjects_of_relation(j).unwrap().is_empty());
        let _ = person;
    }

    #[test]
    fn shortest_paths_on_fixture() {
        let F1 { graph: g, .. } = f1();
        let n = |k| g.node_id(k).unwrap();
        assert_eq!(g.shortest_path_len(n("p1"), n("p3"), 5).unwrap(), Some(2));
        assert_eq!(g.shortest_path_len(n("p1"), n("s2"), 5).unwrap(), None);
        assert_eq!(g.shortest_path_len(n("p1"), n("p2"), 5).unwrap(), Some(1));
        assert!(g.shortest_path_len(n("p1"), n("p1"), 5).is_err());
    }

    #[test]
    fn non_link_lifecycle() {
        let F1 { mut graph, waited_at, knows, .. } = f1();
        let n = |g: &KnowledgeGraph, k| g.node_id(k).unwrap();
        let (p1, s2, p2) = (n(&graph, "p1"), n(&graph, "s2"), n(&graph, "p2"));
        graph.record_non_link(p1, s2, Some(waited_at), 10).unwrap();
        assert!(graph.is_non_link(p1, s2, Some(waited_at)));
        assert!(matches!(
            graph.record_non_link(p1, p2, Some(knows), 10),
            Err(GraphError::LinkExists(_))
        ));
        graph.add_link(p1, s2, waited_at, 11).unwrap();
        assert!(!graph.is_non_link(p1, s2, Some(waited_at)));
    }

    #[test]
    fn timestamps_on_fixture() {
        let F1 { graph: g, .. } = f1();
        let n = |k| g.node_id(k).unwrap();
        assert_eq!(g.latest_timestamp(), Some(5000));
        assert_eq!(g.pair_latest_time(n("s1"), n("p3")), Some(4000));
        assert_eq!(g.last_link_time(n("p2")), Some(5000));
        assert_eq!(g.last_link_time(n("s2")), None);
        assert_eq!(g.pair_multiplicity(n("p1"), n("s1")), 1);
    }

    #[test]
    fn remove_restores_queries() {
        let F1 { mut graph, knows, .. } = f1();
        let before = format!("{:?}", snapshot_queries(&graph));
        let (p1, p3) = (graph.node_id("p1").unwrap(), graph.node_id("p3").unwrap());
        graph.add_link(p1, p3, knows, 9000).unwrap();
        graph.remove_link(p1, p3, knows).unwrap();
        assert_eq!(before, format!("{:?}", snapshot_queries(&graph)));
    }

    fn snapshot_queries(g: &KnowledgeGraph) -> Vec<String> {
        let mut out = vec![format!("{:?}", g.latest_timestamp())];
        for u in g.node_ids() {
            out.push(format!(
                "{:?} {:?} {:?}",
                g.neighbors(u).unwrap(),
                g.active_relations(u).unwrap(),
                g.last_link_time(u)
            ));
        }
        out
    }
}
