//! Synthetic graphs grown by a mix of link-formation mechanisms, with a
//! random share of links held back as the reviewer's ground truth.

use std::collections::BTreeSet;

use kglf_core::graph::{KnowledgeGraph, NodeId, Timestamp, Triplet};
use kglf_core::ontology::{ConceptId, Ontology, RelationId};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::EvalError;

/// First link timestamp: 2024-01-01T00:00:00Z.
pub const EPOCH_MS: Timestamp = 1_704_067_200_000;
/// Spacing between consecutive planted links.
pub const LINK_INTERVAL_MS: Timestamp = 3_600_000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConceptSpec {
    pub key: String,
    pub count: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RelationSpec {
    pub key: String,
    pub domain: String,
    pub range: String,
}

/// Probabilities of each mechanism producing the next link.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MechanismMix {
    /// Close an open triangle around a shared neighbour.
    pub triadic_closure: f64,
    /// Join two schema-compatible nodes of the same hidden affinity class.
    pub type_affinity: f64,
    /// Join nodes that were active in the last few links.
    pub temporal_recency: f64,
}

impl Default for MechanismMix {
    fn default() -> Self {
        Self {
            triadic_closure: 0.5,
            type_affinity: 0.3,
            temporal_recency: 0.2,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Mechanism {
    Triadic,
    Affinity,
    Recency,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticSpec {
    pub concepts: Vec<ConceptSpec>,
    pub relations: Vec<RelationSpec>,
    pub mechanisms: MechanismMix,
    /// Links in the full graph per node.
    pub links_per_node: f64,
    pub affinity_classes: usize,
    /// How many of the latest links count as "recent".
    pub recency_window: usize,
    /// Share of links that add a further relation to an already linked
    /// pair instead of joining a new one. Semantic runs need this above 0.
    pub layering: f64,
    /// Share of links hidden from the visible graph.
    pub holdout: f64,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        let concept = |key: &str, count| ConceptSpec {
            key: key.into(),
            count,
        };
        let relation = |key: &str, domain: &str, range: &str| RelationSpec {
            key: key.into(),
            domain: domain.into(),
            range: range.into(),
        };
        Self {
            concepts: vec![concept("Person", 60), concept("Stop", 40), concept("City", 20)],
            relations: vec![
                relation("knows", "Person", "Person"),
                relation("waited_at", "Person", "Stop"),
                relation("visited", "Person", "City"),
            ],
            mechanisms: MechanismMix::default(),
            links_per_node: 4.0,
            affinity_classes: 4,
            recency_window: 12,
            layering: 0.0,
            holdout: 0.2,
            seed: 0,
        }
    }
}

impl SyntheticSpec {
    /// The default spec with a second relation on two concept pairs and a
    /// third of links layered, so that hidden relation types can be found.
    pub fn semantic_default() -> Self {
        let mut spec = Self::default();
        for (key, domain, range) in [("works_with", "Person", "Person"), ("lives_in", "Person", "City")] {
            spec.relations.push(RelationSpec {
                key: key.into(),
                domain: domain.into(),
                range: range.into(),
            });
        }
        spec.layering = 0.3;
        spec
    }

    pub fn node_count(&self) -> usize {
        self.concepts.iter().map(|c| c.count).sum()
    }

    pub fn validate(&self) -> Result<(), EvalError> {
        let bad = |m: String| Err(EvalError::InvalidSpec(m));
        if self.concepts.is_empty() || self.node_count() < 2 {
            return bad("need at least two nodes".into());
        }
        let mut keys = BTreeSet::new();
        for c in &self.concepts {
            if !keys.insert(c.key.as_str()) {
                return bad(format!("concept '{}' listed twice", c.key));
            }
        }
        if self.relations.is_empty() {
            return bad("need at least one relation".into());
        }
        for r in &self.relations {
            for end in [&r.domain, &r.range] {
                if !keys.contains(end.as_str()) {
                    return bad(format!("relation '{}' refers to unknown concept '{end}'", r.key));
                }
            }
        }
        let m = self.mechanisms;
        let parts = [m.triadic_closure, m.type_affinity, m.temporal_recency];
        if parts.iter().any(|p| !(p.is_finite() && *p >= 0.0)) || (parts.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return bad(format!("mechanism weights {parts:?} must be non-negative and sum to 1"));
        }
        if !(self.holdout > 0.0 && self.holdout < 1.0) {
            return bad(format!("holdout {} outside (0, 1)", self.holdout));
        }
        if !(0.0..1.0).contains(&self.layering) {
            return bad(format!("layering {} outside [0, 1)", self.layering));
        }
        if !(self.links_per_node > 0.0 && self.links_per_node.is_finite()) {
            return bad(format!("links_per_node {} must be positive", self.links_per_node));
        }
        if self.affinity_classes == 0 || self.recency_window < 2 {
            return bad("affinity_classes must be >= 1 and recency_window >= 2".into());
        }
        Ok(())
    }

    fn ontology(&self) -> Result<(Ontology, Vec<ConceptId>, Vec<RelationId>), EvalError> {
        let mut o = Ontology::with_root_label("Thing", "Thing");
        let root = o.root();
        let mut concepts = Vec::new();
        for c in &self.concepts {
            concepts.push(o.add_concept(c.key.clone(), c.key.clone(), root)?);
        }
        let mut relations = Vec::new();
        for r in &self.relations {
            let d = o.concept_id(&r.domain).expect("validated");
            let g = o.concept_id(&r.range).expect("validated");
            relations.push(o.add_relation(r.key.clone(), r.key.replace('_', " "), d, g)?);
        }
        Ok((o, concepts, relations))
    }
}

/// The generator's output: what the reviewer sees and what only the
/// simulated oracle knows.
#[derive(Clone, Debug)]
pub struct SyntheticGraph {
    pub visible: KnowledgeGraph,
    pub hidden: Vec<Triplet>,
    pub full_link_count: usize,
    /// Affinity class of every node, by node index.
    pub classes: Vec<usize>,
}

struct Grower<'a> {
    g: KnowledgeGraph,
    rng: ChaCha8Rng,
    relations: Vec<RelationId>,
    classes: Vec<usize>,
    recent: Vec<NodeId>,
    spec: &'a SyntheticSpec,
}

impl Grower<'_> {
    /// A relation and orientation that could link the two nodes, if any.
    fn orient(&mut self, a: NodeId, b: NodeId) -> Option<(NodeId, NodeId, RelationId)> {
        if a == b || self.g.are_linked(a, b) {
            return None;
        }
        let o = self.g.ontology();
        let (ca, cb) = (self.g.concept_of(a), self.g.concept_of(b));
        let mut options = Vec::new();
        for &j in &self.relations {
            if o.admits(j, ca, cb) {
                options.push((a, b, j));
            }
            if o.admits(j, cb, ca) {
                options.push((b, a, j));
            }
        }
        options.choose(&mut self.rng).copied()
    }

    fn random_node(&mut self) -> NodeId {
        NodeId(self.rng.gen_range(0..self.g.node_count() as u32))
    }

    fn triadic(&mut self) -> Option<(NodeId, NodeId, RelationId)> {
        for _ in 0..64 {
            let t = self.random_node();
            let nb = self.g.neighbors(t).ok()?;
            if nb.len() < 2 {
                continue;
            }
            let pair: Vec<NodeId> = nb.choose_multiple(&mut self.rng, 2).copied().collect();
            if let Some(link) = self.orient(pair[0], pair[1]) {
                return Some(link);
            }
        }
        None
    }

    fn affinity(&mut self) -> Option<(NodeId, NodeId, RelationId)> {
        for _ in 0..64 {
            let j = *self.relations.choose(&mut self.rng)?;
            let rel = self.g.ontology().relation(j);
            let (d, r) = (rel.domain, rel.range);
            let class = self.rng.gen_range(0..self.spec.affinity_classes);
            let pick = |g: &KnowledgeGraph, classes: &[usize], c: ConceptId| -> Vec<NodeId> {
                g.node_ids()
                    .filter(|&x| classes[x.index()] == class && g.ontology().is_descendant_or_equal(g.concept_of(x), c))
                    .collect()
            };
            let subjects = pick(&self.g, &self.classes, d);
            let objects = pick(&self.g, &self.classes, r);
            let (Some(&s), Some(&o)) = (subjects.choose(&mut self.rng), objects.choose(&mut self.rng)) else {
                continue;
            };
            if s != o && !self.g.are_linked(s, o) {
                return Some((s, o, j));
            }
        }
        None
    }

    fn recency(&mut self) -> Option<(NodeId, NodeId, RelationId)> {
        if self.recent.len() < 2 {
            return None;
        }
        for _ in 0..64 {
            let a = *self.recent.choose(&mut self.rng)?;
            // mostly among recently active nodes, sometimes reaching out from one
            let b = if self.rng.gen_bool(0.7) {
                *self.recent.choose(&mut self.rng)?
            } else {
                self.random_node()
            };
            if let Some(link) = self.orient(a, b) {
                return Some(link);
            }
        }
        None
    }

    /// A relation the linked pair `a`-`b` does not carry yet.
    fn extra_relation(&mut self, a: NodeId, b: NodeId) -> Option<(NodeId, NodeId, RelationId)> {
        let o = self.g.ontology();
        let (ca, cb) = (self.g.concept_of(a), self.g.concept_of(b));
        let mut options = Vec::new();
        for &j in &self.relations {
            if self.g.has_link(a, b, j) || self.g.has_link(b, a, j) {
                continue;
            }
            if o.admits(j, ca, cb) {
                options.push((a, b, j));
            }
            if o.admits(j, cb, ca) {
                options.push((b, a, j));
            }
        }
        options.choose(&mut self.rng).copied()
    }

    fn layer(&mut self) -> Option<(NodeId, NodeId, RelationId)> {
        let links: Vec<Triplet> = self.g.links().map(|(t, _)| *t).filter(|t| t.subject != t.object).collect();
        for _ in 0..64 {
            let t = *links.choose(&mut self.rng)?;
            if let Some(link) = self.extra_relation(t.subject, t.object) {
                return Some(link);
            }
        }
        None
    }

    fn any(&mut self) -> Option<(NodeId, NodeId, RelationId)> {
        for _ in 0..256 {
            let (a, b) = (self.random_node(), self.random_node());
            if let Some(link) = self.orient(a, b) {
                return Some(link);
            }
        }
        None
    }

    fn draw_mechanism(&mut self) -> Mechanism {
        let m = self.spec.mechanisms;
        let x: f64 = self.rng.gen();
        if x < m.triadic_closure {
            Mechanism::Triadic
        } else if x < m.triadic_closure + m.type_affinity {
            Mechanism::Affinity
        } else {
            Mechanism::Recency
        }
    }

    fn next_link(&mut self) -> Option<(NodeId, NodeId, RelationId)> {
        if self.spec.layering > 0.0 && self.rng.gen_bool(self.spec.layering) {
            if let Some(link) = self.layer() {
                return Some(link);
            }
        }
        let primary = match self.draw_mechanism() {
            Mechanism::Triadic => self.triadic(),
            Mechanism::Affinity => self.affinity(),
            Mechanism::Recency => self.recency(),
        };
        // early on there are no triangles to close or recent nodes to join
        primary.or_else(|| self.affinity()).or_else(|| self.any())
    }
}

/// Grows the full graph, then hides a random `holdout` share of its links.
pub fn generate(spec: &SyntheticSpec) -> Result<SyntheticGraph, EvalError> {
    spec.validate()?;
    let (o, concepts, relations) = spec.ontology()?;
    let mut g = KnowledgeGraph::new(o);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut classes = Vec::new();
    for (c, cs) in concepts.iter().zip(&spec.concepts) {
        let prefix = cs.key.to_lowercase();
        for i in 0..cs.count {
            let id = g.add_node(*c, format!("{prefix}-{i}"))?;
            g.node_mut(id)?.label = format!("{} {i}", cs.key);
            classes.push(rng.gen_range(0..spec.affinity_classes));
        }
    }

    let target = (spec.links_per_node * g.node_count() as f64).round() as usize;
    let mut grower = Grower {
        g,
        rng,
        relations,
        classes,
        recent: Vec::new(),
        spec,
    };
    let mut placed = 0;
    while placed < target {
        let Some((s, o, j)) = grower.next_link() else { break };
        let t = EPOCH_MS + placed as Timestamp * LINK_INTERVAL_MS;
        grower.g.add_link(s, o, j, t)?;
        grower.recent.extend([s, o]);
        let excess = grower.recent.len().saturating_sub(spec.recency_window);
        grower.recent.drain(..excess);
        placed += 1;
    }
    if placed == 0 {
        return Err(EvalError::Infeasible("the schema admits no link between the generated nodes".into()));
    }

    let Grower {
        g: mut visible,
        mut rng,
        classes,
        ..
    } = grower;
    let full_link_count = visible.link_count();
    let hide = ((spec.holdout * full_link_count as f64).round() as usize).min(full_link_count);
    let mut all: Vec<Triplet> = visible.links().map(|(t, _)| *t).collect();
    all.shuffle(&mut rng);
    let mut hidden: Vec<Triplet> = all.into_iter().take(hide).collect();
    hidden.sort();
    for t in &hidden {
        visible.remove_link(t.subject, t.object, t.relation)?;
    }
    Ok(SyntheticGraph {
        visible,
        hidden,
        full_link_count,
        classes,
    })
}
