//! Small named graphs shared by unit, integration and acceptance tests.
//!
//! F1: `root→Agent→Person {p1,p2,p3}`, `root→Place→Stop {s1,s2}`, relations
//! `knows` (Person→Person) and `waited_at` (Person→Stop), links
//! `(p1,p2,knows,1000) (p1,s1,waited_at,2000) (p2,s1,waited_at,3000)
//! (p3,s1,waited_at,4000) (p2,p3,knows,5000)`.
//!
//! F2: F1 plus a second Person→Person relation `met_at_stop_with` and the link
//! `(p1,p2,met_at_stop_with,6000)`.

use crate::graph::KnowledgeGraph;
use crate::ontology::{ConceptId, Ontology, RelationId};

pub struct F1 {
    pub graph: KnowledgeGraph,
    pub agent: ConceptId,
    pub person: ConceptId,
    pub place: ConceptId,
    pub stop: ConceptId,
    pub knows: RelationId,
    pub waited_at: RelationId,
    /// Only declared by [`f2`] and [`f1_with_f2_schema`].
    pub met_at_stop_with: Option<RelationId>,
}

pub fn f1() -> F1 {
    build(false, false)
}

/// F1's links under F2's schema (the extra relation is declared but unused).
pub fn f1_with_f2_schema() -> F1 {
    build(true, false)
}

pub fn f2() -> F1 {
    build(true, true)
}

fn build(declare_met: bool, add_met_link: bool) -> F1 {
    let mut o = Ontology::new("root");
    let agent = o.add_concept("Agent", "Agent", o.root()).unwrap();
    let person = o.add_concept("Person", "Person", agent).unwrap();
    let place = o.add_concept("Place", "Place", o.root()).unwrap();
    let stop = o.add_concept("Stop", "Stop", place).unwrap();
    let knows = o.add_relation("knows", "knows", person, person).unwrap();
    let waited_at = o.add_relation("waited_at", "waited at", person, stop).unwrap();
    let met = declare_met.then(|| {
        o.add_relation("met_at_stop_with", "met at stop with", person, person)
            .unwrap()
    });

    let mut g = KnowledgeGraph::new(o);
    let p1 = g.add_node(person, "p1").unwrap();
    let p2 = g.add_node(person, "p2").unwrap();
    let p3 = g.add_node(person, "p3").unwrap();
    let s1 = g.add_node(stop, "s1").unwrap();
    g.add_node(stop, "s2").unwrap();

    g.add_link(p1, p2, knows, 1000).unwrap();
    g.add_link(p1, s1, waited_at, 2000).unwrap();
    g.add_link(p2, s1, waited_at, 3000).unwrap();
    g.add_link(p3, s1, waited_at, 4000).unwrap();
    g.add_link(p2, p3, knows, 5000).unwrap();
    if add_met_link {
        g.add_link(p1, p2, met.unwrap(), 6000).unwrap();
    }

    F1 {
        graph: g,
        agent,
        person,
        place,
        stop,
        knows,
        waited_at,
        met_at_stop_with: met,
    }
}

/// Bounds for [`random_graph_with`].
#[derive(Clone, Debug)]
pub struct RandomGraphParams {
    pub max_nodes: usize,
    pub max_concepts: usize,
    pub max_relations: usize,
    /// Upper bound on link attempts per node.
    pub link_factor: usize,
    /// Timestamps are drawn from `0..time_span_ms`.
    pub time_span_ms: i64,
}

impl Default for RandomGraphParams {
    fn default() -> Self {
        Self {
            max_nodes: 50,
            max_concepts: 4,
            max_relations: 4,
            link_factor: 3,
            time_span_ms: 10 * 86_400_000,
        }
    }
}

pub fn random_graph(seed: u64) -> KnowledgeGraph {
    random_graph_with(seed, &RandomGraphParams::default())
}

/// A seeded random graph: a random concept tree, random relation schema
/// (sometimes with an inverse pair or a self-loop relation), random nodes,
/// links and rejections.
pub fn random_graph_with(seed: u64, p: &RandomGraphParams) -> KnowledgeGraph {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);

    let mut o = Ontology::new("root");
    let mut concepts = vec![o.root()];
    for i in 0..rng.gen_range(1..=p.max_concepts.max(1)) {
        let parent = concepts[rng.gen_range(0..concepts.len())];
        concepts.push(o.add_concept(format!("C{i}"), format!("Concept {i}"), parent).unwrap());
    }
    let mut relations = Vec::new();
    for i in 0..rng.gen_range(1..=p.max_relations.max(1)) {
        let d = concepts[rng.gen_range(0..concepts.len())];
        let r = concepts[rng.gen_range(0..concepts.len())];
        relations.push(o.add_relation(format!("r{i}"), format!("relation {i}"), d, r).unwrap());
    }
    if relations.len() >= 2 && rng.gen_bool(0.3) {
        o.set_inverse(relations[0], relations[1]).unwrap();
    }
    if rng.gen_bool(0.2) {
        let r = relations[rng.gen_range(0..relations.len())];
        o.set_allow_self_loops(r, true).unwrap();
    }

    let mut g = KnowledgeGraph::new(o);
    let n = rng.gen_range(2..=p.max_nodes.max(2));
    for i in 0..n {
        // mostly leaf-ish concepts, occasionally the root
        let c = if rng.gen_bool(0.05) {
            concepts[0]
        } else {
            concepts[rng.gen_range(1..concepts.len())]
        };
        g.add_node(c, format!("n{i}")).unwrap();
    }
    let ids: Vec<_> = g.node_ids().collect();
    let attempts = rng.gen_range(0..=n * p.link_factor.max(1));
    for _ in 0..attempts {
        let j = relations[rng.gen_range(0..relations.len())];
        let rel = g.ontology().relation(j);
        let (dom, ran) = (rel.domain, rel.range);
        let fits = |c, want| g.ontology().is_descendant_or_equal(c, want);
        let subjects: Vec<_> = ids.iter().copied().filter(|&x| fits(g.concept_of(x), dom)).collect();
        let objects: Vec<_> = ids.iter().copied().filter(|&x| fits(g.concept_of(x), ran)).collect();
        // mostly schema-valid pairs, sometimes arbitrary ones the graph must refuse
        let (u, v) = if subjects.is_empty() || objects.is_empty() || rng.gen_bool(0.1) {
            (ids[rng.gen_range(0..n)], ids[rng.gen_range(0..n)])
        } else {
            (subjects[rng.gen_range(0..subjects.len())], objects[rng.gen_range(0..objects.len())])
        };
        let t = rng.gen_range(0..p.time_span_ms.max(1));
        let _ = g.add_link(u, v, j, t);
    }
    for _ in 0..rng.gen_range(0..=n / 2) {
        let u = ids[rng.gen_range(0..n)];
        let v = ids[rng.gen_range(0..n)];
        let j = rng.gen_bool(0.5).then(|| relations[rng.gen_range(0..relations.len())]);
        if u != v {
            let _ = g.record_non_link(u, v, j, rng.gen_range(0..p.time_span_ms.max(1)));
        }
    }
    g
}
