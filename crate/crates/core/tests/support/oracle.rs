//! Naive reference implementations of every metric family.
//!
//! Everything is rebuilt from the raw link list and the ontology's parent
//! pointers; none of the graph's indexes or the library's metric code is
//! used. Slow by design.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use kglf_core::graph::{KnowledgeGraph, NodeId};
use kglf_core::metrics::{MetricFamily, MetricParams};
use kglf_core::ontology::{ConceptId, RelationId};

type Set = BTreeSet<NodeId>;

pub struct Oracle<'a> {
    g: &'a KnowledgeGraph,
    /// (subject, object, relation, timestamp)
    links: Vec<(NodeId, NodeId, RelationId, i64)>,
    nodes: Vec<NodeId>,
    relations: Vec<RelationId>,
}

impl<'a> Oracle<'a> {
    pub fn new(g: &'a KnowledgeGraph) -> Self {
        Self {
            g,
            links: g
                .links()
                .map(|(t, r)| (t.subject, t.object, t.relation, r.timestamp))
                .collect(),
            nodes: g.node_ids().collect(),
            relations: g.ontology().relation_ids().collect(),
        }
    }

    pub fn nodes(&self) -> &[NodeId] {
        &self.nodes
    }

    pub fn relations(&self) -> &[RelationId] {
        &self.relations
    }

    // ------------------------------------------------------------ queries

    fn gamma(&self, x: NodeId) -> Set {
        let mut s = Set::new();
        for &(a, b, _, _) in &self.links {
            if a == x {
                s.insert(b);
            }
            if b == x {
                s.insert(a);
            }
        }
        s
    }

    fn gamma_rel(&self, x: NodeId, j: RelationId) -> Set {
        let mut s = Set::new();
        for &(a, b, r, _) in &self.links {
            if r != j {
                continue;
            }
            if a == x {
                s.insert(b);
            }
            if b == x {
                s.insert(a);
            }
        }
        s
    }

    fn active(&self, x: NodeId) -> BTreeSet<RelationId> {
        self.links.iter().filter(|l| l.0 == x).map(|l| l.2).collect()
    }

    fn incoming(&self, x: NodeId) -> BTreeSet<RelationId> {
        self.links.iter().filter(|l| l.1 == x).map(|l| l.2).collect()
    }

    fn out_j(&self, x: NodeId, j: RelationId) -> Set {
        self.links.iter().filter(|l| l.0 == x && l.2 == j).map(|l| l.1).collect()
    }

    fn in_j(&self, x: NodeId, j: RelationId) -> Set {
        self.links.iter().filter(|l| l.1 == x && l.2 == j).map(|l| l.0).collect()
    }

    fn pair_set(&self, j: RelationId) -> BTreeSet<(NodeId, NodeId)> {
        self.links
            .iter()
            .filter(|l| l.2 == j)
            .map(|l| (l.0.min(l.1), l.0.max(l.1)))
            .collect()
    }

    fn cotopy(&self, c: ConceptId) -> BTreeSet<ConceptId> {
        let mut out = BTreeSet::new();
        let mut cur = Some(c);
        while let Some(x) = cur {
            out.insert(x);
            cur = self.g.ontology().concept(x).parent;
        }
        out
    }

    fn bfs(&self, u: NodeId, v: NodeId) -> Option<usize> {
        let mut dist = BTreeMap::new();
        dist.insert(u, 0usize);
        let mut q = VecDeque::from([u]);
        while let Some(x) = q.pop_front() {
            let d = dist[&x];
            for y in self.gamma(x) {
                if let std::collections::btree_map::Entry::Vacant(e) = dist.entry(y) {
                    e.insert(d + 1);
                    if y == v {
                        return Some(d + 1);
                    }
                    q.push_back(y);
                }
            }
        }
        None
    }

    /// Links between x and c in either direction.
    fn between(&self, x: NodeId, c: NodeId) -> Vec<i64> {
        self.links
            .iter()
            .filter(|l| (l.0 == x && l.1 == c) || (l.0 == c && l.1 == x))
            .map(|l| l.3)
            .collect()
    }

    // ------------------------------------------------------------ metrics

    pub fn overlap(&self, family: MetricFamily, u: NodeId, v: NodeId) -> f64 {
        let (gu, gv) = (self.gamma(u), self.gamma(v));
        let common: Set = gu.intersection(&gv).copied().collect();
        let union: Set = gu.union(&gv).copied().collect();
        if common.is_empty() {
            return 0.0;
        }
        let c = common.len() as f64;
        let (ku, kv) = (gu.len() as f64, gv.len() as f64);
        match family {
            MetricFamily::Jaccard => c / union.len() as f64,
            MetricFamily::AdamicAdar => {
                common.iter().map(|&z| 1.0 / (self.gamma(z).len() as f64).ln()).sum::<f64>() * 2f64.ln() / c
            }
            MetricFamily::ResourceAllocation => {
                common.iter().map(|&z| 1.0 / self.gamma(z).len() as f64).sum::<f64>() * 2.0 / c
            }
            MetricFamily::HubPromoted => c / ku.min(kv),
            MetricFamily::HubDepressed => c / ku.max(kv),
            MetricFamily::LeichtHolmeNewman => c / (ku * kv),
            MetricFamily::Salton => c / (ku * kv).sqrt(),
            MetricFamily::Sorensen => 2.0 * c / (ku + kv),
            other => panic!("{other:?} is not an overlap metric"),
        }
    }

    pub fn shortest_path(&self, u: NodeId, v: NodeId, cap: usize) -> f64 {
        match self.bfs(u, v) {
            Some(len) if len <= cap => (1.0 - (len as f64 - 1.0) / cap as f64).max(0.0),
            _ => 0.0,
        }
    }

    pub fn time_score(&self, u: NodeId, v: NodeId, beta: f64, step: f64) -> f64 {
        let Some(latest) = self.links.iter().map(|l| l.3).max() else {
            return 0.0;
        };
        let common: Set = self.gamma(u).intersection(&self.gamma(v)).copied().collect();
        if common.is_empty() {
            return 0.0;
        }
        let mut total = 0.0;
        for &c in &common {
            let (lu, lv) = (self.between(u, c), self.between(v, c));
            let (mu, mv) = (lu.len() as f64, lv.len() as f64);
            let (tu, tv) = (*lu.iter().max().unwrap(), *lv.iter().max().unwrap());
            let hm = 2.0 * mu * mv / (mu + mv);
            let d = 1.0 / mu.max(mv);
            let k = ((latest - tu.min(tv)) as f64 / step).floor();
            let gap = ((tu - tv).abs() as f64 / step).floor();
            total += hm * d * beta.powf(k) / (gap + 1.0);
        }
        total / common.len() as f64
    }

    pub fn euler_time(&self, v: NodeId, discount: f64) -> f64 {
        let Some(now) = self.links.iter().map(|l| l.3).max() else {
            return 0.0;
        };
        let last = self.links.iter().filter(|l| l.0 == v || l.1 == v).map(|l| l.3).max();
        match last {
            Some(t) => (-((now - t) as f64) / discount).exp(),
            None => 0.0,
        }
    }

    pub fn focci(&self, u: NodeId, v: NodeId) -> f64 {
        let mut best: f64 = 0.0;
        for j in self.active(u).intersection(&self.active(v)) {
            let shared: Set = self.gamma_rel(u, *j).intersection(&self.gamma_rel(v, *j)).copied().collect();
            for z in shared {
                let mut inv = self.in_j(z, *j);
                if let Some(i) = self.g.ontology().relation(*j).inverse_of {
                    inv.extend(self.out_j(z, i));
                }
                if !inv.is_empty() {
                    best = best.max(1.0 / inv.len() as f64);
                }
            }
        }
        best
    }

    pub fn conditional_probability(&self, j: RelationId) -> f64 {
        let ej = self.pair_set(j);
        if ej.is_empty() {
            return 0.0;
        }
        self.relations
            .iter()
            .filter(|&&i| i != j)
            .map(|&i| ej.intersection(&self.pair_set(i)).count() as f64 / ej.len() as f64)
            .fold(0.0, f64::max)
    }

    pub fn taxonomy(&self, u: NodeId, v: NodeId) -> f64 {
        let a = self.cotopy(self.g.concept_of(u));
        let b = self.cotopy(self.g.concept_of(v));
        a.intersection(&b).count() as f64 / a.union(&b).count() as f64
    }

    fn best_match_mean(&self, from: &Set, to: &Set) -> f64 {
        if from.is_empty() || to.is_empty() {
            return 0.0;
        }
        from.iter()
            .map(|&a| to.iter().map(|&b| self.taxonomy(a, b)).fold(0.0, f64::max))
            .sum::<f64>()
            / from.len() as f64
    }

    pub fn relational(&self, u: NodeId, v: NodeId) -> f64 {
        let mut scores = Vec::new();
        for j in self.active(u).intersection(&self.active(v)) {
            scores.push(self.best_match_mean(&self.out_j(u, *j), &self.out_j(v, *j)));
        }
        for j in self.incoming(u).intersection(&self.incoming(v)) {
            scores.push(self.best_match_mean(&self.in_j(u, *j), &self.in_j(v, *j)));
        }
        if scores.is_empty() {
            0.0
        } else {
            scores.iter().sum::<f64>() / scores.len() as f64
        }
    }

    pub fn arr(&self, u: NodeId, v: NodeId) -> f64 {
        let (ju, jv) = (self.active(u), self.active(v));
        if ju.is_empty() {
            0.0
        } else {
            ju.intersection(&jv).count() as f64 / ju.len() as f64
        }
    }

    pub fn aor(&self, u: NodeId, v: NodeId) -> f64 {
        let gv = self.gamma(v);
        if gv.is_empty() {
            return 0.0;
        }
        let cu = self.g.concept_of(u);
        gv.iter().filter(|&&z| self.g.concept_of(z) == cu).count() as f64 / gv.len() as f64
    }

    pub fn node_dimension(&self, j: RelationId) -> f64 {
        if self.nodes.is_empty() {
            return 0.0;
        }
        let subjects: Set = self.links.iter().filter(|l| l.2 == j).map(|l| l.0).collect();
        subjects.len() as f64 / self.nodes.len() as f64
    }

    pub fn edge_dimension(&self, j: RelationId) -> f64 {
        if self.links.is_empty() {
            return 0.0;
        }
        self.links.iter().filter(|l| l.2 == j).count() as f64 / self.links.len() as f64
    }

    pub fn propagation(&self, u: NodeId, v: NodeId, i: RelationId, beta: f64) -> f64 {
        let linked: BTreeSet<RelationId> = self
            .links
            .iter()
            .filter(|l| (l.0 == u && l.1 == v) || (l.0 == v && l.1 == u))
            .map(|l| l.2)
            .collect();
        let sigma = |a: RelationId, b: RelationId| {
            let (x, y) = (self.pair_set(a), self.pair_set(b));
            let union = x.union(&y).count();
            if union == 0 {
                0.0
            } else {
                x.intersection(&y).count() as f64 / union as f64
            }
        };
        let deg = |x: RelationId| self.gamma_rel(v, x).len() as f64;
        let mut value = 0.0;
        if linked.contains(&i) {
            value += beta / deg(i);
        }
        let mut dims = linked.clone();
        dims.insert(i);
        if dims.len() > 1 {
            let s: f64 = linked.iter().filter(|&&x| x != i).map(|&x| sigma(i, x) / deg(x)).sum();
            value += beta * s / (dims.len() - 1) as f64;
        }
        value.clamp(0.0, 1.0)
    }

    /// Dispatches on family with explicit parameters.
    pub fn evaluate(
        &self,
        family: MetricFamily,
        params: &MetricParams,
        u: NodeId,
        v: NodeId,
        j: Option<RelationId>,
    ) -> f64 {
        use MetricFamily as F;
        match (family, params) {
            (
                F::Jaccard
                | F::AdamicAdar
                | F::ResourceAllocation
                | F::HubPromoted
                | F::HubDepressed
                | F::LeichtHolmeNewman
                | F::Salton
                | F::Sorensen,
                _,
            ) => self.overlap(family, u, v),
            (F::ShortestPath, MetricParams::ShortestPath { cap }) => self.shortest_path(u, v, *cap),
            (F::TimeScore, MetricParams::TimeScore { beta, step_ms }) => self.time_score(u, v, *beta, *step_ms),
            (F::EulerTime, MetricParams::EulerTime { discount_ms }) => self.euler_time(v, *discount_ms),
            (F::FocciDistance, _) => self.focci(u, v),
            (F::ConditionalProbability, _) => self.conditional_probability(j.unwrap()),
            (F::TaxonomySimilarity, _) => self.taxonomy(u, v),
            (F::RelationalSimilarity, _) => self.relational(u, v),
            (F::Arr, _) => self.arr(u, v),
            (F::Aor, _) => self.aor(u, v),
            (F::Aorr, _) => self.aor(v, u),
            (F::Aorc, _) => 0.5 * (self.aor(u, v) + self.aor(v, u)),
            (F::NodeDimensionConnectivity, _) => self.node_dimension(j.unwrap()),
            (F::EdgeDimensionConnectivity, _) => self.edge_dimension(j.unwrap()),
            (F::MrLinkPropagation, MetricParams::Propagation { damping }) => {
                self.propagation(u, v, j.unwrap(), *damping)
            }
            (f, p) => panic!("no oracle for {f:?} with {p:?}"),
        }
    }
}
