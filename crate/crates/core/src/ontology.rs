//! Concept hierarchy and relation-identifier schema.
//!
//! Concepts form a single-parent tree under a distinguished root. Relation
//! identifiers constrain their subject (domain) and object (range) concepts;
//! a node is admissible for a role when its concept is a descendant of (or
//! equal to) the declared concept.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::graph::GraphError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ConceptId(pub u32);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct RelationId(pub u32);

impl ConceptId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl RelationId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Concept {
    pub key: String,
    pub label: String,
    /// `None` only for the root.
    pub parent: Option<ConceptId>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RelationIdentifier {
    pub key: String,
    pub label: String,
    pub domain: ConceptId,
    pub range: ConceptId,
    pub inverse_of: Option<RelationId>,
    pub allow_self_loops: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Ontology {
    concepts: Vec<Concept>,
    relations: Vec<RelationIdentifier>,
    concept_keys: HashMap<String, ConceptId>,
    relation_keys: HashMap<String, RelationId>,
    depth: Vec<u32>,
}

impl Ontology {
    /// Creates an ontology holding only the root concept.
    pub fn new(root_key: impl Into<String>) -> Self {
        let key = root_key.into();
        let mut concept_keys = HashMap::new();
        concept_keys.insert(key.clone(), ConceptId(0));
        Self {
            concepts: vec![Concept {
                label: key.clone(),
                key,
                parent: None,
            }],
            relations: Vec::new(),
            concept_keys,
            relation_keys: HashMap::new(),
            depth: vec![0],
        }
    }

    pub fn with_root_label(root_key: impl Into<String>, label: impl Into<String>) -> Self {
        let mut o = Self::new(root_key);
        o.concepts[0].label = label.into();
        o
    }

    pub fn root(&self) -> ConceptId {
        ConceptId(0)
    }

    pub fn add_concept(
        &mut self,
        key: impl Into<String>,
        label: impl Into<String>,
        parent: ConceptId,
    ) -> Result<ConceptId, GraphError> {
        let key = key.into();
        if parent.index() >= self.concepts.len() {
            return Err(GraphError::UnknownConcept(format!("#{}", parent.0)));
        }
        if self.concept_keys.contains_key(&key) {
            return Err(GraphError::DuplicateKey(key));
        }
        let id = ConceptId(self.concepts.len() as u32);
        self.concept_keys.insert(key.clone(), id);
        self.depth.push(self.depth[parent.index()] + 1);
        self.concepts.push(Concept {
            key,
            label: label.into(),
            parent: Some(parent),
        });
        Ok(id)
    }

    pub fn add_relation(
        &mut self,
        key: impl Into<String>,
        label: impl Into<String>,
        domain: ConceptId,
        range: ConceptId,
    ) -> Result<RelationId, GraphError> {
        let key = key.into();
        for c in [domain, range] {
            if c.index() >= self.concepts.len() {
                return Err(GraphError::UnknownConcept(format!("#{}", c.0)));
            }
        }
        if self.relation_keys.contains_key(&key) {
            return Err(GraphError::DuplicateKey(key));
        }
        let id = RelationId(self.relations.len() as u32);
        self.relation_keys.insert(key.clone(), id);
        self.relations.push(RelationIdentifier {
            key,
            label: label.into(),
            domain,
            range,
            inverse_of: None,
            allow_self_loops: false,
        });
        Ok(id)
    }

    /// Declares `a` and `b` as inverses of each other.
    pub fn set_inverse(&mut self, a: RelationId, b: RelationId) -> Result<(), GraphError> {
        self.check_relation(a)?;
        self.check_relation(b)?;
        for (x, y) in [(a, b), (b, a)] {
            if let Some(prev) = self.relations[x.index()].inverse_of {
                if prev != y {
                    return Err(GraphError::SchemaViolation(format!(
                        "relation '{}' already has inverse '{}'",
                        self.relations[x.index()].key,
                        self.relations[prev.index()].key
                    )));
                }
            }
        }
        self.relations[a.index()].inverse_of = Some(b);
        self.relations[b.index()].inverse_of = Some(a);
        Ok(())
    }

    pub fn set_allow_self_loops(&mut self, rel: RelationId, allow: bool) -> Result<(), GraphError> {
        self.check_relation(rel)?;
        self.relations[rel.index()].allow_self_loops = allow;
        Ok(())
    }

    pub fn concept(&self, id: ConceptId) -> &Concept {
        &self.concepts[id.index()]
    }

    pub fn relation(&self, id: RelationId) -> &RelationIdentifier {
        &self.relations[id.index()]
    }

    pub fn concept_id(&self, key: &str) -> Option<ConceptId> {
        self.concept_keys.get(key).copied()
    }

    pub fn relation_id(&self, key: &str) -> Option<RelationId> {
        self.relation_keys.get(key).copied()
    }

    pub fn concepts(&self) -> impl Iterator<Item = (ConceptId, &Concept)> {
        self.concepts
            .iter()
            .enumerate()
            .map(|(i, c)| (ConceptId(i as u32), c))
    }

    pub fn relations(&self) -> impl Iterator<Item = (RelationId, &RelationIdentifier)> {
        self.relations
            .iter()
            .enumerate()
            .map(|(i, r)| (RelationId(i as u32), r))
    }

    pub fn relation_ids(&self) -> impl Iterator<Item = RelationId> {
        (0..self.relations.len() as u32).map(RelationId)
    }

    pub fn concept_count(&self) -> usize {
        self.concepts.len()
    }

    pub fn relation_count(&self) -> usize {
        self.relations.len()
    }

    pub fn has_concept(&self, id: ConceptId) -> bool {
        id.index() < self.concepts.len()
    }

    pub fn has_relation(&self, id: RelationId) -> bool {
        id.index() < self.relations.len()
    }

    pub(crate) fn check_relation(&self, id: RelationId) -> Result<(), GraphError> {
        if self.has_relation(id) {
            Ok(())
        } else {
            Err(GraphError::UnknownRelation(format!("#{}", id.0)))
        }
    }

    /// Upwards cotopy of `c`: `c` itself, its parent chain, and the root.
    /// Ordered from `c` towards the root.
    pub fn ancestors(&self, c: ConceptId) -> Vec<ConceptId> {
        let mut out = Vec::with_capacity(self.depth[c.index()] as usize + 1);
        let mut cur = Some(c);
        while let Some(id) = cur {
            out.push(id);
            cur = self.concepts[id.index()].parent;
        }
        out
    }

    pub fn depth(&self, c: ConceptId) -> u32 {
        self.depth[c.index()]
    }

    pub fn is_descendant_or_equal(&self, c: ConceptId, ancestor: ConceptId) -> bool {
        let mut cur = Some(c);
        while let Some(id) = cur {
            if id == ancestor {
                return true;
            }
            if self.depth[id.index()] <= self.depth[ancestor.index()] {
                return false;
            }
            cur = self.concepts[id.index()].parent;
        }
        false
    }

    /// Whether `rel` admits a subject of concept `subject` and an object of
    /// concept `object`.
    pub fn admits(&self, rel: RelationId, subject: ConceptId, object: ConceptId) -> bool {
        let r = &self.relations[rel.index()];
        self.is_descendant_or_equal(subject, r.domain) && self.is_descendant_or_equal(object, r.range)
    }

    /// Size of the shared upwards cotopy of two concepts.
    pub fn common_ancestor_count(&self, a: ConceptId, b: ConceptId) -> usize {
        // In a tree the shared cotopy is the cotopy of the lowest common ancestor.
        let (mut x, mut y) = (a, b);
        while self.depth[x.index()] > self.depth[y.index()] {
            x = self.concepts[x.index()].parent.expect("non-root has parent");
        }
        while self.depth[y.index()] > self.depth[x.index()] {
            y = self.concepts[y.index()].parent.expect("non-root has parent");
        }
        while x != y {
            x = self.concepts[x.index()].parent.expect("non-root has parent");
            y = self.concepts[y.index()].parent.expect("non-root has parent");
        }
        self.depth[x.index()] as usize + 1
    }
}
