//! Bundle directories: the on-disk form of a graph, its weights and its
//! feedback history.
//!
//! Every file is JSON Lines. The first line is a header naming the file kind
//! and format version; each following line is one record. See `FORMAT.md`
//! at the repository root for the field-by-field layout.
//!
//! The snapshot files (`ontology`, `nodes`, `links`, `nonlinks`) hold the
//! graph as of the last export. `feedback.log` holds events applied since;
//! [`import_bundle`] replays it onto the snapshot.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs::{self, File, OpenOptions};
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::feedback::{replay, FeedbackEffect, FeedbackError, FeedbackEvent};
use crate::graph::{GraphError, KnowledgeGraph, LinkOrigin, Node, Timestamp};
use crate::metrics::{MetricEnsemble, PredictionMode};
use crate::ontology::{ConceptId, Ontology};
use crate::weights::{WeightError, WeightVector};

pub const FORMAT_VERSION: u32 = 1;

pub const ONTOLOGY_FILE: &str = "ontology";
pub const NODES_FILE: &str = "nodes";
pub const LINKS_FILE: &str = "links";
pub const NONLINKS_FILE: &str = "nonlinks";
pub const FEEDBACK_FILE: &str = "feedback.log";
pub const MANIFEST_FILE: &str = "manifest";

pub fn weights_file(mode: PredictionMode) -> String {
    format!("weights.{}", mode.as_str())
}

#[derive(Error, Debug)]
pub enum StorageError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{file}:{line}: {message}")]
    Parse { file: String, line: usize, message: String },
    #[error("{file}:{line}: unknown {kind} '{id}'")]
    Reference {
        file: String,
        line: usize,
        kind: &'static str,
        id: String,
    },
    #[error("{file}:{line}: {source}")]
    Schema {
        file: String,
        line: usize,
        #[source]
        source: GraphError,
    },
    #[error("{file}:{line}: {source}")]
    Feedback {
        file: String,
        line: usize,
        #[source]
        source: FeedbackError,
    },
    #[error("{file}: {source}")]
    Weights {
        file: String,
        #[source]
        source: WeightError,
    },
    #[error("{file}: unknown metric '{name}'")]
    UnknownMetric { file: String, name: String },
    #[error("manifest declares {declared} {what}, bundle has {actual}")]
    Manifest {
        what: &'static str,
        declared: usize,
        actual: usize,
    },
    #[error("anonymization: {0}")]
    Anonymization(String),
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> StorageError + '_ {
    move |source| StorageError::Io {
        path: path.to_path_buf(),
        source,
    }
}

// ---------------------------------------------------------------- records

#[derive(Serialize, Deserialize, Debug, Clone, PartialEq)]
#[serde(deny_unknown_fields)]
struct Header {
    format: String,
    version: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    mode: Option<PredictionMode>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    updated_at: Option<Timestamp>,
}

impl Header {
    fn new(kind: &str) -> Self {
        Self {
            format: format!("kglf-{kind}"),
            version: FORMAT_VERSION,
            mode: None,
            updated_at: None,
        }
    }
}

#[derive(Serialize, Deserialize, Debug, Clone, PartialEq)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
enum OntologyRecord {
    Concept {
        key: String,
        label: String,
        parent: Option<String>,
    },
    Relation {
        key: String,
        label: String,
        domain: String,
        range: String,
        #[serde(default)]
        inverse_of: Option<String>,
        #[serde(default)]
        allow_self_loops: bool,
    },
}

#[derive(Serialize, Deserialize, Debug, Clone, PartialEq)]
#[serde(deny_unknown_fields)]
struct NodeRecord {
    key: String,
    concept: String,
    label: String,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    attributes: BTreeMap<String, String>,
}

#[derive(Serialize, Deserialize, Debug, Clone, PartialEq)]
#[serde(deny_unknown_fields)]
struct LinkLine {
    subject: String,
    object: String,
    relation: String,
    timestamp: Timestamp,
    origin: LinkOrigin,
}

#[derive(Serialize, Deserialize, Debug, Clone, PartialEq)]
#[serde(deny_unknown_fields)]
struct NonLinkLine {
    subject: String,
    object: String,
    relation: Option<String>,
    timestamp: Timestamp,
}

#[derive(Serialize, Deserialize, Debug, Clone, PartialEq)]
#[serde(deny_unknown_fields)]
struct WeightLine {
    metric: String,
    weight: f64,
}

#[derive(Serialize, Deserialize, Debug, Clone, PartialEq, Eq)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub nodes: usize,
    pub links: usize,
    pub non_links: usize,
}

impl Manifest {
    pub fn of(g: &KnowledgeGraph, name: Option<String>) -> Self {
        Self {
            name,
            nodes: g.node_count(),
            links: g.link_count(),
            non_links: g.non_link_count(),
        }
    }

    fn check(&self, g: &KnowledgeGraph) -> Result<(), StorageError> {
        for (what, declared, actual) in [
            ("nodes", self.nodes, g.node_count()),
            ("links", self.links, g.link_count()),
            ("non-links", self.non_links, g.non_link_count()),
        ] {
            if declared != actual {
                return Err(StorageError::Manifest { what, declared, actual });
            }
        }
        Ok(())
    }
}

/// Metric weights for one prediction mode, keyed by metric display name.
#[derive(Serialize, Deserialize, Debug, Clone, PartialEq)]
pub struct WeightDocument {
    pub mode: PredictionMode,
    pub updated_at: Timestamp,
    pub weights: BTreeMap<String, f64>,
}

impl WeightDocument {
    pub fn from_vector(ensemble: &MetricEnsemble, weights: &WeightVector, updated_at: Timestamp) -> Self {
        Self {
            mode: ensemble.mode(),
            updated_at,
            weights: ensemble
                .names()
                .into_iter()
                .map(String::from)
                .zip(weights.as_slice().iter().copied())
                .collect(),
        }
    }

    /// Aligns the named weights with `ensemble` and renormalises them.
    /// Metrics the document does not mention get weight zero.
    pub fn to_vector(&self, ensemble: &MetricEnsemble) -> Result<WeightVector, WeightDocumentError> {
        let mut raw = vec![0.0; ensemble.len()];
        for (name, &w) in &self.weights {
            let i = ensemble
                .position(name)
                .ok_or_else(|| WeightDocumentError::UnknownMetric(name.clone()))?;
            raw[i] = w;
        }
        Ok(WeightVector::from_raw(raw)?)
    }
}

#[derive(Error, Debug, Clone, PartialEq)]
pub enum WeightDocumentError {
    #[error("unknown metric '{0}'")]
    UnknownMetric(String),
    #[error(transparent)]
    Weights(#[from] WeightError),
}

/// Everything a bundle directory holds.
#[derive(Debug, Clone)]
pub struct GraphBundle {
    /// The snapshot, before `feedback` is applied.
    pub graph: KnowledgeGraph,
    pub weights: BTreeMap<PredictionMode, WeightDocument>,
    pub feedback: Vec<FeedbackEvent>,
    pub manifest: Option<Manifest>,
}

impl GraphBundle {
    /// A compacted bundle: `graph` as snapshot, no pending feedback.
    pub fn snapshot(graph: KnowledgeGraph) -> Self {
        let manifest = Some(Manifest::of(&graph, None));
        Self {
            graph,
            weights: BTreeMap::new(),
            feedback: Vec::new(),
            manifest,
        }
    }

    /// The snapshot with the feedback log replayed onto it.
    pub fn live_graph(&self) -> Result<KnowledgeGraph, StorageError> {
        let mut g = self.graph.clone();
        replay(&mut g, &self.feedback).map_err(|(i, source)| StorageError::Feedback {
            file: FEEDBACK_FILE.into(),
            line: i + 2,
            source,
        })?;
        Ok(g)
    }
}

// ---------------------------------------------------------------- anonymization

/// Salted-hash pseudonyms for nodes of selected concepts (and their
/// sub-concepts). Keys, labels and attribute values of those nodes are
/// replaced; structure and timestamps are kept.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AnonymizationPolicy {
    pub salt: Vec<u8>,
    /// Concept keys.
    pub concepts: BTreeSet<String>,
}

impl AnonymizationPolicy {
    pub fn new(salt: impl Into<Vec<u8>>, concepts: impl IntoIterator<Item = impl Into<String>>) -> Self {
        Self {
            salt: salt.into(),
            concepts: concepts.into_iter().map(Into::into).collect(),
        }
    }

    pub fn pseudonym(&self, text: &str) -> String {
        let mut h = Sha256::new();
        h.update((self.salt.len() as u64).to_le_bytes());
        h.update(&self.salt);
        h.update(text.as_bytes());
        let digest = h.finalize();
        format!("anon-{}", hex::encode(&digest[..8]))
    }

    fn covers(&self, o: &Ontology, c: ConceptId) -> bool {
        o.ancestors(c).into_iter().any(|a| self.concepts.contains(&o.concept(a).key))
    }
}

// ---------------------------------------------------------------- writing

fn push_line<T: Serialize>(out: &mut String, record: &T) {
    out.push_str(&serde_json::to_string(record).expect("records serialise"));
    out.push('\n');
}

/// Renders every file of the bundle in memory, keyed by file name.
pub fn render_bundle(
    bundle: &GraphBundle,
    policy: Option<&AnonymizationPolicy>,
) -> Result<BTreeMap<String, String>, StorageError> {
    let g = &bundle.graph;
    let o = g.ontology();

    // node key -> exported key
    let mut rename: HashMap<&str, String> = HashMap::new();
    let mut anonymized = vec![false; g.node_count()];
    if let Some(p) = policy {
        let mut used = BTreeSet::new();
        for (id, node) in g.nodes() {
            if p.covers(o, node.concept) {
                let alias = p.pseudonym(&node.key);
                if !used.insert(alias.clone()) {
                    return Err(StorageError::Anonymization(format!("pseudonym collision on '{alias}'")));
                }
                rename.insert(&node.key, alias);
                anonymized[id.index()] = true;
            }
        }
        if let Some(clash) = g
            .nodes()
            .find(|(id, n)| !anonymized[id.index()] && used.contains(&n.key))
        {
            return Err(StorageError::Anonymization(format!(
                "pseudonym collides with node '{}'",
                clash.1.key
            )));
        }
    }
    let key = |k: &str| rename.get(k).cloned().unwrap_or_else(|| k.to_string());

    let mut files = BTreeMap::new();

    let mut text = String::new();
    push_line(&mut text, &Header::new("ontology"));
    for (_, c) in o.concepts() {
        push_line(
            &mut text,
            &OntologyRecord::Concept {
                key: c.key.clone(),
                label: c.label.clone(),
                parent: c.parent.map(|p| o.concept(p).key.clone()),
            },
        );
    }
    for (_, r) in o.relations() {
        push_line(
            &mut text,
            &OntologyRecord::Relation {
                key: r.key.clone(),
                label: r.label.clone(),
                domain: o.concept(r.domain).key.clone(),
                range: o.concept(r.range).key.clone(),
                inverse_of: r.inverse_of.map(|i| o.relation(i).key.clone()),
                allow_self_loops: r.allow_self_loops,
            },
        );
    }
    files.insert(ONTOLOGY_FILE.to_string(), text);

    let mut text = String::new();
    push_line(&mut text, &Header::new("nodes"));
    for (id, n) in g.nodes() {
        let record = if anonymized[id.index()] {
            let p = policy.expect("only set under a policy");
            NodeRecord {
                key: key(&n.key),
                concept: o.concept(n.concept).key.clone(),
                label: p.pseudonym(&n.label),
                attributes: n.attributes.iter().map(|(k, v)| (k.clone(), p.pseudonym(v))).collect(),
            }
        } else {
            NodeRecord {
                key: n.key.clone(),
                concept: o.concept(n.concept).key.clone(),
                label: n.label.clone(),
                attributes: n.attributes.clone(),
            }
        };
        push_line(&mut text, &record);
    }
    files.insert(NODES_FILE.to_string(), text);

    let mut text = String::new();
    push_line(&mut text, &Header::new("links"));
    for (t, r) in g.links() {
        push_line(
            &mut text,
            &LinkLine {
                subject: key(g.node_key(t.subject)),
                object: key(g.node_key(t.object)),
                relation: o.relation(t.relation).key.clone(),
                timestamp: r.timestamp,
                origin: r.origin,
            },
        );
    }
    files.insert(LINKS_FILE.to_string(), text);

    let mut text = String::new();
    push_line(&mut text, &Header::new("nonlinks"));
    for nl in g.non_links() {
        push_line(
            &mut text,
            &NonLinkLine {
                subject: key(g.node_key(nl.subject)),
                object: key(g.node_key(nl.object)),
                relation: nl.relation.map(|j| o.relation(j).key.clone()),
                timestamp: nl.timestamp,
            },
        );
    }
    files.insert(NONLINKS_FILE.to_string(), text);

    for (mode, doc) in &bundle.weights {
        files.insert(weights_file(*mode), render_weights(*mode, doc));
    }

    let mut text = String::new();
    push_line(&mut text, &Header::new("feedback"));
    for e in &bundle.feedback {
        push_line(
            &mut text,
            &FeedbackEvent {
                subject: key(&e.subject),
                object: key(&e.object),
                ..e.clone()
            },
        );
    }
    files.insert(FEEDBACK_FILE.to_string(), text);

    if let Some(m) = &bundle.manifest {
        let mut text = String::new();
        push_line(&mut text, &Header::new("manifest"));
        push_line(&mut text, m);
        files.insert(MANIFEST_FILE.to_string(), text);
    }
    Ok(files)
}

fn render_weights(mode: PredictionMode, doc: &WeightDocument) -> String {
    let mut text = String::new();
    push_line(
        &mut text,
        &Header {
            mode: Some(mode),
            updated_at: Some(doc.updated_at),
            ..Header::new("weights")
        },
    );
    for (metric, &weight) in &doc.weights {
        push_line(
            &mut text,
            &WeightLine {
                metric: metric.clone(),
                weight,
            },
        );
    }
    text
}

/// Replaces one mode's weights file in a bundle directory. The new file
/// is written beside the old one and renamed over it.
pub fn write_weights(dir: impl AsRef<Path>, doc: &WeightDocument) -> Result<(), StorageError> {
    let dir = dir.as_ref();
    let path = dir.join(weights_file(doc.mode));
    let tmp = dir.join(format!(".{}.tmp", weights_file(doc.mode)));
    fs::write(&tmp, render_weights(doc.mode, doc)).map_err(io_err(&tmp))?;
    fs::rename(&tmp, &path).map_err(io_err(&path))
}

pub fn write_bundle(
    dir: impl AsRef<Path>,
    bundle: &GraphBundle,
    policy: Option<&AnonymizationPolicy>,
) -> Result<(), StorageError> {
    let dir = dir.as_ref();
    let files = render_bundle(bundle, policy)?;
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    for (name, text) in files {
        let path = dir.join(name);
        fs::write(&path, text).map_err(io_err(&path))?;
    }
    Ok(())
}

/// Writes `g` as a compacted bundle (empty feedback log, fresh manifest).
pub fn export_bundle(
    g: &KnowledgeGraph,
    dir: impl AsRef<Path>,
    policy: Option<&AnonymizationPolicy>,
) -> Result<(), StorageError> {
    write_bundle(dir, &GraphBundle::snapshot(g.clone()), policy)
}

// ---------------------------------------------------------------- reading

struct Lines<'a> {
    file: &'a str,
    header: Header,
    records: Vec<(usize, &'a str)>,
}

fn parse_err(file: &str, line: usize, message: impl std::fmt::Display) -> StorageError {
    StorageError::Parse {
        file: file.to_string(),
        line,
        message: message.to_string(),
    }
}

fn split_lines<'a>(file: &'a str, text: &'a str, kind: &str) -> Result<Lines<'a>, StorageError> {
    let mut numbered = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l))
        .filter(|(_, l)| !l.trim().is_empty());
    let Some((n, first)) = numbered.next() else {
        return Err(parse_err(file, 1, "missing header"));
    };
    let header: Header = serde_json::from_str(first).map_err(|e| parse_err(file, n, format!("bad header: {e}")))?;
    let expected = format!("kglf-{kind}");
    if header.format != expected {
        return Err(parse_err(
            file,
            n,
            format!("expected format '{expected}', found '{}'", header.format),
        ));
    }
    if header.version != FORMAT_VERSION {
        return Err(parse_err(file, n, format!("unsupported version {}", header.version)));
    }
    Ok(Lines {
        file,
        header,
        records: numbered.collect(),
    })
}

impl Lines<'_> {
    fn parse<T: DeserializeOwned>(&self) -> Result<Vec<(usize, T)>, StorageError> {
        self.records
            .iter()
            .map(|&(n, l)| {
                serde_json::from_str(l)
                    .map(|r| (n, r))
                    .map_err(|e| parse_err(self.file, n, format!("column {}: {e}", e.column())))
            })
            .collect()
    }
}

fn read_optional(dir: &Path, name: &str) -> Result<Option<String>, StorageError> {
    let path = dir.join(name);
    match fs::read_to_string(&path) {
        Ok(t) => Ok(Some(t)),
        Err(e) if e.kind() == io::ErrorKind::NotFound => Ok(None),
        Err(e) => Err(io_err(&path)(e)),
    }
}

fn parse_ontology(text: &str) -> Result<Ontology, StorageError> {
    let file = ONTOLOGY_FILE;
    let lines = split_lines(file, text, "ontology")?;
    let records: Vec<(usize, OntologyRecord)> = lines.parse()?;
    let mut ontology: Option<Ontology> = None;
    let mut inverses = Vec::new();
    let schema = |line, source| StorageError::Schema {
        file: file.into(),
        line,
        source,
    };
    let unknown = |line, kind, id: &str| StorageError::Reference {
        file: file.into(),
        line,
        kind,
        id: id.to_string(),
    };

    for (n, record) in records {
        match record {
            OntologyRecord::Concept { key, label, parent: None } => {
                if ontology.is_some() {
                    return Err(parse_err(file, n, format!("second root concept '{key}'")));
                }
                ontology = Some(Ontology::with_root_label(key, label));
            }
            OntologyRecord::Concept {
                key,
                label,
                parent: Some(parent),
            } => {
                let o = ontology
                    .as_mut()
                    .ok_or_else(|| parse_err(file, n, "the root concept must come first"))?;
                let p = o.concept_id(&parent).ok_or_else(|| unknown(n, "concept", &parent))?;
                o.add_concept(key, label, p).map_err(|e| schema(n, e))?;
            }
            OntologyRecord::Relation {
                key,
                label,
                domain,
                range,
                inverse_of,
                allow_self_loops,
            } => {
                let o = ontology
                    .as_mut()
                    .ok_or_else(|| parse_err(file, n, "relations must follow the root concept"))?;
                let d = o.concept_id(&domain).ok_or_else(|| unknown(n, "concept", &domain))?;
                let r = o.concept_id(&range).ok_or_else(|| unknown(n, "concept", &range))?;
                let id = o.add_relation(key, label, d, r).map_err(|e| schema(n, e))?;
                if allow_self_loops {
                    o.set_allow_self_loops(id, true).map_err(|e| schema(n, e))?;
                }
                if let Some(inv) = inverse_of {
                    inverses.push((n, id, inv));
                }
            }
        }
    }
    let mut o = ontology.unwrap_or_else(|| Ontology::new("root"));
    for (n, id, inv) in inverses {
        let other = o.relation_id(&inv).ok_or_else(|| unknown(n, "relation", &inv))?;
        o.set_inverse(id, other).map_err(|e| schema(n, e))?;
    }
    Ok(o)
}

fn parse_weights(file: &str, text: &str) -> Result<WeightDocument, StorageError> {
    let lines = split_lines(file, text, "weights")?;
    let mode = lines
        .header
        .mode
        .ok_or_else(|| parse_err(file, 1, "weights header needs a mode"))?;
    let mut weights = BTreeMap::new();
    for (n, w) in lines.parse::<WeightLine>()? {
        if !w.weight.is_finite() || w.weight < 0.0 {
            return Err(parse_err(file, n, format!("weight {} for '{}'", w.weight, w.metric)));
        }
        if weights.insert(w.metric.clone(), w.weight).is_some() {
            return Err(parse_err(file, n, format!("metric '{}' listed twice", w.metric)));
        }
    }
    Ok(WeightDocument {
        mode,
        updated_at: lines.header.updated_at.unwrap_or(0),
        weights,
    })
}

/// Parses a bundle held in memory, keyed by file name. Missing files count
/// as empty.
pub fn parse_bundle(files: &BTreeMap<String, String>) -> Result<GraphBundle, StorageError> {
    let get = |name: &str| files.get(name).map(String::as_str);

    let ontology = match get(ONTOLOGY_FILE) {
        Some(t) => parse_ontology(t)?,
        None => Ontology::new("root"),
    };
    let mut g = KnowledgeGraph::new(ontology);

    if let Some(text) = get(NODES_FILE) {
        let lines = split_lines(NODES_FILE, text, "nodes")?;
        for (n, r) in lines.parse::<NodeRecord>()? {
            let concept = g.ontology().concept_id(&r.concept).ok_or(StorageError::Reference {
                file: NODES_FILE.into(),
                line: n,
                kind: "concept",
                id: r.concept.clone(),
            })?;
            g.insert_node(Node {
                key: r.key,
                concept,
                label: r.label,
                attributes: r.attributes,
            })
            .map_err(|source| StorageError::Schema {
                file: NODES_FILE.into(),
                line: n,
                source,
            })?;
        }
    }

    let node = |g: &KnowledgeGraph, file: &str, n: usize, key: &str| {
        g.node_id(key).ok_or_else(|| StorageError::Reference {
            file: file.into(),
            line: n,
            kind: "node",
            id: key.to_string(),
        })
    };
    let relation = |g: &KnowledgeGraph, file: &str, n: usize, key: &str| {
        g.ontology().relation_id(key).ok_or_else(|| StorageError::Reference {
            file: file.into(),
            line: n,
            kind: "relation",
            id: key.to_string(),
        })
    };

    if let Some(text) = get(LINKS_FILE) {
        let lines = split_lines(LINKS_FILE, text, "links")?;
        for (n, r) in lines.parse::<LinkLine>()? {
            let s = node(&g, LINKS_FILE, n, &r.subject)?;
            let o = node(&g, LINKS_FILE, n, &r.object)?;
            let j = relation(&g, LINKS_FILE, n, &r.relation)?;
            g.add_link_with_origin(s, o, j, r.timestamp, r.origin)
                .map_err(|source| StorageError::Schema {
                    file: LINKS_FILE.into(),
                    line: n,
                    source,
                })?;
        }
    }

    if let Some(text) = get(NONLINKS_FILE) {
        let lines = split_lines(NONLINKS_FILE, text, "nonlinks")?;
        for (n, r) in lines.parse::<NonLinkLine>()? {
            let s = node(&g, NONLINKS_FILE, n, &r.subject)?;
            let o = node(&g, NONLINKS_FILE, n, &r.object)?;
            let j = r
                .relation
                .as_deref()
                .map(|k| relation(&g, NONLINKS_FILE, n, k))
                .transpose()?;
            g.record_non_link(s, o, j, r.timestamp)
                .map_err(|source| StorageError::Schema {
                    file: NONLINKS_FILE.into(),
                    line: n,
                    source,
                })?;
        }
    }

    let mut weights = BTreeMap::new();
    for mode in [PredictionMode::Existence, PredictionMode::Semantic] {
        let file = weights_file(mode);
        if let Some(text) = get(&file) {
            let doc = parse_weights(&file, text)?;
            if doc.mode != mode {
                return Err(parse_err(&file, 1, format!("header mode is {}", doc.mode)));
            }
            weights.insert(mode, doc);
        }
    }

    let feedback = match get(FEEDBACK_FILE) {
        Some(text) => split_lines(FEEDBACK_FILE, text, "feedback")?
            .parse::<FeedbackEvent>()?
            .into_iter()
            .map(|(_, e)| e)
            .collect(),
        None => Vec::new(),
    };

    let manifest = match get(MANIFEST_FILE) {
        Some(text) => {
            let mut records = split_lines(MANIFEST_FILE, text, "manifest")?.parse::<Manifest>()?;
            if records.len() != 1 {
                return Err(parse_err(MANIFEST_FILE, 2, "expected exactly one manifest record"));
            }
            let (_, m) = records.remove(0);
            m.check(&g)?;
            Some(m)
        }
        None => None,
    };

    Ok(GraphBundle {
        graph: g,
        weights,
        feedback,
        manifest,
    })
}

/// Reads every file of a bundle directory without replaying feedback.
pub fn read_bundle(dir: impl AsRef<Path>) -> Result<GraphBundle, StorageError> {
    let dir = dir.as_ref();
    if !dir.is_dir() {
        return Err(io_err(dir)(io::Error::new(io::ErrorKind::NotFound, "not a bundle directory")));
    }
    let mut files = BTreeMap::new();
    let mut names = vec![
        ONTOLOGY_FILE.to_string(),
        NODES_FILE.to_string(),
        LINKS_FILE.to_string(),
        NONLINKS_FILE.to_string(),
        FEEDBACK_FILE.to_string(),
        MANIFEST_FILE.to_string(),
    ];
    names.extend([PredictionMode::Existence, PredictionMode::Semantic].map(weights_file));
    for name in names {
        if let Some(text) = read_optional(dir, &name)? {
            files.insert(name, text);
        }
    }
    parse_bundle(&files)
}

/// Loads the live graph: the snapshot with the feedback log replayed.
pub fn import_bundle(dir: impl AsRef<Path>) -> Result<KnowledgeGraph, StorageError> {
    read_bundle(dir)?.live_graph()
}

// ---------------------------------------------------------------- feedback log

/// Append-only writer for `feedback.log`.
#[derive(Debug)]
pub struct FeedbackLog {
    path: PathBuf,
    file: File,
}

impl FeedbackLog {
    /// Opens `path` for appending, writing the header if the file is new.
    pub fn open(path: impl Into<PathBuf>) -> Result<Self, StorageError> {
        let path = path.into();
        let mut file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&path)
            .map_err(io_err(&path))?;
        let len = file.metadata().map_err(io_err(&path))?.len();
        if len == 0 {
            let mut header = String::new();
            push_line(&mut header, &Header::new("feedback"));
            file.write_all(header.as_bytes()).map_err(io_err(&path))?;
            file.sync_data().map_err(io_err(&path))?;
        }
        Ok(Self { path, file })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn append(&mut self, event: &FeedbackEvent) -> Result<(), StorageError> {
        let mut line = String::new();
        push_line(&mut line, event);
        self.file.write_all(line.as_bytes()).map_err(io_err(&self.path))?;
        self.file.sync_data().map_err(io_err(&self.path))
    }
}

/// Applies `event` to `g` and, if that succeeds, appends it to `log`.
pub fn append_feedback(
    g: &mut KnowledgeGraph,
    log: &mut FeedbackLog,
    event: &FeedbackEvent,
) -> Result<FeedbackEffect, StorageError> {
    let effect = event.apply(g).map_err(|source| StorageError::Feedback {
        file: FEEDBACK_FILE.into(),
        line: 0,
        source,
    })?;
    log.append(event)?;
    Ok(effect)
}
