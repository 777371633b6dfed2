//! HTTP routes. Nodes and relations are addressed by key; every error
//! body is `{"error": "..."}`.

use std::collections::BTreeMap;
use std::sync::Arc;

use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use kglf_core::candidates::{existence_candidates, semantic_candidates};
use kglf_core::feedback::{FeedbackEffect, FeedbackError, FeedbackEvent};
use kglf_core::learning::Standard;
use kglf_core::metrics::PredictionMode;
use kglf_core::predictor::{interleave_for_review, rank_existence, rank_semantic, Recommendation, Source};
use kglf_core::storage::{render_bundle, AnonymizationPolicy, WeightDocument};
use kglf_core::{KnowledgeGraph, NodeId, Timestamp, WeightVector};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::state::{now_ms, AppState, FeedbackFailure, StartError, TrainJob, Trigger};

pub struct ApiError(StatusCode, String);

impl ApiError {
    fn bad_request(m: impl Into<String>) -> Self {
        Self(StatusCode::BAD_REQUEST, m.into())
    }
    fn not_found(m: impl Into<String>) -> Self {
        Self(StatusCode::NOT_FOUND, m.into())
    }
    fn internal(m: impl std::fmt::Display) -> Self {
        Self(StatusCode::INTERNAL_SERVER_ERROR, m.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.0, Json(json!({ "error": self.1 }))).into_response()
    }
}

type Shared = State<Arc<AppState>>;

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/health", get(|| async { "ok" }))
        .route("/nodes", get(list_nodes))
        .route("/nodes/{id}/recommendations", get(recommendations))
        .route("/relations/compatible", get(compatible_relations))
        .route("/feedback", post(feedback))
        .route("/weights", get(get_weights).put(put_weights))
        .route("/train", post(start_train).get(list_jobs))
        .route("/train/{id}", get(get_job))
        .route("/graph/summary", get(summary))
        .route("/export", get(export))
        .with_state(state)
}

fn parse_mode(mode: Option<&str>) -> Result<PredictionMode, ApiError> {
    match mode {
        None => Ok(PredictionMode::Existence),
        Some(m) => PredictionMode::parse(m).ok_or_else(|| ApiError::bad_request(format!("unknown mode '{m}'"))),
    }
}

fn node(g: &KnowledgeGraph, key: &str) -> Result<NodeId, ApiError> {
    g.node_id(key).ok_or_else(|| ApiError::not_found(format!("unknown node '{key}'")))
}

// ---------------------------------------------------------------- nodes

#[derive(Deserialize)]
struct NodesQuery {
    concept: Option<String>,
}

#[derive(Serialize)]
struct NodeView {
    key: String,
    label: String,
    concept: String,
}

async fn list_nodes(State(s): Shared, Query(q): Query<NodesQuery>) -> Result<Json<Vec<NodeView>>, ApiError> {
    s.read_graph(|g| {
        let o = g.ontology();
        let ids: Vec<NodeId> = match &q.concept {
            Some(c) => {
                let c = o.concept_id(c).ok_or_else(|| ApiError::not_found(format!("unknown concept '{c}'")))?;
                g.nodes_of_concept(c)
            }
            None => g.node_ids().collect(),
        };
        Ok(Json(
            ids.into_iter()
                .map(|id| {
                    let n = g.node(id).expect("listed");
                    NodeView {
                        key: n.key.clone(),
                        label: n.label.clone(),
                        concept: o.concept(n.concept).key.clone(),
                    }
                })
                .collect(),
        ))
    })
}

// ---------------------------------------------------------------- recommendations

#[derive(Deserialize)]
struct RecQuery {
    mode: Option<String>,
    k: Option<usize>,
    #[serde(default)]
    interleave: bool,
    seed: Option<u64>,
}

#[derive(Serialize, Deserialize, Debug, Clone, PartialEq)]
pub struct RecommendationView {
    pub subject: String,
    pub object: String,
    pub relation: Option<String>,
    pub score: f64,
    pub source: Source,
    pub rank: usize,
}

fn view(g: &KnowledgeGraph, r: &Recommendation) -> RecommendationView {
    RecommendationView {
        subject: g.node_key(r.subject).into(),
        object: g.node_key(r.object).into(),
        relation: r.relation.map(|j| g.ontology().relation(j).key.clone()),
        score: r.score,
        source: r.source,
        rank: r.rank,
    }
}

async fn recommendations(
    State(s): Shared,
    Path(id): Path<String>,
    Query(q): Query<RecQuery>,
) -> Result<Json<Vec<RecommendationView>>, ApiError> {
    let mode = parse_mode(q.mode.as_deref())?;
    let k = q.k.unwrap_or(kglf_core::predictor::DEFAULT_TOP_K);
    let u = s.read_graph(|g| node(g, &id))?;
    if k == 0 {
        return Ok(Json(Vec::new()));
    }
    if q.interleave && k < 3 {
        return Err(ApiError::bad_request("an interleaved batch needs k >= 3"));
    }
    let seed = q.seed.unwrap_or(s.config.seed ^ (u.index() as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    let weights = s.weight_vector(mode);
    let state = Arc::clone(&s);
    let out = tokio::task::spawn_blocking(move || {
        state.read_graph(|g| -> Result<Vec<RecommendationView>, ApiError> {
            let e = state.ensemble(mode);
            let n = state.config.candidate_size;
            let ranked = match mode {
                PredictionMode::Existence => {
                    let set = existence_candidates(g, u, n, seed).map_err(|e| ApiError::bad_request(e.to_string()))?;
                    rank_existence(g, e, &weights, &set)
                }
                PredictionMode::Semantic => {
                    let set = semantic_candidates(g, u, n, seed).map_err(|e| ApiError::bad_request(e.to_string()))?;
                    rank_semantic(g, e, &weights, &set)
                }
            }
            .map_err(ApiError::internal)?;
            let list = if q.interleave && !ranked.is_empty() {
                let baseline: Vec<Recommendation> = ranked
                    .iter()
                    .map(|r| Recommendation {
                        source: Source::Baseline,
                        ..*r
                    })
                    .collect();
                interleave_for_review(&ranked, &baseline, k, seed).map_err(ApiError::internal)?
            } else {
                ranked.into_iter().take(k).collect()
            };
            Ok(list.iter().map(|r| view(g, r)).collect())
        })
    })
    .await
    .map_err(ApiError::internal)??;
    Ok(Json(out))
}

#[derive(Deserialize)]
struct PairQuery {
    subject: String,
    object: String,
}

#[derive(Serialize)]
struct Orientation {
    relation: String,
    subject: String,
    object: String,
}

/// Relations the schema allows between two nodes, in either direction.
async fn compatible_relations(State(s): Shared, Query(q): Query<PairQuery>) -> Result<Json<Vec<Orientation>>, ApiError> {
    s.read_graph(|g| {
        let (a, b) = (node(g, &q.subject)?, node(g, &q.object)?);
        let mut out = Vec::new();
        for (x, y) in [(a, b), (b, a)] {
            for j in g.compatible_relations(x, y).map_err(ApiError::internal)? {
                if !g.has_link(x, y, j) {
                    out.push(Orientation {
                        relation: g.ontology().relation(j).key.clone(),
                        subject: g.node_key(x).into(),
                        object: g.node_key(y).into(),
                    });
                }
            }
            if a == b {
                break;
            }
        }
        Ok(Json(out))
    })
}

// ---------------------------------------------------------------- feedback

#[derive(Deserialize)]
struct FeedbackBody {
    subject: String,
    object: String,
    #[serde(default)]
    relation: Option<String>,
    accepted: bool,
    #[serde(default)]
    timestamp: Option<Timestamp>,
    #[serde(default)]
    mode: Option<String>,
}

async fn feedback(State(s): Shared, Json(b): Json<FeedbackBody>) -> Result<(StatusCode, Json<Value>), ApiError> {
    let mode = parse_mode(b.mode.as_deref())?;
    let event = FeedbackEvent {
        subject: b.subject,
        object: b.object,
        relation: b.relation,
        accepted: b.accepted,
        timestamp: b.timestamp.unwrap_or_else(now_ms),
        mode,
    };
    let state = Arc::clone(&s);
    let outcome = tokio::task::spawn_blocking(move || state.submit_feedback(event))
        .await
        .map_err(ApiError::internal)?
        .map_err(|f| match f {
            FeedbackFailure::Rejected(e @ FeedbackError::Conflict(_)) => ApiError(StatusCode::CONFLICT, e.to_string()),
            FeedbackFailure::Rejected(e) => ApiError(StatusCode::UNPROCESSABLE_ENTITY, e.to_string()),
            FeedbackFailure::Storage(e) => ApiError::internal(e),
        })?;
    let effect = match outcome.effect {
        FeedbackEffect::LinkAdded { .. } => "link_added",
        FeedbackEffect::NonLinkRecorded { .. } => "non_link_recorded",
    };
    Ok((
        StatusCode::CREATED,
        Json(json!({
            "event": outcome.event,
            "effect": effect,
            "counter": outcome.counter,
            "retrain_every": s.config.retrain_every,
            "train_job": outcome.train_job,
            "train_skipped": outcome.train_skipped,
        })),
    ))
}

// ---------------------------------------------------------------- weights

#[derive(Deserialize)]
struct ModeQuery {
    mode: Option<String>,
}

async fn get_weights(State(s): Shared, Query(q): Query<ModeQuery>) -> Result<Json<WeightDocument>, ApiError> {
    Ok(Json(s.weight_document(parse_mode(q.mode.as_deref())?)))
}

/// Body: metric name to non-negative weight. Unnamed metrics get zero;
/// the vector is renormalised before it is swapped in.
async fn put_weights(
    State(s): Shared,
    Query(q): Query<ModeQuery>,
    Json(body): Json<BTreeMap<String, f64>>,
) -> Result<Json<WeightDocument>, ApiError> {
    let mode = parse_mode(q.mode.as_deref())?;
    let e = s.ensemble(mode);
    let mut raw = vec![0.0; e.len()];
    for (name, &w) in &body {
        let i = e
            .position(name)
            .ok_or_else(|| ApiError::bad_request(format!("unknown metric '{name}' for {} mode", mode.as_str())))?;
        raw[i] = w;
    }
    let v = WeightVector::from_raw(raw).map_err(|e| ApiError::bad_request(e.to_string()))?;
    let state = Arc::clone(&s);
    let doc = tokio::task::spawn_blocking(move || state.set_weights(mode, &v))
        .await
        .map_err(ApiError::internal)?
        .map_err(ApiError::internal)?;
    Ok(Json(doc))
}

// ---------------------------------------------------------------- training

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct TrainBody {
    mode: Option<String>,
    /// "gold", "silver" or absent for automatic choice.
    standard: Option<String>,
    size: Option<usize>,
}

async fn start_train(State(s): Shared, body: Option<Json<TrainBody>>) -> Result<(StatusCode, Json<TrainJob>), ApiError> {
    let b = body.map(|Json(b)| b).unwrap_or_default();
    let mode = parse_mode(b.mode.as_deref())?;
    let standard = match b.standard.as_deref() {
        None | Some("auto") => None,
        Some(x) => Some(Standard::parse(x).ok_or_else(|| ApiError::bad_request(format!("unknown standard '{x}'")))?),
    };
    if b.size.is_some_and(|n| n < 2) {
        return Err(ApiError::bad_request("training size must be at least 2"));
    }
    let state = Arc::clone(&s);
    let job = tokio::task::spawn_blocking(move || state.start_training(mode, standard, b.size, Trigger::Manual))
        .await
        .map_err(ApiError::internal)?
        .map_err(|e| match e {
            StartError::Busy(id) => ApiError(StatusCode::CONFLICT, format!("training job {id} is already running for this mode")),
            StartError::Insufficient(e) => ApiError(StatusCode::UNPROCESSABLE_ENTITY, e.to_string()),
            StartError::Other(e) => ApiError::internal(e),
        })?;
    Ok((StatusCode::ACCEPTED, Json(job)))
}

async fn get_job(State(s): Shared, Path(id): Path<u64>) -> Result<Json<TrainJob>, ApiError> {
    s.job(id).map(Json).ok_or_else(|| ApiError::not_found(format!("no training job {id}")))
}

async fn list_jobs(State(s): Shared) -> Json<Vec<TrainJob>> {
    Json(s.jobs())
}

// ---------------------------------------------------------------- graph

async fn summary(State(s): Shared) -> Json<Value> {
    let counters = s.counters();
    let totals = s.totals();
    s.read_graph(|g| {
        let o = g.ontology();
        let relations: BTreeMap<String, usize> = o.relations().map(|(j, r)| (r.key.clone(), g.link_count_of(j))).collect();
        let concepts: BTreeMap<String, usize> = o
            .concepts()
            .map(|(c, k)| (k.key.clone(), g.nodes().filter(|(_, n)| n.concept == c).count()))
            .collect();
        Json(json!({
            "nodes": g.node_count(),
            "links": g.link_count(),
            "non_links": g.non_link_count(),
            "relations": relations,
            "concepts": concepts,
            "feedback": {
                "total": totals.accepted + totals.rejected,
                "accepted": totals.accepted,
                "rejected": totals.rejected,
                "since_training": counters.iter().map(|(m, n)| (m.as_str(), *n)).collect::<BTreeMap<_, _>>(),
                "retrain_every": s.config.retrain_every,
            },
        }))
    })
}

#[derive(Deserialize)]
struct ExportQuery {
    #[serde(default)]
    anonymize: bool,
    /// Comma-separated concept keys; defaults to the configured list.
    concepts: Option<String>,
}

/// The live graph as a compacted bundle: `{"files": {name: contents}}`.
async fn export(State(s): Shared, Query(q): Query<ExportQuery>) -> Result<Json<Value>, ApiError> {
    let policy = q.anonymize.then(|| {
        let concepts: Vec<String> = match &q.concepts {
            Some(list) => list.split(',').map(str::trim).filter(|c| !c.is_empty()).map(String::from).collect(),
            None => s.config.anonymize_concepts.clone(),
        };
        AnonymizationPolicy::new(s.config.anonymize_salt.as_bytes().to_vec(), concepts)
    });
    let bundle = s.bundle();
    let files = render_bundle(&bundle, policy.as_ref()).map_err(|e| ApiError::bad_request(e.to_string()))?;
    Ok(Json(json!({ "anonymized": q.anonymize, "files": files })))
}
