//! Accept/reject verdicts on recommended links.
//!
//! Events refer to nodes and relations by key so they stay meaningful in a
//! log file. An accepted event adds a link, a rejected one records a
//! non-link. Existence-mode acceptances still name the relation the user
//! picked; existence-mode rejections name none and rule out the whole pair.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{GraphError, KnowledgeGraph, LinkOrigin, NodeId, Timestamp};
use crate::metrics::PredictionMode;
use crate::ontology::RelationId;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeedbackEvent {
    pub subject: String,
    pub object: String,
    #[serde(default)]
    pub relation: Option<String>,
    pub accepted: bool,
    pub timestamp: Timestamp,
    pub mode: PredictionMode,
}

#[derive(Error, Debug, Clone, PartialEq, Eq)]
pub enum FeedbackError {
    #[error("unknown node '{0}'")]
    UnknownNode(String),
    #[error("unknown relation '{0}'")]
    UnknownRelation(String),
    #[error("invalid feedback: {0}")]
    Invalid(String),
    #[error("conflicts with the graph: {0}")]
    Conflict(String),
}

/// What an applied event changed.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FeedbackEffect {
    LinkAdded {
        subject: NodeId,
        object: NodeId,
        relation: RelationId,
    },
    NonLinkRecorded {
        subject: NodeId,
        object: NodeId,
        relation: Option<RelationId>,
    },
}

/// An event with its keys resolved against a graph.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ResolvedEvent {
    pub subject: NodeId,
    pub object: NodeId,
    pub relation: Option<RelationId>,
}

impl FeedbackEvent {
    /// Checks the event's shape and resolves its keys without mutating.
    pub fn resolve(&self, g: &KnowledgeGraph) -> Result<ResolvedEvent, FeedbackError> {
        let subject = g
            .node_id(&self.subject)
            .ok_or_else(|| FeedbackError::UnknownNode(self.subject.clone()))?;
        let object = g
            .node_id(&self.object)
            .ok_or_else(|| FeedbackError::UnknownNode(self.object.clone()))?;
        let relation = match &self.relation {
            Some(key) => Some(
                g.ontology()
                    .relation_id(key)
                    .ok_or_else(|| FeedbackError::UnknownRelation(key.clone()))?,
            ),
            None => None,
        };
        match (self.mode, self.accepted, relation) {
            (PredictionMode::Semantic, _, None) => {
                return Err(FeedbackError::Invalid("semantic feedback needs a relation".into()))
            }
            (PredictionMode::Existence, true, None) => {
                return Err(FeedbackError::Invalid(
                    "accepting an existence recommendation needs a relation".into(),
                ))
            }
            (PredictionMode::Existence, false, Some(_)) => {
                return Err(FeedbackError::Invalid(
                    "an existence rejection rules out the whole pair and takes no relation".into(),
                ))
            }
            _ => {}
        }
        if subject == object {
            return Err(FeedbackError::Invalid("subject and object are the same node".into()));
        }
        Ok(ResolvedEvent {
            subject,
            object,
            relation,
        })
    }

    /// Applies the event; the graph is unchanged on error.
    pub fn apply(&self, g: &mut KnowledgeGraph) -> Result<FeedbackEffect, FeedbackError> {
        let r = self.resolve(g)?;
        if self.accepted {
            let j = r.relation.expect("checked by resolve");
            g.add_link_with_origin(r.subject, r.object, j, self.timestamp, LinkOrigin::Accepted)
                .map_err(graph_error)?;
            Ok(FeedbackEffect::LinkAdded {
                subject: r.subject,
                object: r.object,
                relation: j,
            })
        } else {
            g.record_non_link(r.subject, r.object, r.relation, self.timestamp)
                .map_err(graph_error)?;
            Ok(FeedbackEffect::NonLinkRecorded {
                subject: r.subject,
                object: r.object,
                relation: r.relation,
            })
        }
    }
}

fn graph_error(e: GraphError) -> FeedbackError {
    match e {
        GraphError::DuplicateLink(m) | GraphError::LinkExists(m) => FeedbackError::Conflict(m),
        GraphError::UnknownNode(m) => FeedbackError::UnknownNode(m),
        GraphError::UnknownRelation(m) => FeedbackError::UnknownRelation(m),
        other => FeedbackError::Invalid(other.to_string()),
    }
}

/// Applies events in order, stopping at the first failure with its index.
pub fn replay<'a>(
    g: &mut KnowledgeGraph,
    events: impl IntoIterator<Item = &'a FeedbackEvent>,
) -> Result<usize, (usize, FeedbackError)> {
    let mut applied = 0;
    for (i, e) in events.into_iter().enumerate() {
        e.apply(g).map_err(|err| (i, err))?;
        applied += 1;
    }
    Ok(applied)
}
