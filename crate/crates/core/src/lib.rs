//! Human-supervised link prediction for heterogeneous, multi-relational
//! knowledge graphs.
//!
//! The crate is organised bottom-up:
//!
//! * [`ontology`] and [`graph`]: the typed, timestamped graph and its queries.
//! * [`metrics`]: the similarity catalogue and the linear ensemble.
//! * [`candidates`]: baseline candidate generators for both prediction modes.
//! * [`learning`]: training-set construction and the micro genetic optimiser.
//! * [`predictor`]: ranking, top-k selection and review interleaving.
//! * [`feedback`] and [`storage`]: accept/reject events and bundle files.

pub mod candidates;
pub mod feedback;
pub mod fixtures;
pub mod graph;
pub mod learning;
pub mod metrics;
pub mod ontology;
pub mod predictor;
pub mod storage;
pub mod weights;

pub use graph::{GraphError, KnowledgeGraph, LinkOrigin, NodeId, Timestamp, Triplet};
pub use metrics::{MetricEnsemble, MetricFamily, MetricInstance, PredictionMode, SimilarityScore};
pub use ontology::{ConceptId, Ontology, RelationId};
pub use weights::WeightVector;
