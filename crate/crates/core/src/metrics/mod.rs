//! Similarity metric catalogue and the linear metric ensemble.
//!
//! Every family yields a value in `[0, 1]`. Undefined ratios (empty
//! neighbourhoods, zero denominators) evaluate to 0 rather than failing, so an
//! ensemble is a total function over any pair of distinct nodes.

mod semantic;
mod temporal;
mod topology;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{GraphError, KnowledgeGraph, NodeId};
use crate::ontology::RelationId;
use crate::weights::{WeightVector, SIMPLEX_TOLERANCE};

pub use semantic::{
    ao_relation, arr, conditional_probability, relational_similarity, taxonomy_similarity, AoVariant,
};
pub use temporal::{euler_time, time_score};
pub use topology::{
    dimension_connectivity, focci_distance, mr_link_propagation, neighborhood_overlap,
    shortest_path_similarity, DimensionKind, OverlapKind,
};

pub const ONE_DAY_MS: f64 = 86_400_000.0;
pub const HALF_DAY_MS: f64 = 43_200_000.0;
pub const DEFAULT_PATH_CAP: usize = 5;

#[derive(Error, Debug, Clone, PartialEq)]
pub enum MetricError {
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("invalid metric parameters: {0}")]
    InvalidParams(String),
    #[error("metric '{0}' needs a candidate relation")]
    MissingRelation(String),
    #[error("metric '{metric}' is not applicable to {mode} prediction")]
    NotApplicable { metric: String, mode: PredictionMode },
    #[error("ensemble has {instances} metrics but {weights} weights")]
    LengthMismatch { instances: usize, weights: usize },
    #[error("weights are not normalized (sum {0})")]
    UnnormalizedWeights(f64),
    #[error("{mode} prediction {detail}")]
    ModeMismatch { mode: PredictionMode, detail: &'static str },
    #[error("score {0} outside [0, 1]")]
    OutOfRange(f64),
    #[error("unknown metric '{0}'")]
    UnknownMetric(String),
}

/// Existence prediction asks whether any link joins two nodes; semantic
/// prediction asks which relation identifier joins them.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PredictionMode {
    Existence,
    Semantic,
}

impl PredictionMode {
    pub fn as_str(self) -> &'static str {
        match self {
            PredictionMode::Existence => "existence",
            PredictionMode::Semantic => "semantic",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "existence" => Some(PredictionMode::Existence),
            "semantic" => Some(PredictionMode::Semantic),
            _ => None,
        }
    }
}

impl std::fmt::Display for PredictionMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Applicability {
    Existence,
    Semantic,
    Both,
}

impl Applicability {
    pub fn allows(self, mode: PredictionMode) -> bool {
        matches!(
            (self, mode),
            (Applicability::Both, _)
                | (Applicability::Existence, PredictionMode::Existence)
                | (Applicability::Semantic, PredictionMode::Semantic)
        )
    }
}

/// The 22 metric families, in catalogue order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricFamily {
    Jaccard,
    AdamicAdar,
    ResourceAllocation,
    HubPromoted,
    HubDepressed,
    #[serde(rename = "lhn")]
    LeichtHolmeNewman,
    Salton,
    Sorensen,
    ShortestPath,
    TimeScore,
    EulerTime,
    FocciDistance,
    ConditionalProbability,
    TaxonomySimilarity,
    RelationalSimilarity,
    Arr,
    Aor,
    Aorr,
    Aorc,
    NodeDimensionConnectivity,
    EdgeDimensionConnectivity,
    MrLinkPropagation,
}

impl MetricFamily {
    pub const ALL: [MetricFamily; 22] = [
        MetricFamily::Jaccard,
        MetricFamily::AdamicAdar,
        MetricFamily::ResourceAllocation,
        MetricFamily::HubPromoted,
        MetricFamily::HubDepressed,
        MetricFamily::LeichtHolmeNewman,
        MetricFamily::Salton,
        MetricFamily::Sorensen,
        MetricFamily::ShortestPath,
        MetricFamily::TimeScore,
        MetricFamily::EulerTime,
        MetricFamily::FocciDistance,
        MetricFamily::ConditionalProbability,
        MetricFamily::TaxonomySimilarity,
        MetricFamily::RelationalSimilarity,
        MetricFamily::Arr,
        MetricFamily::Aor,
        MetricFamily::Aorr,
        MetricFamily::Aorc,
        MetricFamily::NodeDimensionConnectivity,
        MetricFamily::EdgeDimensionConnectivity,
        MetricFamily::MrLinkPropagation,
    ];

    pub fn id(self) -> &'static str {
        use MetricFamily::*;
        match self {
            Jaccard => "jaccard",
            AdamicAdar => "adamic_adar",
            ResourceAllocation => "resource_allocation",
            HubPromoted => "hub_promoted",
            HubDepressed => "hub_depressed",
            LeichtHolmeNewman => "lhn",
            Salton => "salton",
            Sorensen => "sorensen",
            ShortestPath => "shortest_path",
            TimeScore => "time_score",
            EulerTime => "euler_time",
            FocciDistance => "focci_distance",
            ConditionalProbability => "conditional_probability",
            TaxonomySimilarity => "taxonomy_similarity",
            RelationalSimilarity => "relational_similarity",
            Arr => "arr",
            Aor => "aor",
            Aorr => "aorr",
            Aorc => "aorc",
            NodeDimensionConnectivity => "node_dimension_connectivity",
            EdgeDimensionConnectivity => "edge_dimension_connectivity",
            MrLinkPropagation => "mr_link_propagation",
        }
    }

    pub fn from_id(id: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|f| f.id() == id)
    }

    /// Which prediction modes the family serves.
    pub fn applicability(self) -> Applicability {
        use MetricFamily::*;
        match self {
            Jaccard | AdamicAdar | ResourceAllocation | HubPromoted | HubDepressed
            | LeichtHolmeNewman | Salton | Sorensen | ShortestPath | TimeScore | EulerTime => {
                Applicability::Both
            }
            FocciDistance | TaxonomySimilarity | RelationalSimilarity | Arr | Aor | Aorr | Aorc => {
                Applicability::Existence
            }
            ConditionalProbability
            | NodeDimensionConnectivity
            | EdgeDimensionConnectivity
            | MrLinkPropagation => Applicability::Semantic,
        }
    }

    /// Whether the score depends on the candidate relation.
    pub fn needs_relation(self) -> bool {
        matches!(
            self,
            MetricFamily::ConditionalProbability
                | MetricFamily::NodeDimensionConnectivity
                | MetricFamily::EdgeDimensionConnectivity
                | MetricFamily::MrLinkPropagation
        )
    }

    pub fn default_params(self) -> MetricParams {
        match self {
            MetricFamily::ShortestPath => MetricParams::ShortestPath { cap: DEFAULT_PATH_CAP },
            MetricFamily::TimeScore => MetricParams::TimeScore { beta: 0.5, step_ms: ONE_DAY_MS },
            MetricFamily::EulerTime => MetricParams::EulerTime { discount_ms: ONE_DAY_MS },
            MetricFamily::MrLinkPropagation => MetricParams::Propagation { damping: 0.5 },
            _ => MetricParams::None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MetricParams {
    None,
    ShortestPath { cap: usize },
    /// `beta` in (0, 1) discounts old co-occurrences; `step_ms` is the length
    /// of one time step.
    TimeScore { beta: f64, step_ms: f64 },
    EulerTime { discount_ms: f64 },
    Propagation { damping: f64 },
}

impl MetricParams {
    pub fn validate(&self) -> Result<(), MetricError> {
        match *self {
            MetricParams::None => Ok(()),
            MetricParams::ShortestPath { cap } if cap >= 1 => Ok(()),
            MetricParams::ShortestPath { cap } => {
                Err(MetricError::InvalidParams(format!("path cap {cap} must be >= 1")))
            }
            MetricParams::TimeScore { beta, step_ms } => {
                if !(beta > 0.0 && beta < 1.0) {
                    return Err(MetricError::InvalidParams(format!("beta {beta} outside (0, 1)")));
                }
                if !(step_ms > 0.0 && step_ms.is_finite()) {
                    return Err(MetricError::InvalidParams(format!("time step {step_ms} must be > 0")));
                }
                Ok(())
            }
            MetricParams::EulerTime { discount_ms } if discount_ms > 0.0 && discount_ms.is_finite() => Ok(()),
            MetricParams::EulerTime { discount_ms } => Err(MetricError::InvalidParams(format!(
                "discounting factor {discount_ms} must be > 0"
            ))),
            MetricParams::Propagation { damping } if (0.0..=1.0).contains(&damping) => Ok(()),
            MetricParams::Propagation { damping } => Err(MetricError::InvalidParams(format!(
                "damping {damping} outside [0, 1]"
            ))),
        }
    }

    fn matches(&self, family: MetricFamily) -> bool {
        matches!(
            (family, self),
            (MetricFamily::ShortestPath, MetricParams::ShortestPath { .. })
                | (MetricFamily::TimeScore, MetricParams::TimeScore { .. })
                | (MetricFamily::EulerTime, MetricParams::EulerTime { .. })
                | (MetricFamily::MrLinkPropagation, MetricParams::Propagation { .. })
        ) || (*self == MetricParams::None
            && !matches!(
                family,
                MetricFamily::ShortestPath
                    | MetricFamily::TimeScore
                    | MetricFamily::EulerTime
                    | MetricFamily::MrLinkPropagation
            ))
    }
}

/// A similarity value guaranteed to lie in `[0, 1]`.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SimilarityScore(f64);

impl SimilarityScore {
    pub const ZERO: SimilarityScore = SimilarityScore(0.0);

    pub fn new(value: f64) -> Result<Self, MetricError> {
        if value.is_finite() && (0.0..=1.0).contains(&value) {
            Ok(Self(value))
        } else {
            Err(MetricError::OutOfRange(value))
        }
    }

    /// Accepts rounding noise of up to 1e-12 beyond either bound.
    pub(crate) fn from_raw(value: f64) -> Result<Self, MetricError> {
        const EPS: f64 = 1e-12;
        if value.is_finite() && (-EPS..=1.0 + EPS).contains(&value) {
            Ok(Self(value.clamp(0.0, 1.0)))
        } else {
            Err(MetricError::OutOfRange(value))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

/// A configured metric: a family with its parameters and a stable display name.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricInstance {
    pub family: MetricFamily,
    pub params: MetricParams,
    pub display_name: String,
}

impl MetricInstance {
    pub fn new(family: MetricFamily, params: MetricParams, display_name: impl Into<String>) -> Result<Self, MetricError> {
        params.validate()?;
        if !params.matches(family) {
            return Err(MetricError::InvalidParams(format!(
                "{params:?} do not parameterize '{}'",
                family.id()
            )));
        }
        Ok(Self {
            family,
            params,
            display_name: display_name.into(),
        })
    }

    /// The family with its default parameters, named by its family id.
    pub fn standard(family: MetricFamily) -> Self {
        Self {
            family,
            params: family.default_params(),
            display_name: family.id().to_string(),
        }
    }

    pub fn applicability(&self) -> Applicability {
        self.family.applicability()
    }

    /// Checked evaluation for the candidate `(u, v[, j])`.
    pub fn score(
        &self,
        g: &KnowledgeGraph,
        u: NodeId,
        v: NodeId,
        j: Option<RelationId>,
    ) -> Result<SimilarityScore, MetricError> {
        g.check_node(u)?;
        g.check_node(v)?;
        if u == v {
            return Err(GraphError::InvalidArgument("similarity needs two distinct nodes".into()).into());
        }
        if let Some(j) = j {
            g.ontology().check_relation(j)?;
        } else if self.family.needs_relation() {
            return Err(MetricError::MissingRelation(self.display_name.clone()));
        }
        self.params.validate()?;
        SimilarityScore::from_raw(self.evaluate_raw(g, u, v, j))
    }

    /// Unchecked, unclamped evaluation. Ids must be valid and `u != v`;
    /// relation-dependent families yield 0 when `j` is `None`.
    pub fn evaluate_raw(&self, g: &KnowledgeGraph, u: NodeId, v: NodeId, j: Option<RelationId>) -> f64 {
        use MetricFamily::*;
        match self.family {
            Jaccard => topology::overlap_raw(g, OverlapKind::Jaccard, u, v),
            AdamicAdar => topology::overlap_raw(g, OverlapKind::AdamicAdar, u, v),
            ResourceAllocation => topology::overlap_raw(g, OverlapKind::ResourceAllocation, u, v),
            HubPromoted => topology::overlap_raw(g, OverlapKind::HubPromoted, u, v),
            HubDepressed => topology::overlap_raw(g, OverlapKind::HubDepressed, u, v),
            LeichtHolmeNewman => topology::overlap_raw(g, OverlapKind::Lhn, u, v),
            Salton => topology::overlap_raw(g, OverlapKind::Salton, u, v),
            Sorensen => topology::overlap_raw(g, OverlapKind::Sorensen, u, v),
            ShortestPath => {
                let cap = match self.params {
                    MetricParams::ShortestPath { cap } => cap,
                    _ => DEFAULT_PATH_CAP,
                };
                topology::shortest_path_raw(g, u, v, cap)
            }
            TimeScore => {
                let (beta, step) = match self.params {
                    MetricParams::TimeScore { beta, step_ms } => (beta, step_ms),
                    _ => (0.5, ONE_DAY_MS),
                };
                temporal::time_score_raw(g, u, v, beta, step)
            }
            EulerTime => {
                let d = match self.params {
                    MetricParams::EulerTime { discount_ms } => discount_ms,
                    _ => ONE_DAY_MS,
                };
                temporal::euler_time_raw(g, v, d)
            }
            FocciDistance => topology::focci_raw(g, u, v),
            ConditionalProbability => j.map_or(0.0, |j| semantic::conditional_probability_raw(g, j)),
            TaxonomySimilarity => semantic::taxonomy_raw(g, u, v),
            RelationalSimilarity => semantic::relational_raw(g, u, v),
            Arr => semantic::arr_raw(g, u, v),
            Aor => semantic::aor_raw(g, u, v),
            Aorr => semantic::aor_raw(g, v, u),
            Aorc => 0.5 * (semantic::aor_raw(g, u, v) + semantic::aor_raw(g, v, u)),
            NodeDimensionConnectivity => j.map_or(0.0, |j| topology::dimension_raw(g, DimensionKind::Node, j)),
            EdgeDimensionConnectivity => j.map_or(0.0, |j| topology::dimension_raw(g, DimensionKind::Edge, j)),
            MrLinkPropagation => {
                let beta = match self.params {
                    MetricParams::Propagation { damping } => damping,
                    _ => 0.5,
                };
                j.map_or(0.0, |j| topology::mr_propagation_raw(g, u, v, j, beta))
            }
        }
    }
}

/// Every family with default parameters, Euler time instantiated at one-day
/// and half-day discounting.
pub fn catalog() -> Vec<MetricInstance> {
    let mut out = Vec::with_capacity(23);
    for family in MetricFamily::ALL {
        if family == MetricFamily::EulerTime {
            out.push(MetricInstance {
                family,
                params: MetricParams::EulerTime { discount_ms: ONE_DAY_MS },
                display_name: "euler_time_one_day".into(),
            });
            out.push(MetricInstance {
                family,
                params: MetricParams::EulerTime { discount_ms: HALF_DAY_MS },
                display_name: "euler_time_half_day".into(),
            });
        } else {
            out.push(MetricInstance::standard(family));
        }
    }
    out
}

/// An ordered list of metric instances all applicable to one prediction mode.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricEnsemble {
    mode: PredictionMode,
    instances: Vec<MetricInstance>,
}

impl MetricEnsemble {
    pub fn new(mode: PredictionMode, instances: Vec<MetricInstance>) -> Result<Self, MetricError> {
        for m in &instances {
            m.params.validate()?;
            if !m.applicability().allows(mode) {
                return Err(MetricError::NotApplicable {
                    metric: m.display_name.clone(),
                    mode,
                });
            }
        }
        Ok(Self { mode, instances })
    }

    /// The catalogue restricted to the metrics applicable to `mode`.
    pub fn default_for(mode: PredictionMode) -> Self {
        Self {
            mode,
            instances: catalog()
                .into_iter()
                .filter(|m| m.applicability().allows(mode))
                .collect(),
        }
    }

    pub fn mode(&self) -> PredictionMode {
        self.mode
    }

    pub fn instances(&self) -> &[MetricInstance] {
        &self.instances
    }

    pub fn len(&self) -> usize {
        self.instances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instances.is_empty()
    }

    pub fn position(&self, display_name: &str) -> Option<usize> {
        self.instances.iter().position(|m| m.display_name == display_name)
    }

    pub fn names(&self) -> Vec<&str> {
        self.instances.iter().map(|m| m.display_name.as_str()).collect()
    }

    fn check_candidate(&self, g: &KnowledgeGraph, u: NodeId, v: NodeId, j: Option<RelationId>) -> Result<(), MetricError> {
        g.check_node(u)?;
        g.check_node(v)?;
        if u == v {
            return Err(GraphError::InvalidArgument("similarity needs two distinct nodes".into()).into());
        }
        match (self.mode, j) {
            (PredictionMode::Semantic, None) => Err(MetricError::ModeMismatch {
                mode: self.mode,
                detail: "needs a candidate relation",
            }),
            (PredictionMode::Existence, Some(_)) => Err(MetricError::ModeMismatch {
                mode: self.mode,
                detail: "takes no candidate relation",
            }),
            (_, Some(j)) => Ok(g.ontology().check_relation(j)?),
            _ => Ok(()),
        }
    }

    /// The raw metric vector `s_i(u, v[, j])`.
    pub fn features(
        &self,
        g: &KnowledgeGraph,
        u: NodeId,
        v: NodeId,
        j: Option<RelationId>,
    ) -> Result<Vec<f64>, MetricError> {
        self.check_candidate(g, u, v, j)?;
        Ok(self.features_unchecked(g, u, v, j))
    }

    pub(crate) fn features_unchecked(&self, g: &KnowledgeGraph, u: NodeId, v: NodeId, j: Option<RelationId>) -> Vec<f64> {
        self.instances
            .iter()
            .map(|m| m.evaluate_raw(g, u, v, j).clamp(0.0, 1.0))
            .collect()
    }

    /// `Σ a_i · s_i(u, v[, j])`.
    pub fn combined_similarity(
        &self,
        weights: &WeightVector,
        g: &KnowledgeGraph,
        u: NodeId,
        v: NodeId,
        j: Option<RelationId>,
    ) -> Result<SimilarityScore, MetricError> {
        self.check_weights(weights)?;
        let features = self.features(g, u, v, j)?;
        SimilarityScore::from_raw(weights.dot(&features))
    }

    pub fn check_weights(&self, weights: &WeightVector) -> Result<(), MetricError> {
        if weights.len() != self.instances.len() {
            return Err(MetricError::LengthMismatch {
                instances: self.instances.len(),
                weights: weights.len(),
            });
        }
        let sum: f64 = weights.as_slice().iter().sum();
        if (sum - 1.0).abs() > SIMPLEX_TOLERANCE || weights.as_slice().iter().any(|w| *w < 0.0) {
            return Err(MetricError::UnnormalizedWeights(sum));
        }
        Ok(())
    }
}
