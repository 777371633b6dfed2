//! Time-aware metrics over epoch-millisecond link timestamps.
//!
//! "Now" is the most recent timestamp in the graph, which keeps scores a pure
//! function of the graph contents.

use crate::graph::{GraphError, KnowledgeGraph, NodeId};

use super::{MetricError, MetricParams, SimilarityScore};

pub fn time_score(
    g: &KnowledgeGraph,
    u: NodeId,
    v: NodeId,
    beta: f64,
    step_ms: f64,
) -> Result<SimilarityScore, MetricError> {
    g.check_node(u)?;
    g.check_node(v)?;
    if u == v {
        return Err(GraphError::InvalidArgument("similarity needs two distinct nodes".into()).into());
    }
    MetricParams::TimeScore { beta, step_ms }.validate()?;
    SimilarityScore::from_raw(time_score_raw(g, u, v, beta, step_ms))
}

pub fn euler_time(g: &KnowledgeGraph, v: NodeId, discount_ms: f64) -> Result<SimilarityScore, MetricError> {
    g.check_node(v)?;
    MetricParams::EulerTime { discount_ms }.validate()?;
    SimilarityScore::from_raw(euler_time_raw(g, v, discount_ms))
}

/// Mean over common neighbours `c` of
/// `H_m · d · β^k / (⌊|t(u,c) − t(v,c)| / step⌋ + 1)` where `H_m` is the
/// harmonic mean of the link multiplicities between `c` and each endpoint,
/// `d = 1 / max(multiplicities)` and `k` counts the steps between the older
/// co-occurrence and the latest timestamp in the graph.
pub(crate) fn time_score_raw(g: &KnowledgeGraph, u: NodeId, v: NodeId, beta: f64, step_ms: f64) -> f64 {
    let Some(latest) = g.latest_timestamp() else {
        return 0.0;
    };
    let (gu, gv) = (g.gamma(u), g.gamma(v));
    let mut sum = 0.0;
    let mut count = 0usize;
    for (&c, &mu) in gu {
        let Some(&mv) = gv.get(&c) else { continue };
        let (Some(tu), Some(tv)) = (g.pair_latest_time(u, c), g.pair_latest_time(v, c)) else {
            continue;
        };
        count += 1;
        let (mu, mv) = (mu as f64, mv as f64);
        let harmonic = 2.0 / (1.0 / mu + 1.0 / mv);
        let d = 1.0 / mu.max(mv);
        let k = ((latest - tu.min(tv)) as f64 / step_ms).floor();
        let gap = ((tu - tv).abs() as f64 / step_ms).floor() + 1.0;
        sum += harmonic * d * beta.powf(k) / gap;
    }
    if count == 0 {
        0.0
    } else {
        sum / count as f64
    }
}

/// `exp(−age / d)` with `age` the time since `v`'s most recent link; 0 when
/// `v` has no links.
pub(crate) fn euler_time_raw(g: &KnowledgeGraph, v: NodeId, discount_ms: f64) -> f64 {
    match (g.last_link_time(v), g.latest_timestamp()) {
        (Some(last), Some(now)) => (-((now - last) as f64) / discount_ms).exp(),
        _ => 0.0,
    }
}
