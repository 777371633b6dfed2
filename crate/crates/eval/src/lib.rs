//! Desk-scale reproduction of the review experiment: synthetic graphs with
//! planted link mechanisms, a reviewer simulated from held-out links, and
//! the genetic versus baseline hit rates that come out of it.

pub mod report;
pub mod simulate;
pub mod stats;
pub mod synthetic;

use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use kglf_core::candidates::CandidateError;
use kglf_core::feedback::FeedbackError;
use kglf_core::graph::{GraphError, KnowledgeGraph, Triplet};
use kglf_core::learning::LearningError;
use kglf_core::metrics::MetricError;
use kglf_core::predictor::PredictError;
use kglf_core::storage::StorageError;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use report::{write_report, ReportFiles};
pub use simulate::{simulate, ExperimentReport, Scoring, SimulationConfig};
pub use synthetic::{generate, SyntheticGraph, SyntheticSpec};

#[derive(Error, Debug)]
pub enum EvalError {
    #[error("invalid synthetic spec: {0}")]
    InvalidSpec(String),
    #[error("invalid simulation settings: {0}")]
    InvalidConfig(String),
    #[error("infeasible spec: {0}")]
    Infeasible(String),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Candidates(#[from] CandidateError),
    #[error(transparent)]
    Predict(#[from] PredictError),
    #[error(transparent)]
    Learning(#[from] LearningError),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error(transparent)]
    Feedback(#[from] FeedbackError),
    #[error(transparent)]
    Storage(#[from] StorageError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },
}

impl EvalError {
    /// Whether the error is the caller's input rather than the environment.
    pub fn is_validation(&self) -> bool {
        !matches!(self, EvalError::Io { .. })
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> EvalError + '_ {
    move |source| EvalError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// File name of the held-out links next to a generated bundle.
pub const HIDDEN_FILE: &str = "hidden";

#[derive(Serialize, Deserialize)]
struct HiddenHeader {
    format: String,
    version: u32,
}

#[derive(Serialize, Deserialize)]
struct HiddenLine {
    subject: String,
    object: String,
    relation: String,
}

/// Writes held-out links as JSON Lines keyed by node and relation keys.
pub fn write_hidden(path: &Path, g: &KnowledgeGraph, hidden: &[Triplet]) -> Result<(), EvalError> {
    let mut out = String::new();
    let header = HiddenHeader {
        format: "kglf-hidden".into(),
        version: kglf_core::storage::FORMAT_VERSION,
    };
    out.push_str(&serde_json::to_string(&header).expect("serialisable"));
    out.push('\n');
    for t in hidden {
        let line = HiddenLine {
            subject: g.node_key(t.subject).into(),
            object: g.node_key(t.object).into(),
            relation: g.ontology().relation(t.relation).key.clone(),
        };
        out.push_str(&serde_json::to_string(&line).expect("serialisable"));
        out.push('\n');
    }
    let mut f = fs::File::create(path).map_err(io_err(path))?;
    f.write_all(out.as_bytes()).map_err(io_err(path))
}

pub fn read_hidden(path: &Path, g: &KnowledgeGraph) -> Result<Vec<Triplet>, EvalError> {
    let f = fs::File::open(path).map_err(io_err(path))?;
    let parse = |line: usize, message: String| EvalError::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut out = Vec::new();
    for (i, line) in BufReader::new(f).lines().enumerate() {
        let line = line.map_err(io_err(path))?;
        let n = i + 1;
        if n == 1 {
            let h: HiddenHeader = serde_json::from_str(&line).map_err(|e| parse(n, e.to_string()))?;
            if h.format != "kglf-hidden" || h.version != kglf_core::storage::FORMAT_VERSION {
                return Err(parse(n, format!("unexpected header {} v{}", h.format, h.version)));
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let l: HiddenLine = serde_json::from_str(&line).map_err(|e| parse(n, e.to_string()))?;
        let node = |k: &str| g.node_id(k).ok_or_else(|| parse(n, format!("unknown node '{k}'")));
        let relation = g
            .ontology()
            .relation_id(&l.relation)
            .ok_or_else(|| parse(n, format!("unknown relation '{}'", l.relation)))?;
        out.push(Triplet::new(node(&l.subject)?, node(&l.object)?, relation));
    }
    Ok(out)
}

/// Generates and simulates one run per seed, in parallel. Each run uses
/// its seed for both the graph and the review loop.
pub fn run_experiment(
    spec: &SyntheticSpec,
    budget: usize,
    config: &SimulationConfig,
    seeds: &[u64],
) -> Result<Vec<ExperimentReport>, EvalError> {
    seeds
        .par_iter()
        .map(|&seed| {
            let data = generate(&SyntheticSpec {
                seed,
                ..spec.clone()
            })?;
            simulate(
                &data.visible,
                &data.hidden,
                budget,
                &SimulationConfig {
                    seed,
                    ..config.clone()
                },
            )
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hidden_file_round_trip() {
        let data = generate(&SyntheticSpec::default()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join(HIDDEN_FILE);
        write_hidden(&path, &data.visible, &data.hidden).unwrap();
        assert_eq!(read_hidden(&path, &data.visible).unwrap(), data.hidden);
        fs::write(&path, "{\"format\":\"kglf-hidden\",\"version\":1}\n{\"subject\":\"x\",\"object\":\"y\",\"relation\":\"knows\"}\n").unwrap();
        assert!(matches!(read_hidden(&path, &data.visible), Err(EvalError::Parse { line: 2, .. })));
    }
}
