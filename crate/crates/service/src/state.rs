//! Shared service state. The graph sits behind a reader-writer lock and
//! is only mutated by feedback; weights are swapped whole; training runs
//! on a cloned snapshot.

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex, RwLock};
use std::time::{SystemTime, UNIX_EPOCH};

use kglf_core::feedback::{FeedbackEffect, FeedbackError, FeedbackEvent};
use kglf_core::learning::{
    build_training_set_up_to, run_gp, FeatureMatrix, GpConfig, GpRunReport, LearningError, Standard,
};
use kglf_core::metrics::{MetricEnsemble, PredictionMode};
use kglf_core::storage::{self, FeedbackLog, GraphBundle, StorageError, WeightDocument};
use kglf_core::{KnowledgeGraph, Timestamp, WeightVector};
use serde::{Deserialize, Serialize};

use crate::config::ServiceConfig;
use crate::ServiceError;

pub const MODES: [PredictionMode; 2] = [PredictionMode::Existence, PredictionMode::Semantic];

pub fn now_ms() -> Timestamp {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_millis() as Timestamp)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JobStatus {
    Queued,
    Running,
    Done,
    Failed,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Trigger {
    Manual,
    Feedback,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainJob {
    pub id: u64,
    pub mode: PredictionMode,
    pub standard: Standard,
    /// Set when gold was preferred but too few rejections existed.
    pub downgraded: bool,
    pub training_size: usize,
    pub trigger: Trigger,
    pub status: JobStatus,
    pub created_at: Timestamp,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub report: Option<GpRunReport>,
}

impl TrainJob {
    fn active(&self) -> bool {
        matches!(self.status, JobStatus::Queued | JobStatus::Running)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct FeedbackTotals {
    pub accepted: usize,
    pub rejected: usize,
}

/// Why a training job could not be started.
#[derive(Debug)]
pub enum StartError {
    Busy(u64),
    Insufficient(LearningError),
    Other(ServiceError),
}

#[derive(Debug)]
pub struct FeedbackOutcome {
    pub effect: FeedbackEffect,
    pub event: FeedbackEvent,
    /// Events for this mode since the last automatic job.
    pub counter: usize,
    pub train_job: Option<u64>,
    pub train_skipped: Option<String>,
}

#[derive(Debug)]
pub enum FeedbackFailure {
    Rejected(FeedbackError),
    Storage(StorageError),
}

pub struct AppState {
    pub config: ServiceConfig,
    graph: RwLock<KnowledgeGraph>,
    log: Mutex<Option<FeedbackLog>>,
    ensembles: BTreeMap<PredictionMode, MetricEnsemble>,
    weights: RwLock<BTreeMap<PredictionMode, WeightDocument>>,
    counters: Mutex<BTreeMap<PredictionMode, usize>>,
    totals: Mutex<FeedbackTotals>,
    jobs: Mutex<Vec<TrainJob>>,
    next_job: AtomicU64,
}

impl AppState {
    /// An in-memory service over `graph` with uniform weights.
    pub fn new(graph: KnowledgeGraph, config: ServiceConfig) -> Result<Arc<Self>, ServiceError> {
        Self::build(GraphBundle::snapshot(graph), config, None)
    }

    /// Loads `config.bundle` (snapshot plus feedback log) and keeps
    /// persisting feedback and weights into it.
    pub fn open(config: ServiceConfig) -> Result<Arc<Self>, ServiceError> {
        let dir = config
            .bundle
            .clone()
            .ok_or_else(|| ServiceError::Config("no bundle directory configured".into()))?;
        let bundle = storage::read_bundle(&dir)?;
        let log = FeedbackLog::open(dir.join(storage::FEEDBACK_FILE))?;
        Self::build(bundle, config, Some(log))
    }

    fn build(bundle: GraphBundle, config: ServiceConfig, log: Option<FeedbackLog>) -> Result<Arc<Self>, ServiceError> {
        config.validate()?;
        let graph = bundle.live_graph()?;
        let mut totals = FeedbackTotals::default();
        for e in &bundle.feedback {
            if e.accepted {
                totals.accepted += 1;
            } else {
                totals.rejected += 1;
            }
        }
        let ensembles: BTreeMap<_, _> = MODES.map(|m| (m, MetricEnsemble::default_for(m))).into();
        let mut weights = BTreeMap::new();
        for (&mode, e) in &ensembles {
            let doc = match bundle.weights.get(&mode) {
                Some(doc) => {
                    let v = doc.to_vector(e).map_err(|err| ServiceError::Config(format!("{} weights: {err}", mode.as_str())))?;
                    WeightDocument::from_vector(e, &v, doc.updated_at)
                }
                None => WeightDocument::from_vector(e, &WeightVector::uniform(e.len()), 0),
            };
            weights.insert(mode, doc);
        }
        Ok(Arc::new(Self {
            config,
            graph: RwLock::new(graph),
            log: Mutex::new(log),
            ensembles,
            weights: RwLock::new(weights),
            counters: Mutex::new(MODES.map(|m| (m, 0)).into()),
            totals: Mutex::new(totals),
            jobs: Mutex::new(Vec::new()),
            next_job: AtomicU64::new(1),
        }))
    }

    pub fn ensemble(&self, mode: PredictionMode) -> &MetricEnsemble {
        &self.ensembles[&mode]
    }

    pub fn read_graph<T>(&self, f: impl FnOnce(&KnowledgeGraph) -> T) -> T {
        f(&self.graph.read().expect("graph lock"))
    }

    pub fn weight_document(&self, mode: PredictionMode) -> WeightDocument {
        self.weights.read().expect("weights lock")[&mode].clone()
    }

    pub fn weight_vector(&self, mode: PredictionMode) -> WeightVector {
        let doc = self.weight_document(mode);
        doc.to_vector(self.ensemble(mode)).expect("stored weights are valid")
    }

    pub fn all_weights(&self) -> BTreeMap<PredictionMode, WeightDocument> {
        self.weights.read().expect("weights lock").clone()
    }

    /// Swaps in a new vector and persists it when a bundle is attached.
    pub fn set_weights(&self, mode: PredictionMode, v: &WeightVector) -> Result<WeightDocument, ServiceError> {
        let doc = WeightDocument::from_vector(self.ensemble(mode), v, now_ms());
        let mut guard = self.weights.write().expect("weights lock");
        if let Some(dir) = &self.config.bundle {
            storage::write_weights(dir, &doc)?;
        }
        guard.insert(mode, doc.clone());
        Ok(doc)
    }

    pub fn totals(&self) -> FeedbackTotals {
        self.totals.lock().expect("totals lock").clone()
    }

    pub fn counters(&self) -> BTreeMap<PredictionMode, usize> {
        self.counters.lock().expect("counter lock").clone()
    }

    /// Applies and logs one event, then enqueues training when the mode's
    /// counter reaches the threshold.
    pub fn submit_feedback(self: &Arc<Self>, event: FeedbackEvent) -> Result<FeedbackOutcome, FeedbackFailure> {
        let effect = {
            let mut g = self.graph.write().expect("graph lock");
            let mut log = self.log.lock().expect("log lock");
            match log.as_mut() {
                Some(log) => storage::append_feedback(&mut g, log, &event).map_err(|e| match e {
                    StorageError::Feedback { source, .. } => FeedbackFailure::Rejected(source),
                    other => FeedbackFailure::Storage(other),
                })?,
                None => event.apply(&mut g).map_err(FeedbackFailure::Rejected)?,
            }
        };
        {
            let mut t = self.totals.lock().expect("totals lock");
            if event.accepted {
                t.accepted += 1;
            } else {
                t.rejected += 1;
            }
        }
        let (counter, reached) = {
            let mut c = self.counters.lock().expect("counter lock");
            let n = c.get_mut(&event.mode).expect("every mode");
            *n += 1;
            if *n >= self.config.retrain_every {
                *n = 0;
                (self.config.retrain_every, true)
            } else {
                (*n, false)
            }
        };
        let (mut train_job, mut train_skipped) = (None, None);
        if reached {
            match self.start_training(event.mode, None, None, Trigger::Feedback) {
                Ok(job) => train_job = Some(job.id),
                Err(e) => {
                    let why = match e {
                        StartError::Busy(id) => format!("job {id} is still running"),
                        StartError::Insufficient(e) => e.to_string(),
                        StartError::Other(e) => e.to_string(),
                    };
                    tracing::info!(mode = event.mode.as_str(), "automatic training skipped: {why}");
                    train_skipped = Some(why);
                }
            }
        }
        Ok(FeedbackOutcome {
            effect,
            event,
            counter,
            train_job,
            train_skipped,
        })
    }

    pub fn job(&self, id: u64) -> Option<TrainJob> {
        self.jobs.lock().expect("jobs lock").iter().find(|j| j.id == id).cloned()
    }

    pub fn jobs(&self) -> Vec<TrainJob> {
        self.jobs.lock().expect("jobs lock").clone()
    }

    fn update_job(&self, id: u64, f: impl FnOnce(&mut TrainJob)) {
        if let Some(j) = self.jobs.lock().expect("jobs lock").iter_mut().find(|j| j.id == id) {
            f(j);
        }
    }

    /// Builds the training set now, so data problems surface to the
    /// caller, then runs the optimiser on a worker thread. `standard`
    /// `None` picks gold when there are enough rejections.
    pub fn start_training(
        self: &Arc<Self>,
        mode: PredictionMode,
        standard: Option<Standard>,
        size: Option<usize>,
        trigger: Trigger,
    ) -> Result<TrainJob, StartError> {
        let mut jobs = self.jobs.lock().expect("jobs lock");
        if let Some(j) = jobs.iter().find(|j| j.mode == mode && j.active()) {
            return Err(StartError::Busy(j.id));
        }
        let size = size.unwrap_or(self.config.training_size);
        let id = self.next_job.fetch_add(1, Ordering::Relaxed);
        let seed = self.config.seed ^ id.wrapping_mul(0x9E37_79B9_7F4A_7C15);
        let snapshot = self.graph.read().expect("graph lock").clone();
        let (standard, downgraded) = match standard {
            Some(s) => (s, false),
            None => {
                let rejections = snapshot
                    .non_links()
                    .filter(|nl| nl.relation.is_some() == (mode == PredictionMode::Semantic))
                    .count();
                if rejections >= size / 2 {
                    (Standard::Gold, false)
                } else {
                    tracing::info!(mode = mode.as_str(), rejections, "too few rejections for gold, training on silver");
                    (Standard::Silver, true)
                }
            }
        };
        let set = build_training_set_up_to(&snapshot, mode, standard, size.max(2), seed).map_err(|e| match e {
            LearningError::InsufficientPositives { .. }
            | LearningError::InsufficientNegatives { .. }
            | LearningError::EmptyTrainingSet => StartError::Insufficient(e),
            other => StartError::Other(other.into()),
        })?;
        let job = TrainJob {
            id,
            mode,
            standard,
            downgraded,
            training_size: set.len(),
            trigger,
            status: JobStatus::Queued,
            created_at: now_ms(),
            error: None,
            report: None,
        };
        jobs.push(job.clone());
        drop(jobs);

        let state = Arc::clone(self);
        let gp = GpConfig {
            seed,
            ..self.config.gp.clone()
        };
        tokio::task::spawn_blocking(move || {
            state.update_job(id, |j| j.status = JobStatus::Running);
            let result = FeatureMatrix::build(&snapshot, state.ensemble(mode), &set)
                .and_then(|m| run_gp(&m, &gp))
                .map_err(ServiceError::from)
                .and_then(|report| state.set_weights(mode, &report.best_weights).map(|_| report));
            match result {
                Ok(report) => {
                    tracing::info!(id, mode = mode.as_str(), fitness = report.best_fitness, "training done");
                    state.update_job(id, |j| {
                        j.status = JobStatus::Done;
                        j.report = Some(report);
                    })
                }
                Err(e) => {
                    tracing::warn!(id, "training failed: {e}");
                    state.update_job(id, |j| {
                        j.status = JobStatus::Failed;
                        j.error = Some(e.to_string());
                    })
                }
            }
        });
        Ok(job)
    }

    /// The live graph as a compacted bundle with the current weights.
    pub fn bundle(&self) -> GraphBundle {
        let mut b = GraphBundle::snapshot(self.graph.read().expect("graph lock").clone());
        b.weights = self.all_weights();
        b
    }
}
