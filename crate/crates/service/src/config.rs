//! Service settings: one TOML file, then command-line overrides on top.

use std::path::{Path, PathBuf};

use kglf_core::learning::GpConfig;
use kglf_core::predictor::DEFAULT_CANDIDATE_SIZE;
use serde::{Deserialize, Serialize};

use crate::ServiceError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServiceConfig {
    pub host: String,
    /// 0 picks a free port; the bound address is logged and printed.
    pub port: u16,
    /// Bundle directory to load and persist into. Without one the graph
    /// lives in memory only.
    pub bundle: Option<PathBuf>,
    /// Feedback events per mode between automatic training jobs.
    pub retrain_every: usize,
    pub candidate_size: usize,
    /// Requested training-set size; shrunk to what the graph can fill.
    pub training_size: usize,
    pub seed: u64,
    pub gp: GpConfig,
    /// Concept keys whose nodes are pseudonymised by anonymised exports.
    pub anonymize_concepts: Vec<String>,
    pub anonymize_salt: String,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            host: "127.0.0.1".into(),
            port: 8080,
            bundle: None,
            retrain_every: 200,
            candidate_size: DEFAULT_CANDIDATE_SIZE,
            training_size: 200,
            seed: 0,
            gp: GpConfig::default(),
            anonymize_concepts: vec!["Person".into()],
            anonymize_salt: "kglf".into(),
        }
    }
}

/// Flag values that replace file settings when present.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub port: Option<u16>,
    pub bundle: Option<PathBuf>,
    pub retrain_every: Option<usize>,
    pub candidate_size: Option<usize>,
    pub seed: Option<u64>,
}

impl ServiceConfig {
    pub fn from_toml(text: &str) -> Result<Self, ServiceError> {
        let c: Self = toml::from_str(text).map_err(|e| ServiceError::Config(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self, ServiceError> {
        let text = std::fs::read_to_string(path).map_err(|e| ServiceError::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn with_overrides(mut self, o: Overrides) -> Result<Self, ServiceError> {
        if let Some(p) = o.port {
            self.port = p;
        }
        if let Some(b) = o.bundle {
            self.bundle = Some(b);
        }
        if let Some(n) = o.retrain_every {
            self.retrain_every = n;
        }
        if let Some(n) = o.candidate_size {
            self.candidate_size = n;
        }
        if let Some(s) = o.seed {
            self.seed = s;
        }
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<(), ServiceError> {
        let bad = |m: &str| Err(ServiceError::Config(m.into()));
        if self.retrain_every == 0 {
            return bad("retrain_every must be at least 1");
        }
        if self.candidate_size < 2 {
            return bad("candidate_size must be at least 2");
        }
        if self.training_size < 2 {
            return bad("training_size must be at least 2");
        }
        self.gp.validate().map_err(|e| ServiceError::Config(e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn file_then_flags() {
        let c = ServiceConfig::from_toml("port = 9000\nretrain_every = 50\n[gp]\npopulation_size = 9\n").unwrap();
        assert_eq!((c.port, c.retrain_every, c.gp.population_size), (9000, 50, 9));
        assert_eq!(c.candidate_size, DEFAULT_CANDIDATE_SIZE);
        let c = c
            .with_overrides(Overrides {
                port: Some(1),
                seed: Some(7),
                ..Default::default()
            })
            .unwrap();
        assert_eq!((c.port, c.seed, c.retrain_every), (1, 7, 50));
    }

    #[test]
    fn bad_settings() {
        assert!(ServiceConfig::from_toml("retrain_every = 0").is_err());
        assert!(ServiceConfig::from_toml("colour = 'blue'").is_err());
        assert!(ServiceConfig::from_toml("[gp]\npopulation_size = 3").is_err());
        let o = Overrides {
            candidate_size: Some(1),
            ..Default::default()
        };
        assert!(ServiceConfig::default().with_overrides(o).is_err());
    }
}
