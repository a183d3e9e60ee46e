use std::collections::HashMap;
use std::fs;
use std::path::Path;

use serde::Deserialize;
use serde_json::Value;

use super::{ClientMetrics, KeyedRequest, MetricsSnapshot, OracleError, OracleResponse, Provider};

#[derive(Deserialize)]
struct FixtureLine {
    request: KeyedRequest,
    response: Value,
}

/// Read-only provider answering from fixture files (JSONL of
/// `{request, response}`). A miss is always an error.
#[derive(Debug, Default)]
pub struct ReplayProvider {
    exact: HashMap<String, OracleResponse>,
    any_model: HashMap<String, OracleResponse>,
    metrics: ClientMetrics,
}

fn request_key(request: &KeyedRequest) -> String {
    KeyedRequest {
        model: None,
        request: request.request.clone(),
    }
    .canonical()
}

impl ReplayProvider {
    pub fn new() -> Self {
        Self::default()
    }

    /// Load a fixture file, or every `*.jsonl` file in a directory (in name
    /// order).
    pub fn load(path: &Path) -> Result<Self, OracleError> {
        let mut this = Self::new();
        if path.is_dir() {
            let mut files: Vec<_> = fs::read_dir(path)?
                .filter_map(Result::ok)
                .map(|e| e.path())
                .filter(|p| p.extension().is_some_and(|x| x == "jsonl"))
                .collect();
            files.sort();
            for f in files {
                this.add_jsonl(&fs::read_to_string(&f)?, &f.display().to_string())?;
            }
        } else {
            this.add_jsonl(&fs::read_to_string(path)?, &path.display().to_string())?;
        }
        Ok(this)
    }

    /// Add fixtures from JSONL text. `origin` names the source in errors.
    pub fn add_jsonl(&mut self, text: &str, origin: &str) -> Result<(), OracleError> {
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let fx: FixtureLine = serde_json::from_str(line)
                .map_err(|e| OracleError::Fixture(format!("{origin}:{}: {e}", i + 1)))?;
            let response = OracleResponse::from_value(&fx.request.request, fx.response)
                .map_err(|e| OracleError::Fixture(format!("{origin}:{}: {e}", i + 1)))?;
            self.insert(fx.request, response)
                .map_err(|e| OracleError::Fixture(format!("{origin}:{}: {e}", i + 1)))?;
        }
        Ok(())
    }

    pub fn insert(&mut self, request: KeyedRequest, response: OracleResponse) -> Result<(), OracleError> {
        let key = request_key(&request);
        let (map, key) = match &request.model {
            Some(m) => (&mut self.exact, format!("{m}\u{0}{key}")),
            None => (&mut self.any_model, key),
        };
        if let Some(prev) = map.get(&key) {
            if *prev != response {
                return Err(OracleError::Fixture(format!(
                    "conflicting responses for {}",
                    request.canonical()
                )));
            }
        }
        map.insert(key, response);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.exact.len() + self.any_model.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl Provider for ReplayProvider {
    fn call(&self, request: &KeyedRequest) -> Result<OracleResponse, OracleError> {
        ClientMetrics::bump(&self.metrics.requests);
        let key = request_key(request);
        let hit = request
            .model
            .as_ref()
            .and_then(|m| self.exact.get(&format!("{m}\u{0}{key}")))
            .or_else(|| self.any_model.get(&key));
        match hit {
            Some(r) => {
                ClientMetrics::bump(&self.metrics.replay_hits);
                Ok(r.clone())
            }
            None => Err(OracleError::FixtureMiss(request.canonical())),
        }
    }

    fn metrics(&self) -> MetricsSnapshot {
        self.metrics.snapshot()
    }
}
