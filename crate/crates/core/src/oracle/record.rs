use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::Path;
use std::sync::Mutex;

use serde_json::{json, Value};

use super::{KeyedRequest, MetricsSnapshot, OracleError, OracleResponse, Provider};

/// Passes requests through to another provider and remembers every
/// exchange, so a live run can be turned into replay fixtures.
pub struct RecordingProvider<P> {
    inner: P,
    log: Mutex<BTreeMap<String, Value>>,
}

impl<P: Provider> RecordingProvider<P> {
    pub fn new(inner: P) -> Self {
        Self {
            inner,
            log: Mutex::new(BTreeMap::new()),
        }
    }

    pub fn recorded(&self) -> usize {
        self.log.lock().expect("recorder lock").len()
    }

    /// Fixture JSONL, one line per distinct request, sorted by request.
    pub fn to_jsonl(&self) -> String {
        let log = self.log.lock().expect("recorder lock");
        let mut out = String::new();
        for line in log.values() {
            out.push_str(&line.to_string());
            out.push('\n');
        }
        out
    }

    pub fn write_fixtures(&self, path: &Path) -> Result<(), OracleError> {
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
        let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
        tmp.write_all(self.to_jsonl().as_bytes())?;
        tmp.persist(path).map_err(|e| OracleError::Io(e.error))?;
        Ok(())
    }
}

impl<P: Provider> Provider for RecordingProvider<P> {
    fn call(&self, request: &KeyedRequest) -> Result<OracleResponse, OracleError> {
        let response = self.inner.call(request)?;
        let line = json!({ "request": request, "response": response.to_value() });
        self.log
            .lock()
            .expect("recorder lock")
            .insert(request.canonical(), line);
        Ok(response)
    }

    fn metrics(&self) -> MetricsSnapshot {
        self.inner.metrics()
    }
}
