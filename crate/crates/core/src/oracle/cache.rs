use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use super::{ClientMetrics, KeyedRequest, MetricsSnapshot, OracleError, OracleResponse, Provider};

#[derive(Serialize, Deserialize)]
struct CacheEntry {
    request: KeyedRequest,
    response: Value,
    timestamp: u64,
}

/// Disk cache in front of another provider. Entries live at
/// `<dir>/<sha256(canonical request)>.json` and store the full request, so a
/// hash hit with a different request is reported instead of answered.
pub struct CachedProvider<P> {
    inner: P,
    dir: PathBuf,
    metrics: ClientMetrics,
}

pub fn cache_key(request: &KeyedRequest) -> String {
    hex::encode(Sha256::digest(request.canonical().as_bytes()))
}

impl<P: Provider> CachedProvider<P> {
    pub fn new(inner: P, dir: impl Into<PathBuf>) -> Result<Self, OracleError> {
        let dir = dir.into();
        fs::create_dir_all(&dir)?;
        Ok(Self {
            inner,
            dir,
            metrics: ClientMetrics::default(),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn entry_path(&self, request: &KeyedRequest) -> PathBuf {
        self.dir.join(format!("{}.json", cache_key(request)))
    }

    fn lookup(&self, request: &KeyedRequest, path: &Path) -> Result<Option<OracleResponse>, OracleError> {
        let text = match fs::read_to_string(path) {
            Ok(t) => t,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
            Err(e) => return Err(e.into()),
        };
        let entry: CacheEntry = serde_json::from_str(&text)
            .map_err(|e| OracleError::Malformed(format!("{}: {e}", path.display())))?;
        if entry.request != *request {
            return Err(OracleError::CacheCollision(path.display().to_string()));
        }
        OracleResponse::from_value(&request.request, entry.response).map(Some)
    }

    fn store(&self, request: &KeyedRequest, response: &OracleResponse, path: &Path) -> Result<(), OracleError> {
        let timestamp = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        let entry = CacheEntry {
            request: request.clone(),
            response: response.to_value(),
            timestamp,
        };
        let mut tmp = tempfile::NamedTempFile::new_in(&self.dir)?;
        serde_json::to_writer(&mut tmp, &entry)
            .map_err(|e| OracleError::Malformed(e.to_string()))?;
        tmp.flush()?;
        tmp.persist(path).map_err(|e| OracleError::Io(e.error))?;
        Ok(())
    }
}

impl<P: Provider> Provider for CachedProvider<P> {
    fn call(&self, request: &KeyedRequest) -> Result<OracleResponse, OracleError> {
        ClientMetrics::bump(&self.metrics.requests);
        let path = self.entry_path(request);
        if let Some(hit) = self.lookup(request, &path)? {
            ClientMetrics::bump(&self.metrics.cache_hits);
            return Ok(hit);
        }
        ClientMetrics::bump(&self.metrics.cache_misses);
        let response = self.inner.call(request)?;
        self.store(request, &response, &path)?;
        Ok(response)
    }

    fn metrics(&self) -> MetricsSnapshot {
        let own = self.metrics.snapshot();
        let inner = self.inner.metrics();
        MetricsSnapshot {
            requests: own.requests,
            cache_hits: own.cache_hits,
            cache_misses: own.cache_misses,
            ..inner
        }
    }
}
