//! Clients for the external capabilities the forge depends on: paraphrase
//! generation, question answering, entailment verdicts and named-entity
//! extraction.
//!
//! Every remote capability goes through a [`Provider`], which maps an
//! [`OracleRequest`] to an [`OracleResponse`]. Providers compose: a
//! [`CachedProvider`] or [`RecordingProvider`] wraps any other provider, and
//! [`ReplayProvider`] answers purely from fixture files. [`OracleClient`]
//! turns a provider into the four capability traits and enforces their
//! post-conditions.
//!
//! Two offline implementations ship for tests and desk-scale runs:
//! [`StubEntailment`] (token-overlap rules) and [`GazetteerNer`]
//! (longest-match over a gazetteer).

mod cache;
mod gazetteer;
mod http;
mod record;
mod replay;
mod stub;

use std::sync::atomic::{AtomicU64, Ordering};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::corpus::TextSpan;
use crate::embedding::EntityClass;

pub use cache::CachedProvider;
pub use gazetteer::GazetteerNer;
pub use http::{HttpProvider, ProviderConfig, API_BASE_ENV, API_KEY_ENV};
pub use record::RecordingProvider;
pub use replay::ReplayProvider;
pub use stub::StubEntailment;

/// Largest paraphrase batch a single request may ask for.
pub const MAX_PARAPHRASES: usize = 5;

#[derive(Debug, thiserror::Error)]
pub enum OracleError {
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("provider error: {0}")]
    Provider(String),
    #[error("no replay fixture for request {0}")]
    FixtureMiss(String),
    #[error("no answer to question `{0}`")]
    NoAnswer(String),
    #[error("cache entry {0} holds a different request")]
    CacheCollision(String),
    #[error("malformed response: {0}")]
    Malformed(String),
    #[error("fixture error: {0}")]
    Fixture(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VerdictLabel {
    Entailed,
    Contradicted,
    Neutral,
}

/// An entailment decision with a confidence in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EntailmentVerdict {
    pub label: VerdictLabel,
    pub score: f64,
}

/// A named entity located in a sentence.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NerSpan {
    pub span: TextSpan,
    pub surface: String,
    pub entity_class: EntityClass,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OracleRequest {
    Paraphrase { sentence: String, n: usize },
    Answer { question: String },
    Entailment { premise: String, hypothesis: String },
    Ner { sentence: String },
}

impl OracleRequest {
    pub fn kind(&self) -> &'static str {
        match self {
            OracleRequest::Paraphrase { .. } => "paraphrase",
            OracleRequest::Answer { .. } => "answer",
            OracleRequest::Entailment { .. } => "entailment",
            OracleRequest::Ner { .. } => "ner",
        }
    }
}

/// A request together with the model it is addressed to. This is the unit
/// that is hashed for the cache and stored in fixture files. Fixtures may
/// omit `model` to match any model.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KeyedRequest {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<String>,
    #[serde(flatten)]
    pub request: OracleRequest,
}

impl KeyedRequest {
    pub fn new(model: &str, request: OracleRequest) -> Self {
        Self {
            model: Some(model.to_string()),
            request,
        }
    }

    /// Canonical single-line JSON form.
    pub fn canonical(&self) -> String {
        serde_json::to_string(self).expect("requests always serialize")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum OracleResponse {
    Paraphrases(Vec<String>),
    Answer(String),
    Verdict(EntailmentVerdict),
    Entities(Vec<NerSpan>),
}

impl OracleResponse {
    /// Decode a stored JSON response for a request of the given kind.
    pub fn from_value(request: &OracleRequest, value: Value) -> Result<Self, OracleError> {
        let bad = |e: serde_json::Error| OracleError::Malformed(e.to_string());
        Ok(match request {
            OracleRequest::Paraphrase { .. } => {
                OracleResponse::Paraphrases(serde_json::from_value(value).map_err(bad)?)
            }
            OracleRequest::Answer { .. } => {
                OracleResponse::Answer(serde_json::from_value(value).map_err(bad)?)
            }
            OracleRequest::Entailment { .. } => {
                OracleResponse::Verdict(serde_json::from_value(value).map_err(bad)?)
            }
            OracleRequest::Ner { .. } => {
                OracleResponse::Entities(serde_json::from_value(value).map_err(bad)?)
            }
        })
    }

    pub fn to_value(&self) -> Value {
        serde_json::to_value(self).expect("responses always serialize")
    }
}

/// Counters exposed by providers.
#[derive(Debug, Default)]
pub struct ClientMetrics {
    pub requests: AtomicU64,
    pub network_calls: AtomicU64,
    pub retries: AtomicU64,
    pub cache_hits: AtomicU64,
    pub cache_misses: AtomicU64,
    pub replay_hits: AtomicU64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct MetricsSnapshot {
    pub requests: u64,
    pub network_calls: u64,
    pub retries: u64,
    pub cache_hits: u64,
    pub cache_misses: u64,
    pub replay_hits: u64,
}

impl ClientMetrics {
    pub(crate) fn bump(counter: &AtomicU64) {
        counter.fetch_add(1, Ordering::Relaxed);
    }

    pub fn snapshot(&self) -> MetricsSnapshot {
        MetricsSnapshot {
            requests: self.requests.load(Ordering::Relaxed),
            network_calls: self.network_calls.load(Ordering::Relaxed),
            retries: self.retries.load(Ordering::Relaxed),
            cache_hits: self.cache_hits.load(Ordering::Relaxed),
            cache_misses: self.cache_misses.load(Ordering::Relaxed),
            replay_hits: self.replay_hits.load(Ordering::Relaxed),
        }
    }
}

impl std::ops::Add for MetricsSnapshot {
    type Output = MetricsSnapshot;

    fn add(self, o: MetricsSnapshot) -> MetricsSnapshot {
        MetricsSnapshot {
            requests: self.requests + o.requests,
            network_calls: self.network_calls + o.network_calls,
            retries: self.retries + o.retries,
            cache_hits: self.cache_hits + o.cache_hits,
            cache_misses: self.cache_misses + o.cache_misses,
            replay_hits: self.replay_hits + o.replay_hits,
        }
    }
}

/// Anything that can answer oracle requests.
pub trait Provider: Send + Sync {
    fn call(&self, request: &KeyedRequest) -> Result<OracleResponse, OracleError>;

    /// Counters of this provider and any provider it wraps.
    fn metrics(&self) -> MetricsSnapshot {
        MetricsSnapshot::default()
    }
}

impl<P: Provider + ?Sized> Provider for Box<P> {
    fn call(&self, request: &KeyedRequest) -> Result<OracleResponse, OracleError> {
        (**self).call(request)
    }

    fn metrics(&self) -> MetricsSnapshot {
        (**self).metrics()
    }
}

impl<P: Provider + ?Sized> Provider for std::sync::Arc<P> {
    fn call(&self, request: &KeyedRequest) -> Result<OracleResponse, OracleError> {
        (**self).call(request)
    }

    fn metrics(&self) -> MetricsSnapshot {
        (**self).metrics()
    }
}

pub trait Paraphraser: Sync {
    /// Up to `n` paraphrases of `sentence`.
    fn generate_paraphrases(&self, sentence: &str, n: usize) -> Result<Vec<String>, OracleError>;
}

pub trait QuestionAnswerer: Sync {
    fn answer_question(&self, question: &str) -> Result<String, OracleError>;
}

pub trait EntailmentOracle: Sync {
    fn entailment_check(&self, premise: &str, hypothesis: &str)
        -> Result<EntailmentVerdict, OracleError>;
}

pub trait EntityRecognizer: Sync {
    /// Non-overlapping entity spans in ascending start order.
    fn ner_extract(&self, sentence: &str) -> Result<Vec<NerSpan>, OracleError>;
}

/// Resolve overlapping spans: longest first, then leftmost. Output is sorted
/// by start.
pub fn resolve_overlaps(mut spans: Vec<NerSpan>) -> Vec<NerSpan> {
    spans.sort_by(|a, b| {
        b.span
            .len()
            .cmp(&a.span.len())
            .then(a.span.start.cmp(&b.span.start))
    });
    let mut kept: Vec<NerSpan> = Vec::new();
    for s in spans {
        if kept.iter().all(|k| !k.span.overlaps(&s.span)) {
            kept.push(s);
        }
    }
    kept.sort_by_key(|s| s.span.start);
    kept
}

/// Capability front-end over a [`Provider`] for one model.
pub struct OracleClient<P> {
    provider: P,
    model: String,
}

impl<P: Provider> OracleClient<P> {
    pub fn new(provider: P, model: impl Into<String>) -> Self {
        Self {
            provider,
            model: model.into(),
        }
    }

    pub fn provider(&self) -> &P {
        &self.provider
    }

    pub fn model(&self) -> &str {
        &self.model
    }

    pub fn metrics(&self) -> MetricsSnapshot {
        self.provider.metrics()
    }

    fn call(&self, request: OracleRequest) -> Result<OracleResponse, OracleError> {
        self.provider.call(&KeyedRequest::new(&self.model, request))
    }
}

fn wrong_kind(expected: &str, got: &OracleResponse) -> OracleError {
    OracleError::Malformed(format!("expected {expected} response, got {got:?}"))
}

impl<P: Provider> Paraphraser for OracleClient<P> {
    fn generate_paraphrases(&self, sentence: &str, n: usize) -> Result<Vec<String>, OracleError> {
        if sentence.trim().is_empty() {
            return Err(OracleError::InvalidRequest("empty sentence".into()));
        }
        if n == 0 || n > MAX_PARAPHRASES {
            return Err(OracleError::InvalidRequest(format!(
                "n must be in 1..={MAX_PARAPHRASES}, got {n}"
            )));
        }
        match self.call(OracleRequest::Paraphrase {
            sentence: sentence.to_string(),
            n,
        })? {
            OracleResponse::Paraphrases(mut list) => {
                list.retain(|p| !p.trim().is_empty());
                list.truncate(n);
                Ok(list)
            }
            // An empty JSON array is indistinguishable from an empty entity list.
            OracleResponse::Entities(e) if e.is_empty() => Ok(Vec::new()),
            other => Err(wrong_kind("paraphrase", &other)),
        }
    }
}

impl<P: Provider> QuestionAnswerer for OracleClient<P> {
    fn answer_question(&self, question: &str) -> Result<String, OracleError> {
        if question.trim().is_empty() {
            return Err(OracleError::InvalidRequest("empty question".into()));
        }
        match self.call(OracleRequest::Answer {
            question: question.to_string(),
        })? {
            OracleResponse::Answer(a) if a.trim().is_empty() => {
                Err(OracleError::NoAnswer(question.to_string()))
            }
            OracleResponse::Answer(a) => Ok(a),
            other => Err(wrong_kind("answer", &other)),
        }
    }
}

impl<P: Provider> EntailmentOracle for OracleClient<P> {
    fn entailment_check(
        &self,
        premise: &str,
        hypothesis: &str,
    ) -> Result<EntailmentVerdict, OracleError> {
        if premise.trim().is_empty() || hypothesis.trim().is_empty() {
            return Err(OracleError::InvalidRequest("empty premise or hypothesis".into()));
        }
        match self.call(OracleRequest::Entailment {
            premise: premise.to_string(),
            hypothesis: hypothesis.to_string(),
        })? {
            OracleResponse::Verdict(v) if (0.0..=1.0).contains(&v.score) => Ok(v),
            OracleResponse::Verdict(v) => Err(OracleError::Malformed(format!(
                "verdict score {} outside [0, 1]",
                v.score
            ))),
            other => Err(wrong_kind("entailment", &other)),
        }
    }
}

impl<P: Provider> EntityRecognizer for OracleClient<P> {
    fn ner_extract(&self, sentence: &str) -> Result<Vec<NerSpan>, OracleError> {
        if sentence.trim().is_empty() {
            return Err(OracleError::InvalidRequest("empty sentence".into()));
        }
        let spans = match self.call(OracleRequest::Ner {
            sentence: sentence.to_string(),
        })? {
            OracleResponse::Entities(e) => e,
            OracleResponse::Paraphrases(p) if p.is_empty() => Vec::new(),
            other => return Err(wrong_kind("ner", &other)),
        };
        for s in &spans {
            if s.span.slice(sentence) != Some(s.surface.as_str()) {
                return Err(OracleError::Malformed(format!(
                    "entity `{}` does not match sentence slice {:?}",
                    s.surface, s.span
                )));
            }
        }
        Ok(resolve_overlaps(spans))
    }
}

impl<T: Paraphraser + ?Sized> Paraphraser for &T {
    fn generate_paraphrases(&self, sentence: &str, n: usize) -> Result<Vec<String>, OracleError> {
        (**self).generate_paraphrases(sentence, n)
    }
}

impl<T: QuestionAnswerer + ?Sized> QuestionAnswerer for &T {
    fn answer_question(&self, question: &str) -> Result<String, OracleError> {
        (**self).answer_question(question)
    }
}

impl<T: EntailmentOracle + ?Sized> EntailmentOracle for &T {
    fn entailment_check(
        &self,
        premise: &str,
        hypothesis: &str,
    ) -> Result<EntailmentVerdict, OracleError> {
        (**self).entailment_check(premise, hypothesis)
    }
}

impl<T: EntityRecognizer + ?Sized> EntityRecognizer for &T {
    fn ner_extract(&self, sentence: &str) -> Result<Vec<NerSpan>, OracleError> {
        (**self).ner_extract(sentence)
    }
}
