//! Chat-completion style HTTP provider: one prompt in, one text out.

use std::path::PathBuf;
use std::sync::{Condvar, Mutex};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{
    resolve_overlaps, ClientMetrics, EntailmentVerdict, KeyedRequest, MetricsSnapshot, NerSpan,
    OracleError, OracleRequest, OracleResponse, Provider, VerdictLabel,
};
use crate::corpus::TextSpan;
use crate::embedding::EntityClass;
use crate::text;

pub const API_BASE_ENV: &str = "FACTOID_API_BASE";
pub const API_KEY_ENV: &str = "FACTOID_API_KEY";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProviderConfig {
    /// Base URL; requests go to `<endpoint>/chat/completions`.
    pub endpoint: String,
    pub model: String,
    /// Name of the environment variable holding the bearer token.
    pub api_key_env: String,
    pub max_in_flight: usize,
    /// Extra attempts after the first failure.
    pub retry_budget: u32,
    pub cache_dir: Option<PathBuf>,
    pub requests_per_second: Option<f64>,
    pub backoff_base_ms: u64,
    pub timeout_secs: u64,
}

impl Default for ProviderConfig {
    fn default() -> Self {
        Self {
            endpoint: "http://localhost:8000/v1".into(),
            model: "gpt-3.5-turbo".into(),
            api_key_env: API_KEY_ENV.into(),
            max_in_flight: 4,
            retry_budget: 3,
            cache_dir: None,
            requests_per_second: None,
            backoff_base_ms: 500,
            timeout_secs: 60,
        }
    }
}

impl ProviderConfig {
    pub fn validate(&self) -> Result<(), OracleError> {
        if self.max_in_flight == 0 {
            return Err(OracleError::InvalidRequest("max_in_flight must be >= 1".into()));
        }
        if let Some(rps) = self.requests_per_second {
            if rps.is_nan() || rps <= 0.0 {
                return Err(OracleError::InvalidRequest(
                    "requests_per_second must be positive".into(),
                ));
            }
        }
        if self.endpoint.is_empty() {
            return Err(OracleError::InvalidRequest("empty endpoint".into()));
        }
        Ok(())
    }
}

/// Counting semaphore bounding concurrent requests.
struct InFlight {
    free: Mutex<usize>,
    cv: Condvar,
}

impl InFlight {
    fn new(n: usize) -> Self {
        Self {
            free: Mutex::new(n),
            cv: Condvar::new(),
        }
    }

    fn acquire(&self) -> InFlightGuard<'_> {
        let mut free = self.free.lock().expect("semaphore lock");
        while *free == 0 {
            free = self.cv.wait(free).expect("semaphore lock");
        }
        *free -= 1;
        InFlightGuard(self)
    }
}

struct InFlightGuard<'a>(&'a InFlight);

impl Drop for InFlightGuard<'_> {
    fn drop(&mut self) {
        *self.0.free.lock().expect("semaphore lock") += 1;
        self.0.cv.notify_one();
    }
}

/// Client-side token bucket.
struct TokenBucket {
    rate: f64,
    capacity: f64,
    state: Mutex<(f64, Instant)>,
}

impl TokenBucket {
    fn new(rate: f64) -> Self {
        let capacity = rate.max(1.0);
        Self {
            rate,
            capacity,
            state: Mutex::new((capacity, Instant::now())),
        }
    }

    fn take(&self) {
        loop {
            let wait = {
                let mut st = self.state.lock().expect("bucket lock");
                let now = Instant::now();
                let refill = now.duration_since(st.1).as_secs_f64() * self.rate;
                st.0 = (st.0 + refill).min(self.capacity);
                st.1 = now;
                if st.0 >= 1.0 {
                    st.0 -= 1.0;
                    return;
                }
                (1.0 - st.0) / self.rate
            };
            std::thread::sleep(Duration::from_secs_f64(wait));
        }
    }
}

pub struct HttpProvider {
    config: ProviderConfig,
    agent: ureq::Agent,
    in_flight: InFlight,
    bucket: Option<TokenBucket>,
    metrics: ClientMetrics,
}

enum Attempt {
    Done(String),
    Retry(String),
    Fatal(String),
}

impl HttpProvider {
    pub fn new(config: ProviderConfig) -> Result<Self, OracleError> {
        config.validate()?;
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(config.timeout_secs)))
            .http_status_as_error(false)
            .build()
            .into();
        Ok(Self {
            in_flight: InFlight::new(config.max_in_flight),
            bucket: config.requests_per_second.map(TokenBucket::new),
            agent,
            config,
            metrics: ClientMetrics::default(),
        })
    }

    pub fn config(&self) -> &ProviderConfig {
        &self.config
    }

    fn url(&self) -> String {
        format!("{}/chat/completions", self.config.endpoint.trim_end_matches('/'))
    }

    fn attempt(&self, body: &Value) -> Attempt {
        let _slot = self.in_flight.acquire();
        if let Some(b) = &self.bucket {
            b.take();
        }
        ClientMetrics::bump(&self.metrics.network_calls);
        let mut req = self.agent.post(&self.url());
        if let Ok(key) = std::env::var(&self.config.api_key_env) {
            req = req.header("Authorization", &format!("Bearer {key}"));
        }
        let mut resp = match req.send_json(body) {
            Ok(r) => r,
            Err(e) => return Attempt::Retry(e.to_string()),
        };
        let status = resp.status().as_u16();
        if status == 429 || status >= 500 {
            return Attempt::Retry(format!("http status {status}"));
        }
        if status >= 400 {
            let text = resp.body_mut().read_to_string().unwrap_or_default();
            return Attempt::Fatal(format!("http status {status}: {text}"));
        }
        let value: Value = match resp.body_mut().read_json() {
            Ok(v) => v,
            Err(e) => return Attempt::Fatal(format!("unreadable response body: {e}")),
        };
        match value["choices"][0]["message"]["content"].as_str() {
            Some(s) => Attempt::Done(s.to_string()),
            None => Attempt::Fatal(format!("response lacks choices[0].message.content: {value}")),
        }
    }

    /// Send one prompt, retrying transient failures with exponential backoff.
    pub fn complete(&self, prompt: &str) -> Result<String, OracleError> {
        let body = json!({
            "model": self.config.model,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": 0,
        });
        let mut last = String::new();
        for attempt in 0..=self.config.retry_budget {
            if attempt > 0 {
                ClientMetrics::bump(&self.metrics.retries);
                let factor = 1u64 << (attempt - 1).min(10);
                let delay = (self.config.backoff_base_ms * factor).min(30_000);
                std::thread::sleep(Duration::from_millis(delay));
            }
            match self.attempt(&body) {
                Attempt::Done(s) => return Ok(s),
                Attempt::Fatal(msg) => return Err(OracleError::Provider(msg)),
                Attempt::Retry(msg) => {
                    log::warn!("request to {} failed (attempt {}): {msg}", self.url(), attempt + 1);
                    last = msg;
                }
            }
        }
        Err(OracleError::Provider(format!(
            "giving up after {} attempts: {last}",
            self.config.retry_budget + 1
        )))
    }
}

pub(crate) fn prompt_for(request: &OracleRequest) -> String {
    match request {
        OracleRequest::Paraphrase { sentence, n } => format!(
            "Paraphrase the following sentence in {n} different ways. Keep every name, \
             number, date and place exactly as written. Return one paraphrase per line \
             without numbering.\n\nSentence: {sentence}"
        ),
        OracleRequest::Answer { question } => {
            format!("Answer the question briefly and factually.\n\nQuestion: {question}")
        }
        OracleRequest::Entailment { premise, hypothesis } => format!(
            "Premise: {premise}\nHypothesis: {hypothesis}\n\nDoes the premise entail the \
             hypothesis? Reply with exactly one word: entailed, contradicted or neutral."
        ),
        OracleRequest::Ner { sentence } => format!(
            "List every person and location name in the sentence as a JSON array of \
             objects with keys \"surface\" and \"class\" (\"person\", \"location\" or \
             \"other\"). Copy each surface exactly.\n\nSentence: {sentence}"
        ),
    }
}

fn strip_list_marker(line: &str) -> &str {
    let t = line.trim();
    let t = t.trim_start_matches(['-', '*', '•']).trim_start();
    let digits = t.chars().take_while(|c| c.is_ascii_digit()).count();
    let t = if digits > 0 {
        let rest = &t[digits..];
        rest.strip_prefix('.')
            .or_else(|| rest.strip_prefix(')'))
            .map(str::trim_start)
            .unwrap_or(t)
    } else {
        t
    };
    t.trim_matches('"')
}

pub(crate) fn parse_completion(request: &OracleRequest, content: &str) -> Result<OracleResponse, OracleError> {
    Ok(match request {
        OracleRequest::Paraphrase { n, .. } => OracleResponse::Paraphrases(
            content
                .lines()
                .map(strip_list_marker)
                .filter(|l| !l.is_empty())
                .take(*n)
                .map(str::to_string)
                .collect(),
        ),
        OracleRequest::Answer { .. } => OracleResponse::Answer(content.trim().to_string()),
        OracleRequest::Entailment { .. } => {
            let lower = content.to_ascii_lowercase();
            let label = text::tokenize(&lower)
                .into_iter()
                .find_map(|w| match w.as_str() {
                    "entailed" | "entailment" | "entails" => Some(VerdictLabel::Entailed),
                    "contradicted" | "contradiction" | "contradicts" => {
                        Some(VerdictLabel::Contradicted)
                    }
                    "neutral" => Some(VerdictLabel::Neutral),
                    _ => None,
                })
                .ok_or_else(|| OracleError::Malformed(format!("no verdict in `{content}`")))?;
            OracleResponse::Verdict(EntailmentVerdict { label, score: 1.0 })
        }
        OracleRequest::Ner { sentence } => {
            #[derive(Deserialize)]
            struct Item {
                surface: String,
                #[serde(default)]
                class: Option<String>,
            }
            let start = content.find('[').unwrap_or(0);
            let end = content.rfind(']').map(|i| i + 1).unwrap_or(content.len());
            let items: Vec<Item> = serde_json::from_str(&content[start..end])
                .map_err(|e| OracleError::Malformed(format!("ner output: {e}")))?;
            let mut spans = Vec::new();
            for item in items {
                let class: EntityClass = item.class.as_deref().unwrap_or("other").parse().expect("infallible");
                for pos in text::find_word_bounded(sentence, &item.surface) {
                    spans.push(NerSpan {
                        span: TextSpan::at(pos, &item.surface),
                        surface: item.surface.clone(),
                        entity_class: class,
                    });
                }
            }
            OracleResponse::Entities(resolve_overlaps(spans))
        }
    })
}

impl Provider for HttpProvider {
    fn call(&self, request: &KeyedRequest) -> Result<OracleResponse, OracleError> {
        ClientMetrics::bump(&self.metrics.requests);
        let content = self.complete(&prompt_for(&request.request))?;
        parse_completion(&request.request, &content)
    }

    fn metrics(&self) -> MetricsSnapshot {
        self.metrics.snapshot()
    }
}
