//! Word-vector tables with exact nearest/farthest neighbor search.
//!
//! Tables are loaded from the word2vec text format (`count dim` header, then
//! `token v1 .. v_dim` per line). Multi-word entities are stored as a single
//! token with underscores between words (`Hasan_Cetin`). An optional
//! gazetteer sidecar (two-column TSV, `token<TAB>class`) tags tokens with an
//! entity class so queries can be restricted to persons or locations.
//!
//! Search is an exhaustive scan. Ties on distance are broken by ascending
//! token order, so results are fully deterministic and a larger `k` only
//! extends the list.

use std::cmp::Ordering;
use std::collections::HashMap;
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// Entity class tag carried by gazetteer entries and NER spans.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EntityClass {
    Person,
    Location,
    Other,
}

impl FromStr for EntityClass {
    type Err = std::convert::Infallible;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s.trim().to_ascii_lowercase().as_str() {
            "person" | "per" | "people" => EntityClass::Person,
            "location" | "loc" | "gpe" | "place" | "city" | "country" => EntityClass::Location,
            _ => EntityClass::Other,
        })
    }
}

impl fmt::Display for EntityClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EntityClass::Person => "person",
            EntityClass::Location => "location",
            EntityClass::Other => "other",
        })
    }
}

/// Table token for a (possibly multi-word) surface form.
pub fn entity_token(surface: &str) -> String {
    surface.split_whitespace().collect::<Vec<_>>().join("_")
}

/// Surface form for a table token.
pub fn token_surface(token: &str) -> String {
    token.replace('_', " ")
}

#[derive(Debug, thiserror::Error)]
pub enum EmbeddingError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {message}")]
    Format { line: usize, message: String },
    #[error("dimension mismatch: {left} vs {right}")]
    Dimension { left: usize, right: usize },
    #[error("unknown token `{0}`")]
    UnknownToken(String),
    #[error("no token carries class `{0}`")]
    EmptyCandidateSet(EntityClass),
    #[error("invalid query: {0}")]
    InvalidQuery(String),
}

fn format_err(line: usize, message: impl Into<String>) -> EmbeddingError {
    EmbeddingError::Format {
        line,
        message: message.into(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    #[default]
    Euclidean,
    Cosine,
}

impl FromStr for Metric {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "euclidean" | "l2" => Ok(Metric::Euclidean),
            "cosine" | "cos" => Ok(Metric::Cosine),
            other => Err(format!("unknown metric `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SearchMode {
    #[default]
    Nearest,
    Farthest,
}

impl FromStr for SearchMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "nearest" | "near" => Ok(SearchMode::Nearest),
            "farthest" | "far" => Ok(SearchMode::Farthest),
            other => Err(format!("unknown search mode `{other}`")),
        }
    }
}

/// Metric value between two vectors: Euclidean distance, or cosine
/// similarity in `[-1, 1]`. A zero vector has cosine similarity 0 with
/// everything.
pub fn distance(a: &[f64], b: &[f64], metric: Metric) -> Result<f64, EmbeddingError> {
    if a.len() != b.len() {
        return Err(EmbeddingError::Dimension {
            left: a.len(),
            right: b.len(),
        });
    }
    Ok(match metric {
        Metric::Euclidean => a
            .iter()
            .zip(b)
            .map(|(x, y)| (x - y) * (x - y))
            .sum::<f64>()
            .sqrt(),
        Metric::Cosine => cosine(a, b),
    })
}

fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    (dot / (na * nb)).clamp(-1.0, 1.0)
}

/// Dissimilarity used for ranking and thresholds: the distance itself for
/// Euclidean, `1 - cos` for cosine.
fn dissimilarity(a: &[f64], b: &[f64], metric: Metric) -> f64 {
    match metric {
        Metric::Euclidean => distance(a, b, metric).unwrap_or(f64::INFINITY),
        Metric::Cosine => 1.0 - cosine(a, b),
    }
}

/// Immutable token → vector map.
#[derive(Debug, Clone)]
pub struct EmbeddingTable {
    dimension: usize,
    tokens: Vec<String>,
    vectors: Vec<f64>,
    index: HashMap<String, usize>,
    classes: HashMap<String, EntityClass>,
}

impl EmbeddingTable {
    /// Build a table from in-memory entries.
    pub fn from_entries<I, S>(dimension: usize, entries: I) -> Result<Self, EmbeddingError>
    where
        I: IntoIterator<Item = (S, Vec<f64>)>,
        S: Into<String>,
    {
        if dimension == 0 {
            return Err(format_err(0, "dimension must be positive"));
        }
        let mut table = Self {
            dimension,
            tokens: Vec::new(),
            vectors: Vec::new(),
            index: HashMap::new(),
            classes: HashMap::new(),
        };
        for (i, (token, vector)) in entries.into_iter().enumerate() {
            table.push(token.into(), vector, i + 1)?;
        }
        Ok(table)
    }

    fn push(&mut self, token: String, vector: Vec<f64>, line: usize) -> Result<(), EmbeddingError> {
        if vector.len() != self.dimension {
            return Err(format_err(
                line,
                format!(
                    "token `{token}` has {} components, expected {}",
                    vector.len(),
                    self.dimension
                ),
            ));
        }
        if self.index.contains_key(&token) {
            return Err(format_err(line, format!("duplicate token `{token}`")));
        }
        self.index.insert(token.clone(), self.tokens.len());
        self.tokens.push(token);
        self.vectors.extend(vector);
        Ok(())
    }

    /// Parse the word2vec text format.
    pub fn parse_word2vec(text: &str) -> Result<Self, EmbeddingError> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, header) = lines.next().ok_or_else(|| format_err(1, "empty table file"))?;
        let mut parts = header.split_whitespace();
        let count: usize = parts
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| format_err(1, "header must be `count dim`"))?;
        let dim: usize = parts
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| format_err(1, "header must be `count dim`"))?;
        if parts.next().is_some() {
            return Err(format_err(1, "header must be `count dim`"));
        }
        if dim == 0 {
            return Err(format_err(1, "dimension must be positive"));
        }
        let mut table = Self::from_entries(dim, std::iter::empty::<(String, Vec<f64>)>())?;
        for (idx, line) in lines {
            let line_no = idx + 1;
            let mut fields = line.split_whitespace();
            let token = fields.next().expect("non-empty line has a field").to_string();
            let vector = fields
                .map(|f| {
                    f.parse::<f64>()
                        .map_err(|_| format_err(line_no, format!("bad component `{f}`")))
                })
                .collect::<Result<Vec<_>, _>>()?;
            table.push(token, vector, line_no)?;
        }
        if table.len() != count {
            return Err(format_err(
                1,
                format!("header declares {count} entries, found {}", table.len()),
            ));
        }
        Ok(table)
    }

    pub fn load_word2vec(path: &Path) -> Result<Self, EmbeddingError> {
        Self::parse_word2vec(&fs::read_to_string(path)?)
    }

    /// Attach gazetteer class tags from TSV text. Tokens may be written with
    /// spaces or underscores. Entries not present in the table are kept, so
    /// the gazetteer can also back offline NER.
    pub fn with_gazetteer_tsv(mut self, text: &str) -> Result<Self, EmbeddingError> {
        for (token, class) in parse_gazetteer(text)? {
            self.classes.insert(token, class);
        }
        Ok(self)
    }

    pub fn with_classes<I: IntoIterator<Item = (String, EntityClass)>>(mut self, classes: I) -> Self {
        for (token, class) in classes {
            self.classes.insert(entity_token(&token), class);
        }
        self
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn contains(&self, token: &str) -> bool {
        self.index.contains_key(token)
    }

    pub fn vector(&self, token: &str) -> Option<&[f64]> {
        self.index.get(token).map(|&i| self.row(i))
    }

    pub fn class_of(&self, token: &str) -> Option<EntityClass> {
        self.classes.get(token).copied()
    }

    /// Gazetteer entries as (token, class), sorted by token.
    pub fn gazetteer(&self) -> Vec<(String, EntityClass)> {
        let mut out: Vec<_> = self.classes.iter().map(|(t, c)| (t.clone(), *c)).collect();
        out.sort();
        out
    }

    fn row(&self, i: usize) -> &[f64] {
        &self.vectors[i * self.dimension..(i + 1) * self.dimension]
    }

    /// Exhaustive neighbor search.
    pub fn neighbors(&self, q: &NeighborQuery) -> Result<Vec<Neighbor>, EmbeddingError> {
        q.check()?;
        let query_vec: &[f64] = match (&q.vector, &q.token) {
            (Some(v), _) => {
                if v.len() != self.dimension {
                    return Err(EmbeddingError::Dimension {
                        left: v.len(),
                        right: self.dimension,
                    });
                }
                v
            }
            (None, Some(t)) => self
                .vector(t)
                .ok_or_else(|| EmbeddingError::UnknownToken(t.clone()))?,
            (None, None) => {
                return Err(EmbeddingError::InvalidQuery(
                    "query needs a token or a vector".into(),
                ))
            }
        };
        if let Some(class) = q.class_filter {
            if !self
                .tokens
                .iter()
                .any(|t| self.classes.get(t) == Some(&class))
            {
                return Err(EmbeddingError::EmptyCandidateSet(class));
            }
        }
        let mut scored: Vec<(f64, usize)> = self
            .tokens
            .iter()
            .enumerate()
            .filter(|(_, t)| Some(t.as_str()) != q.token.as_deref())
            .filter(|(_, t)| q.class_filter.is_none_or(|c| self.classes.get(*t) == Some(&c)))
            .map(|(i, _)| (dissimilarity(query_vec, self.row(i), q.metric), i))
            .filter(|(d, _)| match (q.mode, q.threshold) {
                (_, None) => true,
                (SearchMode::Nearest, Some(tau)) => *d <= tau,
                (SearchMode::Farthest, Some(tau)) => *d >= tau,
            })
            .collect();
        let tokens = &self.tokens;
        let order = |a: &(f64, usize), b: &(f64, usize)| -> Ordering {
            let by_dist = match q.mode {
                SearchMode::Nearest => a.0.total_cmp(&b.0),
                SearchMode::Farthest => b.0.total_cmp(&a.0),
            };
            by_dist.then_with(|| tokens[a.1].cmp(&tokens[b.1]))
        };
        if scored.len() > q.k {
            scored.select_nth_unstable_by(q.k - 1, order);
            scored.truncate(q.k);
        }
        scored.sort_by(order);
        Ok(scored
            .into_iter()
            .map(|(d, i)| Neighbor {
                token: self.tokens[i].clone(),
                distance: match q.metric {
                    Metric::Euclidean => d,
                    Metric::Cosine => 1.0 - d,
                },
            })
            .collect())
    }
}

/// Parse a two-column gazetteer TSV into (token, class) pairs.
pub fn parse_gazetteer(text: &str) -> Result<Vec<(String, EntityClass)>, EmbeddingError> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let mut cols = line.split('\t');
        let token = cols.next().unwrap_or("").trim();
        let class = cols
            .next()
            .ok_or_else(|| format_err(i + 1, "gazetteer line needs `token<TAB>class`"))?;
        if token.is_empty() {
            return Err(format_err(i + 1, "empty gazetteer token"));
        }
        out.push((entity_token(token), class.parse().expect("infallible")));
    }
    Ok(out)
}

/// A neighbor search request.
#[derive(Debug, Clone)]
pub struct NeighborQuery {
    pub token: Option<String>,
    pub vector: Option<Vec<f64>>,
    pub k: usize,
    pub metric: Metric,
    pub mode: SearchMode,
    /// Dissimilarity cutoff: Euclidean distance, or `1 - cos` for cosine.
    pub threshold: Option<f64>,
    pub class_filter: Option<EntityClass>,
}

impl NeighborQuery {
    pub fn token(token: impl Into<String>) -> Self {
        Self {
            token: Some(token.into()),
            vector: None,
            k: 5,
            metric: Metric::Euclidean,
            mode: SearchMode::Nearest,
            threshold: None,
            class_filter: None,
        }
    }

    pub fn vector(vector: Vec<f64>) -> Self {
        Self {
            token: None,
            vector: Some(vector),
            ..Self::token("")
        }
    }

    pub fn k(mut self, k: usize) -> Self {
        self.k = k;
        self
    }

    pub fn metric(mut self, metric: Metric) -> Self {
        self.metric = metric;
        self
    }

    pub fn mode(mut self, mode: SearchMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn threshold(mut self, threshold: Option<f64>) -> Self {
        self.threshold = threshold;
        self
    }

    pub fn class(mut self, class: Option<EntityClass>) -> Self {
        self.class_filter = class;
        self
    }

    fn check(&self) -> Result<(), EmbeddingError> {
        if self.k == 0 {
            return Err(EmbeddingError::InvalidQuery("k must be at least 1".into()));
        }
        if let Some(t) = self.threshold {
            if t.is_nan() || t <= 0.0 {
                return Err(EmbeddingError::InvalidQuery(
                    "threshold must be positive".into(),
                ));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Neighbor {
    pub token: String,
    /// Euclidean distance, or cosine similarity for the cosine metric.
    pub distance: f64,
}
