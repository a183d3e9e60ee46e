//! Category-specific forging of refute pairs from seed sentences, plus the
//! paraphrase-only support path for factual seeds.

mod bn;
mod config;
mod entity;
mod numbers;
mod pipeline;
mod ti;

pub use bn::forge_bn;
pub use config::{BnMode, ForgeConfig};
pub use entity::{forge_if, forge_place, plan_entity_swaps, EntitySwapPlan};
pub use numbers::{detect_numbers, perturb_avoiding, perturb_number, render, NumberMatch, NumberStyle, StyleKind};
pub use pipeline::{forge_pipeline, forge_seed, forge_support, ForgeOutput, Skip};
pub use ti::{
    check_offset, forge_ti, parse_year, plan_temporal_swap, AutoAccept, ReviewDecision, ReviewState, Reviewer, TemporalSwapPlan,
};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::Map;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::corpus::{EntailmentLabel, EntailmentPair, HallucinationCategory, ProvenanceTag, SchemaRule, TextSpan};
use crate::embedding::{EmbeddingError, EmbeddingTable};
use crate::gate::{CandidateSet, Gate, GateError};
use crate::oracle::{EntailmentOracle, EntityRecognizer, OracleError, Paraphraser, QuestionAnswerer};

#[derive(Debug, Error)]
pub enum ForgeError {
    #[error("seed {source_id} does not fit category {category}: {reason}")]
    CategoryMismatch {
        source_id: String,
        category: HallucinationCategory,
        reason: String,
    },
    #[error("no anchor year in answer `{answer}`")]
    NoAnchorYear { answer: String },
    #[error("temporal offset {offset} outside [{lo},{hi}]")]
    OffsetOutOfRange { offset: i64, lo: i64, hi: i64 },
    #[error("seed {source_id}: unknown category tag `{tag}`")]
    Routing { source_id: String, tag: String },
    #[error("invalid forge config: {0}")]
    Config(String),
    #[error("forged pair {id} breaks `{}`", rule.describe())]
    Invariant { id: String, rule: SchemaRule },
    #[error("review failed: {0}")]
    Review(String),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error(transparent)]
    Gate(#[from] GateError),
    #[error(transparent)]
    Embedding(#[from] EmbeddingError),
}

impl ForgeError {
    /// Per-seed failures that skip the seed instead of aborting the run.
    pub fn is_soft(&self) -> bool {
        matches!(
            self,
            ForgeError::CategoryMismatch { .. }
                | ForgeError::NoAnchorYear { .. }
                | ForgeError::Oracle(OracleError::NoAnswer(_))
        )
    }
}

/// One input sentence. `category` stays a raw tag until routing so that an
/// unknown tag is reported against its seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedRecord {
    pub source_id: String,
    pub llm: String,
    pub text: String,
    pub hallucinated: bool,
    pub category: String,
    /// Question whose answer dates the anchor event (temporal seeds).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub anchor_question: Option<String>,
    /// Question naming the anchor's counterpart; `{year}` is substituted.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub role_question: Option<String>,
    /// A proposed offset; discarded and redrawn if out of range.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ti_offset: Option<i64>,
}

/// Everything the engines call out to.
#[derive(Clone, Copy)]
pub struct ForgeContext<'a> {
    pub paraphraser: &'a dyn Paraphraser,
    pub qa: &'a dyn QuestionAnswerer,
    pub entailment: &'a dyn EntailmentOracle,
    pub ner: &'a dyn EntityRecognizer,
    pub table: Option<&'a EmbeddingTable>,
    pub reviewer: &'a dyn Reviewer,
}

/// Deterministic per-seed stream, independent of processing order.
pub fn seed_rng(rng_seed: u64, source_id: &str) -> ChaCha8Rng {
    let mut h = Sha256::new();
    h.update(rng_seed.to_le_bytes());
    h.update(source_id.as_bytes());
    ChaCha8Rng::from_seed(h.finalize().into())
}

pub fn pair_id(source_id: &str, category: HallucinationCategory, index: usize) -> String {
    format!("{source_id}-{}-{index:03}", category.tag())
}

/// Paraphrase `sentence` and keep the candidates that pass the gate against it.
pub(crate) fn gated_paraphrases(
    ctx: &ForgeContext<'_>,
    cfg: &ForgeConfig,
    sentence: &str,
) -> Result<Vec<String>, ForgeError> {
    let paras = ctx.paraphraser.generate_paraphrases(sentence, cfg.paraphrases_per_variant)?;
    let gate = Gate {
        med_threshold: cfg.med_threshold,
    };
    let out = gate.run(&CandidateSet::new(sentence, paras), ctx.entailment)?;
    Ok(out.survivors.candidates)
}

pub(crate) struct RefuteParts<'a> {
    pub paraphrase: String,
    pub orig_span: TextSpan,
    pub para_span: Option<TextSpan>,
    pub replaced: &'a str,
    pub replacement: &'a str,
}

pub(crate) fn refute_pair(
    seed: &SeedRecord,
    category: HallucinationCategory,
    index: usize,
    cfg: &ForgeConfig,
    parts: RefuteParts<'_>,
) -> Result<EntailmentPair, ForgeError> {
    let pair = EntailmentPair {
        id: pair_id(&seed.source_id, category, index),
        llm: seed.llm.clone(),
        category,
        original: seed.text.clone(),
        paraphrase: parts.paraphrase,
        label: EntailmentLabel::Refute,
        orig_span: Some(parts.orig_span),
        para_span: parts.para_span,
        provenance: Some(ProvenanceTag {
            method: category,
            replaced_surface: parts.replaced.to_string(),
            replacement_surface: parts.replacement.to_string(),
            seed: cfg.rng_seed,
            source_id: seed.source_id.clone(),
        }),
        extra: Map::new(),
    };
    pair.validate().map_err(|rule| ForgeError::Invariant {
        id: pair.id.clone(),
        rule,
    })?;
    Ok(pair)
}
