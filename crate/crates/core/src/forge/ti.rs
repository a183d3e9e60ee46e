use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{gated_paraphrases, refute_pair, ForgeConfig, ForgeContext, ForgeError, RefuteParts, SeedRecord};
use crate::corpus::{EntailmentPair, HallucinationCategory, TextSpan};
use crate::embedding::EntityClass;
use crate::oracle::NerSpan;
use crate::text;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReviewState {
    Pending,
    Accepted,
    Edited,
    Rejected,
}

/// The counterpart lookup for one temporal seed: an anchor entity dated to
/// `anchor_year`, moved back by `offset` years to find who filled the same
/// role then.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TemporalSwapPlan {
    pub anchor_entity: String,
    pub anchor_span: TextSpan,
    pub anchor_year: i64,
    pub offset: i64,
    pub target_year: i64,
    pub role_question: String,
    pub replacement_entity: String,
    pub review_state: ReviewState,
}

impl TemporalSwapPlan {
    /// Offsets outside `range` are refused.
    pub fn new(
        anchor: &NerSpan,
        anchor_year: i64,
        offset: i64,
        range: [i64; 2],
    ) -> Result<Self, ForgeError> {
        check_offset(offset, range)?;
        Ok(Self {
            anchor_entity: anchor.surface.clone(),
            anchor_span: anchor.span,
            anchor_year,
            offset,
            target_year: anchor_year - offset,
            role_question: String::new(),
            replacement_entity: String::new(),
            review_state: ReviewState::Pending,
        })
    }
}

pub fn check_offset(offset: i64, [lo, hi]: [i64; 2]) -> Result<(), ForgeError> {
    if (lo..=hi).contains(&offset) {
        Ok(())
    } else {
        Err(ForgeError::OffsetOutOfRange { offset, lo, hi })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ReviewDecision {
    Accept,
    Edit(String),
    Reject,
}

/// Human (or automatic) sign-off on a temporal plan.
pub trait Reviewer: Sync {
    fn review(&self, plan: &TemporalSwapPlan) -> Result<ReviewDecision, ForgeError>;

    /// True when reviews need no terminal, so seeds may run in parallel.
    fn is_automatic(&self) -> bool {
        false
    }
}

pub struct AutoAccept;

impl Reviewer for AutoAccept {
    fn review(&self, _plan: &TemporalSwapPlan) -> Result<ReviewDecision, ForgeError> {
        Ok(ReviewDecision::Accept)
    }

    fn is_automatic(&self) -> bool {
        true
    }
}

/// Last four-digit token in `[1000, max_year]`.
pub fn parse_year(answer: &str, max_year: i64) -> Option<i64> {
    text::tokenize(answer)
        .iter()
        .filter(|t| t.len() == 4 && t.bytes().all(|b| b.is_ascii_digit()))
        .filter_map(|t| t.parse::<i64>().ok())
        .rfind(|y| (1000..=max_year).contains(y))
}

fn default_anchor_question(seed: &str) -> String {
    format!("In what year did the event in this sentence happen? {seed}")
}

fn default_role_question(anchor: &str) -> String {
    format!("Who held the role of {anchor} in {{year}}?")
}

/// The last `k` whitespace words of an answer, trimmed of edge punctuation.
fn last_words(answer: &str, k: usize) -> String {
    let words: Vec<&str> = answer
        .split_whitespace()
        .map(|w| w.trim_matches(|c: char| !c.is_alphanumeric()))
        .filter(|w| !w.is_empty())
        .collect();
    words[words.len().saturating_sub(k)..].join(" ")
}

/// Build and fill a plan, without review. `Ok(None)` when the seed has no
/// usable anchor entity.
pub fn plan_temporal_swap<R: Rng + ?Sized>(
    seed: &SeedRecord,
    cfg: &ForgeConfig,
    ctx: &ForgeContext<'_>,
    rng: &mut R,
) -> Result<TemporalSwapPlan, ForgeError> {
    let spans = ctx.ner.ner_extract(&seed.text)?;
    let Some(anchor) = spans.into_iter().find(|s| s.entity_class != EntityClass::Location) else {
        return Err(ForgeError::CategoryMismatch {
            source_id: seed.source_id.clone(),
            category: HallucinationCategory::TemporalIssue,
            reason: "no person or organisation to anchor on".into(),
        });
    };
    let question = seed
        .anchor_question
        .clone()
        .unwrap_or_else(|| default_anchor_question(&seed.text));
    let answer = ctx.qa.answer_question(&question)?;
    let year = parse_year(&answer, cfg.max_year()).ok_or(ForgeError::NoAnchorYear { answer })?;
    let [lo, hi] = cfg.ti_offset_range;
    let offset = match seed.ti_offset {
        Some(o) => match check_offset(o, cfg.ti_offset_range) {
            Ok(()) => o,
            Err(e) => {
                log::warn!("{}: {e}; drawing a new offset", seed.source_id);
                rng.random_range(lo..=hi)
            }
        },
        None => rng.random_range(lo..=hi),
    };
    let mut plan = TemporalSwapPlan::new(&anchor, year, offset, cfg.ti_offset_range)?;
    let template = seed
        .role_question
        .clone()
        .unwrap_or_else(|| default_role_question(&plan.anchor_entity));
    plan.role_question = template.replace("{year}", &plan.target_year.to_string());
    let who = ctx.qa.answer_question(&plan.role_question)?;
    plan.replacement_entity = last_words(&who, plan.anchor_entity.split_whitespace().count());
    Ok(plan)
}

/// Temporal swaps: the anchor entity is replaced by a counterpart from
/// `offset` years earlier in every gated paraphrase.
pub fn forge_ti<R: Rng + ?Sized>(
    seed: &SeedRecord,
    cfg: &ForgeConfig,
    ctx: &ForgeContext<'_>,
    rng: &mut R,
) -> Result<Vec<EntailmentPair>, ForgeError> {
    let mut plan = plan_temporal_swap(seed, cfg, ctx, rng)?;
    match ctx.reviewer.review(&plan)? {
        ReviewDecision::Accept => plan.review_state = ReviewState::Accepted,
        ReviewDecision::Edit(s) if !s.trim().is_empty() => {
            plan.replacement_entity = s.trim().to_string();
            plan.review_state = ReviewState::Edited;
        }
        ReviewDecision::Edit(_) | ReviewDecision::Reject => {
            plan.review_state = ReviewState::Rejected;
        }
    }
    if plan.review_state == ReviewState::Rejected {
        return Ok(Vec::new());
    }
    if plan.replacement_entity.is_empty() || plan.replacement_entity == plan.anchor_entity {
        log::warn!("{}: plan has no distinct replacement", seed.source_id);
        return Ok(Vec::new());
    }
    let cat = HallucinationCategory::TemporalIssue;
    let mut pairs = Vec::new();
    for para in gated_paraphrases(ctx, cfg, &seed.text)? {
        let hits = text::find_word_bounded(&para, &plan.anchor_entity);
        let Some(&first) = hits.first() else {
            continue;
        };
        let width = text::char_len(&plan.anchor_entity);
        let mut swapped = para.clone();
        for &h in hits.iter().rev() {
            swapped = text::replace_chars(&swapped, h, h + width, &plan.replacement_entity)
                .expect("hit offsets lie inside the paraphrase");
        }
        pairs.push(refute_pair(
            seed,
            cat,
            pairs.len(),
            cfg,
            RefuteParts {
                paraphrase: swapped,
                orig_span: plan.anchor_span,
                para_span: Some(TextSpan::at(first, &plan.replacement_entity)),
                replaced: &plan.anchor_entity,
                replacement: &plan.replacement_entity,
            },
        )?);
    }
    Ok(pairs)
}
