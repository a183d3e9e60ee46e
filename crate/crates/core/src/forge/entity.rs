use serde::{Deserialize, Serialize};

use super::{gated_paraphrases, refute_pair, ForgeConfig, ForgeContext, ForgeError, RefuteParts, SeedRecord};
use crate::corpus::{EntailmentPair, HallucinationCategory, TextSpan};
use crate::embedding::{entity_token, token_surface, EmbeddingError, EntityClass, NeighborQuery, SearchMode};
use crate::oracle::NerSpan;
use crate::text;

/// Replacement candidates for one recognised entity, best first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntitySwapPlan {
    pub original_entity: NerSpan,
    pub candidates: Vec<String>,
    pub chosen: Option<String>,
}

struct Flavor {
    category: HallucinationCategory,
    class: EntityClass,
    mode: SearchMode,
    /// Emit original-side-only pairs when no candidate exists.
    fallback: bool,
}

const PERSON: Flavor = Flavor {
    category: HallucinationCategory::ImaginaryFigure,
    class: EntityClass::Person,
    mode: SearchMode::Nearest,
    fallback: true,
};

const PLACE: Flavor = Flavor {
    category: HallucinationCategory::Place,
    class: EntityClass::Location,
    mode: SearchMode::Farthest,
    fallback: false,
};

/// One plan per entity of `class` in the seed. A token missing from the
/// table, or an empty class, leaves the plan without candidates.
pub fn plan_entity_swaps(
    seed: &str,
    class: EntityClass,
    cfg: &ForgeConfig,
    ctx: &ForgeContext<'_>,
) -> Result<Vec<EntitySwapPlan>, ForgeError> {
    let (mode, tau) = match class {
        EntityClass::Location => (SearchMode::Farthest, cfg.tau_far),
        _ => (SearchMode::Nearest, cfg.tau_near),
    };
    let mut plans = Vec::new();
    for span in ctx.ner.ner_extract(seed)? {
        if span.entity_class != class {
            continue;
        }
        let candidates = match ctx.table {
            None => Vec::new(),
            Some(table) => {
                let q = NeighborQuery::token(entity_token(&span.surface))
                    .k(cfg.variants_per_entity)
                    .metric(cfg.metric)
                    .mode(mode)
                    .threshold(tau)
                    .class(Some(class));
                match table.neighbors(&q) {
                    Ok(found) => found
                        .into_iter()
                        .map(|n| n.token)
                        .filter(|t| token_surface(t) != span.surface)
                        .collect(),
                    Err(EmbeddingError::UnknownToken(_) | EmbeddingError::EmptyCandidateSet(_)) => Vec::new(),
                    Err(e) => return Err(e.into()),
                }
            }
        };
        plans.push(EntitySwapPlan {
            original_entity: span,
            candidates,
            chosen: None,
        });
    }
    Ok(plans)
}

fn forge_entities(
    flavor: &Flavor,
    seed: &SeedRecord,
    cfg: &ForgeConfig,
    ctx: &ForgeContext<'_>,
) -> Result<Vec<EntailmentPair>, ForgeError> {
    debug_assert_eq!(flavor.mode == SearchMode::Farthest, flavor.class == EntityClass::Location);
    let mut pairs = Vec::new();
    for plan in plan_entity_swaps(&seed.text, flavor.class, cfg, ctx)? {
        let orig = &plan.original_entity;
        if plan.candidates.is_empty() {
            if !flavor.fallback {
                continue;
            }
            for para in gated_paraphrases(ctx, cfg, &seed.text)? {
                pairs.push(refute_pair(
                    seed,
                    flavor.category,
                    pairs.len(),
                    cfg,
                    RefuteParts {
                        paraphrase: para,
                        orig_span: orig.span,
                        para_span: None,
                        replaced: &orig.surface,
                        replacement: "",
                    },
                )?);
            }
            continue;
        }
        for token in &plan.candidates {
            let replacement = token_surface(token);
            let Some(variant) = text::replace_chars(&seed.text, orig.span.start, orig.span.end, &replacement) else {
                continue;
            };
            for para in gated_paraphrases(ctx, cfg, &variant)? {
                let Some(&at) = text::find_word_bounded(&para, &replacement).first() else {
                    continue;
                };
                pairs.push(refute_pair(
                    seed,
                    flavor.category,
                    pairs.len(),
                    cfg,
                    RefuteParts {
                        paraphrase: para,
                        orig_span: orig.span,
                        para_span: Some(TextSpan::at(at, &replacement)),
                        replaced: &orig.surface,
                        replacement: &replacement,
                    },
                )?);
            }
        }
    }
    Ok(pairs)
}

/// Person swaps with the nearest person-class neighbours. With no
/// neighbour available, gated paraphrases of the seed are emitted with only
/// the original entity marked.
pub fn forge_if(seed: &SeedRecord, cfg: &ForgeConfig, ctx: &ForgeContext<'_>) -> Result<Vec<EntailmentPair>, ForgeError> {
    forge_entities(&PERSON, seed, cfg, ctx)
}

/// Place swaps with the farthest location-class neighbours.
pub fn forge_place(seed: &SeedRecord, cfg: &ForgeConfig, ctx: &ForgeContext<'_>) -> Result<Vec<EntailmentPair>, ForgeError> {
    forge_entities(&PLACE, seed, cfg, ctx)
}
