use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Map;

use super::{
    forge_bn, forge_if, forge_place, forge_ti, gated_paraphrases, pair_id, seed_rng, ForgeConfig, ForgeContext,
    ForgeError, SeedRecord,
};
use crate::corpus::{EntailmentLabel, EntailmentPair, HallucinationCategory};

/// A seed that produced nothing because it did not fit its engine.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Skip {
    pub source_id: String,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ForgeOutput {
    pub pairs: Vec<EntailmentPair>,
    pub skips: Vec<Skip>,
}

/// Gated paraphrases of a factual seed, labelled support, no spans.
pub fn forge_support(
    seed: &SeedRecord,
    category: HallucinationCategory,
    cfg: &ForgeConfig,
    ctx: &ForgeContext<'_>,
) -> Result<Vec<EntailmentPair>, ForgeError> {
    Ok(gated_paraphrases(ctx, cfg, &seed.text)?
        .into_iter()
        .enumerate()
        .map(|(i, paraphrase)| EntailmentPair {
            id: pair_id(&seed.source_id, category, i),
            llm: seed.llm.clone(),
            category,
            original: seed.text.clone(),
            paraphrase,
            label: EntailmentLabel::Support,
            orig_span: None,
            para_span: None,
            provenance: None,
            extra: Map::new(),
        })
        .collect())
}

/// Route one seed to its engine.
pub fn forge_seed(seed: &SeedRecord, cfg: &ForgeConfig, ctx: &ForgeContext<'_>) -> Result<Vec<EntailmentPair>, ForgeError> {
    let category: HallucinationCategory = seed.category.parse().map_err(|_| ForgeError::Routing {
        source_id: seed.source_id.clone(),
        tag: seed.category.clone(),
    })?;
    if !seed.hallucinated {
        return forge_support(seed, category, cfg, ctx);
    }
    let mut rng = seed_rng(cfg.rng_seed, &seed.source_id);
    match category {
        HallucinationCategory::BothersomeNumber => forge_bn(seed, cfg, ctx, &mut rng),
        HallucinationCategory::TemporalIssue => forge_ti(seed, cfg, ctx, &mut rng),
        HallucinationCategory::ImaginaryFigure => forge_if(seed, cfg, ctx),
        HallucinationCategory::Place => forge_place(seed, cfg, ctx),
    }
}

/// Forge a whole seed corpus. Output order follows input order whatever the
/// scheduling; seeds run in parallel only when review is automatic.
/// Seeds that do not fit their category are skipped and reported; routing,
/// oracle and invariant failures abort.
pub fn forge_pipeline(seeds: &[SeedRecord], cfg: &ForgeConfig, ctx: &ForgeContext<'_>) -> Result<ForgeOutput, ForgeError> {
    cfg.validate()?;
    let results: Vec<_> = if ctx.reviewer.is_automatic() {
        seeds.par_iter().map(|s| forge_seed(s, cfg, ctx)).collect()
    } else {
        seeds.iter().map(|s| forge_seed(s, cfg, ctx)).collect()
    };
    let mut out = ForgeOutput::default();
    for (seed, r) in seeds.iter().zip(results) {
        match r {
            Ok(pairs) => out.pairs.extend(pairs),
            Err(e) if e.is_soft() => {
                log::info!("skipping {}: {e}", seed.source_id);
                out.skips.push(Skip {
                    source_id: seed.source_id.clone(),
                    reason: e.to_string(),
                });
            }
            Err(e) => return Err(e),
        }
    }
    Ok(out)
}
