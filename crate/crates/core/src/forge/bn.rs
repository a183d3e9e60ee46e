use std::collections::BTreeSet;

use rand::Rng;

use super::{
    detect_numbers, gated_paraphrases, perturb_avoiding, refute_pair, ForgeConfig, ForgeContext, ForgeError,
    RefuteParts, SeedRecord,
};
use crate::corpus::{EntailmentPair, HallucinationCategory};
use crate::text;

/// Number swaps: one detected number is perturbed inside every gated
/// paraphrase that still carries it verbatim.
pub fn forge_bn<R: Rng + ?Sized>(
    seed: &SeedRecord,
    cfg: &ForgeConfig,
    ctx: &ForgeContext<'_>,
    rng: &mut R,
) -> Result<Vec<EntailmentPair>, ForgeError> {
    let cat = HallucinationCategory::BothersomeNumber;
    let found = detect_numbers(&seed.text);
    if found.is_empty() {
        return Err(ForgeError::CategoryMismatch {
            source_id: seed.source_id.clone(),
            category: cat,
            reason: "no numbers detected".into(),
        });
    }
    let target = &found[rng.random_range(0..found.len())];
    let mut used = BTreeSet::new();
    let mut pairs = Vec::new();
    for para in gated_paraphrases(ctx, cfg, &seed.text)? {
        let Some(hit) = detect_numbers(&para).into_iter().find(|m| m.surface == target.surface) else {
            log::debug!("{}: paraphrase dropped the number {}", seed.source_id, target.surface);
            continue;
        };
        let moved = perturb_avoiding(&hit, cfg.bn_mode, rng, &used);
        used.insert(moved.units);
        let Some(paraphrase) = text::replace_chars(&para, hit.span.start, hit.span.end, &moved.surface) else {
            continue;
        };
        pairs.push(refute_pair(
            seed,
            cat,
            pairs.len(),
            cfg,
            RefuteParts {
                paraphrase,
                orig_span: target.span,
                para_span: Some(moved.span),
                replaced: &target.surface,
                replacement: &moved.surface,
            },
        )?);
    }
    Ok(pairs)
}
