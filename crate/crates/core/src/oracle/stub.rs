use std::collections::{BTreeMap, BTreeSet};

use super::{EntailmentOracle, EntailmentVerdict, OracleError, VerdictLabel};
use crate::text;

/// Deterministic offline entailment oracle.
///
/// Rules, applied in order over case-folded word tokens:
/// 1. identical token sequences: entailed, score 1.0;
/// 2. the multisets of purely numeric tokens differ: contradicted, score = Jaccard;
/// 3. token-set Jaccard below `neutral_below`: neutral, score = 1 - Jaccard;
/// 4. otherwise: entailed, score = Jaccard.
#[derive(Debug, Clone, Copy)]
pub struct StubEntailment {
    pub neutral_below: f64,
}

impl Default for StubEntailment {
    fn default() -> Self {
        Self { neutral_below: 0.2 }
    }
}

/// Token-set Jaccard overlap; two token-less texts overlap fully.
pub fn jaccard(a: &[String], b: &[String]) -> f64 {
    let sa: BTreeSet<&str> = a.iter().map(String::as_str).collect();
    let sb: BTreeSet<&str> = b.iter().map(String::as_str).collect();
    let union = sa.union(&sb).count();
    if union == 0 {
        return 1.0;
    }
    sa.intersection(&sb).count() as f64 / union as f64
}

fn numeric_bag(tokens: &[String]) -> BTreeMap<&str, usize> {
    let mut bag = BTreeMap::new();
    for t in tokens.iter().filter(|t| t.chars().all(|c| c.is_ascii_digit())) {
        *bag.entry(t.as_str()).or_insert(0) += 1;
    }
    bag
}

impl StubEntailment {
    pub fn verdict(&self, premise: &str, hypothesis: &str) -> EntailmentVerdict {
        let p = text::tokenize(premise);
        let h = text::tokenize(hypothesis);
        if p == h {
            return EntailmentVerdict {
                label: VerdictLabel::Entailed,
                score: 1.0,
            };
        }
        let j = jaccard(&p, &h);
        if numeric_bag(&p) != numeric_bag(&h) {
            return EntailmentVerdict {
                label: VerdictLabel::Contradicted,
                score: j,
            };
        }
        if j < self.neutral_below {
            EntailmentVerdict {
                label: VerdictLabel::Neutral,
                score: 1.0 - j,
            }
        } else {
            EntailmentVerdict {
                label: VerdictLabel::Entailed,
                score: j,
            }
        }
    }
}

impl EntailmentOracle for StubEntailment {
    fn entailment_check(&self, premise: &str, hypothesis: &str) -> Result<EntailmentVerdict, OracleError> {
        if premise.trim().is_empty() || hypothesis.trim().is_empty() {
            return Err(OracleError::InvalidRequest("empty premise or hypothesis".into()));
        }
        Ok(self.verdict(premise, hypothesis))
    }
}
