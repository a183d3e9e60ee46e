//! Paraphrase gating: word MED, entailment correctness and inverse-BLEU diversity.

mod metrics;
mod report;

pub use metrics::{
    bleu, bleu_tokens, bleu_with, modified_precision_counts, token_edit_distance, word_edit_distance,
    Smoothing, BLEU_MAX_ORDER,
};
pub use report::{evaluate_paraphraser, GateReport, SourceReport};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::oracle::{EntailmentOracle, OracleError, VerdictLabel};
use crate::text;

/// Candidates at or below this many word edits from the source are dropped.
pub const DEFAULT_MED_THRESHOLD: usize = 2;

#[derive(Debug, Error)]
pub enum GateError {
    #[error("text has no word tokens")]
    EmptyText,
    #[error("need at least two texts to score diversity, got {0}")]
    DegenerateSet(usize),
    #[error(transparent)]
    Oracle(#[from] OracleError),
}

/// A source claim and its paraphrase candidates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateSet {
    pub source: String,
    pub candidates: Vec<String>,
}

impl CandidateSet {
    pub fn new(source: impl Into<String>, candidates: Vec<String>) -> Self {
        Self {
            source: source.into(),
            candidates,
        }
    }

    fn with(&self, candidates: Vec<String>) -> Self {
        Self {
            source: self.source.clone(),
            candidates,
        }
    }
}

/// Keep candidates with word edit distance to the source strictly above `threshold`.
pub fn med_filter(set: &CandidateSet, threshold: usize) -> CandidateSet {
    let src = text::tokenize(&set.source);
    let kept = set
        .candidates
        .iter()
        .filter(|c| token_edit_distance(&src, &text::tokenize(c)) > threshold)
        .cloned()
        .collect();
    set.with(kept)
}

/// Keep candidates the oracle judges entailed by the source.
/// Correctness is survivors over inputs, `None` for an empty input.
pub fn correctness_filter<O: EntailmentOracle + ?Sized>(
    set: &CandidateSet,
    oracle: &O,
) -> Result<(CandidateSet, Option<f64>), GateError> {
    let mut kept = Vec::new();
    for c in &set.candidates {
        if oracle.entailment_check(&set.source, c)?.label == VerdictLabel::Entailed {
            kept.push(c.clone());
        }
    }
    let score = if set.candidates.is_empty() {
        None
    } else {
        Some(kept.len() as f64 / set.candidates.len() as f64)
    };
    Ok((set.with(kept), score))
}

/// Mean inverse BLEU over all unordered pairs of `{source} ∪ candidates`.
///
/// Exact-string duplicates are removed first. Each pair scores the mean of
/// both BLEU directions. A set whose texts are all the same string scores 1.
pub fn diversity_score(set: &CandidateSet) -> Result<f64, GateError> {
    let total = set.candidates.len() + 1;
    if total < 2 {
        return Err(GateError::DegenerateSet(total));
    }
    let mut texts: Vec<&str> = vec![set.source.as_str()];
    for c in &set.candidates {
        if !texts.contains(&c.as_str()) {
            texts.push(c);
        }
    }
    let toks: Vec<Vec<String>> = texts.iter().map(|t| text::tokenize(t)).collect();
    if toks.iter().any(Vec::is_empty) {
        return Err(GateError::EmptyText);
    }
    if toks.len() < 2 {
        return Ok(1.0);
    }
    let mut sum = 0.0;
    let mut pairs = 0usize;
    for i in 0..toks.len() {
        for j in i + 1..toks.len() {
            let ab = bleu_tokens(&toks[i], &toks[j], Smoothing::AddOne)?;
            let ba = bleu_tokens(&toks[j], &toks[i], Smoothing::AddOne)?;
            sum += (1.0 / ab + 1.0 / ba) / 2.0;
            pairs += 1;
        }
    }
    Ok(sum / pairs as f64)
}

/// Result of running one candidate set through the gate.
#[derive(Debug, Clone, PartialEq)]
pub struct GateOutcome {
    pub med_survivors: CandidateSet,
    pub survivors: CandidateSet,
    pub correctness: Option<f64>,
}

/// MED then correctness, with a fixed threshold. Shared by the forge.
#[derive(Debug, Clone, Copy)]
pub struct Gate {
    pub med_threshold: usize,
}

impl Default for Gate {
    fn default() -> Self {
        Self {
            med_threshold: DEFAULT_MED_THRESHOLD,
        }
    }
}

impl Gate {
    pub fn run<O: EntailmentOracle + ?Sized>(&self, set: &CandidateSet, oracle: &O) -> Result<GateOutcome, GateError> {
        let med = med_filter(set, self.med_threshold);
        let (survivors, correctness) = correctness_filter(&med, oracle)?;
        Ok(GateOutcome {
            med_survivors: med,
            survivors,
            correctness,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::StubEntailment;

    fn set(src: &str, cands: &[&str]) -> CandidateSet {
        CandidateSet::new(src, cands.iter().map(|s| s.to_string()).collect())
    }

    #[test]
    fn med_boundary_two_dropped_three_kept() {
        let s = set(
            "a b c d e f",
            &["a b c d x y", "a b c x y z", "a b c d e f"],
        );
        let kept = med_filter(&s, DEFAULT_MED_THRESHOLD);
        assert_eq!(kept.candidates, ["a b c x y z"]);
        assert_eq!(med_filter(&kept, 2), kept);
    }

    #[test]
    fn correctness_empty_is_null() {
        let (out, c) = correctness_filter(&set("a b", &[]), &StubEntailment::default()).unwrap();
        assert!(out.candidates.is_empty());
        assert_eq!(c, None);
    }

    #[test]
    fn correctness_all_contradicted() {
        let s = set("sales rose 8 percent", &["sales rose 9 percent", "sales rose 12 percent"]);
        let (out, c) = correctness_filter(&s, &StubEntailment::default()).unwrap();
        assert!(out.candidates.is_empty());
        assert_eq!(c, Some(0.0));
    }

    #[test]
    fn correctness_keeps_high_overlap_rewording() {
        let s = set(
            "one two three four five six seven eight nine",
            &["one two three four five six seven eight nine ten"],
        );
        let (out, c) = correctness_filter(&s, &StubEntailment::default()).unwrap();
        assert_eq!(out.candidates.len(), 1);
        assert_eq!(c, Some(1.0));
    }

    #[test]
    fn diversity_identical_is_one() {
        let s = set("the cat sat on the mat", &["the cat sat on the mat", "the cat sat on the mat"]);
        assert_eq!(diversity_score(&s).unwrap(), 1.0);
        // same tokens, different strings
        let s = set("The cat sat on the mat.", &["the cat sat on the mat"]);
        assert_eq!(diversity_score(&s).unwrap(), 1.0);
    }

    #[test]
    fn diversity_needs_two_texts() {
        assert!(matches!(diversity_score(&set("a b c", &[])), Err(GateError::DegenerateSet(1))));
    }

    #[test]
    fn diversity_three_text_hand_fixture() {
        // A = "the cat sat on the mat" (6), B = "the cat sat on mat" (5), C = "a dog ran" (3)
        // bleu(B,A): p = 5/5, 3/4, 2/3, 1/2 ("on mat" is not in A); BP = exp(1-6/5)
        // bleu(A,B): p = 5/6 (one "the" clipped), 3/5, 2/4, 1/3; BP = 1
        // A,C and B,C share nothing; every order uses 1/(total+1).
        //   bleu(C,A): p = 1/4,1/3,1/2,1/1; BP = exp(1-6/3)
        //   bleu(A,C): p = 1/7,1/6,1/5,1/4; BP = 1
        //   bleu(C,B): p = 1/4,1/3,1/2,1/1; BP = exp(1-5/3)
        //   bleu(B,C): p = 1/6,1/5,1/4,1/3; BP = 1
        let g = |v: [f64; 4]| v.iter().product::<f64>().powf(0.25);
        let ba = (-0.2f64).exp() * g([1.0, 0.75, 2.0 / 3.0, 0.5]);
        let ab = g([5.0 / 6.0, 0.6, 0.5, 1.0 / 3.0]);
        let ca = (-1.0f64).exp() * g([0.25, 1.0 / 3.0, 0.5, 1.0]);
        let ac = g([1.0 / 7.0, 1.0 / 6.0, 0.2, 0.25]);
        let cb = (1.0f64 - 5.0 / 3.0).exp() * g([0.25, 1.0 / 3.0, 0.5, 1.0]);
        let bc = g([1.0 / 6.0, 0.2, 0.25, 1.0 / 3.0]);
        let pair = |x: f64, y: f64| (1.0 / x + 1.0 / y) / 2.0;
        let expected = (pair(ab, ba) + pair(ac, ca) + pair(bc, cb)) / 3.0;
        let s = set("the cat sat on the mat", &["the cat sat on mat", "a dog ran"]);
        let got = diversity_score(&s).unwrap();
        assert!((got - expected).abs() < 1e-9, "{got} vs {expected}");
    }

    #[test]
    fn gate_runs_med_then_correctness() {
        let s = set(
            "twitter told staff it would reduce its workforce by 8 percent",
            &[
                "twitter told staff it would reduce its workforce by 8 percent",
                "this week twitter told its staff that it would reduce the workforce by 8 percent",
                "this week twitter told its staff that it would reduce the workforce by 9 percent",
            ],
        );
        let out = Gate::default().run(&s, &StubEntailment::default()).unwrap();
        assert_eq!(out.med_survivors.candidates.len(), 2);
        assert_eq!(out.survivors.candidates.len(), 1);
        assert_eq!(out.correctness, Some(0.5));
    }
}
