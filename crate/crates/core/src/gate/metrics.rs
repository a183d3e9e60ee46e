//! Word-level edit distance and sentence BLEU.

use std::collections::HashMap;

use super::GateError;
use crate::text;

/// Levenshtein distance over word tokens.
pub fn word_edit_distance(a: &str, b: &str) -> usize {
    token_edit_distance(&text::tokenize(a), &text::tokenize(b))
}

pub fn token_edit_distance<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    if a.is_empty() {
        return b.len();
    }
    if b.is_empty() {
        return a.len();
    }
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0; b.len() + 1];
    for (i, x) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, y) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(x != y);
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// Highest n-gram order used by BLEU.
pub const BLEU_MAX_ORDER: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Smoothing {
    /// Orders with zero matches use `1 / (total + 1)` instead of 0.
    #[default]
    AddOne,
    /// Plain BLEU: any zero-match order makes the score 0.
    None,
}

fn ngram_counts(tokens: &[String], n: usize) -> HashMap<&[String], usize> {
    let mut counts = HashMap::new();
    if tokens.len() >= n {
        for w in tokens.windows(n) {
            *counts.entry(w).or_insert(0) += 1;
        }
    }
    counts
}

/// Clipped n-gram matches and total hypothesis n-grams for order `n`.
pub fn modified_precision_counts(hyp: &[String], reference: &[String], n: usize) -> (usize, usize) {
    let h = ngram_counts(hyp, n);
    let r = ngram_counts(reference, n);
    let matches = h
        .iter()
        .map(|(g, c)| (*c).min(r.get(g).copied().unwrap_or(0)))
        .sum();
    let total = hyp.len().saturating_sub(n - 1);
    (matches, total)
}

/// Sentence BLEU with orders 1..=4, uniform weights, add-one smoothing on
/// zero-match orders and the standard brevity penalty.
pub fn bleu(hypothesis: &str, reference: &str) -> Result<f64, GateError> {
    bleu_with(hypothesis, reference, Smoothing::AddOne)
}

pub fn bleu_with(hypothesis: &str, reference: &str, smoothing: Smoothing) -> Result<f64, GateError> {
    let hyp = text::tokenize(hypothesis);
    let reference_toks = text::tokenize(reference);
    bleu_tokens(&hyp, &reference_toks, smoothing)
}

pub fn bleu_tokens(hyp: &[String], reference: &[String], smoothing: Smoothing) -> Result<f64, GateError> {
    if hyp.is_empty() || reference.is_empty() {
        return Err(GateError::EmptyText);
    }
    let mut log_sum = 0.0;
    for n in 1..=BLEU_MAX_ORDER {
        let (m, t) = modified_precision_counts(hyp, reference, n);
        let p = if m > 0 {
            m as f64 / t as f64
        } else {
            match smoothing {
                Smoothing::AddOne => 1.0 / (t as f64 + 1.0),
                Smoothing::None => return Ok(0.0),
            }
        };
        log_sum += p.ln() / BLEU_MAX_ORDER as f64;
    }
    let c = hyp.len() as f64;
    let r = reference.len() as f64;
    let bp = if c > r { 1.0 } else { (1.0 - r / c).exp() };
    Ok(bp * log_sum.exp())
}
