//! Scoring detector predictions against gold pairs, plus the loss functions
//! used to train span and label heads.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{EntailmentLabel, EntailmentPair, HallucinationCategory, TextSpan};
use crate::text;

const ORDER: [HallucinationCategory; 4] = HallucinationCategory::REPORT_ORDER;

/// Stored averages may differ from recomputed ones by at most this much.
pub const MACRO_TOLERANCE: f64 = 1e-9;
pub const DEFAULT_DICE_EPS: f64 = 1.0;
pub const DEFAULT_PROB_FLOOR: f64 = 1e-12;
/// Allowed deviation of a probability vector's sum from 1.
pub const PROB_SUM_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Error, PartialEq)]
pub enum EvalError {
    #[error("prediction {0} has no gold record")]
    Join(String),
    #[error("duplicate prediction id {0}")]
    DuplicatePrediction(String),
    #[error("span [{start},{end}) does not index the sentence")]
    Span { start: usize, end: usize },
    #[error("length mismatch: {left} vs {right}")]
    Dimension { left: usize, right: usize },
    #[error("class index {index} out of range for {len} classes")]
    Index { index: usize, len: usize },
    #[error("not a probability vector: {0}")]
    NotDistribution(String),
    #[error("schema mismatch: {0}")]
    Schema(String),
}

/// One detector output, joined to gold by `id`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredRecord {
    pub id: String,
    pub label: EntailmentLabel,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub category: Option<HallucinationCategory>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub orig_span: Option<TextSpan>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub para_span: Option<TextSpan>,
    /// Soft scores per head, then per class.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scores: Option<BTreeMap<String, BTreeMap<String, f64>>>,
}

impl PredRecord {
    pub fn check_scores(&self) -> Result<(), EvalError> {
        for (head, dist) in self.scores.iter().flatten() {
            let v: Vec<f64> = dist.values().copied().collect();
            check_distribution(&v).map_err(|e| EvalError::NotDistribution(format!("{} head {head}: {e}", self.id)))?;
        }
        Ok(())
    }
}

/// Which gold records count towards accuracy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AccuracyScope {
    All,
    RefuteOnly,
}

/// Per-category accuracy with a recomputed macro average.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryAccuracyTable {
    pub name: String,
    pub accuracy: BTreeMap<HallucinationCategory, Option<f64>>,
    #[serde(rename = "macro")]
    pub macro_avg: Option<f64>,
}

fn mean_defined(values: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let v: Vec<f64> = values.flatten().collect();
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

impl CategoryAccuracyTable {
    pub fn new(name: impl Into<String>, accuracy: BTreeMap<HallucinationCategory, Option<f64>>) -> Self {
        let mut accuracy = accuracy;
        for c in ORDER {
            accuracy.entry(c).or_insert(None);
        }
        let macro_avg = mean_defined(ORDER.iter().map(|c| accuracy[c]));
        Self {
            name: name.into(),
            accuracy,
            macro_avg,
        }
    }

    /// From values listed in report order (IF, P, BN, TI).
    pub fn from_report_order(name: impl Into<String>, values: [f64; 4]) -> Self {
        Self::new(name, ORDER.into_iter().zip(values.map(Some)).collect())
    }

    /// Rebuild a table read from disk, rejecting a stored macro average that
    /// disagrees with its cells.
    pub fn checked(self) -> Result<Self, EvalError> {
        let fresh = Self::new(self.name.clone(), self.accuracy.clone());
        match (self.macro_avg, fresh.macro_avg) {
            (Some(s), Some(f)) if (s - f).abs() > MACRO_TOLERANCE => Err(EvalError::Schema(format!(
                "{}: stored average {s} but cells average {f}",
                self.name
            ))),
            (Some(_), None) => Err(EvalError::Schema(format!("{}: average given without cells", self.name))),
            _ => Ok(fresh),
        }
    }

    pub fn get(&self, c: HallucinationCategory) -> Option<f64> {
        self.accuracy.get(&c).copied().flatten()
    }
}

/// Accuracy of predicted labels within each gold category. Gold records
/// without a prediction count as wrong; an empty category is `None` and
/// left out of the macro average.
pub fn category_accuracy(
    name: &str,
    gold: &[EntailmentPair],
    pred: &[PredRecord],
    scope: AccuracyScope,
) -> Result<CategoryAccuracyTable, EvalError> {
    let by_id = index_predictions(gold, pred)?;
    let mut tally: BTreeMap<HallucinationCategory, (usize, usize)> = BTreeMap::new();
    for g in gold {
        if scope == AccuracyScope::RefuteOnly && g.label != EntailmentLabel::Refute {
            continue;
        }
        let t = tally.entry(g.category).or_default();
        t.1 += 1;
        if by_id.get(g.id.as_str()).is_some_and(|p| p.label == g.label) {
            t.0 += 1;
        }
    }
    let mut acc = BTreeMap::new();
    for c in ORDER {
        let v = tally.get(&c).map(|&(ok, n)| ok as f64 / n as f64);
        if v.is_none() {
            log::warn!("{name}: no gold records for {}; left out of the average", c.display_name());
        }
        acc.insert(c, v);
    }
    Ok(CategoryAccuracyTable::new(name, acc))
}

fn index_predictions<'a>(gold: &[EntailmentPair], pred: &'a [PredRecord]) -> Result<HashMap<&'a str, &'a PredRecord>, EvalError> {
    let ids: HashSet<&str> = gold.iter().map(|g| g.id.as_str()).collect();
    let mut by_id = HashMap::new();
    for p in pred {
        if !ids.contains(p.id.as_str()) {
            return Err(EvalError::Join(p.id.clone()));
        }
        if by_id.insert(p.id.as_str(), p).is_some() {
            return Err(EvalError::DuplicatePrediction(p.id.clone()));
        }
    }
    Ok(by_id)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpanScore {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

fn covered(sentence: &str, span: TextSpan) -> Result<HashSet<usize>, EvalError> {
    if !span.is_valid_for(sentence) {
        return Err(EvalError::Span {
            start: span.start,
            end: span.end,
        });
    }
    Ok(text::tokenize_with_offsets(sentence)
        .iter()
        .enumerate()
        .filter(|(_, t)| t.start < span.end && t.end > span.start)
        .map(|(i, _)| i)
        .collect())
}

/// Precision, recall and F1 between the word tokens each span touches.
pub fn span_token_f1(gold: TextSpan, pred: TextSpan, sentence: &str) -> Result<SpanScore, EvalError> {
    let g = covered(sentence, gold)?;
    let p = covered(sentence, pred)?;
    if g.is_empty() && p.is_empty() {
        return Ok(SpanScore {
            precision: 1.0,
            recall: 1.0,
            f1: 1.0,
        });
    }
    let hit = g.intersection(&p).count() as f64;
    let precision = if p.is_empty() { 0.0 } else { hit / p.len() as f64 };
    let recall = if g.is_empty() { 0.0 } else { hit / g.len() as f64 };
    let f1 = if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    };
    Ok(SpanScore { precision, recall, f1 })
}

/// Mean span scores over gold refute pairs whose prediction carries a span.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SpanSummary {
    pub orig: Option<SpanScore>,
    pub orig_count: usize,
    pub para: Option<SpanScore>,
    pub para_count: usize,
}

fn mean_scores(v: &[SpanScore]) -> Option<SpanScore> {
    if v.is_empty() {
        return None;
    }
    let n = v.len() as f64;
    Some(SpanScore {
        precision: v.iter().map(|s| s.precision).sum::<f64>() / n,
        recall: v.iter().map(|s| s.recall).sum::<f64>() / n,
        f1: v.iter().map(|s| s.f1).sum::<f64>() / n,
    })
}

pub fn span_summary(gold: &[EntailmentPair], pred: &[PredRecord]) -> Result<SpanSummary, EvalError> {
    let by_id = index_predictions(gold, pred)?;
    let (mut o, mut p) = (Vec::new(), Vec::new());
    for g in gold.iter().filter(|g| g.label == EntailmentLabel::Refute) {
        let Some(pr) = by_id.get(g.id.as_str()) else {
            continue;
        };
        if let (Some(gs), Some(ps)) = (g.orig_span, pr.orig_span) {
            o.push(span_token_f1(gs, ps, &g.original)?);
        }
        if let (Some(gs), Some(ps)) = (g.para_span, pr.para_span) {
            p.push(span_token_f1(gs, ps, &g.paraphrase)?);
        }
    }
    Ok(SpanSummary {
        orig: mean_scores(&o),
        orig_count: o.len(),
        para: mean_scores(&p),
        para_count: p.len(),
    })
}

/// `1 - (2 sum(p g) + eps) / (sum(p) + sum(g) + eps)`; an all-zero input with
/// `eps = 0` scores 0.
pub fn dice_loss(pred: &[f64], gold: &[f64], eps: f64) -> Result<f64, EvalError> {
    if pred.len() != gold.len() {
        return Err(EvalError::Dimension {
            left: pred.len(),
            right: gold.len(),
        });
    }
    if let Some(bad) = pred.iter().find(|p| !(0.0..=1.0).contains(*p)) {
        return Err(EvalError::NotDistribution(format!("entry {bad} outside [0,1]")));
    }
    let inter: f64 = pred.iter().zip(gold).map(|(p, g)| p * g).sum();
    let denom = pred.iter().sum::<f64>() + gold.iter().sum::<f64>() + eps;
    if denom == 0.0 {
        return Ok(0.0);
    }
    Ok(1.0 - (2.0 * inter + eps) / denom)
}

fn check_distribution(pred: &[f64]) -> Result<(), EvalError> {
    if pred.iter().any(|p| p.is_nan() || *p < 0.0) {
        return Err(EvalError::NotDistribution("negative or NaN entry".into()));
    }
    let s: f64 = pred.iter().sum();
    if (s - 1.0).abs() > PROB_SUM_TOLERANCE {
        return Err(EvalError::NotDistribution(format!("sums to {s}")));
    }
    Ok(())
}

/// `-ln pred[gold]`, with the probability floored at 1e-12.
pub fn cross_entropy_loss(pred: &[f64], gold: usize) -> Result<f64, EvalError> {
    cross_entropy_with(pred, gold, DEFAULT_PROB_FLOOR)
}

pub fn cross_entropy_with(pred: &[f64], gold: usize, floor: f64) -> Result<f64, EvalError> {
    if gold >= pred.len() {
        return Err(EvalError::Index {
            index: gold,
            len: pred.len(),
        });
    }
    check_distribution(pred)?;
    Ok(-pred[gold].max(floor).ln())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MacroDelta {
    pub name: String,
    pub absolute: Option<f64>,
    /// Relative to the first table's average; `None` if that is zero.
    pub relative: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectorComparison {
    pub tables: Vec<CategoryAccuracyTable>,
    pub deltas: Vec<MacroDelta>,
}

/// Side-by-side tables with macro deltas against the first one.
pub fn compare_detectors(tables: &[CategoryAccuracyTable]) -> Result<DetectorComparison, EvalError> {
    let Some(base) = tables.first() else {
        return Err(EvalError::Schema("no tables to compare".into()));
    };
    let coverage = |t: &CategoryAccuracyTable| -> Vec<bool> { ORDER.iter().map(|&c| t.get(c).is_some()).collect() };
    let want = coverage(base);
    let mut deltas = Vec::new();
    for t in tables {
        if coverage(t) != want {
            return Err(EvalError::Schema(format!("{} covers different categories than {}", t.name, base.name)));
        }
        let absolute = t.macro_avg.zip(base.macro_avg).map(|(m, b)| m - b);
        let relative = absolute.zip(base.macro_avg).and_then(|(d, b)| (b != 0.0).then(|| d / b));
        deltas.push(MacroDelta {
            name: t.name.clone(),
            absolute,
            relative,
        });
    }
    Ok(DetectorComparison {
        tables: tables.to_vec(),
        deltas,
    })
}

fn fmt_cell(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), |x| format!("{x:.3}"))
}

/// Aligned table with columns IF, P, BN, TI, Avg.
pub fn render_tables(tables: &[CategoryAccuracyTable]) -> String {
    let mut header = vec!["Technique".to_string()];
    header.extend(ORDER.iter().map(|c| c.display_name().to_string()));
    header.push("Avg.".into());
    let rows: Vec<Vec<String>> = tables
        .iter()
        .map(|t| {
            let mut r = vec![t.name.clone()];
            r.extend(ORDER.iter().map(|&c| fmt_cell(t.get(c))));
            r.push(fmt_cell(t.macro_avg));
            r
        })
        .collect();
    let mut widths: Vec<usize> = header.iter().map(|h| h.chars().count()).collect();
    for r in &rows {
        for (w, c) in widths.iter_mut().zip(r) {
            *w = (*w).max(c.chars().count());
        }
    }
    let mut out = String::new();
    for r in std::iter::once(&header).chain(&rows) {
        let mut line = format!("{:<w$}", r[0], w = widths[0]);
        for (c, w) in r.iter().zip(&widths).skip(1) {
            let _ = write!(line, "  {c:>w$}");
        }
        out.push_str(line.trim_end());
        out.push('\n');
    }
    out
}

impl DetectorComparison {
    pub fn render(&self) -> String {
        let mut out = render_tables(&self.tables);
        for d in self.deltas.iter().skip(1) {
            let abs = d.absolute.map_or("-".into(), |x| format!("{x:+.3}"));
            let rel = d.relative.map_or("-".into(), |x| format!("{:+.1}%", x * 100.0));
            let _ = writeln!(out, "{}: macro delta {abs} ({rel} relative)", d.name);
        }
        out
    }
}
