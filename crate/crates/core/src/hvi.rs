//! Hallucination vulnerability index over a cohort of LLMs.
//!
//! A first pass scores each LLM by the share of its sentences flagged in any
//! category. A second pass weights each category count by a damping factor
//! derived from where the LLM sits in the cohort for that category, so two
//! LLMs with equal totals but different mixes come apart.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use num_rational::Ratio;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::HallucinationCategory;

const CATS: [HallucinationCategory; 4] = HallucinationCategory::ALL;

/// Default lower bound on a damping factor.
pub const DEFAULT_DELTA_FLOOR: f64 = 0.1;

#[derive(Debug, Error, PartialEq)]
pub enum HviError {
    #[error("duplicate detection for ({llm}, {sentence_id})")]
    DuplicateDetection { llm: String, sentence_id: String },
    #[error("inconsistent cohort: {0}")]
    Consistency(String),
    #[error("{llm} has U = 0")]
    DegenerateCohort { llm: String },
    #[error("flag {field} for ({llm}, {sentence_id}) is {value}, expected 0 or 1")]
    InvalidFlag {
        llm: String,
        sentence_id: String,
        field: &'static str,
        value: u8,
    },
    #[error("invalid config: {0}")]
    Config(String),
}

/// Detector output for one generated sentence.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DetectionRecord {
    pub llm: String,
    pub sentence_id: String,
    pub h_bn: u8,
    pub h_ti: u8,
    pub h_if: u8,
    pub h_p: u8,
}

impl DetectionRecord {
    /// Flags in `HallucinationCategory::ALL` order.
    pub fn flags(&self) -> [u8; 4] {
        [self.h_bn, self.h_ti, self.h_if, self.h_p]
    }

    fn check(&self) -> Result<(), HviError> {
        for (field, value) in ["h_bn", "h_ti", "h_if", "h_p"].into_iter().zip(self.flags()) {
            if value > 1 {
                return Err(HviError::InvalidFlag {
                    llm: self.llm.clone(),
                    sentence_id: self.sentence_id.clone(),
                    field,
                    value,
                });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LlmCounts {
    pub u: u64,
    /// Flagged-sentence counts in `HallucinationCategory::ALL` order.
    pub n: [u64; 4],
}

impl LlmCounts {
    pub fn total(&self) -> u64 {
        self.n.iter().sum()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CohortCounts {
    pub llms: BTreeMap<String, LlmCounts>,
}

impl CohortCounts {
    pub fn insert(&mut self, llm: impl Into<String>, u: u64, n: [u64; 4]) {
        self.llms.insert(llm.into(), LlmCounts { u, n });
    }

    pub fn check(&self) -> Result<(), HviError> {
        for (llm, c) in &self.llms {
            for (cat, &n) in CATS.iter().zip(&c.n) {
                if n > c.u {
                    return Err(HviError::Consistency(format!(
                        "{llm}: {} count {n} exceeds U = {}",
                        cat.tag(),
                        c.u
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Sum flags per LLM and category. Every LLM in `u_per_llm` appears in the
/// result even without detections.
pub fn tally_counts<I>(detections: I, u_per_llm: &BTreeMap<String, u64>) -> Result<CohortCounts, HviError>
where
    I: IntoIterator<Item = DetectionRecord>,
{
    let mut counts = CohortCounts::default();
    for (llm, &u) in u_per_llm {
        counts.insert(llm.clone(), u, [0; 4]);
    }
    let mut seen = BTreeSet::new();
    for d in detections {
        d.check()?;
        let Some(c) = counts.llms.get_mut(&d.llm) else {
            return Err(HviError::Consistency(format!("no U given for {}", d.llm)));
        };
        if !seen.insert((d.llm.clone(), d.sentence_id.clone())) {
            return Err(HviError::DuplicateDetection {
                llm: d.llm,
                sentence_id: d.sentence_id,
            });
        }
        for (n, f) in c.n.iter_mut().zip(d.flags()) {
            *n += u64::from(f);
        }
    }
    counts.check()?;
    Ok(counts)
}

/// First-pass score `100 * total / U`, exact.
pub fn initial_hvi(counts: &CohortCounts) -> Result<BTreeMap<String, Ratio<u64>>, HviError> {
    counts.check()?;
    counts
        .llms
        .iter()
        .map(|(llm, c)| {
            if c.u == 0 {
                return Err(HviError::DegenerateCohort { llm: llm.clone() });
            }
            Ok((llm.clone(), Ratio::new(100 * c.total(), c.u)))
        })
        .collect()
}

fn ratio_f64(r: &Ratio<u64>) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

/// Which cohort values the mean and spread are taken over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StatsBasis {
    /// Per category, over the LLMs' counts in that category.
    #[default]
    CategoryCounts,
    /// Over the first-pass scores, shared by all categories.
    InitialHvi,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DampingOptions {
    pub lambda: f64,
    pub floor: f64,
    pub basis: StatsBasis,
}

impl DampingOptions {
    pub fn new(lambda: f64) -> Self {
        Self {
            lambda,
            floor: DEFAULT_DELTA_FLOOR,
            basis: StatsBasis::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DampingFactors {
    pub options: DampingOptions,
    /// Per category, `HallucinationCategory::ALL` order.
    pub mu: [f64; 4],
    pub sigma: [f64; 4],
    pub rank: BTreeMap<String, [u32; 4]>,
    pub delta: BTreeMap<String, [f64; 4]>,
}

/// Population mean and standard deviation.
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (0.0, 0.0);
    }
    let n = xs.len() as f64;
    let mu = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mu) * (x - mu)).sum::<f64>() / n;
    (mu, var.sqrt())
}

/// Dense rank by descending value; equal values share a rank.
pub fn dense_rank_desc(values: &[u64]) -> Vec<u32> {
    let mut distinct: Vec<u64> = values.to_vec();
    distinct.sort_unstable_by(|a, b| b.cmp(a));
    distinct.dedup();
    values
        .iter()
        .map(|v| distinct.iter().position(|d| d == v).unwrap() as u32 + 1)
        .collect()
}

pub fn damping_factors(counts: &CohortCounts, lambda: f64) -> Result<DampingFactors, HviError> {
    damping_factors_with(counts, DampingOptions::new(lambda))
}

/// `delta = 1 + lambda * (n - mu) / (rank * sigma)` per LLM and category,
/// or 1 where `sigma` is 0, floored at `options.floor`.
pub fn damping_factors_with(counts: &CohortCounts, options: DampingOptions) -> Result<DampingFactors, HviError> {
    if !(options.lambda >= 0.0 && options.lambda.is_finite()) {
        return Err(HviError::Config(format!("lambda must be >= 0, got {}", options.lambda)));
    }
    if options.floor.is_nan() || options.floor <= 0.0 {
        return Err(HviError::Config(format!("delta floor must be > 0, got {}", options.floor)));
    }
    let names: Vec<&String> = counts.llms.keys().collect();
    let initial = initial_hvi(counts)?;
    let init_f: Vec<f64> = names.iter().map(|n| ratio_f64(&initial[*n])).collect();
    let mut mu = [0.0; 4];
    let mut sigma = [0.0; 4];
    let mut rank: BTreeMap<String, [u32; 4]> = names.iter().map(|n| ((*n).clone(), [1; 4])).collect();
    let mut delta: BTreeMap<String, [f64; 4]> = names.iter().map(|n| ((*n).clone(), [1.0; 4])).collect();
    for c in 0..4 {
        let col: Vec<u64> = names.iter().map(|n| counts.llms[*n].n[c]).collect();
        let (values, own): (Vec<f64>, &[f64]) = match options.basis {
            StatsBasis::CategoryCounts => (col.iter().map(|&v| v as f64).collect(), &[]),
            StatsBasis::InitialHvi => (init_f.clone(), &init_f),
        };
        let (m, s) = mean_std(&values);
        mu[c] = m;
        sigma[c] = s;
        let ranks = dense_rank_desc(&col);
        for (i, name) in names.iter().enumerate() {
            rank.get_mut(*name).unwrap()[c] = ranks[i];
            if s > 0.0 && options.lambda > 0.0 {
                let x = if own.is_empty() { values[i] } else { own[i] };
                let d = 1.0 + options.lambda * (x - m) / (f64::from(ranks[i]) * s);
                delta.get_mut(*name).unwrap()[c] = d.max(options.floor);
            }
        }
    }
    Ok(DampingFactors {
        options,
        mu,
        sigma,
        rank,
        delta,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HviEntry {
    pub llm: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub size: Option<String>,
    pub initial: f64,
    /// Weighted score before clamping.
    pub raw: f64,
    pub score: f64,
    pub rank: u32,
    /// Exact score when every factor is 1.
    #[serde(skip)]
    pub exact: Option<Ratio<u64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HviReport {
    pub entries: Vec<HviEntry>,
}

/// Second-pass scores, clamped to `[0, 100]` and ranked by descending
/// score with ties broken by name.
pub fn final_hvi(counts: &CohortCounts, factors: &DampingFactors) -> Result<HviReport, HviError> {
    let a: BTreeSet<&String> = counts.llms.keys().collect();
    let b: BTreeSet<&String> = factors.delta.keys().collect();
    if a != b {
        return Err(HviError::Consistency("damping factors were computed for a different cohort".into()));
    }
    let initial = initial_hvi(counts)?;
    let mut entries: Vec<HviEntry> = counts
        .llms
        .iter()
        .map(|(llm, c)| {
            let d = factors.delta[llm];
            let exact = d.iter().all(|&x| x == 1.0).then(|| initial[llm]);
            let raw = match exact {
                Some(r) => ratio_f64(&r),
                None => 100.0 * d.iter().zip(&c.n).map(|(d, &n)| d * n as f64).sum::<f64>() / c.u as f64,
            };
            HviEntry {
                llm: llm.clone(),
                size: None,
                initial: ratio_f64(&initial[llm]),
                raw,
                score: raw.clamp(0.0, 100.0),
                rank: 0,
                exact: exact.filter(|r| *r <= Ratio::from_integer(100)),
            }
        })
        .collect();
    assign_ranks(&mut entries);
    Ok(HviReport { entries })
}

fn assign_ranks(entries: &mut [HviEntry]) {
    entries.sort_by(|a, b| b.score.total_cmp(&a.score).then_with(|| a.llm.cmp(&b.llm)));
    for (i, e) in entries.iter_mut().enumerate() {
        e.rank = i as u32 + 1;
    }
}

/// Counts, factors and scores in one go.
pub fn score_cohort(counts: &CohortCounts, options: DampingOptions) -> Result<HviReport, HviError> {
    final_hvi(counts, &damping_factors_with(counts, options)?)
}

/// Width of a full-scale bar.
pub const BAR_WIDTH: usize = 40;

impl HviReport {
    /// A report from precomputed scores, e.g. for rendering published values.
    pub fn from_scores<I, S>(scores: I) -> Self
    where
        I: IntoIterator<Item = (S, f64)>,
        S: Into<String>,
    {
        let mut entries: Vec<HviEntry> = scores
            .into_iter()
            .map(|(llm, s)| HviEntry {
                llm: llm.into(),
                size: None,
                initial: s,
                raw: s,
                score: s.clamp(0.0, 100.0),
                rank: 0,
                exact: None,
            })
            .collect();
        assign_ranks(&mut entries);
        Self { entries }
    }

    pub fn with_sizes(mut self, sizes: &BTreeMap<String, String>) -> Self {
        for e in &mut self.entries {
            e.size = sizes.get(&e.llm).cloned();
        }
        self
    }

    /// Ranked text spectrum with proportional bars.
    pub fn render_spectrum(&self, precision: usize) -> String {
        let name_w = self.entries.iter().map(|e| e.llm.chars().count()).max().unwrap_or(0).max(3);
        let size_w = self
            .entries
            .iter()
            .filter_map(|e| e.size.as_ref().map(|s| s.chars().count()))
            .max()
            .unwrap_or(0);
        let mut out = String::new();
        for e in &self.entries {
            let bar = (e.score / 100.0 * BAR_WIDTH as f64).round() as usize;
            let _ = write!(out, "{:>2}  {:<name_w$}", e.rank, e.llm);
            if size_w > 0 {
                let _ = write!(out, "  {:<size_w$}", e.size.as_deref().unwrap_or(""));
            }
            let _ = writeln!(
                out,
                "  {:>w$.precision$}  {}",
                e.score,
                "#".repeat(bar),
                w = precision + 4 + usize::from(precision > 0)
            );
        }
        out
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("report serializes")
    }
}
