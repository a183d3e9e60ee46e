use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{diversity_score, CandidateSet, Gate, GateError};
use crate::oracle::EntailmentOracle;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceReport {
    pub source: String,
    pub candidates: usize,
    pub med_survivors: Vec<String>,
    pub survivors: Vec<String>,
    pub correctness: Option<f64>,
    pub diversity: Option<f64>,
}

/// Paraphraser-level aggregate.
///
/// `coverage` is the mean number of MED survivors per source, `correctness`
/// the pooled entailed fraction of MED survivors and `diversity` the mean
/// per-source inverse BLEU over sources with at least one correct survivor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GateReport {
    pub model: String,
    pub coverage: f64,
    pub correctness: Option<f64>,
    pub diversity: Option<f64>,
    pub per_source: Vec<SourceReport>,
}

fn score_one<O: EntailmentOracle + ?Sized>(gate: &Gate, set: &CandidateSet, oracle: &O) -> Result<SourceReport, GateError> {
    let out = gate.run(set, oracle)?;
    let diversity = if out.survivors.candidates.is_empty() {
        None
    } else {
        Some(diversity_score(&out.survivors)?)
    };
    Ok(SourceReport {
        source: set.source.clone(),
        candidates: set.candidates.len(),
        med_survivors: out.med_survivors.candidates,
        survivors: out.survivors.candidates,
        correctness: out.correctness,
        diversity,
    })
}

pub fn evaluate_paraphraser<O: EntailmentOracle + ?Sized>(
    model: &str,
    corpus: &[CandidateSet],
    oracle: &O,
    gate: &Gate,
) -> Result<GateReport, GateError> {
    let per_source = corpus
        .par_iter()
        .map(|set| score_one(gate, set, oracle))
        .collect::<Result<Vec<_>, _>>()?;
    let med: usize = per_source.iter().map(|s| s.med_survivors.len()).sum();
    let ok: usize = per_source.iter().map(|s| s.survivors.len()).sum();
    let coverage = if per_source.is_empty() {
        0.0
    } else {
        med as f64 / per_source.len() as f64
    };
    let correctness = (med > 0).then(|| ok as f64 / med as f64);
    let divs: Vec<f64> = per_source.iter().filter_map(|s| s.diversity).collect();
    let diversity = (!divs.is_empty()).then(|| divs.iter().sum::<f64>() / divs.len() as f64);
    Ok(GateReport {
        model: model.to_string(),
        coverage,
        correctness,
        diversity,
        per_source,
    })
}

fn cell(v: Option<f64>, percent: bool) -> String {
    match v {
        Some(x) if percent => format!("{:.2}%", x * 100.0),
        Some(x) => format!("{x:.2}"),
        None => "-".to_string(),
    }
}

impl GateReport {
    /// Aligned comparison table, one row per report.
    pub fn render_table(reports: &[GateReport]) -> String {
        let header = ["Model", "Coverage", "Correctness", "Diversity"];
        let rows: Vec<[String; 4]> = reports
            .iter()
            .map(|r| {
                [
                    r.model.clone(),
                    cell(Some(r.coverage), false),
                    cell(r.correctness, true),
                    cell(r.diversity, false),
                ]
            })
            .collect();
        let mut widths = header.map(str::len);
        for row in &rows {
            for (w, c) in widths.iter_mut().zip(row) {
                *w = (*w).max(c.chars().count());
            }
        }
        let line = |cells: [&str; 4]| {
            let mut s = format!("{:<w$}", cells[0], w = widths[0]);
            for i in 1..4 {
                s.push_str(&format!("  {:>w$}", cells[i], w = widths[i]));
            }
            s.trim_end().to_string()
        };
        let mut out = line(header);
        out.push('\n');
        out.push_str(&"-".repeat(widths.iter().sum::<usize>() + 6));
        out.push('\n');
        for row in &rows {
            out.push_str(&line([&row[0], &row[1], &row[2], &row[3]]));
            out.push('\n');
        }
        out
    }
}
