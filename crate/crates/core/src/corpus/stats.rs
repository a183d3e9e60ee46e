use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::jsonl::CorpusError;
use super::types::{EntailmentPair, HallucinationCategory};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PolarityCounts {
    pub positive: u64,
    pub negative: u64,
}

/// Positive/negative pair counts per category.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetStats {
    pub categories: BTreeMap<HallucinationCategory, PolarityCounts>,
    pub total_positive: u64,
    pub total_negative: u64,
}

impl Default for DatasetStats {
    fn default() -> Self {
        Self {
            categories: HallucinationCategory::ALL
                .iter()
                .map(|&c| (c, PolarityCounts::default()))
                .collect(),
            total_positive: 0,
            total_negative: 0,
        }
    }
}

impl DatasetStats {
    pub fn add(&mut self, pair: &EntailmentPair) {
        let slot = self.categories.entry(pair.category).or_default();
        if pair.is_positive() {
            slot.positive += 1;
            self.total_positive += 1;
        } else {
            slot.negative += 1;
            self.total_negative += 1;
        }
    }

    /// Associative merge of two partial tallies.
    pub fn merge(mut self, other: &DatasetStats) -> DatasetStats {
        for (cat, counts) in &other.categories {
            let slot = self.categories.entry(*cat).or_default();
            slot.positive += counts.positive;
            slot.negative += counts.negative;
        }
        self.total_positive += other.total_positive;
        self.total_negative += other.total_negative;
        self
    }

    pub fn get(&self, category: HallucinationCategory) -> PolarityCounts {
        self.categories.get(&category).copied().unwrap_or_default()
    }

    /// Aligned text table: one row per category, then the totals.
    pub fn render_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:<20} {:>16} {:>16}",
            "Hallucination Type", "# Positive Pairs", "# Negative Pairs"
        );
        for cat in HallucinationCategory::REPORT_ORDER {
            let c = self.get(cat);
            let _ = writeln!(
                out,
                "{:<20} {:>16} {:>16}",
                cat.display_name(),
                c.positive,
                c.negative
            );
        }
        let _ = writeln!(
            out,
            "{:<20} {:>16} {:>16}",
            "Total", self.total_positive, self.total_negative
        );
        out
    }
}

#[derive(Debug, thiserror::Error)]
pub enum StatsError {
    #[error("stats aborted at record `{id}`: {source}")]
    InvalidRecord {
        id: String,
        #[source]
        source: CorpusError,
    },
}

/// Tally a stream of records. The first invalid record aborts the tally.
pub fn compute_stats<I>(records: I) -> Result<DatasetStats, StatsError>
where
    I: IntoIterator<Item = Result<EntailmentPair, CorpusError>>,
{
    let mut stats = DatasetStats::default();
    for record in records {
        match record {
            Ok(pair) => {
                if let Err(rule) = pair.validate() {
                    return Err(StatsError::InvalidRecord {
                        id: pair.id.clone(),
                        source: CorpusError::Schema {
                            line: 0,
                            id: pair.id,
                            rule,
                        },
                    });
                }
                stats.add(&pair);
            }
            Err(err) => {
                let id = match &err {
                    CorpusError::Schema { id, .. } => id.clone(),
                    CorpusError::Parse { line, .. } => format!("<line {line}>"),
                    CorpusError::Io(_) => "<io>".to_string(),
                };
                return Err(StatsError::InvalidRecord { id, source: err });
            }
        }
    }
    Ok(stats)
}
