//! Records, span marks, categories and the JSONL persistence and statistics
//! layer.

mod jsonl;
mod stats;
mod types;

pub use jsonl::{
    open_jsonl, parse_record, read_records, read_values, serialize_record, write_jsonl,
    CorpusError, JsonlReader, Records, META_KEY,
};
pub use stats::{compute_stats, DatasetStats, PolarityCounts, StatsError};
pub use types::{
    EntailmentLabel, EntailmentPair, HallucinationCategory, ProvenanceTag, SchemaRule, TextSpan,
    UnknownCategory,
};
