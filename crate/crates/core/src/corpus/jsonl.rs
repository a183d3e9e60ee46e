//! JSON Lines persistence for records, plus generic helpers shared by the
//! other file formats (seeds, detections, predictions).

use std::fs::File;
use std::io::{self, BufRead, BufReader, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::Value;

use super::types::{EntailmentPair, SchemaRule};

/// Key of the optional metadata header object on the first line of a file.
pub const META_KEY: &str = "meta";

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error("line {line}: malformed JSON: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: record `{id}` violates invariant: {rule}")]
    Schema {
        line: usize,
        id: String,
        rule: SchemaRule,
    },
}

/// Parse and validate one JSONL line. `line_no` is 1-based and only used for
/// error reporting.
pub fn parse_record(line: &str, line_no: usize) -> Result<EntailmentPair, CorpusError> {
    let pair: EntailmentPair = serde_json::from_str(line).map_err(|e| CorpusError::Parse {
        line: line_no,
        message: e.to_string(),
    })?;
    pair.validate().map_err(|rule| CorpusError::Schema {
        line: line_no,
        id: pair.id.clone(),
        rule,
    })?;
    Ok(pair)
}

/// Single-line JSON for a valid record. Spans are integer pairs and absent
/// optional fields are omitted.
pub fn serialize_record(pair: &EntailmentPair) -> String {
    serde_json::to_string(pair).expect("records always serialize")
}

fn is_meta_header(line: &str) -> Option<Value> {
    let value: Value = serde_json::from_str(line).ok()?;
    let obj = value.as_object()?;
    if obj.len() == 1 {
        obj.get(META_KEY).cloned()
    } else {
        None
    }
}

/// Streaming reader over a JSONL source. Blank lines are skipped and a leading
/// `{"meta": ...}` header line is exposed through [`JsonlReader::meta`].
pub struct JsonlReader<R> {
    lines: io::Lines<R>,
    line_no: usize,
    meta: Option<Value>,
    peeked: Option<(usize, String)>,
}

impl<R: BufRead> JsonlReader<R> {
    pub fn new(reader: R) -> Result<Self, CorpusError> {
        let mut this = Self {
            lines: reader.lines(),
            line_no: 0,
            meta: None,
            peeked: None,
        };
        if let Some((no, line)) = this.next_line()? {
            match is_meta_header(&line) {
                Some(meta) => this.meta = Some(meta),
                None => this.peeked = Some((no, line)),
            }
        }
        Ok(this)
    }

    pub fn meta(&self) -> Option<&Value> {
        self.meta.as_ref()
    }

    fn next_line(&mut self) -> Result<Option<(usize, String)>, CorpusError> {
        if let Some(p) = self.peeked.take() {
            return Ok(Some(p));
        }
        for line in self.lines.by_ref() {
            self.line_no += 1;
            let line = line?;
            if !line.trim().is_empty() {
                return Ok(Some((self.line_no, line)));
            }
        }
        Ok(None)
    }

    /// Next line deserialized as `T`, with its line number.
    pub fn next_value<T: DeserializeOwned>(&mut self) -> Option<Result<(usize, T), CorpusError>> {
        match self.next_line() {
            Err(e) => Some(Err(e)),
            Ok(None) => None,
            Ok(Some((no, line))) => Some(
                serde_json::from_str(&line)
                    .map(|v| (no, v))
                    .map_err(|e| CorpusError::Parse {
                        line: no,
                        message: e.to_string(),
                    }),
            ),
        }
    }

    /// Next dataset record, parsed and validated.
    pub fn next_record(&mut self) -> Option<Result<EntailmentPair, CorpusError>> {
        match self.next_line() {
            Err(e) => Some(Err(e)),
            Ok(None) => None,
            Ok(Some((no, line))) => Some(parse_record(&line, no)),
        }
    }

    pub fn records(self) -> Records<R> {
        Records(self)
    }
}

/// Iterator adaptor yielding validated records.
pub struct Records<R>(JsonlReader<R>);

impl<R: BufRead> Iterator for Records<R> {
    type Item = Result<EntailmentPair, CorpusError>;

    fn next(&mut self) -> Option<Self::Item> {
        self.0.next_record()
    }
}

pub fn open_jsonl(path: &Path) -> Result<JsonlReader<BufReader<File>>, CorpusError> {
    JsonlReader::new(BufReader::new(File::open(path)?))
}

/// Read every record of a dataset file, failing on the first invalid line.
pub fn read_records(path: &Path) -> Result<Vec<EntailmentPair>, CorpusError> {
    open_jsonl(path)?.records().collect()
}

/// Read every line of a JSONL file as `T`.
pub fn read_values<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, CorpusError> {
    let mut reader = open_jsonl(path)?;
    let mut out = Vec::new();
    while let Some(item) = reader.next_value::<T>() {
        out.push(item?.1);
    }
    Ok(out)
}

/// Write `items` as JSON Lines, optionally preceded by a metadata header.
pub fn write_jsonl<W: Write, T: Serialize>(
    mut out: W,
    meta: Option<&Value>,
    items: &[T],
) -> io::Result<()> {
    if let Some(meta) = meta {
        let mut header = serde_json::Map::new();
        header.insert(META_KEY.to_string(), meta.clone());
        writeln!(out, "{}", Value::Object(header))?;
    }
    for item in items {
        serde_json::to_writer(&mut out, item)?;
        out.write_all(b"\n")?;
    }
    out.flush()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::types::*;

    #[test]
    fn minimal_support_record() {
        let line = r#"{"id":"a","llm":"gpt","category":"IF","original":"x y","paraphrase":"y x","label":"support"}"#;
        let p = parse_record(line, 1).unwrap();
        assert_eq!(p.label, EntailmentLabel::Support);
        assert!(p.orig_span.is_none());
        assert_eq!(serialize_record(&p), line);
    }

    #[test]
    fn refute_with_wrong_slice_is_schema_error() {
        let line = r#"{"id":"r","llm":"gpt","category":"P","original":"crash in Nevada","paraphrase":"crash in Tokyo","label":"refute","orig_span":{"start":0,"end":5},"para_span":{"start":9,"end":14},"provenance":{"method":"P","replaced_surface":"Nevada","replacement_surface":"Tokyo","seed":0,"source_id":"s"}}"#;
        match parse_record(line, 7) {
            Err(CorpusError::Schema { line, id, rule }) => {
                assert_eq!(line, 7);
                assert_eq!(id, "r");
                assert_eq!(rule, SchemaRule::OrigSliceMismatch);
            }
            other => panic!("expected schema error, got {other:?}"),
        }
    }

    #[test]
    fn malformed_json_reports_line() {
        match parse_record("{not json", 3) {
            Err(CorpusError::Parse { line: 3, .. }) => {}
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn unknown_fields_survive() {
        let line = r#"{"id":"a","llm":"gpt","category":"BN","original":"x","paraphrase":"y","label":"neutral","annotator":"kim","score":0.5}"#;
        let p = parse_record(line, 1).unwrap();
        assert_eq!(p.extra.len(), 2);
        assert_eq!(serialize_record(&p), line);
    }

    #[test]
    fn reader_skips_meta_and_blank_lines() {
        let src = "{\"meta\":{\"v\":1}}\n\n{\"id\":\"a\",\"llm\":\"m\",\"category\":\"TI\",\"original\":\"a b\",\"paraphrase\":\"b a\",\"label\":\"support\"}\n";
        let reader = JsonlReader::new(src.as_bytes()).unwrap();
        assert_eq!(reader.meta().unwrap()["v"], 1);
        let records: Vec<_> = reader.records().collect::<Result<_, _>>().unwrap();
        assert_eq!(records.len(), 1);
    }
}
