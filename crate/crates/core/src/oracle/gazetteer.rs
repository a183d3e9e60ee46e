use std::collections::HashMap;

use super::{resolve_overlaps, EntityRecognizer, NerSpan, OracleError};
use crate::corpus::TextSpan;
use crate::embedding::{token_surface, EmbeddingTable, EntityClass};
use crate::text;

struct Entry {
    surface: String,
    words: Vec<String>,
    class: EntityClass,
}

/// Offline NER by case-sensitive whole-word matching against a gazetteer.
/// Overlapping matches resolve to the longest, then leftmost.
pub struct GazetteerNer {
    entries: Vec<Entry>,
    by_first_word: HashMap<String, Vec<usize>>,
}

fn words_of(surface: &str) -> Vec<String> {
    text::tokenize_with_offsets(surface)
        .into_iter()
        .map(|t| text::char_slice(surface, t.start, t.end).unwrap_or_default().to_string())
        .collect()
}

impl GazetteerNer {
    /// Build from (token, class) pairs; underscores in tokens stand for spaces.
    pub fn new<I, S>(entries: I) -> Self
    where
        I: IntoIterator<Item = (S, EntityClass)>,
        S: AsRef<str>,
    {
        let mut this = Self {
            entries: Vec::new(),
            by_first_word: HashMap::new(),
        };
        for (token, class) in entries {
            let surface = token_surface(token.as_ref());
            let words = words_of(&surface);
            if words.is_empty() {
                continue;
            }
            this.by_first_word
                .entry(words[0].clone())
                .or_default()
                .push(this.entries.len());
            this.entries.push(Entry {
                surface,
                words,
                class,
            });
        }
        this
    }

    pub fn from_table(table: &EmbeddingTable) -> Self {
        Self::new(table.gazetteer())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn extract(&self, sentence: &str) -> Vec<NerSpan> {
        let tokens = text::tokenize_with_offsets(sentence);
        let words: Vec<&str> = tokens
            .iter()
            .map(|t| text::char_slice(sentence, t.start, t.end).unwrap_or_default())
            .collect();
        let mut found = Vec::new();
        for (i, w) in words.iter().enumerate() {
            let Some(cands) = self.by_first_word.get(*w) else {
                continue;
            };
            for &ci in cands {
                let e = &self.entries[ci];
                let n = e.words.len();
                if i + n > words.len() || words[i..i + n].iter().zip(&e.words).any(|(a, b)| a != b) {
                    continue;
                }
                let span = TextSpan::new(tokens[i].start, tokens[i + n - 1].end);
                if span.slice(sentence) != Some(e.surface.as_str()) {
                    continue;
                }
                found.push(NerSpan {
                    span,
                    surface: e.surface.clone(),
                    entity_class: e.class,
                });
            }
        }
        resolve_overlaps(found)
    }
}

impl EntityRecognizer for GazetteerNer {
    fn ner_extract(&self, sentence: &str) -> Result<Vec<NerSpan>, OracleError> {
        if sentence.trim().is_empty() {
            return Err(OracleError::InvalidRequest("empty sentence".into()));
        }
        Ok(self.extract(sentence))
    }
}
