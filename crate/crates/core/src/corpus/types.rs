use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::text;

/// The four hallucination categories a pair can be forged for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum HallucinationCategory {
    #[serde(rename = "BN")]
    BothersomeNumber,
    #[serde(rename = "TI")]
    TemporalIssue,
    #[serde(rename = "IF")]
    ImaginaryFigure,
    #[serde(rename = "P")]
    Place,
}

impl HallucinationCategory {
    /// Declaration order (BN, TI, IF, P).
    pub const ALL: [HallucinationCategory; 4] = [
        HallucinationCategory::BothersomeNumber,
        HallucinationCategory::TemporalIssue,
        HallucinationCategory::ImaginaryFigure,
        HallucinationCategory::Place,
    ];

    /// Row order of the published statistics and accuracy tables (IF, P, BN, TI).
    pub const REPORT_ORDER: [HallucinationCategory; 4] = [
        HallucinationCategory::ImaginaryFigure,
        HallucinationCategory::Place,
        HallucinationCategory::BothersomeNumber,
        HallucinationCategory::TemporalIssue,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            HallucinationCategory::BothersomeNumber => "BN",
            HallucinationCategory::TemporalIssue => "TI",
            HallucinationCategory::ImaginaryFigure => "IF",
            HallucinationCategory::Place => "P",
        }
    }

    pub fn display_name(self) -> &'static str {
        match self {
            HallucinationCategory::BothersomeNumber => "Bothersome Number",
            HallucinationCategory::TemporalIssue => "Temporal Issue",
            HallucinationCategory::ImaginaryFigure => "Imaginary Figure",
            HallucinationCategory::Place => "Place",
        }
    }
}

impl fmt::Display for HallucinationCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown hallucination category `{0}`")]
pub struct UnknownCategory(pub String);

impl FromStr for HallucinationCategory {
    type Err = UnknownCategory;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm: String = s
            .chars()
            .filter(|c| c.is_alphanumeric())
            .collect::<String>()
            .to_ascii_lowercase();
        match norm.as_str() {
            "bn" | "bothersomenumber" | "bothersomenumbers" | "number" => {
                Ok(HallucinationCategory::BothersomeNumber)
            }
            "ti" | "temporalissue" | "temporal" | "time" => Ok(HallucinationCategory::TemporalIssue),
            "if" | "imaginaryfigure" | "person" => Ok(HallucinationCategory::ImaginaryFigure),
            "p" | "place" | "location" => Ok(HallucinationCategory::Place),
            _ => Err(UnknownCategory(s.to_string())),
        }
    }
}

/// Three-way entailment label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EntailmentLabel {
    Support,
    Refute,
    Neutral,
}

impl EntailmentLabel {
    /// Support pairs are positive, everything else negative.
    pub fn is_positive(self) -> bool {
        self == EntailmentLabel::Support
    }
}

impl fmt::Display for EntailmentLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EntailmentLabel::Support => "support",
            EntailmentLabel::Refute => "refute",
            EntailmentLabel::Neutral => "neutral",
        })
    }
}

impl FromStr for EntailmentLabel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "support" | "entailment" | "entailed" => Ok(EntailmentLabel::Support),
            "refute" | "contradiction" | "contradicted" => Ok(EntailmentLabel::Refute),
            "neutral" => Ok(EntailmentLabel::Neutral),
            other => Err(format!("unknown label `{other}`")),
        }
    }
}

/// Half-open character interval `[start, end)` into one sentence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TextSpan {
    pub start: usize,
    pub end: usize,
}

impl TextSpan {
    pub fn new(start: usize, end: usize) -> Self {
        Self { start, end }
    }

    /// Span covering `surface` placed at character offset `start`.
    pub fn at(start: usize, surface: &str) -> Self {
        Self {
            start,
            end: start + text::char_len(surface),
        }
    }

    pub fn len(&self) -> usize {
        self.end.saturating_sub(self.start)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Whether the span is non-empty and fits inside `sentence`.
    pub fn is_valid_for(&self, sentence: &str) -> bool {
        self.start < self.end && self.end <= text::char_len(sentence)
    }

    /// The substring this span selects, if it is valid for `sentence`.
    pub fn slice<'a>(&self, sentence: &'a str) -> Option<&'a str> {
        if !self.is_valid_for(sentence) {
            return None;
        }
        text::char_slice(sentence, self.start, self.end)
    }

    pub fn overlaps(&self, other: &TextSpan) -> bool {
        self.start < other.end && other.start < self.end
    }
}

/// Where a forged pair came from and what was swapped.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProvenanceTag {
    pub method: HallucinationCategory,
    pub replaced_surface: String,
    /// Empty when no replacement entity could be found.
    pub replacement_surface: String,
    pub seed: u64,
    pub source_id: String,
}

/// One (original, paraphrase) pair with its label and optional span marks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntailmentPair {
    pub id: String,
    pub llm: String,
    pub category: HallucinationCategory,
    pub original: String,
    pub paraphrase: String,
    pub label: EntailmentLabel,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub orig_span: Option<TextSpan>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub para_span: Option<TextSpan>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<ProvenanceTag>,
    /// Fields this version does not know about, kept for round-tripping.
    #[serde(flatten)]
    pub extra: Map<String, Value>,
}

/// A violated record invariant.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SchemaRule {
    RefuteNeedsOrigSpan,
    RefuteNeedsParaSpan,
    NonRefuteHasSpan,
    RefuteIdenticalTexts,
    OrigSpanOutOfBounds,
    ParaSpanOutOfBounds,
    OrigSliceMismatch,
    ParaSliceMismatch,
    EmptyReplacedSurface,
    ParaSpanWithoutReplacement,
    EmptyId,
}

impl SchemaRule {
    pub fn describe(self) -> &'static str {
        match self {
            SchemaRule::RefuteNeedsOrigSpan => "refute record must carry orig_span",
            SchemaRule::RefuteNeedsParaSpan => {
                "refute record must carry para_span unless replacement_surface is empty"
            }
            SchemaRule::NonRefuteHasSpan => "support/neutral records must not carry spans",
            SchemaRule::RefuteIdenticalTexts => "refute record must have original != paraphrase",
            SchemaRule::OrigSpanOutOfBounds => "orig_span must satisfy 0 <= start < end <= len(original)",
            SchemaRule::ParaSpanOutOfBounds => {
                "para_span must satisfy 0 <= start < end <= len(paraphrase)"
            }
            SchemaRule::OrigSliceMismatch => "original[orig_span] must equal provenance.replaced_surface",
            SchemaRule::ParaSliceMismatch => {
                "paraphrase[para_span] must equal provenance.replacement_surface"
            }
            SchemaRule::EmptyReplacedSurface => "provenance.replaced_surface must be non-empty",
            SchemaRule::ParaSpanWithoutReplacement => {
                "para_span must be absent when replacement_surface is empty"
            }
            SchemaRule::EmptyId => "id must be non-empty",
        }
    }
}

impl fmt::Display for SchemaRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.describe())
    }
}

impl EntailmentPair {
    /// Check every record invariant, reporting the first one violated.
    pub fn validate(&self) -> Result<(), SchemaRule> {
        if self.id.is_empty() {
            return Err(SchemaRule::EmptyId);
        }
        if let Some(p) = &self.provenance {
            if p.replaced_surface.is_empty() {
                return Err(SchemaRule::EmptyReplacedSurface);
            }
        }
        match self.label {
            EntailmentLabel::Support | EntailmentLabel::Neutral => {
                if self.orig_span.is_some() || self.para_span.is_some() {
                    return Err(SchemaRule::NonRefuteHasSpan);
                }
            }
            EntailmentLabel::Refute => {
                if self.original == self.paraphrase {
                    return Err(SchemaRule::RefuteIdenticalTexts);
                }
                let orig = self.orig_span.ok_or(SchemaRule::RefuteNeedsOrigSpan)?;
                let replacement_missing = self
                    .provenance
                    .as_ref()
                    .is_some_and(|p| p.replacement_surface.is_empty());
                if replacement_missing && self.para_span.is_some() {
                    return Err(SchemaRule::ParaSpanWithoutReplacement);
                }
                if !replacement_missing && self.para_span.is_none() {
                    return Err(SchemaRule::RefuteNeedsParaSpan);
                }
                let orig_slice = orig
                    .slice(&self.original)
                    .ok_or(SchemaRule::OrigSpanOutOfBounds)?;
                let para_slice = match self.para_span {
                    Some(span) => Some(
                        span.slice(&self.paraphrase)
                            .ok_or(SchemaRule::ParaSpanOutOfBounds)?,
                    ),
                    None => None,
                };
                if let Some(p) = &self.provenance {
                    if orig_slice != p.replaced_surface {
                        return Err(SchemaRule::OrigSliceMismatch);
                    }
                    if let Some(slice) = para_slice {
                        if slice != p.replacement_surface {
                            return Err(SchemaRule::ParaSliceMismatch);
                        }
                    }
                }
            }
        }
        Ok(())
    }

    pub fn is_positive(&self) -> bool {
        self.label.is_positive()
    }
}
