//! Tooling for span-annotated factual-entailment datasets: forging refute
//! and support pairs from seed sentences, gating paraphrase quality, scoring
//! detectors, and computing the automatic hallucination vulnerability index.

pub mod corpus;
pub mod embedding;
pub mod eval;
pub mod forge;
pub mod gate;
pub mod hvi;
pub mod oracle;
pub mod text;
