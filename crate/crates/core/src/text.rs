//! Word tokenization shared by the edit-distance, BLEU, entailment stub and
//! span scoring code paths.
//!
//! A token is a maximal run of Unicode alphanumeric characters. Whitespace and
//! punctuation only separate tokens and never form tokens of their own. All
//! offsets are counted in Unicode scalar values.

/// A word token with its character offsets into the source text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    /// Case-folded surface.
    pub text: String,
    pub start: usize,
    pub end: usize,
}

/// Case-folded word tokens of `text`.
pub fn tokenize(text: &str) -> Vec<String> {
    tokenize_with_offsets(text).into_iter().map(|t| t.text).collect()
}

/// Case-folded word tokens of `text` together with their character offsets.
pub fn tokenize_with_offsets(text: &str) -> Vec<Token> {
    let mut tokens = Vec::new();
    let mut current = String::new();
    let mut start = 0;
    let mut pos = 0;
    for ch in text.chars() {
        if ch.is_alphanumeric() {
            if current.is_empty() {
                start = pos;
            }
            current.extend(ch.to_lowercase());
        } else if !current.is_empty() {
            tokens.push(Token {
                text: std::mem::take(&mut current),
                start,
                end: pos,
            });
        }
        pos += 1;
    }
    if !current.is_empty() {
        tokens.push(Token {
            text: current,
            start,
            end: pos,
        });
    }
    tokens
}

/// Number of Unicode scalar values in `text`.
pub fn char_len(text: &str) -> usize {
    text.chars().count()
}

/// Byte offset of the character at `char_idx`, or `text.len()` when the index
/// is one past the end. Returns `None` beyond that.
pub fn byte_offset(text: &str, char_idx: usize) -> Option<usize> {
    if char_idx == 0 {
        return Some(0);
    }
    let mut count = 0;
    for (byte, _) in text.char_indices() {
        if count == char_idx {
            return Some(byte);
        }
        count += 1;
    }
    (count == char_idx).then_some(text.len())
}

/// Slice `text` by a character range `[start, end)`.
pub fn char_slice(text: &str, start: usize, end: usize) -> Option<&str> {
    if start > end {
        return None;
    }
    let b0 = byte_offset(text, start)?;
    let b1 = byte_offset(text, end)?;
    Some(&text[b0..b1])
}

/// Character offset of every occurrence of `needle` in `haystack` that is not
/// glued to an alphanumeric character on either side.
pub fn find_word_bounded(haystack: &str, needle: &str) -> Vec<usize> {
    if needle.is_empty() {
        return Vec::new();
    }
    let mut hits = Vec::new();
    for (byte, _) in haystack.match_indices(needle) {
        let before = haystack[..byte].chars().next_back();
        let after = haystack[byte + needle.len()..].chars().next();
        let glued = |c: Option<char>| c.is_some_and(|c| c.is_alphanumeric());
        let needle_starts_alnum = needle.chars().next().is_some_and(char::is_alphanumeric);
        let needle_ends_alnum = needle.chars().next_back().is_some_and(char::is_alphanumeric);
        if (needle_starts_alnum && glued(before)) || (needle_ends_alnum && glued(after)) {
            continue;
        }
        hits.push(haystack[..byte].chars().count());
    }
    hits
}

/// Replace the character range `[start, end)` of `text` with `replacement`.
pub fn replace_chars(text: &str, start: usize, end: usize, replacement: &str) -> Option<String> {
    let b0 = byte_offset(text, start)?;
    let b1 = byte_offset(text, end)?;
    if b0 > b1 {
        return None;
    }
    let mut out = String::with_capacity(text.len() + replacement.len());
    out.push_str(&text[..b0]);
    out.push_str(replacement);
    out.push_str(&text[b1..]);
    Some(out)
}
