//! Digit-string number detection and bounded perturbation.

use std::collections::BTreeSet;
use std::sync::OnceLock;

use rand::Rng;
use regex::Regex;
use serde::{Deserialize, Serialize};

use super::BnMode;
use crate::corpus::TextSpan;

/// How a number was written, so a new value can be written the same way.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct NumberStyle {
    /// Digits after the decimal point.
    pub places: u32,
    pub percent: bool,
    /// Thousands separators present.
    pub grouped: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StyleKind {
    Integer,
    FixedPoint(u32),
    Percent,
}

impl NumberStyle {
    pub fn kind(&self) -> StyleKind {
        if self.percent {
            StyleKind::Percent
        } else if self.places > 0 {
            StyleKind::FixedPoint(self.places)
        } else {
            StyleKind::Integer
        }
    }

    fn scale(&self) -> f64 {
        10f64.powi(self.places as i32)
    }
}

/// A number found in a sentence. `units` counts the last written decimal
/// place, so "1,234.50" is 123450 units with two places.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NumberMatch {
    pub span: TextSpan,
    pub surface: String,
    pub units: u64,
    pub style: NumberStyle,
}

impl NumberMatch {
    pub fn value(&self) -> f64 {
        self.units as f64 / self.style.scale()
    }

    /// Same position and style, different value.
    pub fn with_units(&self, units: u64) -> NumberMatch {
        let surface = render(units, self.style);
        NumberMatch {
            span: TextSpan::at(self.span.start, &surface),
            surface,
            units,
            style: self.style,
        }
    }
}

fn group(digits: &str) -> String {
    let n = digits.len();
    let mut out = String::with_capacity(n + n / 3);
    for (i, c) in digits.chars().enumerate() {
        if i > 0 && (n - i).is_multiple_of(3) {
            out.push(',');
        }
        out.push(c);
    }
    out
}

pub fn render(units: u64, style: NumberStyle) -> String {
    let digits = units.to_string();
    let p = style.places as usize;
    let (int, frac) = if p == 0 {
        (digits, String::new())
    } else {
        let padded = format!("{digits:0>width$}", width = p + 1);
        let (i, f) = padded.split_at(padded.len() - p);
        (i.to_string(), f.to_string())
    };
    let mut s = if style.grouped { group(&int) } else { int };
    if p > 0 {
        s.push('.');
        s.push_str(&frac);
    }
    if style.percent {
        s.push('%');
    }
    s
}

fn number_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"(?:\d{1,3}(?:,\d{3})+|\d+)(?:\.\d+)?%?").unwrap())
}

fn parse_surface(surface: &str) -> Option<(u64, NumberStyle)> {
    let percent = surface.ends_with('%');
    let body = surface.trim_end_matches('%');
    let grouped = body.contains(',');
    let places = body.split_once('.').map_or(0, |(_, f)| f.len() as u32);
    let digits: String = body.chars().filter(char::is_ascii_digit).collect();
    let units = digits.parse().ok()?;
    let style = NumberStyle {
        places,
        percent,
        grouped,
    };
    // leading zeros and similar do not survive re-rendering; skip them
    (render(units, style) == surface).then_some((units, style))
}

/// Integers, fixed-point decimals and percentages written with digits,
/// optionally with thousands separators. Matches are ascending and
/// non-overlapping; numbers glued to letters or to other digit groups
/// ("v2", "1.2.3", "12,34") are skipped.
pub fn detect_numbers(sentence: &str) -> Vec<NumberMatch> {
    let bytes = sentence.as_bytes();
    let mut out = Vec::new();
    for m in number_re().find_iter(sentence) {
        let (s, e) = (m.start(), m.end());
        let prev = sentence[..s].chars().next_back();
        if prev.is_some_and(|c| c.is_alphanumeric() || c == '_') {
            continue;
        }
        if matches!(prev, Some('.' | ',')) && s >= 2 && bytes[s - 2].is_ascii_digit() {
            continue;
        }
        let next = sentence[e..].chars().next();
        if next.is_some_and(|c| c.is_alphanumeric() || c == '_') {
            continue;
        }
        if matches!(next, Some('.' | ',')) && bytes.get(e + 1).is_some_and(u8::is_ascii_digit) {
            continue;
        }
        let Some((units, style)) = parse_surface(m.as_str()) else {
            continue;
        };
        let start = sentence[..s].chars().count();
        out.push(NumberMatch {
            span: TextSpan::at(start, m.as_str()),
            surface: m.as_str().to_string(),
            units,
            style,
        });
    }
    out
}

const MAX_DRAWS: usize = 1000;

/// Move `m` to a different value in the same style.
///
/// The new value is drawn uniformly from the configured interval and rounded
/// to the written precision, redrawing until it differs from the original.
/// When no value in the interval rounds to something new, the number steps
/// by one unit in the last place. Relative mode on zero falls back to
/// absolute mode with delta 1.
pub fn perturb_number<R: Rng + ?Sized>(m: &NumberMatch, mode: BnMode, rng: &mut R) -> NumberMatch {
    perturb_avoiding(m, mode, rng, &BTreeSet::new())
}

/// As [`perturb_number`], but prefers values not in `avoid`.
pub fn perturb_avoiding<R: Rng + ?Sized>(
    m: &NumberMatch,
    mode: BnMode,
    rng: &mut R,
    avoid: &BTreeSet<u64>,
) -> NumberMatch {
    let v = m.units as f64;
    let mode = match mode {
        BnMode::Relative { .. } if m.units == 0 => {
            log::warn!("relative perturbation of zero in `{}`; using absolute delta 1", m.surface);
            BnMode::Absolute { delta: 1.0 }
        }
        other => other,
    };
    let (lo, hi) = match mode {
        BnMode::Relative { fraction } => (v * (1.0 - fraction), v * (1.0 + fraction)),
        BnMode::Absolute { delta } => {
            let d = delta * m.style.scale();
            ((v - d).max(0.0), v + d)
        }
    };
    let (rlo, rhi) = (lo.round() as u64, hi.round() as u64);
    if rlo == m.units && rhi == m.units {
        let up = m.units == 0 || rng.random_bool(0.5);
        return m.with_units(if up { m.units + 1 } else { m.units - 1 });
    }
    let mut fallback = None;
    for _ in 0..MAX_DRAWS {
        let u = rng.random_range(lo..=hi).round() as u64;
        if u == m.units {
            continue;
        }
        if !avoid.contains(&u) {
            return m.with_units(u);
        }
        fallback.get_or_insert(u);
    }
    // the open part of the interval is tiny: pick among the reachable values
    let reachable: Vec<u64> = (rlo..=rhi).filter(|&u| u != m.units).collect();
    let fresh: Vec<u64> = reachable.iter().copied().filter(|u| !avoid.contains(u)).collect();
    let u = match (fresh.is_empty(), fallback) {
        (false, _) => fresh[rng.random_range(0..fresh.len())],
        (true, Some(u)) => u,
        (true, None) => reachable[rng.random_range(0..reachable.len())],
    };
    m.with_units(u)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn percent_in_twitter_sentence() {
        let s = "Twitter told staff this week that it plans to reduce its workforce by 8% of people before the end of the year.";
        let m = detect_numbers(s);
        assert_eq!(m.len(), 1);
        assert_eq!(m[0].surface, "8%");
        assert_eq!(m[0].value(), 8.0);
        assert_eq!(m[0].style.kind(), StyleKind::Percent);
        assert_eq!(m[0].span.slice(s), Some("8%"));
    }

    #[test]
    fn grouped_fixed_point() {
        let m = detect_numbers("It cost 1,234.50 dollars.");
        assert_eq!(m.len(), 1);
        assert_eq!(m[0].surface, "1,234.50");
        assert_eq!(m[0].units, 123450);
        assert_eq!(m[0].style.kind(), StyleKind::FixedPoint(2));
        assert!((m[0].value() - 1234.5).abs() < 1e-12);
    }

    #[test]
    fn no_digits_no_matches() {
        assert!(detect_numbers("eight percent of nothing").is_empty());
    }

    #[test]
    fn skips_glued_and_malformed() {
        assert!(detect_numbers("version v2 and 1.2.3 and 12,34 and 007 and 3rd").is_empty());
        let m = detect_numbers("In 2013, 40 people and 2.5% (or 1,000,000) left.");
        let s: Vec<_> = m.iter().map(|m| m.surface.as_str()).collect();
        assert_eq!(s, ["2013", "40", "2.5%", "1,000,000"]);
    }

    #[test]
    fn offsets_are_chars() {
        let s = "Café – 12 tables";
        let m = detect_numbers(s);
        assert_eq!(m[0].span.start, 7);
        assert_eq!(m[0].span.slice(s), Some("12"));
    }

    #[test]
    fn render_round_trips() {
        for s in ["0", "7", "0.05", "12.50%", "1,000", "999", "12,345,678.9"] {
            let m = detect_numbers(s);
            assert_eq!(m.len(), 1, "{s}");
            assert_eq!(render(m[0].units, m[0].style), s);
        }
    }

    #[test]
    fn hundred_stays_in_range() {
        let m = &detect_numbers("100")[0];
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..10_000 {
            let p = perturb_number(m, BnMode::default(), &mut rng);
            assert!((80..=120).contains(&p.units) && p.units != 100);
        }
    }

    #[test]
    fn eight_percent_is_seeded() {
        let m = &detect_numbers("by 8% of people")[0];
        let a = perturb_number(m, BnMode::default(), &mut ChaCha8Rng::seed_from_u64(42));
        let b = perturb_number(m, BnMode::default(), &mut ChaCha8Rng::seed_from_u64(42));
        assert_eq!(a, b);
        assert!(a.surface.ends_with('%'));
        // rounded draws from [6.4, 9.6]
        assert!([6, 7, 9, 10].contains(&a.units));
    }

    #[test]
    fn keeps_places() {
        let m = &detect_numbers("2.50")[0];
        let p = perturb_number(m, BnMode::default(), &mut ChaCha8Rng::seed_from_u64(3));
        assert_eq!(p.style.places, 2);
        assert_eq!(p.surface.split_once('.').unwrap().1.len(), 2);
        assert_ne!(p.units, 250);
    }

    #[test]
    fn tiny_and_zero_values_step() {
        let one = &detect_numbers("1")[0];
        let p = perturb_number(one, BnMode::default(), &mut ChaCha8Rng::seed_from_u64(0));
        assert!(p.units == 0 || p.units == 2);
        let zero = &detect_numbers("0")[0];
        let p = perturb_number(zero, BnMode::default(), &mut ChaCha8Rng::seed_from_u64(0));
        assert_eq!(p.units, 1);
    }

    #[test]
    fn avoid_set_is_respected_while_possible() {
        let m = &detect_numbers("8%")[0];
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut used = BTreeSet::new();
        for _ in 0..4 {
            let p = perturb_avoiding(m, BnMode::default(), &mut rng, &used);
            assert!(used.insert(p.units));
        }
        assert_eq!(used.into_iter().collect::<Vec<_>>(), [6, 7, 9, 10]);
    }
}
