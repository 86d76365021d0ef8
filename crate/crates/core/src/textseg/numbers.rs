//! Number extraction.
//!
//! Grammar, matched longest-first scanning left to right (all kinds accept
//! an optional leading `+`/`-`):
//!
//! - Scientific: a single-digit mantissa with optional fraction (`d(.d+)?`)
//!   followed by `e`/`E` and a signed integer exponent, or by `×10^`/`x10^`
//!   and a signed integer.
//! - Decimal: digits, `.`, digits. The integer part may use `,` thousands
//!   separators in groups of exactly three.
//! - Integer: digits, optionally grouped as above.
//!
//! A number never ends right before another digit, so a separator group
//! followed by a fourth digit is not a group ("1,0000" is `1` then `0000`).
//!
//! Numbers glued to identifiers are skipped: the match is dropped when the
//! preceding character is alphanumeric or `_`, or is a `-`/`.` that itself
//! follows a letter (`GPT-4o`, `v2`, `x.5`). A `+`/`-` directly after an
//! alphanumeric character is a joiner, not a sign (`10-20` yields `10`, `20`).

use std::ops::Range;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NumberKind {
    Integer,
    Decimal { decimal_places: usize },
    Scientific { significant_digits: usize },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NumberToken {
    pub surface: String,
    pub kind: NumberKind,
    /// Character (not byte) offsets into the scanned text.
    pub span: Range<usize>,
}

impl NumberToken {
    pub fn decimal_places(&self) -> Option<usize> {
        match self.kind {
            NumberKind::Decimal { decimal_places } => Some(decimal_places),
            _ => None,
        }
    }

    pub fn significant_digits(&self) -> Option<usize> {
        match self.kind {
            NumberKind::Scientific { significant_digits } => Some(significant_digits),
            _ => None,
        }
    }
}

fn is_word_char(c: char) -> bool {
    c.is_alphanumeric() || c == '_'
}

fn digit_run(chars: &[char], from: usize) -> usize {
    chars[from..].iter().take_while(|c| c.is_ascii_digit()).count()
}

/// Extend an integer part at `[from, from + len)` with `,ddd` groups.
fn grouped_end(chars: &[char], from: usize, len: usize) -> usize {
    let mut end = from + len;
    if len > 3 {
        return end;
    }
    loop {
        let group_ok = chars.get(end) == Some(&',')
            && end + 4 <= chars.len()
            && chars[end + 1..end + 4].iter().all(|c| c.is_ascii_digit())
            && !chars.get(end + 4).is_some_and(|c| c.is_ascii_digit());
        if !group_ok {
            return end;
        }
        end += 4;
    }
}

/// Exponent suffix starting at `at`; returns its end.
fn exponent_end(chars: &[char], at: usize) -> Option<usize> {
    let mut i = at;
    match chars.get(i) {
        Some('e') | Some('E') => i += 1,
        Some('×') | Some('x') => {
            if chars.get(i + 1) != Some(&'1')
                || chars.get(i + 2) != Some(&'0')
                || chars.get(i + 3) != Some(&'^')
            {
                return None;
            }
            i += 4;
        }
        _ => return None,
    }
    if matches!(chars.get(i), Some('+') | Some('-')) {
        i += 1;
    }
    let digits = digit_run(chars, i);
    (digits > 0).then_some(i + digits)
}

/// Longest number starting at `start`, which must be a digit or a sign
/// followed by a digit.
fn longest_match(chars: &[char], start: usize) -> (usize, NumberKind) {
    let mut i = start;
    if matches!(chars[i], '+' | '-') {
        i += 1;
    }
    let int_len = digit_run(chars, i);
    debug_assert!(int_len > 0);

    if int_len == 1 {
        let mut mantissa_end = i + 1;
        let mut frac_digits = 0;
        if chars.get(mantissa_end) == Some(&'.') {
            frac_digits = digit_run(chars, mantissa_end + 1);
            if frac_digits > 0 {
                mantissa_end += 1 + frac_digits;
            }
        }
        if let Some(end) = exponent_end(chars, mantissa_end) {
            let mut mantissa: Vec<char> = vec![chars[i]];
            if frac_digits > 0 {
                mantissa.extend(&chars[i + 2..i + 2 + frac_digits]);
            }
            let significant = mantissa.iter().skip_while(|&&c| c == '0').count().max(1);
            return (end, NumberKind::Scientific { significant_digits: significant });
        }
    }

    let int_end = grouped_end(chars, i, int_len);
    if chars.get(int_end) == Some(&'.') {
        let frac = digit_run(chars, int_end + 1);
        if frac > 0 {
            return (int_end + 1 + frac, NumberKind::Decimal { decimal_places: frac });
        }
    }
    (int_end, NumberKind::Integer)
}

fn glued_to_identifier(chars: &[char], start: usize) -> bool {
    let Some(&prev) = start.checked_sub(1).and_then(|p| chars.get(p)) else {
        return false;
    };
    if is_word_char(prev) {
        return true;
    }
    if prev == '-' || prev == '.' {
        if let Some(&before) = start.checked_sub(2).and_then(|p| chars.get(p)) {
            return if prev == '-' { before.is_alphabetic() } else { is_word_char(before) };
        }
    }
    false
}

pub fn extract_numbers(text: &str) -> Vec<NumberToken> {
    let chars: Vec<char> = text.chars().collect();
    let mut tokens = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let signed = matches!(c, '+' | '-') && chars.get(i + 1).is_some_and(|d| d.is_ascii_digit());
        if !(c.is_ascii_digit() || signed) {
            i += 1;
            continue;
        }
        if signed && i > 0 && is_word_char(chars[i - 1]) {
            // joiner, not a sign; rescan from the digit
            i += 1;
            continue;
        }
        let (end, kind) = longest_match(&chars, i);
        if !glued_to_identifier(&chars, i) {
            tokens.push(NumberToken {
                surface: chars[i..end].iter().collect(),
                kind,
                span: i..end,
            });
        }
        i = end;
    }
    tokens
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kinds(text: &str) -> Vec<(String, NumberKind)> {
        extract_numbers(text)
            .into_iter()
            .map(|t| (t.surface, t.kind))
            .collect()
    }

    #[test]
    fn decimal_places() {
        let toks = extract_numbers("pi is 3.14");
        assert_eq!(toks.len(), 1);
        assert_eq!(toks[0].decimal_places(), Some(2));
        assert_eq!(toks[0].span, 6..10);
    }

    #[test]
    fn scientific_and_grouped_integer() {
        assert_eq!(
            kinds("1.23e+4 and 5,000"),
            vec![
                ("1.23e+4".into(), NumberKind::Scientific { significant_digits: 3 }),
                ("5,000".into(), NumberKind::Integer),
            ]
        );
        assert_eq!(
            kinds("about 6.02×10^23 atoms, 1x10^-3 m"),
            vec![
                ("6.02×10^23".into(), NumberKind::Scientific { significant_digits: 3 }),
                ("1x10^-3".into(), NumberKind::Scientific { significant_digits: 1 }),
            ]
        );
    }

    #[test]
    fn identifiers_are_skipped() {
        assert!(extract_numbers("version v2 of GPT-4o").is_empty());
        assert!(extract_numbers("COVID-19 and mp3 and H2O").is_empty());
    }

    #[test]
    fn signs_and_ranges() {
        assert_eq!(
            kinds("pages 10-20, temp -5.5"),
            vec![
                ("10".into(), NumberKind::Integer),
                ("20".into(), NumberKind::Integer),
                ("-5.5".into(), NumberKind::Decimal { decimal_places: 1 }),
            ]
        );
        assert_eq!(
            kinds("-1.5e3"),
            vec![("-1.5e3".into(), NumberKind::Scientific { significant_digits: 2 })]
        );
    }

    #[test]
    fn thousands_groups_of_three_only() {
        assert_eq!(
            kinds("1,2,3"),
            vec![
                ("1".into(), NumberKind::Integer),
                ("2".into(), NumberKind::Integer),
                ("3".into(), NumberKind::Integer),
            ]
        );
        assert_eq!(
            kinds("1,0000 then 12,345,678.90"),
            vec![
                ("1".into(), NumberKind::Integer),
                ("0000".into(), NumberKind::Integer),
                ("12,345,678.90".into(), NumberKind::Decimal { decimal_places: 2 }),
            ]
        );
        assert_eq!(kinds("1234,567").len(), 2);
    }

    #[test]
    fn non_normalized_mantissa_is_decimal() {
        assert_eq!(
            kinds("12.5e3"),
            vec![("12.5".into(), NumberKind::Decimal { decimal_places: 1 })]
        );
        assert_eq!(
            kinds("0.50e2"),
            vec![("0.50e2".into(), NumberKind::Scientific { significant_digits: 2 })]
        );
    }

    #[test]
    fn sentence_period_is_not_a_decimal_point() {
        assert_eq!(kinds("It costs 3."), vec![("3".into(), NumberKind::Integer)]);
        assert_eq!(kinds("Got 5kg"), vec![("5".into(), NumberKind::Integer)]);
    }

    #[test]
    fn dotted_versions() {
        assert_eq!(
            kinds("release 1.2.3"),
            vec![("1.2".into(), NumberKind::Decimal { decimal_places: 1 })]
        );
    }

    #[test]
    fn spans_are_char_offsets() {
        let toks = extract_numbers("é 42");
        assert_eq!(toks[0].span, 2..4);
    }
}
