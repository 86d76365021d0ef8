//! Rule-based constraint verifiers.
//!
//! Each check returns a [`Verdict`]; malformed parameters are reported as a
//! [`VerifyError`] instead, so a broken benchmark file never looks like a
//! model failure. Substring and keyword matching is case-insensitive
//! (compared after lowercasing both sides).

mod literal;
mod registry;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::textseg::{extract_numbers, is_closer, is_terminator, NumberKind, SegmentedText};

pub use literal::{parse_param_literal, LiteralError};
pub use registry::{
    registry, run_named, run_verifier, Param, ParamKind, VerifierCall, VerifierSpec,
    KEYWORDS_ALIAS,
};

/// Upper bound used to encode "at least N" as `[N, AT_LEAST_SENTINEL]`.
pub const AT_LEAST_SENTINEL: i64 = 10000;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Verdict {
    pub passed: bool,
    pub detail: String,
}

impl Verdict {
    fn pass(detail: impl Into<String>) -> Self {
        Verdict { passed: true, detail: detail.into() }
    }

    fn fail(detail: impl Into<String>) -> Self {
        Verdict { passed: false, detail: detail.into() }
    }

    fn check(passed: bool, detail: impl Into<String>) -> Self {
        Verdict { passed, detail: detail.into() }
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "{tag}: {}", self.detail)
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum VerifyError {
    #[error("unknown verifier function `{0}`")]
    UnknownFunction(String),
    #[error("{function}: expected {expected} parameter(s), got {got}")]
    Arity { function: String, expected: usize, got: usize },
    #[error("{function}: parameter {index} must be {expected}, got {found}")]
    Kind {
        function: String,
        index: usize,
        expected: ParamKind,
        found: String,
    },
    #[error("{function}: {reason}")]
    InvalidParam { function: String, reason: String },
}

fn invalid(function: &str, reason: impl Into<String>) -> VerifyError {
    VerifyError::InvalidParam { function: function.to_string(), reason: reason.into() }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CountScope {
    Paragraphs,
    Sentences,
    Words,
    PerParagraphSentences,
    PerParagraphWords,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ListScope {
    Sentences,
    Words,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SubstringRule {
    WholeBegin(String),
    WholeEnd(String),
    EachSentenceBegin(String),
    EachSentenceEnd(String),
    NotContainedOne(String),
    NotContainedMany(Vec<String>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NumberRule {
    PrecisionEquals(i64),
    NoNumbers,
    ScientificSigDigits(i64),
}

pub(crate) fn check_range(function: &str, lower: i64, upper: i64) -> Result<(), VerifyError> {
    if lower < 0 {
        return Err(invalid(function, format!("lower bound {lower} is negative")));
    }
    if lower > upper {
        return Err(invalid(function, format!("inverted range [{lower}, {upper}]")));
    }
    Ok(())
}

fn in_range(value: usize, lower: i64, upper: i64) -> bool {
    let v = value as i64;
    lower <= v && v <= upper
}

pub fn verify_count_in_range(
    text: &str,
    scope: CountScope,
    lower: i64,
    upper: i64,
) -> Result<Verdict, VerifyError> {
    check_range("count_in_range", lower, upper)?;
    let seg = SegmentedText::new(text);
    let whole = |measured: usize, what: &str| {
        Verdict::check(
            in_range(measured, lower, upper),
            format!("{what}: measured {measured}, required [{lower}, {upper}]"),
        )
    };
    let per_paragraph = |counts: Vec<usize>, what: &str| {
        if counts.is_empty() {
            return Verdict::fail(format!("{what}: no paragraphs, measured 0"));
        }
        match counts.iter().position(|&c| !in_range(c, lower, upper)) {
            Some(i) => Verdict::fail(format!(
                "{what}: paragraph {} measured {}, required [{lower}, {upper}]",
                i + 1,
                counts[i]
            )),
            None => Verdict::pass(format!("{what}: measured {counts:?}, required [{lower}, {upper}]")),
        }
    };
    Ok(match scope {
        CountScope::Paragraphs => whole(seg.paragraph_count(), "paragraphs"),
        CountScope::Sentences => whole(seg.sentence_count(), "sentences"),
        CountScope::Words => whole(seg.word_count, "words"),
        CountScope::PerParagraphSentences => {
            per_paragraph(seg.paragraph_sentence_counts(), "sentences per paragraph")
        }
        CountScope::PerParagraphWords => per_paragraph(seg.paragraph_word_counts(), "words per paragraph"),
    })
}

pub fn verify_per_paragraph_range_list(
    text: &str,
    scope: ListScope,
    ranges: &[(i64, i64)],
) -> Result<Verdict, VerifyError> {
    const FN: &str = "per_paragraph_range_list";
    if ranges.is_empty() {
        return Err(invalid(FN, "ranges must not be empty"));
    }
    for &(lo, hi) in ranges {
        check_range(FN, lo, hi)?;
    }
    let seg = SegmentedText::new(text);
    let counts = match scope {
        ListScope::Sentences => seg.paragraph_sentence_counts(),
        ListScope::Words => seg.paragraph_word_counts(),
    };
    if counts.len() != ranges.len() {
        return Ok(Verdict::fail(format!(
            "paragraph count {} \u{2260} {}",
            counts.len(),
            ranges.len()
        )));
    }
    for (i, (&c, &(lo, hi))) in counts.iter().zip(ranges).enumerate() {
        if !in_range(c, lo, hi) {
            return Ok(Verdict::fail(format!(
                "paragraph {} measured {c}, required [{lo}, {hi}]",
                i + 1
            )));
        }
    }
    Ok(Verdict::pass(format!("per-paragraph counts {counts:?} within {ranges:?}")))
}

pub fn verify_sentence_progression(
    text: &str,
    exceed_num: i64,
    upper_bound: i64,
) -> Result<Verdict, VerifyError> {
    const FN: &str = "sentence_progression";
    if exceed_num < 1 {
        return Err(invalid(FN, format!("exceed_num must be >= 1, got {exceed_num}")));
    }
    if upper_bound < 1 {
        return Err(invalid(FN, format!("upper_bound must be >= 1, got {upper_bound}")));
    }
    let counts = SegmentedText::new(text).paragraph_sentence_counts();
    if counts.is_empty() {
        return Ok(Verdict::fail("no paragraphs, measured 0"));
    }
    if let Some(i) = counts.iter().position(|&c| c as i64 > upper_bound) {
        return Ok(Verdict::fail(format!(
            "paragraph {} has {} sentences, exceeding {upper_bound}",
            i + 1,
            counts[i]
        )));
    }
    for (i, pair) in counts.windows(2).enumerate() {
        if pair[1] as i64 != pair[0] as i64 + exceed_num {
            return Ok(Verdict::fail(format!(
                "paragraph {} has {} sentences, expected {} + {exceed_num}",
                i + 2,
                pair[1],
                pair[0]
            )));
        }
    }
    Ok(Verdict::pass(format!("sentence counts {counts:?}")))
}

pub(crate) fn fold(s: &str) -> String {
    s.to_lowercase()
}

/// Strip trailing sentence terminators and closing quotes/brackets.
fn strip_terminal(s: &str) -> &str {
    s.trim_end_matches(|c| is_terminator(c) || is_closer(c)).trim_end()
}

fn ends_with_loose(haystack: &str, needle: &str) -> bool {
    haystack.ends_with(needle) || strip_terminal(haystack).ends_with(needle)
}

fn require_non_empty(function: &str, needle: &str) -> Result<(), VerifyError> {
    if needle.is_empty() {
        Err(invalid(function, "substring must not be empty"))
    } else {
        Ok(())
    }
}

/// Char offset of the first case-insensitive occurrence of `needle`.
fn find_folded(text: &str, needle: &str) -> Option<usize> {
    let hay = fold(text);
    let needle = fold(needle);
    hay.find(&needle).map(|b| hay[..b].chars().count())
}

pub fn verify_substring_position(text: &str, rule: &SubstringRule) -> Result<Verdict, VerifyError> {
    const FN: &str = "substring_position";
    match rule {
        SubstringRule::NotContainedMany(list) => {
            if list.is_empty() {
                return Err(invalid(FN, "substring list must not be empty"));
            }
            for s in list {
                require_non_empty(FN, s)?;
            }
        }
        SubstringRule::WholeBegin(s)
        | SubstringRule::WholeEnd(s)
        | SubstringRule::EachSentenceBegin(s)
        | SubstringRule::EachSentenceEnd(s)
        | SubstringRule::NotContainedOne(s) => require_non_empty(FN, s)?,
    }

    let not_contained = |needles: &[String]| {
        for needle in needles {
            if let Some(at) = find_folded(text, needle) {
                return Verdict::fail(format!("found {needle:?} at offset {at}"));
            }
        }
        Verdict::pass(format!("none of {needles:?} present"))
    };

    Ok(match rule {
        SubstringRule::NotContainedOne(s) => not_contained(std::slice::from_ref(s)),
        SubstringRule::NotContainedMany(list) => not_contained(list),
        SubstringRule::WholeBegin(s) => {
            let body = fold(text.trim());
            Verdict::check(
                body.starts_with(&fold(s)),
                format!("response begins with {:?}, required {s:?}", preview(text.trim(), true)),
            )
        }
        SubstringRule::WholeEnd(s) => {
            let body = fold(text.trim());
            Verdict::check(
                ends_with_loose(&body, &fold(s)),
                format!("response ends with {:?}, required {s:?}", preview(text.trim(), false)),
            )
        }
        SubstringRule::EachSentenceBegin(s) | SubstringRule::EachSentenceEnd(s) => {
            let begin = matches!(rule, SubstringRule::EachSentenceBegin(_));
            let seg = SegmentedText::new(text);
            let needle = fold(s);
            let mut total = 0;
            for (i, sentence) in seg.sentences().enumerate() {
                total += 1;
                let folded = fold(sentence);
                let ok = if begin {
                    folded.starts_with(&needle)
                } else {
                    ends_with_loose(&folded, &needle)
                };
                if !ok {
                    let side = if begin { "begin" } else { "end" };
                    return Ok(Verdict::fail(format!(
                        "sentence {} does not {side} with {s:?}: {:?}",
                        i + 1,
                        preview(sentence, begin)
                    )));
                }
            }
            if total == 0 {
                Verdict::fail("no sentences, measured 0")
            } else {
                Verdict::pass(format!("all {total} sentences satisfy the position rule"))
            }
        }
    })
}

fn preview(s: &str, from_start: bool) -> String {
    const N: usize = 24;
    let count = s.chars().count();
    if count <= N {
        s.to_string()
    } else if from_start {
        s.chars().take(N).collect::<String>() + "…"
    } else {
        "…".to_string() + &s.chars().skip(count - N).collect::<String>()
    }
}

fn collapse_whitespace(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Non-overlapping, word-bounded occurrences of `keyword` in `text`.
/// Both inputs are expected folded and whitespace-collapsed.
pub(crate) fn count_bounded(text: &str, keyword: &str) -> usize {
    let hay: Vec<char> = text.chars().collect();
    let needle: Vec<char> = keyword.chars().collect();
    if needle.is_empty() || needle.len() > hay.len() {
        return 0;
    }
    let mut count = 0;
    let mut i = 0;
    while i + needle.len() <= hay.len() {
        let end = i + needle.len();
        let matched = hay[i..end] == needle[..]
            && (i == 0 || !hay[i - 1].is_alphanumeric())
            && (end == hay.len() || !hay[end].is_alphanumeric());
        if matched {
            count += 1;
            i = end;
        } else {
            i += 1;
        }
    }
    count
}

pub fn verify_keyword_mentions(
    text: &str,
    keywords: &[String],
    lower_times: i64,
    upper_times: i64,
) -> Result<Verdict, VerifyError> {
    const FN: &str = "keyword_mentions";
    if keywords.is_empty() {
        return Err(invalid(FN, "keyword list must not be empty"));
    }
    check_range(FN, lower_times, upper_times)?;
    let hay = collapse_whitespace(&fold(text));
    let mut total = 0usize;
    let mut parts = Vec::with_capacity(keywords.len());
    for kw in keywords {
        let needle = collapse_whitespace(&fold(kw));
        if needle.is_empty() {
            return Err(invalid(FN, "keywords must not be empty"));
        }
        let n = count_bounded(&hay, &needle);
        parts.push(format!("{kw:?}={n}"));
        total += n;
    }
    Ok(Verdict::check(
        in_range(total, lower_times, upper_times),
        format!(
            "mentions {}; measured {total}, required [{lower_times}, {upper_times}]",
            parts.join(", ")
        ),
    ))
}

pub fn verify_number_rules(text: &str, rule: NumberRule) -> Result<Verdict, VerifyError> {
    const FN: &str = "number_rules";
    let tokens = extract_numbers(text);
    Ok(match rule {
        NumberRule::PrecisionEquals(precision) => {
            if precision < 0 {
                return Err(invalid(FN, format!("precision must be >= 0, got {precision}")));
            }
            let bad = tokens.iter().find(|t| {
                t.decimal_places().is_some_and(|p| p as i64 != precision)
            });
            match bad {
                Some(t) => Verdict::fail(format!(
                    "{} has {} decimal places, required {precision}",
                    t.surface,
                    t.decimal_places().unwrap_or(0)
                )),
                None => Verdict::pass(format!("all decimals have {precision} decimal places")),
            }
        }
        NumberRule::NoNumbers => match tokens.first() {
            Some(t) => Verdict::fail(format!(
                "found number {} at offset {} ({} in total)",
                t.surface,
                t.span.start,
                tokens.len()
            )),
            None => Verdict::pass("no numbers found"),
        },
        NumberRule::ScientificSigDigits(digits) => {
            if digits < 1 {
                return Err(invalid(FN, format!("significant_digits must be >= 1, got {digits}")));
            }
            let sci: Vec<_> = tokens
                .iter()
                .filter(|t| matches!(t.kind, NumberKind::Scientific { .. }))
                .collect();
            if sci.is_empty() {
                Verdict::fail("no number in scientific notation, measured 0")
            } else if let Some(t) = sci
                .iter()
                .find(|t| t.significant_digits().is_some_and(|d| d as i64 != digits))
            {
                Verdict::fail(format!(
                    "{} has {} significant digits, required {digits}",
                    t.surface,
                    t.significant_digits().unwrap_or(0)
                ))
            } else {
                Verdict::pass(format!(
                    "{} scientific number(s) with {digits} significant digits",
                    sci.len()
                ))
            }
        }
    })
}
