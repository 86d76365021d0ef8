//! Verifier selection and parameter extraction from constraint text.
//!
//! Stage one is a deterministic pattern bank over the templated phrasings
//! used for countable constraints. Stage two asks an LLM for a JSON binding.
//! Anything that fails registry validation ends as `NeedsReview`.

use std::sync::OnceLock;

use regex::{Captures, Regex};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::client::{Decoding, GenerationClient, GenerationRequest};
use super::templates;
use crate::verifiers::{registry, Param, VerifierCall, AT_LEAST_SENTINEL};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Confidence {
    PatternMatched,
    LlmExtracted,
    NeedsReview,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ExtractionResult {
    /// Present unless `confidence` is `NeedsReview`.
    pub call: Option<VerifierCall>,
    pub confidence: Confidence,
}

impl ExtractionResult {
    fn needs_review() -> Self {
        ExtractionResult { call: None, confidence: Confidence::NeedsReview }
    }

    pub fn function_name(&self) -> Option<&'static str> {
        self.call.as_ref().map(VerifierCall::name)
    }
}

/// Bind a constraint description to a verifier. `llm` is consulted only when
/// the pattern bank has no match.
pub fn extract_verifier_params(description: &str, llm: Option<&dyn GenerationClient>) -> ExtractionResult {
    if let Some(call) = pattern_extract(description) {
        return ExtractionResult { call: Some(call), confidence: Confidence::PatternMatched };
    }
    let Some(client) = llm else {
        return ExtractionResult::needs_review();
    };
    let functions = registry()
        .iter()
        .map(|s| format!("{}: {}", s.name, s.signature()))
        .collect::<Vec<_>>()
        .join("\n");
    let prompt = templates::EXTRACT_PARAMS.render(&[("functions", &functions), ("constraint", description.trim())]);
    let reply = match client.generate(&GenerationRequest::new(prompt, Decoding::JUDGE)) {
        Ok(r) => r,
        Err(e) => {
            log::warn!("parameter extraction call failed: {e}");
            return ExtractionResult::needs_review();
        }
    };
    match parse_llm_binding(&reply) {
        Some(call) => ExtractionResult { call: Some(call), confidence: Confidence::LlmExtracted },
        None => ExtractionResult::needs_review(),
    }
}

fn parse_llm_binding(reply: &str) -> Option<VerifierCall> {
    let start = reply.find('{')?;
    let end = reply.rfind('}')?;
    let v: Value = serde_json::from_str(reply.get(start..=end)?).ok()?;
    let name = v.get("function")?.as_str()?;
    let params = v.get("params")?.as_array()?;
    VerifierCall::from_json(name, params).ok()
}

// ---------------------------------------------------------------------------
// Stage one

const NUM: &str = r"(\d{1,3}(?:,\d{3})+|\d+)";

fn re(cell: &'static OnceLock<Regex>, pattern: impl FnOnce() -> String) -> &'static Regex {
    cell.get_or_init(|| Regex::new(&pattern()).expect("pattern bank regex"))
}

macro_rules! pattern {
    ($name:ident, $body:expr) => {
        fn $name() -> &'static Regex {
            static CELL: OnceLock<Regex> = OnceLock::new();
            re(&CELL, || $body)
        }
    };
}

pattern!(quantity_re, format!(
    r"\b(?:between\s+{NUM}\s+and\s+{NUM}|from\s+{NUM}\s+to\s+{NUM}|{NUM}\s*(?:-|to)\s*{NUM}\b|(?:at\s+least|no\s+(?:fewer|less)\s+than|not\s+(?:fewer|less)\s+than|a\s+minimum\s+of|minimum\s+of)\s+{NUM}|(?:at\s+most|no\s+more\s+than|not\s+more\s+than|up\s+to|a\s+maximum\s+of|maximum\s+of|not\s+exceed(?:ing)?|does\s+not\s+exceed)\s+{NUM}|(?:less|fewer)\s+than\s+{NUM}|(?:more|greater)\s+than\s+{NUM}|(?:exactly\s+|precisely\s+)?{NUM})"
));
pattern!(number_word_re, r"\b(one|two|three|four|five|six|seven|eight|nine|ten|eleven|twelve|thirteen|fourteen|fifteen|sixteen|seventeen|eighteen|nineteen|twenty|once|twice|thrice)\b".to_string());
pattern!(progression_re, format!(r"\b{NUM}\s+(?:more\s+)?sentences?\s+(?:more\s+)?than\s+the\s+previous"));
pattern!(progression_cap_re, format!(r"\b(?:exceeds?|exceeding|more\s+than|over|at\s+most|no\s+more\s+than|maximum\s+of|up\s+to)\s+{NUM}"));
pattern!(ordinal_re, r"\b(first|second|third|fourth|fifth|sixth|seventh|eighth|ninth|tenth)\b".to_string());
pattern!(each_paragraph_re, r"\b(?:each|every|per)\s+(?:single\s+)?paragraph\b|\ball\s+(?:the\s+)?paragraphs\b".to_string());
pattern!(each_sentence_re, r"\b(?:each|every)\s+(?:single\s+)?sentence\b|\ball\s+(?:of\s+the\s+|the\s+)?sentences\b".to_string());
pattern!(distributive_re, r"\b(?:each|every|per)\b".to_string());
pattern!(negation_re, r"\b(?:not|no|never|avoid|avoiding|without|refrain|exclude|excluding|don't|doesn't|mustn't|shouldn't|cannot|can't)\b".to_string());
pattern!(no_number_re, r"\b(?:not|no|never|avoid|avoiding|without|refrain|exclude|don't|doesn't|mustn't|shouldn't)\b[^.]*?\b(?:numbers?|digits?|numerals?)\b".to_string());
pattern!(begin_re, r"\b(?:start|starts|starting|begin|begins|beginning|open|opens)\b[^.]*?\bwith\b".to_string());
pattern!(end_re, r"\b(?:end|ends|ending|finish|finishes|conclude|concludes|close|closes)\b[^.]*?\bwith\b".to_string());
pattern!(replace_re, r"\breplace\b(.*?)\bwith\b".to_string());
pattern!(both_re, r"\b(?:both|each)\b".to_string());
pattern!(decimal_re, format!(r"\b{NUM}\s+decimal\s+places?\b"));
pattern!(sigfig_re, format!(r"\b{NUM}\s+significant\s+(?:digits?|figures?)\b"));
pattern!(paragraph_unit_re, r"\bparagraphs?\b".to_string());
pattern!(sentence_unit_re, r"\bsentences?\b".to_string());
pattern!(word_unit_re, r"\bwords?\b".to_string());

const QUOTE_MARK: &str = " \u{1}q\u{1} ";

const SYMBOLS: &[(&str, &str)] = &[
    (r"\bexclamation\s+(?:points?|marks?)\b", "!"),
    (r"\bquestion\s+marks?\b", "?"),
    (r"\bellips[ie]s\b", "..."),
    (r"\bfull\s+stops?\b", "."),
    (r"\bperiods?\b", "."),
    (r"\bsemicolons?\b", ";"),
    (r"\bcolons?\b", ":"),
    (r"\bcommas?\b", ","),
    (r"\bhyphens?\b", "-"),
    (r"\basterisks?\b", "*"),
    (r"\bampersands?\b", "&"),
];

fn symbol_res() -> &'static [(Regex, &'static str)] {
    static CELL: OnceLock<Vec<(Regex, &'static str)>> = OnceLock::new();
    CELL.get_or_init(|| {
        SYMBOLS
            .iter()
            .map(|(p, s)| (Regex::new(p).expect("symbol regex"), *s))
            .collect()
    })
}

/// Symbols named in `text`, in order of first appearance.
fn symbols_in(text: &str) -> Vec<&'static str> {
    let mut found: Vec<(usize, &'static str)> = symbol_res()
        .iter()
        .filter_map(|(re, sym)| re.find(text).map(|m| (m.start(), *sym)))
        .collect();
    found.sort_by_key(|(at, _)| *at);
    let mut out: Vec<&'static str> = Vec::new();
    for (_, s) in found {
        if !out.contains(&s) {
            out.push(s);
        }
    }
    out
}

/// Constraint text split into quoted literals (original case) and the
/// lowercased remainder with number words replaced by digits.
struct Normalized {
    quotes: Vec<String>,
    text: String,
}

fn is_open_quote(c: char) -> Option<char> {
    match c {
        '"' => Some('"'),
        '\u{201C}' => Some('\u{201D}'),
        '\u{2018}' => Some('\u{2019}'),
        '\'' => Some('\''),
        _ => None,
    }
}

fn normalize(description: &str) -> Normalized {
    let chars: Vec<char> = description.chars().collect();
    let mut quotes = Vec::new();
    let mut rest = String::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let prev_alnum = i > 0 && chars[i - 1].is_alphanumeric();
        if let Some(close) = is_open_quote(c).filter(|_| !prev_alnum) {
            let apostrophe_like = close == '\'' || close == '\u{2019}';
            let end = (i + 1..chars.len()).find(|&j| {
                chars[j] == close
                    && j > i + 1
                    && (!apostrophe_like || !chars.get(j + 1).is_some_and(|n| n.is_alphanumeric()))
            });
            if let Some(j) = end {
                quotes.push(chars[i + 1..j].iter().collect());
                rest.push_str(QUOTE_MARK);
                i = j + 1;
                continue;
            }
        }
        rest.push(c);
        i += 1;
    }
    let lowered = rest.to_lowercase();
    let text = number_word_re()
        .replace_all(&lowered, |c: &Captures| {
            let n = match &c[1] {
                "one" => "1",
                "two" => "2",
                "three" => "3",
                "four" => "4",
                "five" => "5",
                "six" => "6",
                "seven" => "7",
                "eight" => "8",
                "nine" => "9",
                "ten" => "10",
                "eleven" => "11",
                "twelve" => "12",
                "thirteen" => "13",
                "fourteen" => "14",
                "fifteen" => "15",
                "sixteen" => "16",
                "seventeen" => "17",
                "eighteen" => "18",
                "nineteen" => "19",
                "twenty" => "20",
                "once" => "1 times",
                "twice" => "2 times",
                _ => "3 times",
            };
            n.to_string()
        })
        .into_owned();
    Normalized { quotes, text }
}

fn num(s: &str) -> Option<i64> {
    s.replace(',', "").parse().ok()
}

/// First quantity phrase in `text` as an inclusive range. With
/// `positive_floor`, upper-bound-only phrases start at 1 instead of 0.
fn quantity(text: &str, positive_floor: bool) -> Option<(i64, i64)> {
    let c = quantity_re().captures(text)?;
    let g = |i: usize| c.get(i).and_then(|m| num(m.as_str()));
    let floor = i64::from(positive_floor);
    let range = if let (Some(a), Some(b)) = (g(1), g(2)) {
        (a, b)
    } else if let (Some(a), Some(b)) = (g(3), g(4)) {
        (a, b)
    } else if let (Some(a), Some(b)) = (g(5), g(6)) {
        (a, b)
    } else if let Some(n) = g(7) {
        (n, AT_LEAST_SENTINEL)
    } else if let Some(n) = g(8) {
        (floor, n)
    } else if let Some(n) = g(9) {
        (floor, n.checked_sub(1)?)
    } else if let Some(n) = g(10) {
        (n + 1, AT_LEAST_SENTINEL)
    } else {
        let n = g(11)?;
        (n, n)
    };
    (range.0 <= range.1).then_some(range)
}

fn call(name: &str, params: Vec<Param>) -> Option<VerifierCall> {
    VerifierCall::new(name, params).ok()
}

fn bounds(name: &str, (lo, hi): (i64, i64)) -> Option<VerifierCall> {
    call(name, vec![Param::Int(lo), Param::Int(hi)])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Unit {
    Paragraph,
    Sentence,
    Word,
}

fn units_in(text: &str) -> Vec<Unit> {
    let mut out = Vec::new();
    for (re, u) in [
        (paragraph_unit_re(), Unit::Paragraph),
        (sentence_unit_re(), Unit::Sentence),
        (word_unit_re(), Unit::Word),
    ] {
        if re.is_match(text) {
            out.push(u);
        }
    }
    out
}

/// Deterministic stage: a verifier binding for templated phrasings, or
/// `None` when no rule applies unambiguously.
pub fn pattern_extract(description: &str) -> Option<VerifierCall> {
    let n = normalize(description);
    let t = n.text.as_str();
    let negated = negation_re().is_match(t);

    if let Some(c) = progression_re().captures(t) {
        let step = num(&c[1])?;
        let after = &t[c.get(0)?.end()..];
        let cap = progression_cap_re()
            .captures(after)
            .and_then(|m| num(&m[1]))
            .unwrap_or(AT_LEAST_SENTINEL);
        return call(
            "check_whether_each_paragraph_sentence_number_exceeds",
            vec![Param::Int(step), Param::Int(cap)],
        );
    }

    if let Some(r) = ordinal_list(t) {
        return r;
    }

    if each_paragraph_re().is_match(t) {
        let units: Vec<Unit> = units_in(t).into_iter().filter(|u| *u != Unit::Paragraph).collect();
        let name = match units.as_slice() {
            [Unit::Sentence] => "check_whether_each_paragraph_sentence_number_in_range",
            [Unit::Word] => "check_whether_each_paragraph_word_count_in_range",
            _ => return None,
        };
        return bounds(name, quantity(t, false)?);
    }

    if no_number_re().is_match(t) && !t.contains("decimal") && !t.contains("significant") {
        return call("check_whether_has_no_number_in_response", vec![]);
    }

    let begins = begin_re().find(t);
    let ends = end_re().find(t);
    if begins.is_some() || ends.is_some() {
        if negated {
            return None;
        }
        let per_sentence = each_sentence_re().is_match(t);
        if each_paragraph_re().is_match(t) || (begins.is_some() && ends.is_some()) {
            return None;
        }
        let anchor = begins.or(ends)?;
        let substring = match n.quotes.as_slice() {
            [q] => q.clone(),
            [] => symbols_in(&t[anchor.end()..]).first()?.to_string(),
            _ => return None,
        };
        let name = match (begins.is_some(), per_sentence) {
            (true, false) => "check_whether_whole_response_begin_with_certain_substring",
            (true, true) => "check_whether_each_sentence_begin_with_certain_substring",
            (false, false) => "check_whether_whole_response_end_with_certain_substring",
            (false, true) => "check_whether_each_sentence_end_with_certain_substring",
        };
        return call(name, vec![Param::Str(substring)]);
    }

    if let Some(c) = replace_re().captures(t) {
        if let [sym] = symbols_in(&c[1]).as_slice() {
            return call(
                "check_whether_whole_response_not_contain_certain_substring",
                vec![Param::Str(sym.to_string())],
            );
        }
    }

    if negated {
        let forbidden: Vec<String> = if n.quotes.is_empty() {
            symbols_in(t).into_iter().map(str::to_string).collect()
        } else {
            n.quotes.clone()
        };
        return match forbidden.len() {
            0 => None,
            1 => call(
                "check_whether_whole_response_not_contain_certain_substring",
                vec![Param::Str(forbidden[0].clone())],
            ),
            _ => call(
                "check_whether_whole_response_not_contain_certain_substrings",
                vec![Param::StrList(forbidden)],
            ),
        };
    }

    if !n.quotes.is_empty() {
        if both_re().is_match(t) {
            return None;
        }
        let (lo, hi) = quantity(t, false).unwrap_or((1, AT_LEAST_SENTINEL));
        return call(
            "check_whether_keywords_metioned_in_range",
            vec![Param::StrList(n.quotes.clone()), Param::Int(lo), Param::Int(hi)],
        );
    }

    if let Some(c) = decimal_re().captures(t) {
        return call("check_number_precision_in_response", vec![Param::Int(num(&c[1])?)]);
    }

    if let Some(c) = sigfig_re().captures(t) {
        return call("check_scientific_notation_precision_in_response", vec![Param::Int(num(&c[1])?)]);
    }

    if distributive_re().is_match(t) {
        return None;
    }
    let name = match units_in(t).as_slice() {
        [Unit::Paragraph] => "check_whether_response_paragraph_number_in_range",
        [Unit::Sentence] => "check_whether_response_sentence_number_in_range",
        [Unit::Word] => "check_whether_response_word_count_in_range",
        _ => return None,
    };
    bounds(name, quantity(t, false)?)
}

/// "first paragraph … second …" lists. Returns `Some(None)` when the
/// phrasing is recognised but cannot be bound.
fn ordinal_list(t: &str) -> Option<Option<VerifierCall>> {
    const ORDER: [&str; 10] = [
        "first", "second", "third", "fourth", "fifth", "sixth", "seventh", "eighth", "ninth", "tenth",
    ];
    let hits: Vec<(usize, &str)> = ordinal_re().find_iter(t).map(|m| (m.start(), m.as_str())).collect();
    if hits.len() < 2 || !paragraph_unit_re().is_match(t) {
        return None;
    }
    if hits.iter().zip(ORDER).any(|((_, w), expect)| *w != expect) {
        return Some(None);
    }
    let name = match units_in(t).iter().filter(|u| **u != Unit::Paragraph).collect::<Vec<_>>().as_slice() {
        [Unit::Sentence] => "check_whether_each_paragraph_sentence_number_in_range_list",
        [Unit::Word] => "check_whether_each_paragraph_word_count_in_range_list",
        _ => return Some(None),
    };
    let mut ranges = Vec::with_capacity(hits.len());
    for (k, (start, _)) in hits.iter().enumerate() {
        let end = hits.get(k + 1).map_or(t.len(), |(s, _)| *s);
        match quantity(&t[*start..end], true) {
            Some(r) => ranges.push(r),
            None => return Some(None),
        }
    }
    Some(call(name, vec![Param::RangeList(ranges)]))
}
