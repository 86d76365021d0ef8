//! Deterministic text segmentation: paragraphs, sentences, words, numbers.
//!
//! Rules, in short:
//! - Paragraphs are maximal runs of lines separated by at least one blank
//!   (whitespace-only) line. Each paragraph is trimmed; empty ones are dropped.
//! - A sentence ends at a run of `.`, `!` or `?` (counted once), optionally
//!   followed by closing quotes or brackets, then whitespace or end of text.
//!   The run only closes a sentence that already contains an alphanumeric
//!   character, and a single `.` ending one of [`ABBREVIATIONS`] never does.
//! - Words are whitespace-separated tokens with leading and trailing Unicode
//!   punctuation stripped; tokens that become empty are not words.
//! - Numbers follow the grammar documented in [`numbers`].

mod numbers;

use std::sync::OnceLock;

use regex::Regex;

pub use numbers::{extract_numbers, NumberKind, NumberToken};

/// Tokens whose trailing period does not end a sentence. Matched exactly.
pub const ABBREVIATIONS: [&str; 10] = [
    "Mr.", "Mrs.", "Dr.", "e.g.", "i.e.", "etc.", "vs.", "No.", "Fig.", "Eq.",
];

/// A text broken into paragraphs and sentences.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SegmentedText {
    pub raw: String,
    pub paragraphs: Vec<String>,
    pub sentences_per_paragraph: Vec<Vec<String>>,
    pub word_count: usize,
}

impl SegmentedText {
    pub fn new(raw: &str) -> Self {
        let paragraphs = split_paragraphs(raw);
        let sentences_per_paragraph: Vec<Vec<String>> =
            paragraphs.iter().map(|p| split_sentences(p)).collect();
        let word_count = sentences_per_paragraph
            .iter()
            .flatten()
            .map(|s| count_words(s))
            .sum();
        SegmentedText {
            raw: raw.to_string(),
            paragraphs,
            sentences_per_paragraph,
            word_count,
        }
    }

    pub fn paragraph_count(&self) -> usize {
        self.paragraphs.len()
    }

    pub fn sentence_count(&self) -> usize {
        self.sentences_per_paragraph.iter().map(Vec::len).sum()
    }

    pub fn sentences(&self) -> impl Iterator<Item = &str> {
        self.sentences_per_paragraph
            .iter()
            .flatten()
            .map(String::as_str)
    }

    pub fn paragraph_word_counts(&self) -> Vec<usize> {
        self.paragraphs.iter().map(|p| count_words(p)).collect()
    }

    pub fn paragraph_sentence_counts(&self) -> Vec<usize> {
        self.sentences_per_paragraph.iter().map(Vec::len).collect()
    }
}

pub fn split_paragraphs(text: &str) -> Vec<String> {
    let mut paragraphs = Vec::new();
    let mut current: Vec<&str> = Vec::new();
    for line in text.lines() {
        if line.trim().is_empty() {
            flush_paragraph(&mut current, &mut paragraphs);
        } else {
            current.push(line);
        }
    }
    flush_paragraph(&mut current, &mut paragraphs);
    paragraphs
}

fn flush_paragraph(lines: &mut Vec<&str>, out: &mut Vec<String>) {
    if lines.is_empty() {
        return;
    }
    let joined = lines.join("\n");
    let trimmed = joined.trim();
    if !trimmed.is_empty() {
        out.push(trimmed.to_string());
    }
    lines.clear();
}

pub(crate) fn is_terminator(c: char) -> bool {
    matches!(c, '.' | '!' | '?')
}

pub(crate) fn is_closer(c: char) -> bool {
    matches!(c, '"' | '\'' | '\u{201D}' | '\u{2019}' | ')' | ']' | '}' | '\u{00BB}')
}

fn is_opener(c: char) -> bool {
    matches!(c, '"' | '\'' | '\u{201C}' | '\u{2018}' | '(' | '[' | '{' | '\u{00AB}')
}

/// Whether the token ending at byte `dot` (inclusive) is a known abbreviation.
fn ends_with_abbreviation(text: &str, dot: usize) -> bool {
    let head = &text[..=dot];
    let token_start = head
        .char_indices()
        .rev()
        .find(|(_, c)| c.is_whitespace())
        .map(|(i, c)| i + c.len_utf8())
        .unwrap_or(0);
    let token = head[token_start..].trim_start_matches(is_opener);
    ABBREVIATIONS.contains(&token)
}

pub fn split_sentences(paragraph: &str) -> Vec<String> {
    let chars: Vec<(usize, char)> = paragraph.char_indices().collect();
    let n = chars.len();
    let mut sentences = Vec::new();
    let mut start = 0usize;
    let mut has_content = false;
    let mut i = 0usize;
    while i < n {
        let c = chars[i].1;
        if !is_terminator(c) {
            if c.is_alphanumeric() {
                has_content = true;
            }
            i += 1;
            continue;
        }
        let run_start = i;
        while i < n && is_terminator(chars[i].1) {
            i += 1;
        }
        let single_dot = i - run_start == 1 && c == '.';
        while i < n && is_closer(chars[i].1) {
            i += 1;
        }
        let at_boundary = i == n || chars[i].1.is_whitespace();
        if !at_boundary || !has_content {
            continue;
        }
        if single_dot && ends_with_abbreviation(paragraph, chars[run_start].0) {
            continue;
        }
        let end = if i == n { paragraph.len() } else { chars[i].0 };
        push_trimmed(&paragraph[start..end], &mut sentences);
        start = end;
        has_content = false;
    }
    push_trimmed(&paragraph[start..], &mut sentences);
    sentences
}

fn push_trimmed(piece: &str, out: &mut Vec<String>) {
    let trimmed = piece.trim();
    if !trimmed.is_empty() {
        out.push(trimmed.to_string());
    }
}

/// Unicode general category P (punctuation).
pub fn is_punctuation(c: char) -> bool {
    if c.is_ascii() {
        return matches!(
            c,
            '!' | '"' | '#' | '%' | '&' | '\'' | '(' | ')' | '*' | ',' | '-' | '.' | '/' | ':'
                | ';' | '?' | '@' | '[' | '\\' | ']' | '_' | '{' | '}'
        );
    }
    static PUNCT: OnceLock<Regex> = OnceLock::new();
    let re = PUNCT.get_or_init(|| Regex::new(r"^\p{P}$").expect("static regex"));
    let mut buf = [0u8; 4];
    re.is_match(c.encode_utf8(&mut buf))
}

/// Strip leading and trailing punctuation from a whitespace token.
pub fn strip_punctuation(token: &str) -> &str {
    token.trim_matches(is_punctuation)
}

pub fn words(text: &str) -> impl Iterator<Item = &str> {
    text.split_whitespace()
        .map(strip_punctuation)
        .filter(|w| !w.is_empty())
}

pub fn count_words(text: &str) -> usize {
    words(text).count()
}
