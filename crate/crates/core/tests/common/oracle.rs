//! Brute-force reference checks written against the documented text rules
//! without reusing any library code. Token-level where the library scans
//! characters, and the reverse.

use regex::Regex;
use std::sync::OnceLock;

const ABBREVIATIONS: [&str; 10] = ["Mr.", "Mrs.", "Dr.", "e.g.", "i.e.", "etc.", "vs.", "No.", "Fig.", "Eq."];

fn is_term(c: char) -> bool {
    c == '.' || c == '!' || c == '?'
}

fn is_close(c: char) -> bool {
    "\"')]}".contains(c) || c == '\u{201D}' || c == '\u{2019}' || c == '\u{00BB}'
}

fn is_open(c: char) -> bool {
    "\"'([{".contains(c) || c == '\u{201C}' || c == '\u{2018}' || c == '\u{00AB}'
}

/// ASCII members of Unicode category P.
fn is_ascii_p(c: char) -> bool {
    "!\"#%&'()*,-./:;?@[\\]_{}".contains(c)
}

/// Paragraphs by walking the text one character at a time.
pub fn paragraphs(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut para = String::new();
    let mut line = String::new();
    let flush_line = |line: &mut String, para: &mut String, out: &mut Vec<String>| {
        let l = line.strip_suffix('\r').unwrap_or(line);
        if l.chars().all(char::is_whitespace) {
            let t = para.trim();
            if !t.is_empty() {
                out.push(t.to_string());
            }
            para.clear();
        } else {
            if !para.is_empty() {
                para.push('\n');
            }
            para.push_str(l);
        }
        line.clear();
    };
    for c in text.chars() {
        if c == '\n' {
            flush_line(&mut line, &mut para, &mut out);
        } else {
            line.push(c);
        }
    }
    if !line.is_empty() {
        flush_line(&mut line, &mut para, &mut out);
    }
    let t = para.trim();
    if !t.is_empty() {
        out.push(t.to_string());
    }
    out
}

/// Whitespace tokens with their byte spans.
fn tokens(s: &str) -> Vec<(usize, usize)> {
    let mut spans = Vec::new();
    let mut start = None;
    for (i, c) in s.char_indices() {
        match (c.is_whitespace(), start) {
            (true, Some(b)) => {
                spans.push((b, i));
                start = None;
            }
            (false, None) => start = Some(i),
            _ => {}
        }
    }
    if let Some(b) = start {
        spans.push((b, s.len()));
    }
    spans
}

/// Whether a token closes a sentence, ignoring the content requirement.
fn token_ends_sentence(tok: &str) -> bool {
    let core = tok.trim_end_matches(is_close);
    let chars: Vec<char> = core.chars().collect();
    let Some(&last) = chars.last() else { return false };
    if !is_term(last) {
        return false;
    }
    let single_dot = last == '.' && !(chars.len() >= 2 && is_term(chars[chars.len() - 2]));
    if single_dot {
        let bare = core.trim_start_matches(is_open);
        if ABBREVIATIONS.contains(&bare) {
            return false;
        }
    }
    true
}

/// Sentences of one paragraph, built token by token.
pub fn sentences(paragraph: &str) -> Vec<String> {
    let toks = tokens(paragraph);
    let mut out = Vec::new();
    let mut first: Option<usize> = None;
    let mut content = false;
    for &(b, e) in &toks {
        let tok = &paragraph[b..e];
        first.get_or_insert(b);
        // Terminators in the middle of a token never split.
        if tok.chars().any(char::is_alphanumeric) {
            content = true;
        }
        if content && token_ends_sentence(tok) {
            out.push(paragraph[first.unwrap()..e].to_string());
            first = None;
            content = false;
        }
    }
    if let Some(b) = first {
        out.push(paragraph[b..].trim().to_string());
    }
    out
}

pub fn word_count(text: &str) -> usize {
    tokens(text)
        .into_iter()
        .filter(|&(b, e)| text[b..e].chars().any(|c| !is_ascii_p(c)))
        .count()
}

fn lower(s: &str) -> Vec<char> {
    s.chars().flat_map(char::to_lowercase).collect()
}

pub fn contains_ci(text: &str, needle: &str) -> bool {
    let h = lower(text);
    let n = lower(needle);
    if n.len() > h.len() {
        return false;
    }
    (0..=h.len() - n.len()).any(|i| h[i..i + n.len()] == n[..])
}

pub fn begins_ci(text: &str, needle: &str) -> bool {
    let h = lower(text.trim());
    let n = lower(needle);
    h.len() >= n.len() && h[..n.len()] == n[..]
}

fn ends_ci(h: &[char], n: &[char]) -> bool {
    h.len() >= n.len() && h[h.len() - n.len()..] == n[..]
}

/// Case-insensitive suffix test that also accepts the text with its final
/// terminators and closing marks removed.
pub fn ends_loose_ci(text: &str, needle: &str) -> bool {
    let mut h = lower(text.trim());
    let n = lower(needle);
    if ends_ci(&h, &n) {
        return true;
    }
    while h.last().is_some_and(|&c| is_term(c) || is_close(c)) {
        h.pop();
    }
    while h.last().is_some_and(|c| c.is_whitespace()) {
        h.pop();
    }
    ends_ci(&h, &n)
}

/// Word-bounded, non-overlapping, leftmost occurrences; a space in the
/// keyword matches any run of whitespace.
pub fn keyword_count(text: &str, keyword: &str) -> usize {
    let h = lower(text);
    let words: Vec<Vec<char>> = keyword.split_whitespace().map(lower).collect();
    if words.is_empty() {
        return 0;
    }
    let try_at = |start: usize| -> Option<usize> {
        let mut i = start;
        for (k, w) in words.iter().enumerate() {
            if k > 0 {
                let ws = h[i..].iter().take_while(|c| c.is_whitespace()).count();
                if ws == 0 {
                    return None;
                }
                i += ws;
            }
            if h.len() < i + w.len() || h[i..i + w.len()] != w[..] {
                return None;
            }
            i += w.len();
        }
        Some(i)
    };
    let mut count = 0;
    let mut i = 0;
    while i < h.len() {
        let left_ok = i == 0 || !h[i - 1].is_alphanumeric();
        match try_at(i) {
            Some(end) if left_ok && (end == h.len() || !h[end].is_alphanumeric()) => {
                count += 1;
                i = end;
            }
            _ => i += 1,
        }
    }
    count
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Num {
    Int,
    Dec(usize),
    Sci(usize),
}

/// Numbers in texts built from the generator's token kinds: each
/// whitespace token, with sentence punctuation peeled off, is classified
/// by an anchored pattern. Tokens containing letters are identifiers.
pub fn numbers(text: &str) -> Vec<Num> {
    static RE: OnceLock<[Regex; 4]> = OnceLock::new();
    let [sci, dec, int, range] = RE.get_or_init(|| {
        [
            Regex::new(r"^[+-]?(\d)(?:\.(\d+))?(?:[eE]|\u{00D7}10\^|x10\^)[+-]?\d+$").unwrap(),
            Regex::new(r"^[+-]?(?:\d{1,3}(?:,\d{3})+|\d+)\.(\d+)$").unwrap(),
            Regex::new(r"^[+-]?(?:\d{1,3}(?:,\d{3})+|\d+)$").unwrap(),
            Regex::new(r"^\d+-\d+$").unwrap(),
        ]
    });
    let mut out = Vec::new();
    for tok in text.split_whitespace() {
        let t = tok.trim_end_matches(|c: char| is_term(c) || is_close(c) || c == ',');
        if let Some(c) = sci.captures(t) {
            let mantissa = format!("{}{}", &c[1], c.get(2).map_or("", |m| m.as_str()));
            let sig = mantissa.trim_start_matches('0').len().max(1);
            out.push(Num::Sci(sig));
        } else if let Some(c) = dec.captures(t) {
            out.push(Num::Dec(c[1].len()));
        } else if int.is_match(t) {
            out.push(Num::Int);
        } else if range.is_match(t) {
            out.push(Num::Int);
            out.push(Num::Int);
        } else {
            debug_assert!(
                !t.starts_with(|c: char| c.is_ascii_digit()) || t.chars().any(char::is_alphabetic),
                "unclassified numeric token {t:?}"
            );
        }
    }
    out
}

/// Segmentation of one text, computed once and shared by every check.
pub struct Measured {
    pub paragraphs: Vec<String>,
    pub sentence_counts: Vec<usize>,
    pub word_counts: Vec<usize>,
    pub sentences: Vec<String>,
    pub words: usize,
    pub numbers: Vec<Num>,
}

impl Measured {
    pub fn new(text: &str) -> Self {
        let paragraphs = paragraphs(text);
        let per: Vec<Vec<String>> = paragraphs.iter().map(|p| sentences(p)).collect();
        Measured {
            sentence_counts: per.iter().map(Vec::len).collect(),
            word_counts: paragraphs.iter().map(|p| word_count(p)).collect(),
            sentences: per.into_iter().flatten().collect(),
            words: word_count(text),
            numbers: numbers(text),
            paragraphs,
        }
    }
}

/// Reference verdict for one registry call on `text`.
pub fn expected(name: &str, params: &serde_json::Value, text: &str) -> bool {
    expected_with(name, params, text, &Measured::new(text))
}

pub fn expected_with(name: &str, params: &serde_json::Value, text: &str, m: &Measured) -> bool {
    use serde_json::Value;
    let int = |i: usize| params[i].as_i64().unwrap() as usize;
    let strs = |v: &Value| -> Vec<String> { v.as_array().unwrap().iter().map(|s| s.as_str().unwrap().to_string()).collect() };
    let within = |x: usize, lo: usize, hi: usize| lo <= x && x <= hi;
    let paras = &m.paragraphs;
    let sent_counts = &m.sentence_counts;
    let word_counts = &m.word_counts;
    let range_list = |counts: &[usize]| {
        let ranges = params[0].as_array().unwrap();
        counts.len() == ranges.len()
            && counts.iter().zip(ranges).all(|(&c, r)| {
                within(c, r[0].as_i64().unwrap() as usize, r[1].as_i64().unwrap() as usize)
            })
    };
    match name {
        "check_whether_response_paragraph_number_in_range" => within(paras.len(), int(0), int(1)),
        "check_whether_response_sentence_number_in_range" => {
            within(sent_counts.iter().sum(), int(0), int(1))
        }
        "check_whether_each_paragraph_sentence_number_in_range" => {
            !paras.is_empty() && sent_counts.iter().all(|&c| within(c, int(0), int(1)))
        }
        "check_whether_each_paragraph_sentence_number_in_range_list" => range_list(sent_counts),
        "check_whether_each_paragraph_sentence_number_exceeds" => {
            !paras.is_empty()
                && sent_counts.iter().all(|&c| c <= int(1))
                && sent_counts.windows(2).all(|w| w[1] == w[0] + int(0))
        }
        "check_whether_response_word_count_in_range" => within(m.words, int(0), int(1)),
        "check_whether_each_paragraph_word_count_in_range" => {
            !paras.is_empty() && word_counts.iter().all(|&c| within(c, int(0), int(1)))
        }
        "check_whether_each_paragraph_word_count_in_range_list" => range_list(word_counts),
        "check_whether_whole_response_not_contain_certain_substring" => {
            !contains_ci(text, params[0].as_str().unwrap())
        }
        "check_whether_whole_response_not_contain_certain_substrings" => {
            strs(&params[0]).iter().all(|s| !contains_ci(text, s))
        }
        "check_whether_each_sentence_begin_with_certain_substring" => {
            let all = &m.sentences;
            !all.is_empty() && all.iter().all(|s| begins_ci(s, params[0].as_str().unwrap()))
        }
        "check_whether_each_sentence_end_with_certain_substring" => {
            let all = &m.sentences;
            !all.is_empty() && all.iter().all(|s| ends_loose_ci(s, params[0].as_str().unwrap()))
        }
        "check_whether_whole_response_begin_with_certain_substring" => begins_ci(text, params[0].as_str().unwrap()),
        "check_whether_whole_response_end_with_certain_substring" => ends_loose_ci(text, params[0].as_str().unwrap()),
        "check_whether_keywords_metioned_in_range" => {
            let total: usize = strs(&params[0]).iter().map(|k| keyword_count(text, k)).sum();
            within(total, int(1), int(2))
        }
        "check_number_precision_in_response" => m.numbers.iter().all(|n| match n {
            Num::Dec(p) => *p == int(0),
            _ => true,
        }),
        "check_whether_has_no_number_in_response" => m.numbers.is_empty(),
        "check_scientific_notation_precision_in_response" => {
            let sci: Vec<usize> = m
                .numbers
                .iter()
                .filter_map(|n| match n {
                    Num::Sci(d) => Some(*d),
                    _ => None,
                })
                .collect();
            !sci.is_empty() && sci.iter().all(|&d| d == int(0))
        }
        other => panic!("no oracle for {other}"),
    }
}
