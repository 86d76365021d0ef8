//! Random response texts: up to 6 paragraphs of up to 6 sentences drawn
//! from a 50-token vocabulary, with planted keywords, numbers and prefixes.

use rand::seq::IndexedRandom;
use rand::Rng;

pub const VOCAB: [&str; 50] = [
    "the", "a", "harbor", "boat", "sky", "light", "quiet", "morning", "river", "stone",
    "green", "tech", "city", "people", "walk", "slowly", "bright", "cloud", "wind", "road",
    "Dr.", "e.g.", "(quietly)", "well,", "state-of-the-art", "GPT-4o", "v2", "mp3", "COVID-19", "--",
    "once", "upon", "time", "fin", "Bird", "tree's", "\"hello\"", "[note]", "x.y", "mid-day",
    "and", "or", "but", "so", "very", "old", "new", "red", "blue", "apple-pie",
];

pub const KEYWORD_PLANTS: [&str; 8] = [
    "apple", "Apple", "APPLE", "apples", "pineapple", "green tech", "Green Tech", "apple's",
];

const TERMINATORS: [&str; 9] = [".", ".", ".", "!", "?", "...", "?!", ".\"", ".)"];

fn number(rng: &mut impl Rng) -> String {
    let sign = if rng.random_bool(0.15) { "-" } else { "" };
    match rng.random_range(0..7) {
        0 => format!("{sign}{}", rng.random_range(0..1000)),
        1 => format!("{sign}{},{:03}", rng.random_range(1..100), rng.random_range(0..1000)),
        2 | 3 => {
            let places = rng.random_range(1..4);
            let frac: String = (0..places).map(|_| char::from(b'0' + rng.random_range(0..10u8))).collect();
            format!("{sign}{}.{frac}", rng.random_range(0..100))
        }
        4 => format!("{}-{}", rng.random_range(1..50), rng.random_range(50..100)),
        _ => {
            let places = rng.random_range(0..4);
            let mut m = format!("{}", rng.random_range(1..10));
            if places > 0 {
                let frac: String = (0..places).map(|_| char::from(b'0' + rng.random_range(0..10u8))).collect();
                m = format!("{m}.{frac}");
            }
            let exp_sign = ["", "+", "-"].choose(rng).unwrap();
            let mark = ["e", "E", "\u{00D7}10^", "x10^"].choose(rng).unwrap();
            format!("{sign}{m}{mark}{exp_sign}{}", rng.random_range(1..30))
        }
    }
}

fn sentence(rng: &mut impl Rng, numbers: bool, terminate: bool) -> String {
    let len = rng.random_range(1..9);
    let mut toks: Vec<String> = Vec::with_capacity(len + 1);
    for _ in 0..len {
        let roll = rng.random_range(0..100);
        let tok = if roll < 8 {
            KEYWORD_PLANTS.choose(rng).unwrap().to_string()
        } else if numbers && roll < 16 {
            number(rng)
        } else {
            VOCAB.choose(rng).unwrap().to_string()
        };
        toks.push(tok);
    }
    if rng.random_bool(0.1) {
        toks.insert(0, "!".into());
    }
    let mut s = toks.join(" ");
    if terminate {
        s.push_str(TERMINATORS.choose(rng).unwrap());
    }
    s
}

/// One generated text. About a tenth of the texts have paragraph sentence
/// counts in arithmetic progression, and about a third contain no numbers.
pub fn text(rng: &mut impl Rng) -> String {
    if rng.random_bool(0.01) {
        return ["", "   ", "\n\n"].choose(rng).unwrap().to_string();
    }
    let numbers = rng.random_bool(0.66);
    let paragraphs = rng.random_range(1..=6);
    let progression = rng.random_bool(0.1);
    let (first, step) = (rng.random_range(1..=3), rng.random_range(1..=2));
    let mut out = String::new();
    if rng.random_bool(0.1) {
        out.push_str(["Once upon a time ", "Apple ", "! "].choose(rng).unwrap());
    }
    for p in 0..paragraphs {
        if p > 0 {
            out.push_str(["\n\n", "\n  \n", "\n\n\n"].choose(rng).unwrap());
        }
        let n = if progression { (first + step * p).min(6) } else { rng.random_range(1..=6) };
        for s in 0..n {
            if s > 0 {
                out.push_str(if rng.random_bool(0.15) { "\n" } else { " " });
            }
            let last = s + 1 == n;
            let terminate = !last || rng.random_bool(0.85);
            out.push_str(&sentence(rng, numbers, terminate));
        }
    }
    if rng.random_bool(0.1) {
        out.push_str([" fin.", " apple", " the end!"].choose(rng).unwrap());
    }
    if rng.random_bool(0.05) {
        out = format!("  {out}\n");
    }
    out
}

const SUBSTRINGS: [&str; 10] = ["apple", "!", "once upon", "fin", "the end", "Dr.", "e.g.", "green tech", "?", "x"];

fn range(rng: &mut impl Rng, around: usize, spread: usize) -> (i64, i64) {
    let lo = rng.random_range(around.saturating_sub(spread)..=around + spread);
    let hi = if rng.random_bool(0.1) { 10000 } else { rng.random_range(lo..=lo + spread) };
    (lo as i64, hi as i64)
}

fn range_list(rng: &mut impl Rng, counts: &[usize], spread: usize) -> serde_json::Value {
    let mut counts = counts.to_vec();
    if rng.random_bool(0.2) {
        if counts.is_empty() || rng.random_bool(0.5) {
            counts.push(rng.random_range(0..6));
        } else {
            counts.pop();
        }
    }
    if counts.is_empty() {
        counts.push(1);
    }
    let ranges: Vec<serde_json::Value> = counts
        .iter()
        .map(|&c| {
            let (lo, hi) = range(rng, c, spread);
            serde_json::json!([lo, hi])
        })
        .collect();
    serde_json::json!([ranges])
}

/// Random parameters for `name`, centred on the measured quantities of
/// the measured text so that both verdicts occur often.
pub fn params(rng: &mut impl Rng, name: &str, m: &super::oracle::Measured) -> serde_json::Value {
    use serde_json::json;
    let paras = &m.paragraphs;
    let sents = &m.sentence_counts;
    let words = &m.word_counts;
    let pick = |rng: &mut dyn rand::RngCore, v: &[usize]| v.choose(rng).copied().unwrap_or(0);
    let substring = |rng: &mut dyn rand::RngCore| SUBSTRINGS.choose(rng).unwrap().to_string();
    match name {
        "check_whether_response_paragraph_number_in_range" => {
            let (lo, hi) = range(rng, paras.len(), 2);
            json!([lo, hi])
        }
        "check_whether_response_sentence_number_in_range" => {
            let (lo, hi) = range(rng, sents.iter().sum(), 3);
            json!([lo, hi])
        }
        "check_whether_each_paragraph_sentence_number_in_range" => {
            let around = pick(rng, sents);
            let (lo, hi) = range(rng, around, 2);
            json!([lo, hi])
        }
        "check_whether_each_paragraph_sentence_number_in_range_list" => range_list(rng, sents, 1),
        "check_whether_each_paragraph_sentence_number_exceeds" => {
            let step = sents.windows(2).next().map_or(1, |w| w[1].saturating_sub(w[0]).max(1));
            let step = if rng.random_bool(0.7) { step } else { rng.random_range(1..3) };
            json!([step, rng.random_range(1..8)])
        }
        "check_whether_response_word_count_in_range" => {
            let (lo, hi) = range(rng, words.iter().sum(), 8);
            json!([lo, hi])
        }
        "check_whether_each_paragraph_word_count_in_range" => {
            let around = pick(rng, words);
            let (lo, hi) = range(rng, around, 6);
            json!([lo, hi])
        }
        "check_whether_each_paragraph_word_count_in_range_list" => range_list(rng, words, 3),
        "check_whether_whole_response_not_contain_certain_substring"
        | "check_whether_each_sentence_begin_with_certain_substring"
        | "check_whether_each_sentence_end_with_certain_substring"
        | "check_whether_whole_response_begin_with_certain_substring"
        | "check_whether_whole_response_end_with_certain_substring" => json!([substring(rng)]),
        "check_whether_whole_response_not_contain_certain_substrings" => {
            let n = rng.random_range(1..4);
            let subs: Vec<String> = (0..n).map(|_| substring(rng)).collect();
            json!([subs])
        }
        "check_whether_keywords_metioned_in_range" => {
            let pool = ["apple", "Apple", "green tech", "pineapple", "apples", "tech"];
            let n = rng.random_range(1..3);
            let kws: Vec<&str> = pool.choose_multiple(rng, n).copied().collect();
            let (lo, hi) = range(rng, 1, 2);
            json!([kws, lo, hi])
        }
        "check_number_precision_in_response" => json!([rng.random_range(1..4)]),
        "check_whether_has_no_number_in_response" => json!([]),
        "check_scientific_notation_precision_in_response" => json!([rng.random_range(1..5)]),
        other => panic!("no parameter generator for {other}"),
    }
}
