//! Named verification functions and their parameter signatures.

use std::fmt;

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use serde_json::Value;

use super::{
    check_range, verify_count_in_range, verify_keyword_mentions, verify_number_rules,
    verify_per_paragraph_range_list, verify_sentence_progression, verify_substring_position,
    CountScope, ListScope, NumberRule, SubstringRule, Verdict, VerifyError,
};

/// Corrected spelling accepted for `check_whether_keywords_metioned_in_range`.
pub const KEYWORDS_ALIAS: &str = "check_whether_keywords_mentioned_in_range";
const KEYWORDS_CANONICAL: &str = "check_whether_keywords_metioned_in_range";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ParamKind {
    Int,
    Str,
    StrList,
    RangeList,
}

impl fmt::Display for ParamKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ParamKind::Int => "int",
            ParamKind::Str => "str",
            ParamKind::StrList => "List[str]",
            ParamKind::RangeList => "List[tuple]",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Param {
    Int(i64),
    Str(String),
    StrList(Vec<String>),
    RangeList(Vec<(i64, i64)>),
}

impl Param {
    pub fn kind(&self) -> ParamKind {
        match self {
            Param::Int(_) => ParamKind::Int,
            Param::Str(_) => ParamKind::Str,
            Param::StrList(_) => ParamKind::StrList,
            Param::RangeList(_) => ParamKind::RangeList,
        }
    }

    fn to_json(&self) -> Value {
        match self {
            Param::Int(n) => Value::from(*n),
            Param::Str(s) => Value::from(s.as_str()),
            Param::StrList(v) => Value::from(v.clone()),
            Param::RangeList(v) => {
                Value::Array(v.iter().map(|&(a, b)| Value::from(vec![a, b])).collect())
            }
        }
    }

    fn from_json(value: &Value, kind: ParamKind) -> Option<Param> {
        match kind {
            ParamKind::Int => value.as_i64().map(Param::Int),
            ParamKind::Str => value.as_str().map(|s| Param::Str(s.to_string())),
            ParamKind::StrList => value
                .as_array()?
                .iter()
                .map(|v| v.as_str().map(str::to_string))
                .collect::<Option<Vec<_>>>()
                .map(Param::StrList),
            ParamKind::RangeList => value
                .as_array()?
                .iter()
                .map(|pair| match pair.as_array()?.as_slice() {
                    [a, b] => Some((a.as_i64()?, b.as_i64()?)),
                    _ => None,
                })
                .collect::<Option<Vec<_>>>()
                .map(Param::RangeList),
        }
    }
}

fn describe_json(value: &Value) -> String {
    let s = value.to_string();
    if s.chars().count() > 40 {
        s.chars().take(40).collect::<String>() + "…"
    } else {
        s
    }
}

type RunFn = fn(&[Param], &str) -> Result<Verdict, VerifyError>;

/// Registry entry for one verification function.
pub struct VerifierSpec {
    pub name: &'static str,
    pub params: &'static [(&'static str, ParamKind)],
    pub description: &'static str,
    run: RunFn,
}

impl VerifierSpec {
    pub fn signature(&self) -> String {
        if self.params.is_empty() {
            return "-".to_string();
        }
        self.params
            .iter()
            .map(|(n, k)| format!("{n}:{k}"))
            .collect::<Vec<_>>()
            .join(", ")
    }
}

impl fmt::Debug for VerifierSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("VerifierSpec")
            .field("name", &self.name)
            .field("signature", &self.signature())
            .finish()
    }
}

fn int(p: &[Param], i: usize) -> i64 {
    match &p[i] {
        Param::Int(n) => *n,
        other => unreachable!("validated call carries {other:?} at {i}"),
    }
}

fn string(p: &[Param], i: usize) -> String {
    match &p[i] {
        Param::Str(s) => s.clone(),
        other => unreachable!("validated call carries {other:?} at {i}"),
    }
}

fn strings(p: &[Param], i: usize) -> Vec<String> {
    match &p[i] {
        Param::StrList(v) => v.clone(),
        other => unreachable!("validated call carries {other:?} at {i}"),
    }
}

fn ranges(p: &[Param], i: usize) -> Vec<(i64, i64)> {
    match &p[i] {
        Param::RangeList(v) => v.clone(),
        other => unreachable!("validated call carries {other:?} at {i}"),
    }
}

const BOUNDS: &[(&str, ParamKind)] = &[("lower_bound", ParamKind::Int), ("upper_bound", ParamKind::Int)];
const RANGES: &[(&str, ParamKind)] = &[("ranges", ParamKind::RangeList)];
const SUBSTRING: &[(&str, ParamKind)] = &[("substring", ParamKind::Str)];

static REGISTRY: [VerifierSpec; 18] = [
    VerifierSpec {
        name: "check_whether_response_paragraph_number_in_range",
        params: BOUNDS,
        description: "Total paragraph count lies in [lower_bound, upper_bound].",
        run: |p, t| verify_count_in_range(t, CountScope::Paragraphs, int(p, 0), int(p, 1)),
    },
    VerifierSpec {
        name: "check_whether_response_sentence_number_in_range",
        params: BOUNDS,
        description: "Total sentence count lies in [lower_bound, upper_bound].",
        run: |p, t| verify_count_in_range(t, CountScope::Sentences, int(p, 0), int(p, 1)),
    },
    VerifierSpec {
        name: "check_whether_each_paragraph_sentence_number_in_range",
        params: BOUNDS,
        description: "Every paragraph's sentence count lies in [lower_bound, upper_bound].",
        run: |p, t| verify_count_in_range(t, CountScope::PerParagraphSentences, int(p, 0), int(p, 1)),
    },
    VerifierSpec {
        name: "check_whether_each_paragraph_sentence_number_in_range_list",
        params: RANGES,
        description: "Paragraph i's sentence count lies in ranges[i]; paragraph count equals len(ranges).",
        run: |p, t| verify_per_paragraph_range_list(t, ListScope::Sentences, &ranges(p, 0)),
    },
    VerifierSpec {
        name: "check_whether_each_paragraph_sentence_number_exceeds",
        params: &[("exceed_num", ParamKind::Int), ("upper_bound", ParamKind::Int)],
        description: "Each paragraph has exceed_num more sentences than the previous; none exceeds upper_bound.",
        run: |p, t| verify_sentence_progression(t, int(p, 0), int(p, 1)),
    },
    VerifierSpec {
        name: "check_whether_response_word_count_in_range",
        params: BOUNDS,
        description: "Total word count lies in [lower_bound, upper_bound].",
        run: |p, t| verify_count_in_range(t, CountScope::Words, int(p, 0), int(p, 1)),
    },
    VerifierSpec {
        name: "check_whether_each_paragraph_word_count_in_range",
        params: BOUNDS,
        description: "Every paragraph's word count lies in [lower_bound, upper_bound].",
        run: |p, t| verify_count_in_range(t, CountScope::PerParagraphWords, int(p, 0), int(p, 1)),
    },
    VerifierSpec {
        name: "check_whether_each_paragraph_word_count_in_range_list",
        params: RANGES,
        description: "Paragraph i's word count lies in ranges[i]; paragraph count equals len(ranges).",
        run: |p, t| verify_per_paragraph_range_list(t, ListScope::Words, &ranges(p, 0)),
    },
    VerifierSpec {
        name: "check_whether_whole_response_not_contain_certain_substring",
        params: SUBSTRING,
        description: "The substring occurs nowhere in the response.",
        run: |p, t| verify_substring_position(t, &SubstringRule::NotContainedOne(string(p, 0))),
    },
    VerifierSpec {
        name: "check_whether_whole_response_not_contain_certain_substrings",
        params: &[("substrings", ParamKind::StrList)],
        description: "None of the substrings occurs in the response.",
        run: |p, t| verify_substring_position(t, &SubstringRule::NotContainedMany(strings(p, 0))),
    },
    VerifierSpec {
        name: "check_whether_each_sentence_begin_with_certain_substring",
        params: SUBSTRING,
        description: "Every sentence begins with the substring.",
        run: |p, t| verify_substring_position(t, &SubstringRule::EachSentenceBegin(string(p, 0))),
    },
    VerifierSpec {
        name: "check_whether_each_sentence_end_with_certain_substring",
        params: SUBSTRING,
        description: "Every sentence ends with the substring (trailing terminators ignored).",
        run: |p, t| verify_substring_position(t, &SubstringRule::EachSentenceEnd(string(p, 0))),
    },
    VerifierSpec {
        name: "check_whether_whole_response_begin_with_certain_substring",
        params: SUBSTRING,
        description: "The response begins with the substring.",
        run: |p, t| verify_substring_position(t, &SubstringRule::WholeBegin(string(p, 0))),
    },
    VerifierSpec {
        name: "check_whether_whole_response_end_with_certain_substring",
        params: SUBSTRING,
        description: "The response ends with the substring (trailing terminators ignored).",
        run: |p, t| verify_substring_position(t, &SubstringRule::WholeEnd(string(p, 0))),
    },
    VerifierSpec {
        name: KEYWORDS_CANONICAL,
        params: &[
            ("keywords", ParamKind::StrList),
            ("lower_bound_times", ParamKind::Int),
            ("upper_bound_times", ParamKind::Int),
        ],
        description: "Word-bounded keyword mentions, summed over keywords, lie in [lower, upper].",
        run: |p, t| verify_keyword_mentions(t, &strings(p, 0), int(p, 1), int(p, 2)),
    },
    VerifierSpec {
        name: "check_number_precision_in_response",
        params: &[("precision", ParamKind::Int)],
        description: "Every decimal number has exactly `precision` decimal places.",
        run: |p, t| verify_number_rules(t, NumberRule::PrecisionEquals(int(p, 0))),
    },
    VerifierSpec {
        name: "check_whether_has_no_number_in_response",
        params: &[],
        description: "The response contains no numbers.",
        run: |_, t| verify_number_rules(t, NumberRule::NoNumbers),
    },
    VerifierSpec {
        name: "check_scientific_notation_precision_in_response",
        params: &[("significant_digits", ParamKind::Int)],
        description: "At least one scientific-notation number; all have the given significant digits.",
        run: |p, t| verify_number_rules(t, NumberRule::ScientificSigDigits(int(p, 0))),
    },
];

/// All registered verification functions, in table order.
pub fn registry() -> &'static [VerifierSpec] {
    &REGISTRY
}

fn lookup(name: &str) -> Result<&'static VerifierSpec, VerifyError> {
    let name = if name == KEYWORDS_ALIAS { KEYWORDS_CANONICAL } else { name };
    REGISTRY
        .iter()
        .find(|s| s.name == name)
        .ok_or_else(|| VerifyError::UnknownFunction(name.to_string()))
}

/// Semantic checks on parameter values beyond their kinds.
fn check_values(spec: &VerifierSpec, params: &[Param]) -> Result<(), VerifyError> {
    let bad = |reason: String| VerifyError::InvalidParam { function: spec.name.to_string(), reason };
    for ((pname, _), p) in spec.params.iter().zip(params) {
        match p {
            Param::Int(n) if *n < 0 => return Err(bad(format!("{pname} must be >= 0, got {n}"))),
            Param::Str(s) if s.is_empty() => return Err(bad(format!("{pname} must not be empty"))),
            Param::StrList(v) if v.is_empty() || v.iter().any(|s| s.trim().is_empty()) => {
                return Err(bad(format!("{pname} must be a non-empty list of non-empty strings")))
            }
            Param::RangeList(v) if v.is_empty() => return Err(bad(format!("{pname} must not be empty"))),
            Param::RangeList(v) => {
                for &(lo, hi) in v {
                    check_range(spec.name, lo, hi)?;
                }
            }
            _ => {}
        }
    }
    let ints: Vec<i64> = params
        .iter()
        .filter_map(|p| match p {
            Param::Int(n) => Some(*n),
            _ => None,
        })
        .collect();
    match spec.name {
        "check_whether_each_paragraph_sentence_number_exceeds" => {
            if ints[0] < 1 || ints[1] < 1 {
                return Err(bad("exceed_num and upper_bound must be >= 1".into()));
            }
        }
        "check_scientific_notation_precision_in_response" => {
            if ints[0] < 1 {
                return Err(bad("significant_digits must be >= 1".into()));
            }
        }
        "check_number_precision_in_response" => {}
        _ if ints.len() == 2 => check_range(spec.name, ints[0], ints[1])?,
        _ => {}
    }
    Ok(())
}

/// A validated binding of a registry function to its parameters.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct VerifierCall {
    name: &'static str,
    params: Vec<Param>,
}

impl VerifierCall {
    /// Build a call from typed parameters. Validates arity, kinds, and values.
    pub fn new(name: &str, params: Vec<Param>) -> Result<Self, VerifyError> {
        let spec = lookup(name)?;
        if params.len() != spec.params.len() {
            return Err(VerifyError::Arity {
                function: spec.name.to_string(),
                expected: spec.params.len(),
                got: params.len(),
            });
        }
        for (i, ((_, kind), p)) in spec.params.iter().zip(&params).enumerate() {
            if p.kind() != *kind {
                return Err(VerifyError::Kind {
                    function: spec.name.to_string(),
                    index: i,
                    expected: *kind,
                    found: p.kind().to_string(),
                });
            }
        }
        check_values(spec, &params)?;
        Ok(VerifierCall { name: spec.name, params })
    }

    /// Build a call from JSON parameter values, coerced by the signature.
    pub fn from_json(name: &str, values: &[Value]) -> Result<Self, VerifyError> {
        let spec = lookup(name)?;
        if values.len() != spec.params.len() {
            return Err(VerifyError::Arity {
                function: spec.name.to_string(),
                expected: spec.params.len(),
                got: values.len(),
            });
        }
        let params = spec
            .params
            .iter()
            .zip(values)
            .enumerate()
            .map(|(i, ((_, kind), v))| {
                Param::from_json(v, *kind).ok_or_else(|| VerifyError::Kind {
                    function: spec.name.to_string(),
                    index: i,
                    expected: *kind,
                    found: describe_json(v),
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(name, params)
    }

    pub fn name(&self) -> &'static str {
        self.name
    }

    pub fn params(&self) -> &[Param] {
        &self.params
    }

    pub fn params_json(&self) -> Vec<Value> {
        self.params.iter().map(Param::to_json).collect()
    }

    pub fn spec(&self) -> &'static VerifierSpec {
        lookup(self.name).expect("validated name")
    }

    /// Inclusive `[lower, upper]` range when this call is a two-bound count
    /// check, used for conflict detection between constraints.
    pub fn bounds(&self) -> Option<(i64, i64)> {
        let two_bounds = self.spec().params == BOUNDS;
        match self.params.as_slice() {
            [Param::Int(lo), Param::Int(hi)] if two_bounds => Some((*lo, *hi)),
            [Param::StrList(_), Param::Int(lo), Param::Int(hi)] => Some((*lo, *hi)),
            _ => None,
        }
    }
}

impl fmt::Display for VerifierCall {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}({})", self.name, Value::Array(self.params_json()))
    }
}

#[derive(Serialize, Deserialize)]
struct WireCall {
    name: String,
    params: Vec<Value>,
}

impl Serialize for VerifierCall {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        WireCall { name: self.name.to_string(), params: self.params_json() }.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for VerifierCall {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let wire = WireCall::deserialize(deserializer)?;
        VerifierCall::from_json(&wire.name, &wire.params).map_err(D::Error::custom)
    }
}

/// Run a validated call. Deterministic: identical inputs give identical verdicts.
pub fn run_verifier(call: &VerifierCall, text: &str) -> Verdict {
    (call.spec().run)(&call.params, text).expect("validated call cannot raise a parameter error")
}

/// Validate and run a call given by name and JSON parameters.
pub fn run_named(name: &str, params: &[Value], text: &str) -> Result<Verdict, VerifyError> {
    let call = VerifierCall::from_json(name, params)?;
    Ok(run_verifier(&call, text))
}
