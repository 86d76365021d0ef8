use mmif_core::judge::{extract_verifier_params, parse_verdict, Confidence, ConstraintVerdict, FixtureRecord, StubClient};
use mmif_core::verifiers::VerifierCall;
use proptest::prelude::*;

/// Reference reading of a verdict line, written without regexes.
fn line_verdict(line: &str) -> Option<bool> {
    let s = line.trim_matches(|c: char| c.is_whitespace() || "*_`".contains(c)).to_lowercase();
    let rest = s.strip_prefix("answer")?.trim_start();
    let rest = rest.strip_prefix(':')?.trim_start();
    let rest = rest.strip_suffix('.').unwrap_or(rest);
    match rest {
        "yes" => Some(true),
        "no" => Some(false),
        _ => None,
    }
}

fn reference(raw: &str) -> ConstraintVerdict {
    raw.lines()
        .rev()
        .find_map(line_verdict)
        .map_or(ConstraintVerdict::Indeterminate, ConstraintVerdict::from_passed)
}

fn judge_line() -> impl Strategy<Value = String> {
    prop_oneof![
        Just("ANSWER: YES".to_string()),
        Just("ANSWER: NO".to_string()),
        Just("answer:no".to_string()),
        Just("**Answer: Yes**".to_string()),
        Just("  `ANSWER : no.`".to_string()),
        Just("ANSWER: MAYBE".to_string()),
        Just("The answer: yes, mostly.".to_string()),
        Just("ANSWER: YES NO".to_string()),
        Just(String::new()),
        "[ -~]{0,30}",
    ]
}

fn description() -> impl Strategy<Value = String> {
    let word = prop_oneof![
        Just("Use"), Just("at least"), Just("at most"), Just("exactly"), Just("between"), Just("and"),
        Just("words"), Just("paragraphs"), Just("sentences"), Just("'apple'"), Just("\"kiwi\""), Just("times"),
        Just("start with"), Just("end with"), Just("decimal places"), Just("significant digits"),
        Just("no numbers"), Just("Do not mention"), Just("three"), Just("0"), Just("5"), Just("10000"),
        Just("-3"), Just("each paragraph"), Just("the first paragraph"), Just("the second"), Just("less than"),
        Just("more than"), Just("should"), Just("the response"), Just("."), Just(","),
    ];
    prop::collection::vec(word, 1..12).prop_map(|w| w.join(" "))
}

fn llm_reply() -> impl Strategy<Value = String> {
    let name = prop_oneof![
        Just("check_whether_response_word_count_in_range"),
        Just("check_whether_keywords_metioned_in_range"),
        Just("check_number_precision_in_response"),
        Just("check_whether_each_paragraph_word_count_in_range_list"),
        Just("no_such_function"),
        Just("none"),
    ];
    let param = prop_oneof![
        (-5i64..20).prop_map(|n| n.to_string()),
        Just("\"apple\"".to_string()),
        Just("[\"apple\"]".to_string()),
        Just("[[1, 2], [5, 3]]".to_string()),
        Just("[]".to_string()),
    ];
    (name, prop::collection::vec(param, 0..4))
        .prop_map(|(n, ps)| format!("{{\"function\": \"{n}\", \"params\": [{}]}}", ps.join(", ")))
}

proptest! {
    #[test]
    fn every_judge_output_has_one_verdict(lines in prop::collection::vec(judge_line(), 0..6)) {
        let raw = lines.join("\n");
        let d = parse_verdict(&raw);
        prop_assert_eq!(d.verdict, reference(&raw), "{:?}", raw);
        prop_assert_eq!(d.raw, raw);
    }

    #[test]
    fn pattern_bindings_always_validate(text in description()) {
        let r = extract_verifier_params(&text, None);
        prop_assert!(r.confidence != Confidence::LlmExtracted);
        check(&r.call, r.confidence)?;
    }

    #[test]
    fn llm_bindings_always_validate(reply in llm_reply()) {
        let llm = StubClient::new(vec![FixtureRecord::by_contains("", reply)], true);
        let r = extract_verifier_params("Write like a poet.", Some(&llm));
        check(&r.call, r.confidence)?;
    }
}

fn check(call: &Option<VerifierCall>, confidence: Confidence) -> Result<(), TestCaseError> {
    match call {
        None => prop_assert_eq!(confidence, Confidence::NeedsReview),
        Some(c) => {
            prop_assert!(confidence != Confidence::NeedsReview);
            let again = VerifierCall::from_json(c.name(), &c.params_json());
            prop_assert_eq!(again.as_ref(), Ok(c));
            if let Some((lo, hi)) = c.bounds() {
                prop_assert!(0 <= lo && lo <= hi);
            }
        }
    }
    Ok(())
}
