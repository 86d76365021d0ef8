use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::{Command, Output, Stdio};

use mmif_core::taxonomy::Taxonomy;
use serde_json::{json, Value};
use tempfile::TempDir;

fn e2e(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures/e2e").join(name)
}

fn mmif(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mmif"))
        .args(args)
        .env("SOURCE_DATE_EPOCH", "0")
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn write(dir: &TempDir, name: &str, body: &str) -> String {
    let p = dir.path().join(name);
    std::fs::write(&p, body).unwrap();
    p.to_str().unwrap().to_string()
}

fn stub_config(dir: &TempDir, name: &str, fixtures: &Path) -> String {
    write(dir, name, &json!({"mode": "stub", "fixtures": fixtures}).to_string())
}

fn jsonl(text: &str) -> Vec<Value> {
    text.lines().map(|l| serde_json::from_str(l).unwrap()).collect()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn help_and_usage_errors() {
    let help = mmif(&["--help"]);
    assert_eq!(code(&help), 0);
    for sub in ["eval", "verify", "gen-pairs", "gen-instructions", "sft-filter"] {
        assert!(stdout(&help).contains(sub), "{sub}");
    }
    let flags: [(&str, &[&str]); 5] = [
        ("eval", &["--bench", "--responses", "--model", "--out", "--report", "--stub-fixtures", "--seed"]),
        ("verify", &["--function", "--params", "--text", "--stdin", "--constraint"]),
        ("gen-pairs", &["--in", "--setting", "--seed"]),
        ("gen-instructions", &["--manifest", "--taskpool", "--n-constraints-min", "--n-constraints-max"]),
        ("sft-filter", &["--in", "--threshold"]),
    ];
    for (sub, want) in flags {
        let o = mmif(&[sub, "--help"]);
        assert_eq!(code(&o), 0);
        for f in want {
            assert!(stdout(&o).contains(f), "{sub} --help lacks {f}");
        }
    }
    assert_eq!(code(&mmif(&["eval"])), 64);
    assert_eq!(code(&mmif(&["frobnicate"])), 64);
    assert_eq!(code(&mmif(&["verify", "--function", "x"])), 64);
    assert_eq!(code(&mmif(&["gen-pairs", "--in", "x.jsonl", "--setting", "remove-50"])), 64);
}

#[test]
fn eval_writes_results_report_and_manifest() {
    let dir = TempDir::new().unwrap();
    let judge = stub_config(&dir, "judge.json", &e2e("judge.json"));
    let model = stub_config(&dir, "model.json", &e2e("model.json"));
    let out = dir.path().join("results.jsonl");
    let report = dir.path().join("report.md");
    let o = mmif(&[
        "eval", "--bench", s(&e2e("bench.jsonl")), "--responses", s(&e2e("responses.jsonl")),
        "--controls", s(&e2e("controls.jsonl")), "--judge", &judge, "--model", &model,
        "--out", s(&out), "--report", s(&report), "--parallelism", "3",
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let results = jsonl(&std::fs::read_to_string(&out).unwrap());
    assert_eq!(results.len(), 10);
    assert_eq!(results[0]["id"], "c01");
    let md = std::fs::read_to_string(&report).unwrap();
    assert!(md.contains("| Avg. | 10 | 58.3 |"), "{md}");
    let manifest: Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("results.jsonl.manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["items"], 10);
    assert_eq!(manifest["timestamp"], 0);
    assert_eq!(manifest["parallelism"], 3);

    // Same run serially to stdout gives the same bytes.
    let o1 = mmif(&[
        "eval", "--bench", s(&e2e("bench.jsonl")), "--responses", s(&e2e("responses.jsonl")),
        "--controls", s(&e2e("controls.jsonl")), "--judge", &judge, "--model", &model,
    ]);
    assert_eq!(code(&o1), 0);
    assert_eq!(o1.stdout, std::fs::read(&out).unwrap());
}

#[test]
fn eval_precondition_failures_are_validation_errors() {
    let dir = TempDir::new().unwrap();
    let judge = stub_config(&dir, "judge.json", &e2e("judge.json"));
    // Comparative constraints without a model or recorded controls.
    let o = mmif(&["eval", "--bench", s(&e2e("bench.jsonl")), "--responses", s(&e2e("responses.jsonl")), "--judge", &judge]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("comparative"));
    // Judged constraints without a judge.
    let o = mmif(&["eval", "--bench", s(&e2e("bench.jsonl")), "--responses", s(&e2e("responses.jsonl"))]);
    assert_eq!(code(&o), 2);
    // A malformed benchmark line.
    let bad = write(&dir, "bad.jsonl", "{\"id\": 1}\n");
    let o = mmif(&["eval", "--bench", &bad, "--responses", s(&e2e("responses.jsonl")), "--judge", &judge]);
    assert_eq!(code(&o), 2);
}

#[test]
fn verify_exit_codes() {
    let dir = TempDir::new().unwrap();
    let text = write(&dir, "t.txt", "One sentence here. Another one there.");
    let run = |params: &str| mmif(&["verify", "--function", "check_whether_response_sentence_number_in_range", "--params", params, "--text", &text]);
    let pass = run("[2, 3]");
    assert_eq!(code(&pass), 0);
    assert_eq!(code(&run("[3, 5]")), 1);
    assert_eq!(code(&run("(2, 3)")), 2);
    assert_eq!(code(&run("[5, 3]")), 2);
    assert_eq!(code(&run("[\"a\"]")), 2);
    assert_eq!(code(&mmif(&["verify", "--function", "no_such_function", "--text", &text])), 2);

    let mut child = Command::new(env!("CARGO_BIN_EXE_mmif"))
        .args(["verify", "--function", "check_whether_whole_response_not_contain_certain_substring", "--params", "['there']", "--stdin"])
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .spawn()
        .unwrap();
    child.stdin.take().unwrap().write_all(b"It is over there.").unwrap();
    assert_eq!(child.wait_with_output().unwrap().status.code(), Some(1));

    let o = mmif(&["verify", "--constraint", "Answer in at most 10 words.", "--text", &text]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
}

fn sft_records(dir: &TempDir) -> String {
    let record = |id: &str, lows: &[i64]| {
        let constraints: Vec<Value> = lows
            .iter()
            .map(|&lo| {
                json!({"sub_id": "C.3", "description": format!("Use at least {lo} words."), "eval_method": "rule_based",
                       "verifier": {"name": "check_whether_response_word_count_in_range", "params": [lo, 100]}})
            })
            .collect();
        json!({"id": id, "image": format!("images/{id}.png"), "instruction": "Describe the scene.",
               "constraints": constraints, "response": "one two three four five"})
        .to_string()
    };
    let body = [record("s1", &[1, 2, 3, 4, 6]), record("s2", &[1, 2, 6, 7, 8]), record("s3", &[1, 2, 3, 4, 5, 6])].join("\n");
    write(dir, "sft.jsonl", &body)
}

#[test]
fn gen_pairs_is_deterministic_and_drops_echoes() {
    let dir = TempDir::new().unwrap();
    let input = sft_records(&dir);
    let other = write(&dir, "gen.json", r#"[{"contains": "", "response": "A short unrelated reply."}]"#);
    let run = |setting: &str, seed: &str, fixtures: &str| {
        let o = mmif(&["gen-pairs", "--in", &input, "--setting", setting, "--seed", seed, "--stub-fixtures", fixtures]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
        jsonl(&stdout(&o))
    };
    let a = run("remove-33", "7", &other);
    assert_eq!(a, run("remove-33", "7", &other));
    assert_eq!(a.len(), 3);
    assert_eq!(a[0]["removed_indices"].as_array().unwrap().len(), 2);
    assert_eq!(a[2]["removed_indices"].as_array().unwrap().len(), 2);

    for p in run("remove-100", "1", &other) {
        assert_eq!(p["prompt_ablated"], "Describe the scene.");
    }
    for p in run("no-image", "1", &other) {
        assert_eq!(p["prompt_ablated"], p["prompt_full"]);
        assert_eq!(p["removed_indices"], json!([]));
    }

    let echo = write(&dir, "echo.json", r#"[{"contains": "", "response": "one two three four five"}]"#);
    assert!(run("remove-66", "1", &echo).is_empty());
}

#[test]
fn sft_filter_scores_and_splits() {
    let dir = TempDir::new().unwrap();
    let input = sft_records(&dir);
    let dropped = dir.path().join("dropped.jsonl");
    let o = mmif(&["sft-filter", "--in", &input, "--dropped", s(&dropped)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let kept = jsonl(&stdout(&o));
    let ids: Vec<&str> = kept.iter().map(|r| r["id"].as_str().unwrap()).collect();
    assert_eq!(ids, ["s1", "s3"]);
    assert_eq!(kept[0]["compliance"], 0.8);
    let dropped = jsonl(&std::fs::read_to_string(&dropped).unwrap());
    assert_eq!(dropped.len(), 1);
    assert_eq!(dropped[0]["id"], "s2");

    // Filtering the kept set again keeps everything.
    let again = write(&dir, "kept.jsonl", &stdout(&o));
    let o2 = mmif(&["sft-filter", "--in", &again]);
    assert_eq!(stdout(&o2), stdout(&o));
    assert_eq!(code(&mmif(&["sft-filter", "--in", &input, "--threshold", "1.5"])), 2);
}

fn generator_fixtures(dir: &TempDir, verdict: &str) -> String {
    let classes: Vec<String> = Taxonomy::builtin().classes().iter().map(|c| c.sub_id.clone()).collect();
    let mut lines = Vec::new();
    for c in &classes {
        for k in 1..=2 {
            lines.push(format!("{c} | Address detail {k} of aspect {c} in the answer."));
        }
    }
    let keep: Vec<String> = (1..=12).map(|i| format!("{i}: {verdict}")).collect();
    let fixtures = json!([
        {"contains": "Write concrete constraints", "response": lines.join("\n")},
        {"contains": "Check each constraint against the task", "response": keep.join("\n")},
        {"contains": "", "response": "NONE"}
    ]);
    write(dir, &format!("gen-{verdict}.json"), &fixtures.to_string())
}

fn manifest(dir: &TempDir, n: usize) -> String {
    let lines: Vec<String> = (0..n).map(|i| json!({"id": format!("img{i}"), "image": format!("images/{i}.png")}).to_string()).collect();
    write(dir, "manifest.jsonl", &lines.join("\n"))
}

#[test]
fn gen_instructions_counts_and_rejections() {
    let dir = TempDir::new().unwrap();
    let m = manifest(&dir, 10);
    let fixtures = generator_fixtures(&dir, "KEEP");
    let run = || {
        let o = mmif(&["gen-instructions", "--manifest", &m, "--stub-fixtures", &fixtures, "--seed", "11"]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
        jsonl(&stdout(&o))
    };
    let records = run();
    assert_eq!(records.len(), 10);
    assert_eq!(records, run());
    for r in &records {
        let n = r["constraints"].as_array().unwrap().len();
        assert!((3..=12).contains(&n), "{n}");
        assert!(!r["instruction"].as_str().unwrap().is_empty());
    }
    let narrow = mmif(&["gen-instructions", "--manifest", &m, "--stub-fixtures", &fixtures, "--n-constraints-min", "4", "--n-constraints-max", "4"]);
    assert!(jsonl(&stdout(&narrow)).iter().all(|r| r["constraints"].as_array().unwrap().len() == 4));
    assert_eq!(code(&mmif(&["gen-instructions", "--manifest", &m, "--stub-fixtures", &fixtures, "--n-constraints-min", "2"])), 2);

    let drop = generator_fixtures(&dir, "DROP");
    let rej = dir.path().join("rejections.jsonl");
    let o = mmif(&["gen-instructions", "--manifest", &m, "--stub-fixtures", &drop, "--rejections", s(&rej)]);
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).is_empty());
    assert_eq!(jsonl(&std::fs::read_to_string(&rej).unwrap()).len(), 10);

    let empty = write(&dir, "empty.jsonl", "");
    let o = mmif(&["gen-instructions", "--manifest", &empty]);
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).is_empty());
}
