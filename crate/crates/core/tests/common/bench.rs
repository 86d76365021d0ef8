//! The ten-item end-to-end benchmark under tests/fixtures/e2e, served
//! entirely by stub clients.

use std::path::PathBuf;
use std::sync::Arc;

use mmif_core::datagen::InstructRecord;
use mmif_core::evalrun::{
    load_benchmark, run_evaluation, write_results_jsonl, BenchmarkItem, Clients, Metric, ResponseSource, RunOptions,
    RunOutput,
};
use mmif_core::judge::{ControlStore, StubClient};
use mmif_core::taxonomy::{ConstraintSpec, EvalMethod, Taxonomy};
use mmif_core::verifiers::{Param, VerifierCall};

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/e2e").join(name)
}

pub fn items() -> Vec<BenchmarkItem> {
    load_benchmark(&fixture("bench.jsonl"), &Taxonomy::builtin(), None, true)
        .expect("e2e benchmark loads")
        .items
}

pub fn judge() -> Arc<StubClient> {
    Arc::new(StubClient::from_file(&fixture("judge.json"), true).expect("judge fixtures"))
}

pub fn model() -> Arc<StubClient> {
    Arc::new(StubClient::from_file(&fixture("model.json"), true).expect("model fixtures"))
}

/// Run the benchmark from recorded responses.
pub fn run(parallelism: usize, metric: Metric) -> RunOutput {
    let clients = Clients {
        judge: Some(judge()),
        model: Some(model()),
        controls: ControlStore::load_jsonl(&fixture("controls.jsonl")).expect("controls"),
    };
    let source = ResponseSource::load_jsonl(&fixture("responses.jsonl")).expect("responses");
    let opts = RunOptions { parallelism, metric, ..RunOptions::default() };
    run_evaluation(&items(), source, &clients, &opts).expect("e2e run")
}

/// Results JSONL, markdown and CSV of one run.
pub fn artifacts(out: &RunOutput) -> (Vec<u8>, String, String) {
    let mut results = Vec::new();
    write_results_jsonl(&out.results, &mut results).unwrap();
    (results, out.report.to_markdown(), out.report.to_csv())
}

/// A record with `n` rule-based constraints whose descriptions are
/// distinguishable by a `[k<i>]` tag.
pub fn instruct_record(id: &str, n: usize) -> InstructRecord {
    let class = Taxonomy::builtin().get("C.3").unwrap().clone();
    let constraints = (0..n)
        .map(|i| {
            let call = VerifierCall::new(
                "check_whether_response_word_count_in_range",
                vec![Param::Int(i as i64), Param::Int(1000)],
            )
            .unwrap();
            ConstraintSpec::new(class.clone(), format!("Use at least {i} words [k{i}]."), EvalMethod::RuleBased, Some(call))
                .unwrap()
        })
        .collect();
    InstructRecord::new(id, Some(format!("images/{id}.png")), "Describe the scene.", constraints).unwrap()
}
