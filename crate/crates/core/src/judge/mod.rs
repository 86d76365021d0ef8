//! LLM-backed evaluation: direct judgment, comparative judgment against a
//! control response, and verifier-parameter extraction.

pub mod client;
mod extract;
pub mod templates;

use std::collections::HashMap;
use std::fmt;
use std::path::Path;
use std::sync::{Arc, Mutex, OnceLock};

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::prompt::compose_prompt;
use crate::taxonomy::ConstraintSpec;

pub use client::{
    ClientConfig, ClientError, ClientMode, Decoding, FixtureRecord, GenerationClient, GenerationRequest,
    HttpClient, RecordingClient, RetryPolicy, StubClient, TokenBucket, Transport, UreqTransport,
};
pub use extract::{extract_verifier_params, pattern_extract, Confidence, ExtractionResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ConstraintVerdict {
    Satisfied,
    Violated,
    Indeterminate,
}

impl ConstraintVerdict {
    pub fn as_str(self) -> &'static str {
        match self {
            ConstraintVerdict::Satisfied => "Satisfied",
            ConstraintVerdict::Violated => "Violated",
            ConstraintVerdict::Indeterminate => "Indeterminate",
        }
    }

    pub fn from_passed(passed: bool) -> Self {
        if passed {
            ConstraintVerdict::Satisfied
        } else {
            ConstraintVerdict::Violated
        }
    }
}

impl fmt::Display for ConstraintVerdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JudgeDecision {
    pub verdict: ConstraintVerdict,
    pub rationale: String,
    pub raw: String,
}

#[derive(Debug, Error)]
pub enum JudgeError {
    #[error("judge call failed: {0}")]
    Judge(#[source] ClientError),
    #[error("control-response unavailable: {0}")]
    ControlUnavailable(String),
    #[error("constraint index {index} out of range for item {item_id}")]
    BadIndex { item_id: String, index: usize },
}

fn verdict_line() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"(?i)^answer\s*:\s*(yes|no)\.?$").expect("verdict regex"))
}

/// Map raw judge output to a decision. The verdict comes from the last line
/// that reads `ANSWER: YES` or `ANSWER: NO` (case-insensitive, markdown
/// emphasis ignored); output without such a line is Indeterminate.
pub fn parse_verdict(raw: &str) -> JudgeDecision {
    let lines: Vec<&str> = raw.lines().collect();
    let hit = lines.iter().enumerate().rev().find_map(|(i, line)| {
        let cleaned = line.trim_matches(|c: char| c.is_whitespace() || c == '*' || c == '_' || c == '`');
        verdict_line().captures(cleaned).map(|c| (i, c[1].eq_ignore_ascii_case("yes")))
    });
    match hit {
        Some((i, yes)) => {
            let mut rest = lines.clone();
            rest.remove(i);
            JudgeDecision {
                verdict: ConstraintVerdict::from_passed(yes),
                rationale: rest.join("\n").trim().to_string(),
                raw: raw.to_string(),
            }
        }
        None => JudgeDecision {
            verdict: ConstraintVerdict::Indeterminate,
            rationale: raw.trim().to_string(),
            raw: raw.to_string(),
        },
    }
}

/// Ask the judge whether `response` satisfies one constraint.
pub fn direct_judge(
    constraint: &ConstraintSpec,
    response: &str,
    image: Option<&str>,
    judge: &dyn GenerationClient,
) -> Result<JudgeDecision, JudgeError> {
    let prompt = templates::DIRECT_JUDGE.render(&[
        ("constraint", constraint.description.as_str()),
        ("response", response),
    ]);
    let request = GenerationRequest::new(prompt, Decoding::JUDGE).with_attachment(image);
    judge.generate(&request).map(|raw| parse_verdict(&raw)).map_err(JudgeError::Judge)
}

/// The item context a comparative judgment needs.
#[derive(Debug, Clone, Copy)]
pub struct CompareTask<'a> {
    pub item_id: &'a str,
    pub instruction: &'a str,
    pub constraints: &'a [ConstraintSpec],
    pub index: usize,
    pub image: Option<&'a str>,
}

impl CompareTask<'_> {
    pub fn full_prompt(&self) -> String {
        compose_prompt(self.instruction, self.constraints.iter().map(|c| c.description.as_str()))
    }

    /// The item prompt with this task's constraint removed.
    pub fn ablated_prompt(&self) -> String {
        compose_prompt(
            self.instruction,
            self.constraints
                .iter()
                .enumerate()
                .filter(|(i, _)| *i != self.index)
                .map(|(_, c)| c.description.as_str()),
        )
    }
}

/// Pre-recorded control responses keyed by (item id, constraint index).
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ControlStore {
    responses: HashMap<(String, usize), String>,
}

#[derive(Debug, Deserialize)]
struct ControlLine {
    id: String,
    idx: usize,
    response: String,
}

impl ControlStore {
    pub fn insert(&mut self, item_id: impl Into<String>, index: usize, response: impl Into<String>) {
        self.responses.insert((item_id.into(), index), response.into());
    }

    pub fn get(&self, item_id: &str, index: usize) -> Option<&str> {
        self.responses.get(&(item_id.to_string(), index)).map(String::as_str)
    }

    pub fn is_empty(&self) -> bool {
        self.responses.is_empty()
    }

    pub fn len(&self) -> usize {
        self.responses.len()
    }

    /// Load `{id, idx, response}` lines.
    pub fn load_jsonl(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        let mut store = ControlStore::default();
        for (n, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let rec: ControlLine =
                serde_json::from_str(line).map_err(|e| format!("{}:{}: {e}", path.display(), n + 1))?;
            store.insert(rec.id, rec.idx, rec.response);
        }
        Ok(store)
    }
}

type Slot = Arc<OnceLock<Result<String, String>>>;

/// Source of control responses for comparative judgment. Recorded controls
/// take precedence; otherwise the model under test is queried once per
/// (item, constraint), with concurrent requests for the same key collapsed
/// into a single generation.
pub struct Controls {
    recorded: ControlStore,
    model: Option<Arc<dyn GenerationClient>>,
    cache: Mutex<HashMap<(String, usize), Slot>>,
}

impl Controls {
    pub fn new(recorded: ControlStore, model: Option<Arc<dyn GenerationClient>>) -> Self {
        Controls { recorded, model, cache: Mutex::new(HashMap::new()) }
    }

    pub fn none() -> Self {
        Self::new(ControlStore::default(), None)
    }

    pub fn can_supply(&self, item_id: &str, index: usize) -> bool {
        self.model.is_some() || self.recorded.get(item_id, index).is_some()
    }

    pub fn control_for(&self, task: &CompareTask<'_>) -> Result<String, JudgeError> {
        if let Some(r) = self.recorded.get(task.item_id, task.index) {
            return Ok(r.to_string());
        }
        let Some(model) = &self.model else {
            return Err(JudgeError::ControlUnavailable(format!(
                "no model client and no recorded control for {}#{}",
                task.item_id, task.index
            )));
        };
        let slot = {
            let mut map = self.cache.lock().expect("control cache");
            map.entry((task.item_id.to_string(), task.index)).or_default().clone()
        };
        slot.get_or_init(|| {
            let request = GenerationRequest::new(task.ablated_prompt(), Decoding::RESPONSE).with_attachment(task.image);
            model.generate(&request).map_err(|e| e.to_string())
        })
        .clone()
        .map_err(JudgeError::ControlUnavailable)
    }
}

/// Judge whether `response_a`, written with the constraint in the prompt,
/// follows it more closely than a control written without it. A tie or
/// indistinguishable pair is Violated.
pub fn compare_judge(
    task: &CompareTask<'_>,
    response_a: &str,
    controls: &Controls,
    judge: &dyn GenerationClient,
) -> Result<JudgeDecision, JudgeError> {
    let constraint = task.constraints.get(task.index).ok_or_else(|| JudgeError::BadIndex {
        item_id: task.item_id.to_string(),
        index: task.index,
    })?;
    let response_b = controls.control_for(task)?;
    let prompt = templates::COMPARE_JUDGE.render(&[
        ("constraint", constraint.description.as_str()),
        ("instruction", task.instruction),
        ("response_a", response_a),
        ("response_b", response_b.as_str()),
    ]);
    let request = GenerationRequest::new(prompt, Decoding::JUDGE).with_attachment(task.image);
    judge.generate(&request).map(|raw| parse_verdict(&raw)).map_err(JudgeError::Judge)
}
