//! Whole-benchmark runs: bounded parallel evaluation, result files and the
//! run manifest.

use std::collections::{BTreeMap, HashMap};
use std::io::Write;
use std::path::Path;
use std::sync::Arc;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::report::{aggregate, AggregateError, CorpusReport, Metric};
use super::{evaluate_item, BenchmarkItem, ConstraintOutcome, EvalContext, EvaluationResult};
use crate::judge::templates::{self, judge_set_hash};
use crate::judge::{ConstraintVerdict, ControlStore, Controls, Decoding, GenerationClient, GenerationRequest};
use crate::par::ordered_map;
use crate::taxonomy::EvalMethod;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strictness {
    #[default]
    Strict,
    Lenient,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunOptions {
    pub parallelism: usize,
    pub strictness: Strictness,
    pub metric: Metric,
    pub taxonomy_version: String,
    pub config_digest: String,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            parallelism: 1,
            strictness: Strictness::Strict,
            metric: Metric::Fraction,
            taxonomy_version: crate::taxonomy::BUILTIN_VERSION.to_string(),
            config_digest: String::new(),
        }
    }
}

/// Where responses under evaluation come from.
pub enum ResponseSource {
    /// Pre-recorded responses keyed by item id.
    Recorded(HashMap<String, String>),
    /// Query `Clients::model` with each item's full prompt.
    Model,
}

impl ResponseSource {
    /// Load `{id, response}` JSONL.
    pub fn load_jsonl(path: &Path) -> Result<Self, String> {
        #[derive(Deserialize)]
        struct Line {
            id: String,
            response: String,
        }
        let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        let mut map = HashMap::new();
        for (n, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let rec: Line = serde_json::from_str(line).map_err(|e| format!("{}:{}: {e}", path.display(), n + 1))?;
            if map.insert(rec.id.clone(), rec.response).is_some() {
                return Err(format!("{}:{}: duplicate id `{}`", path.display(), n + 1, rec.id));
            }
        }
        Ok(ResponseSource::Recorded(map))
    }
}

#[derive(Default)]
pub struct Clients {
    pub judge: Option<Arc<dyn GenerationClient>>,
    pub model: Option<Arc<dyn GenerationClient>>,
    pub controls: ControlStore,
}

#[derive(Debug, Error)]
pub enum RunError {
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error("no response for {} item(s): {}", .0.len(), .0.join(", "))]
    MissingResponses(Vec<String>),
    #[error(transparent)]
    Aggregate(#[from] AggregateError),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub taxonomy_version: String,
    pub template_version: String,
    pub template_hashes: BTreeMap<String, String>,
    pub judge_template_set: String,
    pub clients: BTreeMap<String, String>,
    pub client_config_digest: String,
    pub metric: Metric,
    pub strictness: Strictness,
    pub parallelism: usize,
    pub items: usize,
    /// Unix seconds; `SOURCE_DATE_EPOCH` when set.
    pub timestamp: u64,
}

pub struct RunOutput {
    pub results: Vec<EvaluationResult>,
    pub report: CorpusReport,
    pub manifest: RunManifest,
}

fn timestamp() -> u64 {
    std::env::var("SOURCE_DATE_EPOCH")
        .ok()
        .and_then(|s| s.trim().parse().ok())
        .unwrap_or_else(|| SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs()))
}

fn check_preconditions(items: &[BenchmarkItem], source: &ResponseSource, clients: &Clients) -> Result<(), RunError> {
    if matches!(source, ResponseSource::Model) && clients.model.is_none() {
        return Err(RunError::Precondition("model responses requested but no model client configured".into()));
    }
    let judged = items
        .iter()
        .flat_map(|i| &i.constraints)
        .any(|c| c.eval_method != EvalMethod::RuleBased);
    if judged && clients.judge.is_none() {
        return Err(RunError::Precondition(
            "benchmark has judge-evaluated constraints but no judge client is configured".into(),
        ));
    }
    if clients.model.is_none() {
        for item in items {
            for (idx, c) in item.constraints.iter().enumerate() {
                if c.eval_method == EvalMethod::CompareJudge && clients.controls.get(&item.id, idx).is_none() {
                    return Err(RunError::Precondition(format!(
                        "item `{}` constraint {idx} uses comparative judgment, which needs a model client \
                         or a recorded control response",
                        item.id
                    )));
                }
            }
        }
    }
    Ok(())
}

fn placeholder(item: &BenchmarkItem, verdict: ConstraintVerdict, detail: &str, flag: &str, hash: &str) -> EvaluationResult {
    let outcomes = item
        .constraints
        .iter()
        .enumerate()
        .map(|(idx, c)| ConstraintOutcome { idx, method: c.eval_method, verdict, detail: detail.to_string() })
        .collect();
    let mut r = EvaluationResult::from_outcomes(item.id.clone(), outcomes, hash.to_string());
    r.flags.push(flag.to_string());
    r
}

/// Evaluate every item with up to `opts.parallelism` workers. Results come
/// back in item order regardless of completion order.
pub fn run_evaluation(
    items: &[BenchmarkItem],
    source: ResponseSource,
    clients: &Clients,
    opts: &RunOptions,
) -> Result<RunOutput, RunError> {
    if opts.parallelism == 0 {
        return Err(RunError::Precondition("parallelism must be at least 1".into()));
    }
    check_preconditions(items, &source, clients)?;
    if let (ResponseSource::Recorded(map), Strictness::Strict) = (&source, opts.strictness) {
        let missing: Vec<String> = items.iter().filter(|i| !map.contains_key(&i.id)).map(|i| i.id.clone()).collect();
        if !missing.is_empty() {
            return Err(RunError::MissingResponses(missing));
        }
    }

    let hash = judge_set_hash();
    let controls = Controls::new(clients.controls.clone(), clients.model.clone());
    let ctx = EvalContext { judge: clients.judge.as_deref(), controls: &controls, template_hash: &hash };
    let evaluate = |item: &BenchmarkItem| -> EvaluationResult {
        let response = match &source {
            ResponseSource::Recorded(map) => map.get(&item.id).cloned().ok_or(None),
            ResponseSource::Model => {
                let model = clients.model.as_ref().expect("checked above");
                let request = GenerationRequest::new(item.full_prompt(), Decoding::RESPONSE)
                    .with_attachment(item.image_ref.as_deref());
                model.generate(&request).map_err(|e| Some(e.to_string()))
            }
        };
        match response {
            Ok(text) => evaluate_item(item, &text, &ctx),
            Err(None) => {
                log::warn!("item `{}`: no response, scored 0", item.id);
                placeholder(item, ConstraintVerdict::Violated, "no response", "missing_response", &hash)
            }
            Err(Some(e)) => {
                log::warn!("item `{}`: response generation failed: {e}", item.id);
                let detail = format!("evaluation error: response unavailable: {e}");
                placeholder(item, ConstraintVerdict::Indeterminate, &detail, "response_unavailable", &hash)
            }
        }
    };

    let results = ordered_map(items, opts.parallelism, evaluate);

    let report = aggregate(&results, items, opts.metric)?;
    let mut client_desc = BTreeMap::new();
    if let Some(j) = &clients.judge {
        client_desc.insert("judge".to_string(), j.describe());
    }
    if let Some(m) = &clients.model {
        client_desc.insert("model".to_string(), m.describe());
    }
    if !clients.controls.is_empty() {
        client_desc.insert("controls".to_string(), format!("recorded:{}", clients.controls.len()));
    }
    let manifest = RunManifest {
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        taxonomy_version: opts.taxonomy_version.clone(),
        template_version: templates::TEMPLATE_VERSION.to_string(),
        template_hashes: templates::ALL.iter().map(|t| (t.name.to_string(), t.hash())).collect(),
        judge_template_set: hash.clone(),
        clients: client_desc,
        client_config_digest: opts.config_digest.clone(),
        metric: opts.metric,
        strictness: opts.strictness,
        parallelism: opts.parallelism,
        items: items.len(),
        timestamp: timestamp(),
    };
    Ok(RunOutput { results, report, manifest })
}

pub fn write_results_jsonl(results: &[EvaluationResult], mut w: impl Write) -> std::io::Result<()> {
    for r in results {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}
