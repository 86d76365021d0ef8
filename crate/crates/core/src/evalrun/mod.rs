//! Benchmark loading, per-item evaluation and score aggregation.

mod report;
mod run;

use std::collections::HashSet;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::judge::{
    compare_judge, direct_judge, extract_verifier_params, CompareTask, Confidence, ConstraintVerdict, Controls,
    GenerationClient,
};
use crate::taxonomy::{resolve_eval_method, ConstraintSpec, DefaultEvalMethod, EvalMethod, Taxonomy};
use crate::verifiers::{parse_param_literal, run_verifier, VerifierCall};

pub use report::{
    aggregate, round_half_up_tenths, weighted_average, AggregateError, CorpusReport, Metric, Percent,
    SubcategoryRow,
};
pub use run::{
    run_evaluation, write_results_jsonl, Clients, ResponseSource, RunError, RunManifest, RunOptions, RunOutput,
    Strictness,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Level {
    #[serde(rename = "C")]
    Compose,
    #[serde(rename = "P")]
    Perception,
}

impl fmt::Display for Level {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Level::Compose => "C",
            Level::Perception => "P",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BenchmarkItem {
    pub id: String,
    pub level: Level,
    pub image_ref: Option<String>,
    pub task_instruction: String,
    pub constraints: Vec<ConstraintSpec>,
}

impl BenchmarkItem {
    pub fn new(
        id: impl Into<String>,
        level: Level,
        image_ref: Option<String>,
        task_instruction: impl Into<String>,
        constraints: Vec<ConstraintSpec>,
    ) -> Result<Self, String> {
        let item = BenchmarkItem {
            id: id.into(),
            level,
            image_ref,
            task_instruction: task_instruction.into(),
            constraints,
        };
        if item.id.trim().is_empty() {
            return Err("empty id".into());
        }
        if item.task_instruction.trim().is_empty() {
            return Err("empty instruction".into());
        }
        if item.constraints.is_empty() {
            return Err("no constraints".into());
        }
        if item.level == Level::Perception && item.image_ref.is_none() {
            return Err("perception item without image".into());
        }
        Ok(item)
    }

    pub fn full_prompt(&self) -> String {
        crate::prompt::compose_prompt(
            &self.task_instruction,
            self.constraints.iter().map(|c| c.description.as_str()),
        )
    }

    pub fn compare_task(&self, index: usize) -> CompareTask<'_> {
        CompareTask {
            item_id: &self.id,
            instruction: &self.task_instruction,
            constraints: &self.constraints,
            index,
            image: self.image_ref.as_deref(),
        }
    }

    pub fn to_record(&self) -> ItemRecord {
        ItemRecord {
            id: self.id.clone(),
            level: self.level,
            image: self.image_ref.clone(),
            instruction: self.task_instruction.clone(),
            constraints: self.constraints.iter().map(ConstraintRecord::from_spec).collect(),
        }
    }
}

/// Wire form of a verifier binding. `params` is a JSON list or a literal
/// string such as `"[[(3, 3), (1, 2)]]"`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifierRecord {
    pub name: String,
    pub params: Value,
}

impl VerifierRecord {
    pub fn to_call(&self) -> Result<VerifierCall, String> {
        let values = match &self.params {
            Value::Array(v) => v.clone(),
            Value::String(s) => parse_param_literal(s).map_err(|e| e.to_string())?,
            other => return Err(format!("params must be a list or literal string, got {other}")),
        };
        VerifierCall::from_json(&self.name, &values).map_err(|e| e.to_string())
    }
}

/// Wire form of a constraint inside benchmark and dataset files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstraintRecord {
    pub sub_id: String,
    pub description: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eval_method: Option<EvalMethod>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub verifier: Option<VerifierRecord>,
}

impl ConstraintRecord {
    pub fn from_spec(spec: &ConstraintSpec) -> Self {
        ConstraintRecord {
            sub_id: spec.sub_id().to_string(),
            description: spec.description.clone(),
            eval_method: Some(spec.eval_method),
            verifier: spec.verifier.as_ref().map(|v| VerifierRecord {
                name: v.name().to_string(),
                params: Value::Array(v.params_json()),
            }),
        }
    }

    /// Resolve against the taxonomy. Rule-based constraints without a
    /// binding go through the extractor; dual rows fall back to the direct
    /// judge when nothing binds.
    pub fn resolve(
        &self,
        taxonomy: &Taxonomy,
        extractor: Option<&dyn GenerationClient>,
    ) -> Result<ConstraintSpec, String> {
        let class = taxonomy.get(&self.sub_id).map_err(|e| e.to_string())?.clone();
        let given = self.verifier.as_ref().map(VerifierRecord::to_call).transpose()?;
        let wants_rule = match self.eval_method {
            Some(EvalMethod::RuleBased) => true,
            Some(_) => false,
            None => matches!(
                class.default_eval_method,
                DefaultEvalMethod::RuleBased | DefaultEvalMethod::RuleOrDirect
            ),
        };
        let verifier = match given {
            Some(v) => Some(v),
            None if wants_rule => {
                let r = extract_verifier_params(&self.description, extractor);
                if r.confidence == Confidence::NeedsReview && self.eval_method.is_none() {
                    log::debug!("{}: no verifier binding for {:?}", self.sub_id, self.description);
                }
                r.call
            }
            None => None,
        };
        let method = match self.eval_method {
            Some(m) => m,
            None => resolve_eval_method(&class, verifier.is_some()),
        };
        if method == EvalMethod::RuleBased && verifier.is_none() {
            return Err(format!("{}: no verifier binding (needs review): {:?}", self.sub_id, self.description));
        }
        let verifier = if method == EvalMethod::RuleBased { verifier } else { None };
        if method != EvalMethod::RuleBased && self.verifier.is_some() {
            return Err(format!("{}: verifier given for a {method} constraint", self.sub_id));
        }
        ConstraintSpec::new(class, self.description.clone(), method, verifier).map_err(|e| e.to_string())
    }
}

/// One benchmark line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ItemRecord {
    pub id: String,
    pub level: Level,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub image: Option<String>,
    pub instruction: String,
    pub constraints: Vec<ConstraintRecord>,
}

impl ItemRecord {
    pub fn resolve(&self, taxonomy: &Taxonomy, extractor: Option<&dyn GenerationClient>) -> Result<BenchmarkItem, String> {
        let constraints = self
            .constraints
            .iter()
            .enumerate()
            .map(|(i, c)| c.resolve(taxonomy, extractor).map_err(|e| format!("constraint {i}: {e}")))
            .collect::<Result<Vec<_>, _>>()?;
        BenchmarkItem::new(self.id.clone(), self.level, self.image.clone(), self.instruction.clone(), constraints)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Rejection {
    pub line: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub id: Option<String>,
    pub reason: String,
}

impl fmt::Display for Rejection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.id {
            Some(id) => write!(f, "line {} ({id}): {}", self.line, self.reason),
            None => write!(f, "line {}: {}", self.line, self.reason),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct LoadReport {
    pub items: Vec<BenchmarkItem>,
    pub rejections: Vec<Rejection>,
}

#[derive(Debug, Error)]
pub enum LoadError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{} line(s) rejected; first: {}", .0.len(), .0[0])]
    Rejected(Vec<Rejection>),
}

/// Parse benchmark JSONL text. Blank lines are skipped; line numbers are 1-based.
pub fn parse_benchmark(text: &str, taxonomy: &Taxonomy, extractor: Option<&dyn GenerationClient>) -> LoadReport {
    let mut report = LoadReport::default();
    let mut seen = HashSet::new();
    for (n, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let line_no = n + 1;
        let record: ItemRecord = match serde_json::from_str(line) {
            Ok(r) => r,
            Err(e) => {
                report.rejections.push(Rejection { line: line_no, id: None, reason: e.to_string() });
                continue;
            }
        };
        let id = Some(record.id.clone());
        if !seen.insert(record.id.clone()) {
            report.rejections.push(Rejection { line: line_no, id, reason: "duplicate id".into() });
            continue;
        }
        match record.resolve(taxonomy, extractor) {
            Ok(item) => report.items.push(item),
            Err(reason) => report.rejections.push(Rejection { line: line_no, id, reason }),
        }
    }
    if report.items.is_empty() && report.rejections.is_empty() {
        log::warn!("benchmark contains no items");
    }
    report
}

pub fn load_benchmark(
    path: &Path,
    taxonomy: &Taxonomy,
    extractor: Option<&dyn GenerationClient>,
    strict: bool,
) -> Result<LoadReport, LoadError> {
    let text = std::fs::read_to_string(path).map_err(|source| LoadError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let report = parse_benchmark(&text, taxonomy, extractor);
    for r in &report.rejections {
        log::warn!("{}: rejected {r}", path.display());
    }
    if strict && !report.rejections.is_empty() {
        return Err(LoadError::Rejected(report.rejections));
    }
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConstraintOutcome {
    pub idx: usize,
    pub method: EvalMethod,
    pub verdict: ConstraintVerdict,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationResult {
    pub id: String,
    pub per_constraint: Vec<ConstraintOutcome>,
    pub fraction: f64,
    pub strict: bool,
    pub template_hash: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub flags: Vec<String>,
}

impl EvaluationResult {
    pub fn from_outcomes(id: impl Into<String>, per_constraint: Vec<ConstraintOutcome>, template_hash: String) -> Self {
        let (sat, total) = tally(&per_constraint);
        EvaluationResult {
            id: id.into(),
            fraction: if total == 0 { 0.0 } else { sat as f64 / total as f64 },
            strict: total > 0 && sat == total,
            per_constraint,
            template_hash,
            flags: Vec::new(),
        }
    }

    /// (satisfied, total). Indeterminate counts as not satisfied.
    pub fn counts(&self) -> (usize, usize) {
        tally(&self.per_constraint)
    }

    pub fn indeterminate(&self) -> usize {
        self.per_constraint
            .iter()
            .filter(|o| o.verdict == ConstraintVerdict::Indeterminate)
            .count()
    }
}

fn tally(outcomes: &[ConstraintOutcome]) -> (usize, usize) {
    let sat = outcomes
        .iter()
        .filter(|o| o.verdict == ConstraintVerdict::Satisfied)
        .count();
    (sat, outcomes.len())
}

/// Clients and control responses used by judged constraints.
pub struct EvalContext<'a> {
    pub judge: Option<&'a dyn GenerationClient>,
    pub controls: &'a Controls,
    pub template_hash: &'a str,
}

/// Evaluate one response. Rule-based constraints run first and never touch
/// a client; judge failures turn into Indeterminate outcomes.
pub fn evaluate_item(item: &BenchmarkItem, response: &str, ctx: &EvalContext<'_>) -> EvaluationResult {
    let mut order: Vec<usize> = (0..item.constraints.len()).collect();
    order.sort_by_key(|&i| item.constraints[i].eval_method != EvalMethod::RuleBased);
    let mut outcomes: Vec<ConstraintOutcome> = order
        .into_iter()
        .map(|idx| evaluate_constraint(item, idx, response, ctx))
        .collect();
    outcomes.sort_by_key(|o| o.idx);
    EvaluationResult::from_outcomes(item.id.clone(), outcomes, ctx.template_hash.to_string())
}

fn evaluate_constraint(item: &BenchmarkItem, idx: usize, response: &str, ctx: &EvalContext<'_>) -> ConstraintOutcome {
    let c = &item.constraints[idx];
    let outcome = |verdict, detail: String| ConstraintOutcome { idx, method: c.eval_method, verdict, detail };
    let judged = match c.eval_method {
        EvalMethod::RuleBased => {
            let call = c.verifier.as_ref().expect("rule-based constraint carries a verifier");
            let v = run_verifier(call, response);
            return outcome(ConstraintVerdict::from_passed(v.passed), v.detail);
        }
        EvalMethod::DirectJudge | EvalMethod::CompareJudge => {
            let Some(judge) = ctx.judge else {
                return outcome(ConstraintVerdict::Indeterminate, "evaluation error: no judge client".into());
            };
            if c.eval_method == EvalMethod::DirectJudge {
                direct_judge(c, response, item.image_ref.as_deref(), judge)
            } else {
                compare_judge(&item.compare_task(idx), response, ctx.controls, judge)
            }
        }
    };
    match judged {
        Ok(d) => outcome(d.verdict, d.rationale),
        Err(e) => outcome(ConstraintVerdict::Indeterminate, format!("evaluation error: {e}")),
    }
}
