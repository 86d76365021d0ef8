//! Constraint selection, writing, validation and binding for one task.

use std::sync::OnceLock;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;
use regex::Regex;
use serde::{Deserialize, Serialize};

use super::tasks::{filter_existing_questions, generate_task_list, FilterConfig, TaskPool, DEFAULT_TASK_K};
use super::{record_rng, DatagenError, InstructRecord, MAX_CONSTRAINTS, MIN_CONSTRAINTS};
use crate::judge::templates;
use crate::judge::{extract_verifier_params, Decoding, GenerationClient, GenerationRequest};
use crate::taxonomy::{resolve_eval_method, ConstraintClass, ConstraintSpec, DefaultEvalMethod, EvalMethod, Taxonomy};
use crate::verifiers::{Param, VerifierCall};

/// Constraint classes offered to the generator per task when not configured.
pub const DEFAULT_CANDIDATE_CLASSES: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IntegrationMode {
    /// Pre-select compatible classes, then write constraints for them.
    /// Used for tasks taken from existing annotations.
    TwoPhase,
    /// Write constraints directly from the sampled classes. Used for tasks
    /// drawn from the task pool.
    SinglePhase,
}

pub struct InstructionClients<'a> {
    pub generator: &'a dyn GenerationClient,
    pub validator: &'a dyn GenerationClient,
    /// LLM fallback for verifier binding; pattern bank only when `None`.
    pub extractor: Option<&'a dyn GenerationClient>,
    /// Task-list generator; sampled exemplars pass through when `None`.
    pub task_lister: Option<&'a dyn GenerationClient>,
    pub task_validator: Option<&'a dyn GenerationClient>,
    /// Produces the response stored with each record, when set.
    pub responder: Option<&'a dyn GenerationClient>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct InstructionConfig {
    pub n_min: usize,
    pub n_max: usize,
    pub task_k: usize,
    pub candidate_classes: usize,
    pub seed: u64,
    pub filter: FilterConfig,
}

impl Default for InstructionConfig {
    fn default() -> Self {
        InstructionConfig {
            n_min: MIN_CONSTRAINTS,
            n_max: MAX_CONSTRAINTS,
            task_k: DEFAULT_TASK_K,
            candidate_classes: DEFAULT_CANDIDATE_CLASSES,
            seed: 0,
            filter: FilterConfig::default(),
        }
    }
}

impl InstructionConfig {
    pub fn validate(&self) -> Result<(), DatagenError> {
        if self.n_min < MIN_CONSTRAINTS || self.n_max > MAX_CONSTRAINTS || self.n_min > self.n_max {
            return Err(DatagenError::Invalid(format!(
                "constraint range [{}, {}] must lie within [{MIN_CONSTRAINTS}, {MAX_CONSTRAINTS}]",
                self.n_min, self.n_max
            )));
        }
        if self.task_k == 0 || self.candidate_classes == 0 {
            return Err(DatagenError::Invalid("task_k and candidate_classes must be at least 1".into()));
        }
        Ok(())
    }
}

/// One line of the input manifest.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub id: String,
    #[serde(default)]
    pub image: Option<String>,
    #[serde(default)]
    pub question: Option<String>,
}

fn class_listing(classes: &[&ConstraintClass]) -> String {
    classes
        .iter()
        .map(|c| format!("{}: {}", c.sub_id, c.sub_name))
        .collect::<Vec<_>>()
        .join("\n")
}

fn sub_id_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"\b([A-Z]\.\d+)\b").expect("sub_id regex"))
}

fn generated_line_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"^\s*(?:[-*]\s*)?([A-Z]\.\d+)\s*\|\s*(.*?)\s*$").expect("line regex"))
}

fn validation_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"(?i)^\s*(\d+)\s*[:.)\-]\s*(keep|drop)\b").expect("validation regex"))
}

fn bind(class: &ConstraintClass, description: &str, extractor: Option<&dyn GenerationClient>) -> ConstraintSpec {
    let rule_capable = matches!(
        class.default_eval_method,
        DefaultEvalMethod::RuleBased | DefaultEvalMethod::RuleOrDirect
    );
    let call = if rule_capable { extract_verifier_params(description, extractor).call } else { None };
    let method = match (&call, class.default_eval_method) {
        (None, DefaultEvalMethod::RuleBased) => {
            log::info!("{}: no verifier for {description:?}; judged directly", class.sub_id);
            EvalMethod::DirectJudge
        }
        _ => resolve_eval_method(class, call.is_some()),
    };
    ConstraintSpec::new(class.clone(), description, method, call).expect("binding is consistent with method")
}

/// Pick classes, write `n_constraints` constraints for `task`, drop those
/// the validator rejects or that contradict an earlier bound constraint, and
/// bind verifiers where possible. Fewer than three survivors rejects the task.
pub fn integrate_constraints(
    task: &str,
    classes: &[ConstraintClass],
    n_constraints: usize,
    mode: IntegrationMode,
    candidate_count: usize,
    clients: &InstructionClients<'_>,
    rng: &mut impl Rng,
) -> Result<Vec<ConstraintSpec>, DatagenError> {
    if !(MIN_CONSTRAINTS..=MAX_CONSTRAINTS).contains(&n_constraints) {
        return Err(DatagenError::Invalid(format!(
            "n_constraints {n_constraints} outside [{MIN_CONSTRAINTS}, {MAX_CONSTRAINTS}]"
        )));
    }
    let mut candidates: Vec<&ConstraintClass> = classes.choose_multiple(rng, candidate_count.min(classes.len())).collect();
    candidates.shuffle(rng);
    if candidates.is_empty() {
        return Err(DatagenError::Invalid("no constraint classes to choose from".into()));
    }

    if mode == IntegrationMode::TwoPhase {
        let prompt = templates::CONSTRAINT_PRESELECT.render(&[("task", task), ("classes", &class_listing(&candidates))]);
        let reply = clients.generator.generate(&GenerationRequest::new(prompt, Decoding::JUDGE))?;
        let mut picked: Vec<&ConstraintClass> = Vec::new();
        for m in sub_id_re().captures_iter(&reply) {
            if let Some(c) = candidates.iter().find(|c| c.sub_id == m[1]) {
                if !picked.iter().any(|p| p.sub_id == c.sub_id) {
                    picked.push(c);
                }
            }
        }
        if picked.is_empty() {
            return Err(DatagenError::Rejected("no compatible constraint class pre-selected".into()));
        }
        candidates = picked;
    }

    let count = n_constraints.to_string();
    let prompt = templates::CONSTRAINT_GENERATE.render(&[
        ("task", task),
        ("classes", &class_listing(&candidates)),
        ("count", &count),
    ]);
    let reply = clients.generator.generate(&GenerationRequest::new(prompt, Decoding::SAMPLING))?;
    let mut written: Vec<(&ConstraintClass, String)> = Vec::new();
    for line in reply.lines() {
        let Some(c) = generated_line_re().captures(line) else { continue };
        let text = c[2].to_string();
        let Some(class) = candidates.iter().find(|k| k.sub_id == c[1]) else { continue };
        if text.is_empty() || written.iter().any(|(_, t)| *t == text) {
            continue;
        }
        written.push((class, text));
        if written.len() == n_constraints {
            break;
        }
    }
    if written.len() < MIN_CONSTRAINTS {
        return Err(DatagenError::Rejected(format!("generator wrote {} usable constraints", written.len())));
    }

    let numbered = written
        .iter()
        .enumerate()
        .map(|(i, (_, t))| format!("{}. {t}", i + 1))
        .collect::<Vec<_>>()
        .join("\n");
    let prompt = templates::CONSTRAINT_VALIDATE.render(&[("task", task), ("constraints", &numbered)]);
    let reply = clients.validator.generate(&GenerationRequest::new(prompt, Decoding::JUDGE))?;
    let mut keep = vec![false; written.len()];
    for line in reply.lines() {
        if let Some(c) = validation_re().captures(line) {
            if let Some(slot) = c[1].parse::<usize>().ok().and_then(|n| n.checked_sub(1)).and_then(|i| keep.get_mut(i)) {
                *slot = c[2].eq_ignore_ascii_case("keep");
            }
        }
    }

    let mut survivors: Vec<ConstraintSpec> = Vec::new();
    for ((class, text), kept) in written.into_iter().zip(keep) {
        if !kept {
            continue;
        }
        let spec = bind(class, &text, clients.extractor);
        if survivors.iter().any(|s| conflicting(s, &spec)) {
            log::info!("dropping {:?}: conflicts with an earlier constraint", spec.description);
            continue;
        }
        survivors.push(spec);
    }
    if survivors.len() < MIN_CONSTRAINTS {
        return Err(DatagenError::Rejected(format!(
            "{} constraint(s) survived validation, need {MIN_CONSTRAINTS}",
            survivors.len()
        )));
    }
    Ok(survivors)
}

/// Index pairs `(i, j)`, `i < j`, whose verifier bindings cannot both hold.
pub fn find_conflicts(constraints: &[ConstraintSpec]) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for i in 0..constraints.len() {
        for j in i + 1..constraints.len() {
            if conflicting(&constraints[i], &constraints[j]) {
                out.push((i, j));
            }
        }
    }
    out
}

fn conflicting(a: &ConstraintSpec, b: &ConstraintSpec) -> bool {
    match (&a.verifier, &b.verifier) {
        (Some(x), Some(y)) => calls_conflict(x, y) || calls_conflict(y, x),
        _ => false,
    }
}

fn lower_set(v: &[String]) -> Vec<String> {
    let mut out: Vec<String> = v.iter().map(|s| s.to_lowercase()).collect();
    out.sort();
    out.dedup();
    out
}

fn disjoint((a, b): (i64, i64), (c, d): (i64, i64)) -> bool {
    a.max(c) > b.min(d)
}

fn forbidden(call: &VerifierCall) -> Vec<String> {
    match (call.name(), call.params()) {
        ("check_whether_whole_response_not_contain_certain_substring", [Param::Str(s)]) => vec![s.to_lowercase()],
        ("check_whether_whole_response_not_contain_certain_substrings", [Param::StrList(v)]) => lower_set(v),
        _ => Vec::new(),
    }
}

/// Substrings the call requires to appear somewhere in the response.
fn required(call: &VerifierCall) -> Vec<String> {
    match (call.name(), call.params()) {
        (
            "check_whether_whole_response_begin_with_certain_substring"
            | "check_whether_whole_response_end_with_certain_substring"
            | "check_whether_each_sentence_begin_with_certain_substring"
            | "check_whether_each_sentence_end_with_certain_substring",
            [Param::Str(s)],
        ) => vec![s.to_lowercase()],
        ("check_whether_keywords_metioned_in_range", [Param::StrList(v), Param::Int(lo), _]) if *lo >= 1 && v.len() == 1 => {
            vec![v[0].to_lowercase()]
        }
        _ => Vec::new(),
    }
}

fn calls_conflict(x: &VerifierCall, y: &VerifierCall) -> bool {
    let fx = forbidden(x);
    if required(y).iter().any(|r| fx.iter().any(|f| r.contains(f.as_str()))) {
        return true;
    }
    if x.name() != y.name() {
        return match (x.name(), x.params(), y.name(), y.params()) {
            ("check_whether_response_paragraph_number_in_range", _, _, [Param::RangeList(r)]) => {
                let (lo, hi) = x.bounds().expect("two-bound call");
                let n = r.len() as i64;
                n < lo || n > hi
            }
            ("check_whether_has_no_number_in_response", _, "check_scientific_notation_precision_in_response", _) => true,
            _ => false,
        };
    }
    match (x.params(), y.params()) {
        ([Param::StrList(kx), ..], [Param::StrList(ky), ..]) if x.bounds().is_some() => {
            lower_set(kx) == lower_set(ky) && disjoint(x.bounds().expect("bounds"), y.bounds().expect("bounds"))
        }
        ([Param::Int(_), Param::Int(_)], _) if x.bounds().is_some() => {
            disjoint(x.bounds().expect("bounds"), y.bounds().expect("bounds"))
        }
        ([Param::Int(a), Param::Int(b)], [Param::Int(c), Param::Int(d)]) => (a, b) != (c, d),
        ([Param::Int(a)], [Param::Int(b)]) => a != b,
        ([Param::RangeList(r)], [Param::RangeList(s)]) => {
            r.len() != s.len() || r.iter().zip(s).any(|(p, q)| disjoint(*p, *q))
        }
        ([Param::Str(s)], [Param::Str(t)]) if x.name().contains("begin") => {
            let (s, t) = (s.to_lowercase(), t.to_lowercase());
            !s.starts_with(&t) && !t.starts_with(&s)
        }
        ([Param::Str(s)], [Param::Str(t)]) if x.name().contains("end_with") => {
            let (s, t) = (s.to_lowercase(), t.to_lowercase());
            !s.ends_with(&t) && !t.ends_with(&s)
        }
        _ => false,
    }
}

/// Build one instruction record from a manifest entry. Annotated questions
/// that pass the filter keep their wording and use two-phase integration;
/// otherwise a task is drawn from the pool.
pub fn generate_instruction(
    entry: &ManifestEntry,
    pool: &TaskPool,
    taxonomy: &Taxonomy,
    cfg: &InstructionConfig,
    clients: &InstructionClients<'_>,
) -> Result<InstructRecord, DatagenError> {
    let mut rng = record_rng(cfg.seed, "instruction", &entry.id);
    let annotated = match &entry.question {
        Some(q) => filter_existing_questions(std::slice::from_ref(q), &cfg.filter)?.pop(),
        None => None,
    };
    let (task, mode) = match annotated {
        Some(q) => (q, IntegrationMode::TwoPhase),
        None => {
            let tasks = generate_task_list(
                entry.image.as_deref(),
                pool,
                cfg.task_k,
                clients.task_lister,
                clients.task_validator,
                &mut rng,
            )?;
            let task = tasks.choose(&mut rng).expect("task list is non-empty").clone();
            (task, IntegrationMode::SinglePhase)
        }
    };
    let n = rng.random_range(cfg.n_min..=cfg.n_max);
    let constraints = integrate_constraints(&task, taxonomy.classes(), n, mode, cfg.candidate_classes, clients, &mut rng)?;
    let record = InstructRecord::new(entry.id.clone(), entry.image.clone(), task, constraints)?;
    match clients.responder {
        Some(r) => {
            let request = GenerationRequest::new(record.full_prompt(), Decoding::RESPONSE)
                .with_attachment(record.image_ref.as_deref());
            Ok(record.clone().with_response(r.generate(&request)?))
        }
        None => Ok(record),
    }
}
