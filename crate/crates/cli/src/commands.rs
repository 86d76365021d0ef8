use std::fs::File;
use std::io::{self, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use anyhow::Context;
use mmif_core::datagen::{
    self, build_preference_pairs, generate_instruction, read_instruct_jsonl, score_records, DatagenError,
    FilterConfig, InstructRecord, InstructionClients, InstructionConfig, ManifestEntry, TaskPool,
};
use mmif_core::evalrun::{
    aggregate, load_benchmark, run_evaluation, write_results_jsonl, BenchmarkItem, Clients, CorpusReport,
    EvaluationResult, LoadError, ResponseSource, RunError, RunOptions, Strictness,
};
use mmif_core::judge::{extract_verifier_params, Confidence, ControlStore, Controls};
use mmif_core::taxonomy::{EvalMethod, Taxonomy};
use mmif_core::verifiers::{parse_param_literal, registry, run_named};
use serde::Serialize;
use serde_json::Value;

use crate::config::RunConfig;
use crate::{
    CliError, EvalArgs, ExtractArgs, GenInstructionsArgs, GenPairsArgs, GlobalArgs, ReportArgs, SftFilterArgs,
    VerifiersArgs, VerifyArgs,
};

type CmdResult = Result<(), CliError>;

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    let f = File::create(path).with_context(|| format!("cannot create {}", path.display()))?;
    Ok(BufWriter::new(f))
}

/// Write `bytes` to `path`, or to stdout when no path is given.
fn emit(path: Option<&Path>, bytes: &[u8]) -> CmdResult {
    match path {
        Some(p) => {
            let mut w = create(p)?;
            w.write_all(bytes)?;
            w.flush()?;
        }
        None => io::stdout().lock().write_all(bytes)?,
    }
    Ok(())
}

fn jsonl<T: Serialize>(rows: impl IntoIterator<Item = T>) -> Vec<u8> {
    let mut out = Vec::new();
    for r in rows {
        serde_json::to_writer(&mut out, &r).expect("serializable row");
        out.push(b'\n');
    }
    out
}

fn load_items(path: &Path, tax: &Taxonomy, cfg: &RunConfig, extractor: Option<&dyn mmif_core::judge::GenerationClient>)
    -> Result<Vec<BenchmarkItem>, CliError> {
    let strict = cfg.strictness == Strictness::Strict;
    match load_benchmark(path, tax, extractor, strict) {
        Ok(r) => Ok(r.items),
        Err(LoadError::Rejected(rej)) => {
            let lines: Vec<String> = rej.iter().map(|r| format!("  {r}")).collect();
            Err(CliError::Validation(format!(
                "{}: {} line(s) rejected in strict mode\n{}",
                path.display(),
                rej.len(),
                lines.join("\n")
            )))
        }
        Err(e @ LoadError::Io { .. }) => Err(CliError::Runtime(e.into())),
    }
}

pub fn eval(g: &GlobalArgs, a: &EvalArgs) -> CmdResult {
    let cfg = RunConfig::resolve(g)?;
    let tax = cfg.taxonomy()?;
    let judge = cfg.build("judge")?;
    let model = cfg.build("model")?;
    let items = load_items(&a.bench, &tax, &cfg, judge.as_deref())?;

    let source = match &a.responses {
        Some(p) => ResponseSource::load_jsonl(p).map_err(CliError::Validation)?,
        None if model.is_some() => ResponseSource::Model,
        None => {
            return Err(CliError::Usage(
                "eval needs `--responses` or a model client (`--model`, config file or `--stub-fixtures`)".into(),
            ))
        }
    };
    let controls = match &a.controls {
        Some(p) => ControlStore::load_jsonl(p).map_err(CliError::Validation)?,
        None => ControlStore::default(),
    };
    let clients = Clients { judge, model, controls };
    let opts = RunOptions {
        parallelism: cfg.parallelism,
        strictness: cfg.strictness,
        metric: cfg.metric,
        taxonomy_version: tax.version.clone(),
        config_digest: cfg.digest(),
    };
    let out = run_evaluation(&items, source, &clients, &opts).map_err(|e| match e {
        RunError::Precondition(_) | RunError::MissingResponses(_) => CliError::Validation(e.to_string()),
        RunError::Aggregate(_) => CliError::Runtime(e.into()),
    })?;

    let mut buf = Vec::new();
    write_results_jsonl(&out.results, &mut buf)?;
    emit(a.out.as_deref(), &buf)?;
    write_reports(&out.report, a.report.as_deref(), a.csv.as_deref())?;

    let manifest_path = a.manifest.clone().or_else(|| {
        a.out.as_ref().map(|o| {
            let mut s = o.clone().into_os_string();
            s.push(".manifest.json");
            PathBuf::from(s)
        })
    });
    if let Some(p) = manifest_path {
        let mut m = serde_json::to_value(&out.manifest).context("serializing manifest")?;
        m["config"] = serde_json::to_value(&cfg).context("serializing config")?;
        let mut text = serde_json::to_string_pretty(&m).context("serializing manifest")?;
        text.push('\n');
        emit(Some(&p), text.as_bytes())?;
    }
    let avg = out.report.weighted_avg.map_or("n/a".to_string(), |p| p.to_string());
    eprintln!(
        "evaluated {} item(s); weighted average {avg}; indeterminate {}",
        out.results.len(),
        out.report.indeterminate
    );
    Ok(())
}

fn write_reports(report: &CorpusReport, md: Option<&Path>, csv: Option<&Path>) -> CmdResult {
    if let Some(p) = md {
        emit(Some(p), report.to_markdown().as_bytes())?;
    }
    if let Some(p) = csv {
        emit(Some(p), report.to_csv().as_bytes())?;
    }
    Ok(())
}

fn parse_params(src: &str) -> Result<Vec<Value>, CliError> {
    match serde_json::from_str::<Value>(src) {
        Ok(Value::Array(v)) => Ok(v),
        Ok(other) => Err(CliError::Validation(format!("--params must be a list, got {other}"))),
        Err(_) => parse_param_literal(src).map_err(|e| CliError::Validation(format!("--params: {e}"))),
    }
}

fn read_text(a: &VerifyArgs) -> Result<String, CliError> {
    if a.stdin {
        let mut s = String::new();
        io::stdin().read_to_string(&mut s)?;
        return Ok(s);
    }
    let p = a.text.as_ref().expect("clap requires --text or --stdin");
    Ok(std::fs::read_to_string(p).with_context(|| format!("cannot read {}", p.display()))?)
}

pub fn verify(g: &GlobalArgs, a: &VerifyArgs) -> CmdResult {
    let (name, params) = match (&a.function, &a.constraint) {
        (Some(f), _) => (f.clone(), parse_params(&a.params)?),
        (None, Some(desc)) => {
            let cfg = RunConfig::resolve(g)?;
            let judge = cfg.build("judge")?;
            let ex = extract_verifier_params(desc, judge.as_deref());
            let call = ex.call.ok_or_else(|| {
                CliError::Validation(format!("cannot bind {desc:?} to a verifier; needs review"))
            })?;
            let params = call.params_json();
            println!("{} {}", call.name(), Value::Array(params.clone()));
            (call.name().to_string(), params)
        }
        (None, None) => unreachable!("clap requires --function or --constraint"),
    };
    let text = read_text(a)?;
    let verdict = run_named(&name, &params, &text).map_err(|e| CliError::Validation(e.to_string()))?;
    if verdict.passed {
        println!("PASS: {}", verdict.detail);
        Ok(())
    } else {
        println!("FAIL: {}", verdict.detail);
        Err(CliError::Failed)
    }
}

pub fn extract(g: &GlobalArgs, a: &ExtractArgs) -> CmdResult {
    let cfg = RunConfig::resolve(g)?;
    let judge = cfg.build("judge")?;
    let ex = extract_verifier_params(&a.constraint, judge.as_deref());
    let line = serde_json::json!({
        "function": ex.function_name(),
        "params": ex.call.as_ref().map(|c| c.params_json()),
        "confidence": ex.confidence,
    });
    println!("{line}");
    if ex.confidence == Confidence::NeedsReview {
        return Err(CliError::Failed);
    }
    Ok(())
}

pub fn verifiers(_a: &VerifiersArgs) -> CmdResult {
    let mut out = io::stdout().lock();
    for spec in registry() {
        writeln!(out, "{}\t{}\t{}", spec.name, spec.signature(), spec.description)?;
    }
    Ok(())
}

pub fn report(g: &GlobalArgs, a: &ReportArgs) -> CmdResult {
    let cfg = RunConfig::resolve(g)?;
    let tax = cfg.taxonomy()?;
    let items = load_items(&a.bench, &tax, &cfg, None)?;
    let text = std::fs::read_to_string(&a.results).with_context(|| format!("cannot read {}", a.results.display()))?;
    let mut results = Vec::new();
    for (n, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let r: EvaluationResult = serde_json::from_str(line)
            .map_err(|e| CliError::Validation(format!("{}:{}: {e}", a.results.display(), n + 1)))?;
        results.push(r);
    }
    let report = aggregate(&results, &items, cfg.metric).map_err(|e| CliError::Validation(e.to_string()))?;
    match &a.report {
        Some(_) => write_reports(&report, a.report.as_deref(), a.csv.as_deref()),
        None => {
            emit(None, report.to_markdown().as_bytes())?;
            write_reports(&report, None, a.csv.as_deref())
        }
    }
}

fn read_records(path: &Path, tax: &Taxonomy, cfg: &RunConfig) -> Result<Vec<InstructRecord>, CliError> {
    let (records, rejected) =
        read_instruct_jsonl(path, tax).with_context(|| format!("cannot read {}", path.display()))?;
    for (line, reason) in &rejected {
        log::warn!("{}:{line}: rejected: {reason}", path.display());
    }
    if cfg.strictness == Strictness::Strict && !rejected.is_empty() {
        let (line, reason) = &rejected[0];
        return Err(CliError::Validation(format!(
            "{}: {} malformed line(s); first at line {line}: {reason}",
            path.display(),
            rejected.len()
        )));
    }
    Ok(records)
}

fn datagen_error(e: DatagenError) -> CliError {
    match e {
        DatagenError::Client(_) => CliError::Runtime(e.into()),
        _ => CliError::Validation(e.to_string()),
    }
}

pub fn gen_pairs(g: &GlobalArgs, a: &GenPairsArgs) -> CmdResult {
    let cfg = RunConfig::resolve(g)?;
    let tax = cfg.taxonomy()?;
    let records = read_records(&a.input, &tax, &cfg)?;
    let generator = cfg
        .build("generator")?
        .ok_or_else(|| CliError::Validation("gen-pairs needs a generator client for rejected responses".into()))?;
    let out = build_preference_pairs(&records, a.setting, generator.as_ref(), cfg.seed, cfg.parallelism)
        .map_err(datagen_error)?;
    emit(a.out.as_deref(), &jsonl(&out.pairs))?;
    eprintln!("pairs: {}, dropped: {}", out.pairs.len(), out.dropped.len());
    Ok(())
}

#[derive(Serialize)]
struct RejectionLine<'a> {
    id: &'a str,
    reason: String,
}

pub fn gen_instructions(g: &GlobalArgs, a: &GenInstructionsArgs) -> CmdResult {
    let cfg = RunConfig::resolve(g)?;
    let tax = cfg.taxonomy()?;
    let pool = match &a.taskpool {
        Some(p) => TaskPool::from_file(p).map_err(datagen_error)?,
        None => TaskPool::default(),
    };
    let filter = match &a.filter_config {
        Some(p) => FilterConfig::from_file(p).map_err(datagen_error)?,
        None => FilterConfig::default(),
    };
    let icfg = InstructionConfig {
        n_min: a.n_constraints_min,
        n_max: a.n_constraints_max,
        task_k: a.task_k,
        candidate_classes: a.candidate_classes,
        seed: cfg.seed,
        filter,
    };
    icfg.validate().map_err(datagen_error)?;

    let text = std::fs::read_to_string(&a.manifest).with_context(|| format!("cannot read {}", a.manifest.display()))?;
    let mut entries = Vec::new();
    let mut rejections: Vec<(String, String)> = Vec::new();
    for (n, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str::<ManifestEntry>(line) {
            Ok(e) => entries.push(e),
            Err(e) if cfg.strictness == Strictness::Strict => {
                return Err(CliError::Validation(format!("{}:{}: {e}", a.manifest.display(), n + 1)))
            }
            Err(e) => rejections.push((format!("line {}", n + 1), format!("malformed manifest line: {e}"))),
        }
    }
    let (records, rejected) = if entries.is_empty() {
        (Vec::new(), Vec::new())
    } else {
        let generator = cfg
            .build("generator")?
            .ok_or_else(|| CliError::Validation("gen-instructions needs a generator client".into()))?;
        let judge = cfg
            .build("judge")?
            .ok_or_else(|| CliError::Validation("gen-instructions needs a judge client for validation".into()))?;
        let clients = InstructionClients {
            generator: generator.as_ref(),
            validator: judge.as_ref(),
            extractor: Some(judge.as_ref()),
            task_lister: a.generate_tasks.then_some(generator.as_ref()),
            task_validator: a.generate_tasks.then_some(judge.as_ref()),
            responder: a.with_responses.then_some(generator.as_ref()),
        };
        let mut records = Vec::new();
        let mut rejected = Vec::new();
        for e in &entries {
            match generate_instruction(e, &pool, &tax, &icfg, &clients) {
                Ok(r) => records.push(r.to_line()),
                Err(err) => {
                    log::warn!("entry `{}`: {err}", e.id);
                    rejected.push((e.id.clone(), err.to_string()));
                }
            }
        }
        (records, rejected)
    };
    rejections.extend(rejected);
    emit(a.out.as_deref(), &jsonl(&records))?;
    if let Some(p) = &a.rejections {
        let rows = rejections.iter().map(|(id, reason)| RejectionLine { id, reason: reason.clone() });
        emit(Some(p), &jsonl(rows))?;
    }
    eprintln!("records: {}, rejected: {}", records.len(), rejections.len());
    Ok(())
}

pub fn sft_filter(g: &GlobalArgs, a: &SftFilterArgs) -> CmdResult {
    let cfg = RunConfig::resolve(g)?;
    let tax = cfg.taxonomy()?;
    let records = read_records(&a.input, &tax, &cfg)?;
    let (scored, unscored): (Vec<_>, Vec<_>) = records.into_iter().enumerate().partition(|(_, r)| r.compliance.is_some());
    let mut all: Vec<(usize, InstructRecord)> = scored;
    if !unscored.is_empty() {
        let needs = |m: EvalMethod| unscored.iter().flat_map(|(_, r)| &r.constraints).any(|c| c.eval_method == m);
        let judge = cfg.build("judge")?;
        let model = cfg.build("model")?;
        if (needs(EvalMethod::DirectJudge) || needs(EvalMethod::CompareJudge)) && judge.is_none() {
            return Err(CliError::Validation("scoring judged constraints needs a judge client".into()));
        }
        if needs(EvalMethod::CompareJudge) && model.is_none() {
            return Err(CliError::Validation(
                "scoring comparative constraints needs a model client for control responses".into(),
            ));
        }
        let controls = Controls::new(ControlStore::default(), model);
        let (idx, recs): (Vec<usize>, Vec<InstructRecord>) = unscored.into_iter().unzip();
        let out = score_records(&recs, judge.as_deref(), &controls, cfg.parallelism).map_err(datagen_error)?;
        all.extend(idx.into_iter().zip(out));
        all.sort_by_key(|(i, _)| *i);
    }
    let (kept, dropped) =
        datagen::sft_filter(all.into_iter().map(|(_, r)| r).collect(), a.threshold).map_err(datagen_error)?;
    emit(a.out.as_deref(), &jsonl(kept.iter().map(|k| k.record.to_line())))?;
    if let Some(p) = &a.dropped {
        emit(Some(p), &jsonl(dropped.iter().map(|k| k.record.to_line())))?;
    }
    eprintln!("kept: {}, dropped: {}", kept.len(), dropped.len());
    Ok(())
}
