//! Compliance scoring and threshold filtering of SFT records.

use super::{DatagenError, InstructRecord};
use crate::evalrun::{evaluate_item, BenchmarkItem, EvalContext, Level};
use crate::judge::templates::judge_set_hash;
use crate::judge::{Controls, GenerationClient};
use crate::par::ordered_map;

pub const DEFAULT_THRESHOLD: f64 = 0.80;

// Absorbs binary-float noise in ratios such as 4/5 written out as 0.8.
const EPS: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct FilteredRecord {
    pub record: InstructRecord,
    pub compliance: f64,
}

/// Score each record's response with the evaluation pipeline and store the
/// satisfied fraction in `compliance`. Records keep their input order.
pub fn score_records(
    records: &[InstructRecord],
    judge: Option<&dyn GenerationClient>,
    controls: &Controls,
    parallelism: usize,
) -> Result<Vec<InstructRecord>, DatagenError> {
    if let Some(r) = records.iter().find(|r| r.response.is_none()) {
        return Err(DatagenError::MissingResponse(r.id.clone()));
    }
    let hash = judge_set_hash();
    let ctx = EvalContext { judge, controls, template_hash: &hash };
    let scored = ordered_map(records, parallelism, |r| -> Result<InstructRecord, DatagenError> {
        let item = BenchmarkItem::new(
            r.id.clone(),
            Level::Compose,
            r.image_ref.clone(),
            r.task_instruction.clone(),
            r.constraints.clone(),
        )
        .map_err(|e| DatagenError::Invalid(format!("record `{}`: {e}", r.id)))?;
        let result = evaluate_item(&item, r.response.as_deref().unwrap_or_default(), &ctx);
        let (sat, total) = result.counts();
        let mut out = r.clone();
        out.compliance = Some(sat as f64 / total as f64);
        Ok(out)
    });
    scored.into_iter().collect()
}

/// Split scored records into `(kept, dropped)`; a record is kept when its
/// compliance reaches `threshold`.
pub fn sft_filter(
    records: Vec<InstructRecord>,
    threshold: f64,
) -> Result<(Vec<FilteredRecord>, Vec<FilteredRecord>), DatagenError> {
    if !(0.0..=1.0).contains(&threshold) {
        return Err(DatagenError::Invalid(format!("threshold {threshold} outside [0, 1]")));
    }
    let mut kept = Vec::new();
    let mut dropped = Vec::new();
    for record in records {
        if record.response.is_none() {
            return Err(DatagenError::MissingResponse(record.id));
        }
        let Some(compliance) = record.compliance else {
            return Err(DatagenError::Invalid(format!("record `{}` has no compliance score", record.id)));
        };
        let entry = FilteredRecord { record, compliance };
        if compliance + EPS >= threshold {
            kept.push(entry);
        } else {
            dropped.push(entry);
        }
    }
    Ok((kept, dropped))
}
