//! Instruction-data generation: task sampling, constraint integration,
//! SFT compliance filtering and preference-pair construction.

mod constraints;
mod pairs;
mod sft;
mod tasks;

use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::evalrun::ConstraintRecord;
use crate::judge::ClientError;
use crate::taxonomy::{ConstraintSpec, Taxonomy};

pub use constraints::{
    find_conflicts, generate_instruction, integrate_constraints, InstructionClients, InstructionConfig,
    IntegrationMode, ManifestEntry, DEFAULT_CANDIDATE_CLASSES,
};
pub use pairs::{build_preference_pairs, removed_count, removed_indices, AblationSetting, PairOutcome, PreferencePair};
pub use sft::{score_records, sft_filter, FilteredRecord, DEFAULT_THRESHOLD};
pub use tasks::{
    filter_existing_questions, generate_task_list, FilterConfig, TaskCategory, TaskEntry, TaskPool, DEFAULT_TASK_K,
};

/// Supported constraint count per generated instruction.
pub const MIN_CONSTRAINTS: usize = 3;
pub const MAX_CONSTRAINTS: usize = 12;

#[derive(Debug, Error)]
pub enum DatagenError {
    #[error("generator call failed: {0}")]
    Client(#[from] ClientError),
    #[error("record rejected: {0}")]
    Rejected(String),
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("record `{0}` has no response")]
    MissingResponse(String),
}

/// Deterministic per-record generator, independent of processing order.
pub fn record_rng(seed: u64, stage: &str, id: &str) -> ChaCha8Rng {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(stage.as_bytes());
    h.update([0]);
    h.update(id.as_bytes());
    ChaCha8Rng::from_seed(h.finalize().into())
}

#[derive(Debug, Clone, PartialEq)]
pub struct InstructRecord {
    pub id: String,
    pub image_ref: Option<String>,
    pub task_instruction: String,
    pub constraints: Vec<ConstraintSpec>,
    pub response: Option<String>,
    pub compliance: Option<f64>,
}

impl InstructRecord {
    pub fn new(
        id: impl Into<String>,
        image_ref: Option<String>,
        task_instruction: impl Into<String>,
        constraints: Vec<ConstraintSpec>,
    ) -> Result<Self, DatagenError> {
        let rec = InstructRecord {
            id: id.into(),
            image_ref,
            task_instruction: task_instruction.into(),
            constraints,
            response: None,
            compliance: None,
        };
        if !(MIN_CONSTRAINTS..=MAX_CONSTRAINTS).contains(&rec.constraints.len()) {
            return Err(DatagenError::Invalid(format!(
                "record `{}` has {} constraints, expected {MIN_CONSTRAINTS}..={MAX_CONSTRAINTS}",
                rec.id,
                rec.constraints.len()
            )));
        }
        Ok(rec)
    }

    pub fn with_response(mut self, response: impl Into<String>) -> Self {
        self.response = Some(response.into());
        self.compliance = None;
        self
    }

    pub fn full_prompt(&self) -> String {
        crate::prompt::compose_prompt(
            &self.task_instruction,
            self.constraints.iter().map(|c| c.description.as_str()),
        )
    }

    pub fn to_line(&self) -> InstructLine {
        InstructLine {
            id: self.id.clone(),
            image: self.image_ref.clone(),
            instruction: self.task_instruction.clone(),
            constraints: self.constraints.iter().map(ConstraintRecord::from_spec).collect(),
            response: self.response.clone(),
            compliance: self.compliance,
        }
    }
}

/// SFT JSONL line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstructLine {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub image: Option<String>,
    pub instruction: String,
    pub constraints: Vec<ConstraintRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub response: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub compliance: Option<f64>,
}

impl InstructLine {
    pub fn resolve(&self, taxonomy: &Taxonomy) -> Result<InstructRecord, DatagenError> {
        let constraints = self
            .constraints
            .iter()
            .enumerate()
            .map(|(i, c)| c.resolve(taxonomy, None).map_err(|e| DatagenError::Invalid(format!("constraint {i}: {e}"))))
            .collect::<Result<Vec<_>, _>>()?;
        let mut rec = InstructRecord::new(self.id.clone(), self.image.clone(), self.instruction.clone(), constraints)?;
        rec.response = self.response.clone();
        rec.compliance = match (&self.response, self.compliance) {
            (Some(_), c) => c,
            (None, Some(_)) => {
                return Err(DatagenError::Invalid(format!("record `{}` has compliance but no response", self.id)))
            }
            (None, None) => None,
        };
        Ok(rec)
    }
}

/// Read SFT JSONL. Returns records plus `(line, reason)` for rejected lines.
pub fn read_instruct_jsonl(
    path: &Path,
    taxonomy: &Taxonomy,
) -> std::io::Result<(Vec<InstructRecord>, Vec<(usize, String)>)> {
    let text = std::fs::read_to_string(path)?;
    let mut records = Vec::new();
    let mut rejected = Vec::new();
    for (n, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let parsed = serde_json::from_str::<InstructLine>(line)
            .map_err(|e| e.to_string())
            .and_then(|l| l.resolve(taxonomy).map_err(|e| e.to_string()));
        match parsed {
            Ok(r) => records.push(r),
            Err(e) => rejected.push((n + 1, e)),
        }
    }
    Ok((records, rejected))
}
