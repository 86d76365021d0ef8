//! Preference pairs built by ablating constraints or the image.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{record_rng, DatagenError, InstructRecord};
use crate::judge::{Decoding, GenerationClient, GenerationRequest};
use crate::par::ordered_map;
use crate::prompt::compose_prompt;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum AblationSetting {
    #[serde(rename = "remove-33")]
    Remove33,
    #[serde(rename = "remove-66")]
    Remove66,
    #[serde(rename = "remove-100")]
    Remove100,
    #[serde(rename = "no-image")]
    NoImage,
}

impl AblationSetting {
    pub const ALL: [AblationSetting; 4] = [
        AblationSetting::Remove33,
        AblationSetting::Remove66,
        AblationSetting::Remove100,
        AblationSetting::NoImage,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            AblationSetting::Remove33 => "remove-33",
            AblationSetting::Remove66 => "remove-66",
            AblationSetting::Remove100 => "remove-100",
            AblationSetting::NoImage => "no-image",
        }
    }
}

impl fmt::Display for AblationSetting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for AblationSetting {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|a| a.as_str() == s)
            .ok_or_else(|| format!("unknown setting {s:?}; expected remove-33, remove-66, remove-100 or no-image"))
    }
}

/// Number of constraints removed from `n`: round-half-up of n/3 or 2n/3 with
/// a minimum of one, all of them for `Remove100`, none for `NoImage`.
pub fn removed_count(setting: AblationSetting, n: usize) -> usize {
    if n == 0 {
        return 0;
    }
    match setting {
        // floor(n/3 + 1/2) and floor(2n/3 + 1/2) in integer form.
        AblationSetting::Remove33 => ((2 * n + 3) / 6).max(1),
        AblationSetting::Remove66 => ((4 * n + 3) / 6).max(1),
        AblationSetting::Remove100 => n,
        AblationSetting::NoImage => 0,
    }
}

/// Sorted indices of the constraints to remove, sampled uniformly.
pub fn removed_indices(setting: AblationSetting, n: usize, rng: &mut impl Rng) -> Vec<usize> {
    let mut v = rand::seq::index::sample(rng, n, removed_count(setting, n)).into_vec();
    v.sort_unstable();
    v
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PreferencePair {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub image: Option<String>,
    pub prompt_full: String,
    pub prompt_ablated: String,
    pub chosen: String,
    pub rejected: String,
    pub setting: AblationSetting,
    pub removed_indices: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct PairOutcome {
    pub pairs: Vec<PreferencePair>,
    /// `(record id, reason)` for records that produced no pair.
    pub dropped: Vec<(String, String)>,
}

fn build_one(
    record: &InstructRecord,
    setting: AblationSetting,
    client: &dyn GenerationClient,
    seed: u64,
) -> Result<PreferencePair, String> {
    let chosen = record.response.clone().expect("checked by caller");
    let prompt_full = record.full_prompt();
    let mut rng = record_rng(seed, setting.as_str(), &record.id);
    let removed = removed_indices(setting, record.constraints.len(), &mut rng);
    let prompt_ablated = compose_prompt(
        &record.task_instruction,
        record
            .constraints
            .iter()
            .enumerate()
            .filter(|(i, _)| removed.binary_search(i).is_err())
            .map(|(_, c)| c.description.as_str()),
    );
    let image = match setting {
        AblationSetting::NoImage => None,
        _ => record.image_ref.as_deref(),
    };
    let request = GenerationRequest::new(prompt_ablated.clone(), Decoding::RESPONSE).with_attachment(image);
    let rejected = client.generate(&request).map_err(|e| format!("generation failed: {e}"))?;
    if rejected.trim() == chosen.trim() {
        return Err("rejected response equals chosen".into());
    }
    Ok(PreferencePair {
        id: record.id.clone(),
        image: record.image_ref.clone(),
        prompt_full,
        prompt_ablated,
        chosen,
        rejected,
        setting,
        removed_indices: removed,
    })
}

/// Build one pair per record. Records whose rejected generation fails or
/// equals the chosen response are dropped with a warning; output order
/// follows input order and does not depend on `parallelism`.
pub fn build_preference_pairs(
    records: &[InstructRecord],
    setting: AblationSetting,
    rejected_client: &dyn GenerationClient,
    seed: u64,
    parallelism: usize,
) -> Result<PairOutcome, DatagenError> {
    if let Some(r) = records.iter().find(|r| r.response.is_none()) {
        return Err(DatagenError::MissingResponse(r.id.clone()));
    }
    let built = ordered_map(records, parallelism, |r| build_one(r, setting, rejected_client, seed));
    let mut out = PairOutcome::default();
    for (record, result) in records.iter().zip(built) {
        match result {
            Ok(p) => out.pairs.push(p),
            Err(reason) => {
                log::warn!("record `{}`: pair dropped: {reason}", record.id);
                out.dropped.push((record.id.clone(), reason));
            }
        }
    }
    Ok(out)
}
