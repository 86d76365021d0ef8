//! Constraint taxonomy: 6 main categories, 32 subcategories, and the
//! evaluation method assigned to each subcategory.
//!
//! The built-in table is compiled in. An optional JSON override file can add
//! new subcategories or replace existing ones by `sub_id`:
//!
//! ```json
//! {
//!   "classes": [
//!     {"main_category": "Keyword", "sub_id": "F.5", "sub_name": "Acronym",
//!      "default_eval_method": "direct_judge"}
//!   ]
//! }
//! ```

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

/// Version tag of the compiled-in taxonomy table.
pub const BUILTIN_VERSION: &str = "mmif-taxonomy-1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum MainCategory {
    RhetoricLogic,
    FormatLimit,
    TextLengthLimit,
    MathLimit,
    ActionLimit,
    Keyword,
}

impl MainCategory {
    pub const ALL: [MainCategory; 6] = [
        MainCategory::RhetoricLogic,
        MainCategory::FormatLimit,
        MainCategory::TextLengthLimit,
        MainCategory::MathLimit,
        MainCategory::ActionLimit,
        MainCategory::Keyword,
    ];

    /// Letter prefix used by sub_ids of this category.
    pub fn letter(self) -> char {
        match self {
            MainCategory::RhetoricLogic => 'A',
            MainCategory::FormatLimit => 'B',
            MainCategory::TextLengthLimit => 'C',
            MainCategory::MathLimit => 'D',
            MainCategory::ActionLimit => 'E',
            MainCategory::Keyword => 'F',
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            MainCategory::RhetoricLogic => "Rhetoric & Logic",
            MainCategory::FormatLimit => "Format limit",
            MainCategory::TextLengthLimit => "Text Length limit",
            MainCategory::MathLimit => "Math limit",
            MainCategory::ActionLimit => "Action limit",
            MainCategory::Keyword => "Keyword",
        }
    }
}

/// Evaluation method as listed in the taxonomy table. `RuleOrDirect` marks
/// rows that admit both a rule-based verifier and a direct judge.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DefaultEvalMethod {
    RuleBased,
    DirectJudge,
    CompareJudge,
    RuleOrDirect,
}

/// Evaluation method actually used for one constraint.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvalMethod {
    RuleBased,
    DirectJudge,
    CompareJudge,
}

impl EvalMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            EvalMethod::RuleBased => "rule_based",
            EvalMethod::DirectJudge => "direct_judge",
            EvalMethod::CompareJudge => "compare_judge",
        }
    }
}

impl fmt::Display for EvalMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ConstraintClass {
    pub main_category: MainCategory,
    pub sub_id: String,
    pub sub_name: String,
    pub default_eval_method: DefaultEvalMethod,
}

#[derive(Debug, Error)]
pub enum TaxonomyError {
    #[error("unknown constraint subcategory `{0}`")]
    NotFound(String),
    #[error("malformed sub_id `{0}`: expected <letter>.<number>")]
    BadSubId(String),
    #[error("sub_id `{sub_id}` does not belong to main category {category:?}")]
    CategoryMismatch { sub_id: String, category: MainCategory },
    #[error("cannot read taxonomy override {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid taxonomy override: {0}")]
    Parse(#[from] serde_json::Error),
}

/// Resolve the dual "rule-based or direct judge" rows by verifier
/// availability. Never returns `RuleOrDirect`.
pub fn resolve_eval_method(class: &ConstraintClass, verifier_available: bool) -> EvalMethod {
    match class.default_eval_method {
        DefaultEvalMethod::RuleBased => EvalMethod::RuleBased,
        DefaultEvalMethod::DirectJudge => EvalMethod::DirectJudge,
        DefaultEvalMethod::CompareJudge => EvalMethod::CompareJudge,
        DefaultEvalMethod::RuleOrDirect if verifier_available => EvalMethod::RuleBased,
        DefaultEvalMethod::RuleOrDirect => EvalMethod::DirectJudge,
    }
}

/// Sort key for sub_ids: letter first, then the numeric suffix, so that
/// "B.10" follows "B.9".
fn sub_id_key(sub_id: &str) -> (String, u32, String) {
    match sub_id.split_once('.') {
        Some((head, tail)) => match tail.parse::<u32>() {
            Ok(n) => (head.to_string(), n, String::new()),
            Err(_) => (head.to_string(), u32::MAX, tail.to_string()),
        },
        None => (sub_id.to_string(), 0, String::new()),
    }
}

pub fn compare_sub_ids(a: &str, b: &str) -> Ordering {
    sub_id_key(a).cmp(&sub_id_key(b))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Taxonomy {
    pub version: String,
    pub classes: Vec<ConstraintClass>,
}

#[derive(Debug, Deserialize)]
struct OverrideFile {
    classes: Vec<ConstraintClass>,
}

impl Taxonomy {
    /// The compiled-in table, ordered by sub_id.
    pub fn builtin() -> Self {
        let mut classes: Vec<ConstraintClass> = BUILTIN
            .iter()
            .map(|&(cat, id, name, method)| ConstraintClass {
                main_category: cat,
                sub_id: id.to_string(),
                sub_name: name.to_string(),
                default_eval_method: method,
            })
            .collect();
        classes.sort_by(|a, b| compare_sub_ids(&a.sub_id, &b.sub_id));
        Taxonomy {
            version: BUILTIN_VERSION.to_string(),
            classes,
        }
    }

    /// Built-in table merged with an override file.
    pub fn with_override_file(path: &Path) -> Result<Self, TaxonomyError> {
        let text = std::fs::read_to_string(path).map_err(|source| TaxonomyError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::with_override_json(&text)
    }

    pub fn with_override_json(text: &str) -> Result<Self, TaxonomyError> {
        let file: OverrideFile = serde_json::from_str(text)?;
        let mut by_id: BTreeMap<String, ConstraintClass> = Self::builtin()
            .classes
            .into_iter()
            .map(|c| (c.sub_id.clone(), c))
            .collect();
        for class in file.classes {
            validate_sub_id(&class)?;
            by_id.insert(class.sub_id.clone(), class);
        }
        let mut classes: Vec<_> = by_id.into_values().collect();
        classes.sort_by(|a, b| compare_sub_ids(&a.sub_id, &b.sub_id));
        let digest = hex::encode(Sha256::digest(text.as_bytes()));
        Ok(Taxonomy {
            version: format!("{BUILTIN_VERSION}+override.{}", &digest[..12]),
            classes,
        })
    }

    pub fn get(&self, sub_id: &str) -> Result<&ConstraintClass, TaxonomyError> {
        self.classes
            .iter()
            .find(|c| c.sub_id == sub_id)
            .ok_or_else(|| TaxonomyError::NotFound(sub_id.to_string()))
    }

    pub fn classes(&self) -> &[ConstraintClass] {
        &self.classes
    }

    pub fn len(&self) -> usize {
        self.classes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.classes.is_empty()
    }

    pub fn in_category(&self, category: MainCategory) -> impl Iterator<Item = &ConstraintClass> {
        self.classes.iter().filter(move |c| c.main_category == category)
    }
}

impl Default for Taxonomy {
    fn default() -> Self {
        Self::builtin()
    }
}

/// All 32 built-in classes, ordered by sub_id.
pub fn load_taxonomy() -> Vec<ConstraintClass> {
    Taxonomy::builtin().classes
}

fn validate_sub_id(class: &ConstraintClass) -> Result<(), TaxonomyError> {
    let (head, tail) = class
        .sub_id
        .split_once('.')
        .ok_or_else(|| TaxonomyError::BadSubId(class.sub_id.clone()))?;
    if head.chars().count() != 1 || tail.is_empty() || !tail.chars().all(|c| c.is_ascii_digit()) {
        return Err(TaxonomyError::BadSubId(class.sub_id.clone()));
    }
    if !head.starts_with(class.main_category.letter()) {
        return Err(TaxonomyError::CategoryMismatch {
            sub_id: class.sub_id.clone(),
            category: class.main_category,
        });
    }
    Ok(())
}

use DefaultEvalMethod::{CompareJudge as Cmp, DirectJudge as Dir, RuleBased as Rule, RuleOrDirect as RuleDir};
use MainCategory::*;

const BUILTIN: [(MainCategory, &str, &str, DefaultEvalMethod); 32] = [
    (RhetoricLogic, "A.1", "Rhetoric requirements", Cmp),
    (RhetoricLogic, "A.2", "Logical relation", Dir),
    (FormatLimit, "B.1", "Natural language", Dir),
    (FormatLimit, "B.2", "Part of speech", Dir),
    (FormatLimit, "B.3", "Sentence structure", Dir),
    (FormatLimit, "B.4", "Tense requirements", Dir),
    (FormatLimit, "B.5", "Punctuation", Rule),
    (FormatLimit, "B.6", "Highlight", Dir),
    (FormatLimit, "B.7", "Title requirements", Dir),
    (FormatLimit, "B.8", "Style requirements", Cmp),
    (FormatLimit, "B.9", "Case requirements", Dir),
    (FormatLimit, "B.10", "Unstrict format", Dir),
    (FormatLimit, "B.11", "Strict format", Dir),
    (FormatLimit, "B.12", "Number and List", Dir),
    (FormatLimit, "B.13", "Wrap up", Dir),
    (FormatLimit, "B.14", "First letter", Dir),
    (TextLengthLimit, "C.1", "Paragraph limit", Rule),
    (TextLengthLimit, "C.2", "Sentence limit", Rule),
    (TextLengthLimit, "C.3", "Word limit", Rule),
    (MathLimit, "D.1", "Precision", Rule),
    (MathLimit, "D.2", "Scientific notation", Rule),
    (ActionLimit, "E.1", "Role imitation", Cmp),
    (ActionLimit, "E.2", "Prefix and Suffix", Rule),
    (ActionLimit, "E.3", "Tone requirement", Cmp),
    (ActionLimit, "E.4", "Perspective", Dir),
    (ActionLimit, "E.5", "Target audience", Cmp),
    (ActionLimit, "E.6", "Situation", Cmp),
    (ActionLimit, "E.7", "Prior condition", Dir),
    (Keyword, "F.1", "Mention", RuleDir),
    (Keyword, "F.2", "Not mention", RuleDir),
    (Keyword, "F.3", "Multiple mention", RuleDir),
    (Keyword, "F.4", "Keyword variation", Dir),
];


/// One constraint instance attached to a task instruction.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ConstraintSpec {
    pub class: ConstraintClass,
    pub description: String,
    pub eval_method: EvalMethod,
    pub verifier: Option<crate::verifiers::VerifierCall>,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ConstraintError {
    #[error("constraint description is empty")]
    EmptyDescription,
    #[error("rule-based constraint has no verifier binding")]
    MissingVerifier,
    #[error("verifier binding given for a {0} constraint")]
    UnexpectedVerifier(EvalMethod),
}

impl ConstraintSpec {
    pub fn new(
        class: ConstraintClass,
        description: impl Into<String>,
        eval_method: EvalMethod,
        verifier: Option<crate::verifiers::VerifierCall>,
    ) -> Result<Self, ConstraintError> {
        let description = description.into();
        if description.trim().is_empty() {
            return Err(ConstraintError::EmptyDescription);
        }
        match (eval_method, &verifier) {
            (EvalMethod::RuleBased, None) => return Err(ConstraintError::MissingVerifier),
            (m, Some(_)) if m != EvalMethod::RuleBased => {
                return Err(ConstraintError::UnexpectedVerifier(m))
            }
            _ => {}
        }
        Ok(ConstraintSpec { class, description, eval_method, verifier })
    }

    pub fn sub_id(&self) -> &str {
        &self.class.sub_id
    }
}

#[cfg(test)]
mod constraint_tests {
    use super::*;
    use crate::verifiers::VerifierCall;
    use serde_json::json;

    #[test]
    fn rule_based_requires_verifier() {
        let tax = Taxonomy::builtin();
        let c3 = tax.get("C.3").unwrap().clone();
        assert_eq!(
            ConstraintSpec::new(c3.clone(), "Between 50 and 80 words", EvalMethod::RuleBased, None),
            Err(ConstraintError::MissingVerifier)
        );
        let call = VerifierCall::from_json("check_whether_response_word_count_in_range", &[json!(50), json!(80)])
            .unwrap();
        assert!(ConstraintSpec::new(c3.clone(), "Between 50 and 80 words", EvalMethod::RuleBased, Some(call.clone())).is_ok());
        assert_eq!(
            ConstraintSpec::new(c3.clone(), "x", EvalMethod::DirectJudge, Some(call)),
            Err(ConstraintError::UnexpectedVerifier(EvalMethod::DirectJudge))
        );
        assert_eq!(
            ConstraintSpec::new(c3, "  ", EvalMethod::DirectJudge, None),
            Err(ConstraintError::EmptyDescription)
        );
    }
}
