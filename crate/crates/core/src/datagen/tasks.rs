//! Task pool, task-list generation and filtering of existing questions.

use std::path::Path;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;
use regex::Regex;
use serde::{Deserialize, Serialize};

use super::DatagenError;
use crate::judge::templates;
use crate::judge::{parse_verdict, ConstraintVerdict, Decoding, GenerationClient, GenerationRequest};

/// Exemplar tasks sampled per image when none is configured.
pub const DEFAULT_TASK_K: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskCategory {
    DescriptiveAnalysis,
    EmotionalPerspective,
    CreativeWriting,
    SocialMediaContent,
    RolePlay,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskEntry {
    pub category: TaskCategory,
    pub instruction: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskPool {
    entries: Vec<TaskEntry>,
}

const DEFAULT_POOL: [(TaskCategory, &str); 16] = [
    (TaskCategory::DescriptiveAnalysis, "Describe the animal's typical habitat, diet, and one unique behavioral trait."),
    (TaskCategory::DescriptiveAnalysis, "Provide a detailed analysis of the image, including the setting, characters, and notable objects."),
    (TaskCategory::DescriptiveAnalysis, "Explain the activity taking place in the image."),
    (TaskCategory::DescriptiveAnalysis, "Describe the activities of the person on the left in the image."),
    (TaskCategory::EmotionalPerspective, "What emotions do you think the person in this image might be feeling?"),
    (TaskCategory::EmotionalPerspective, "Imagine you are the person on the left in the scene depicted in this image, write a story about what you would do next."),
    (TaskCategory::EmotionalPerspective, "Personify the sign in the image and express its feelings about the rule it presents."),
    (TaskCategory::CreativeWriting, "Create a short conversation between any two individuals in the scene."),
    (TaskCategory::CreativeWriting, "Pretend this snapshot belongs to a larger story. Write a quick paragraph setting up the next plot twist."),
    (TaskCategory::CreativeWriting, "Use this picture as your muse. Craft a brief poem, any style, that captures the emotion you sense."),
    (TaskCategory::CreativeWriting, "Turn this scene into a short children's story focusing on wonder and curiosity."),
    (TaskCategory::CreativeWriting, "Write a short poem with two stanzas, inspired by the emotion or content depicted in this image."),
    (TaskCategory::SocialMediaContent, "Assume this is an image you are about to post on Twitter. Please provide a short, upbeat caption describing it."),
    (TaskCategory::SocialMediaContent, "Assume you are creating a Pinterest pin with this image. Write a short inspirational or motivational caption to accompany it."),
    (TaskCategory::SocialMediaContent, "If this image were promoting an upcoming event, compose a quick announcement with the date, a highlight of what to expect, and a call-to-action."),
    (TaskCategory::RolePlay, "Imagine you are the photographer who took this picture. Briefly explain why you chose to capture this particular moment and what story you hope it conveys."),
];

impl Default for TaskPool {
    fn default() -> Self {
        TaskPool {
            entries: DEFAULT_POOL
                .iter()
                .map(|(category, instruction)| TaskEntry { category: *category, instruction: instruction.to_string() })
                .collect(),
        }
    }
}

impl TaskPool {
    pub fn new(entries: Vec<TaskEntry>) -> Result<Self, DatagenError> {
        if entries.is_empty() {
            return Err(DatagenError::Invalid("task pool is empty".into()));
        }
        if let Some(e) = entries.iter().find(|e| e.instruction.trim().is_empty()) {
            return Err(DatagenError::Invalid(format!("empty instruction in category {:?}", e.category)));
        }
        Ok(TaskPool { entries })
    }

    /// Load `{"entries": [{"category", "instruction"}, ...]}`.
    pub fn from_file(path: &Path) -> Result<Self, DatagenError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| DatagenError::Invalid(format!("{}: {e}", path.display())))?;
        let pool: TaskPool = serde_json::from_str(&text)
            .map_err(|e| DatagenError::Invalid(format!("{}: {e}", path.display())))?;
        Self::new(pool.entries)
    }

    pub fn entries(&self) -> &[TaskEntry] {
        &self.entries
    }
}

fn strip_list_marker(line: &str) -> &str {
    let t = line.trim();
    let t = t.trim_start_matches(['-', '*', '\u{2022}']).trim_start();
    let digits = t.bytes().take_while(u8::is_ascii_digit).count();
    if digits > 0 && matches!(t.as_bytes().get(digits), Some(b'.' | b')')) {
        t[digits + 1..].trim_start()
    } else {
        t
    }
}

/// Sample up to `k` exemplar tasks and turn them into a task list for
/// `image`. Without a generator the exemplars are returned unchanged. With
/// one, its proposed tasks are optionally screened by `validator` for image
/// compatibility and then `k` of them are sampled.
pub fn generate_task_list(
    image: Option<&str>,
    pool: &TaskPool,
    k: usize,
    generator: Option<&dyn GenerationClient>,
    validator: Option<&dyn GenerationClient>,
    rng: &mut impl Rng,
) -> Result<Vec<String>, DatagenError> {
    if k == 0 {
        return Err(DatagenError::Invalid("k must be at least 1".into()));
    }
    let exemplars: Vec<String> = pool
        .entries
        .choose_multiple(rng, k.min(pool.entries.len()))
        .map(|e| e.instruction.clone())
        .collect();
    let Some(generator) = generator else {
        return Ok(exemplars);
    };
    let listing = exemplars.iter().map(|e| format!("- {e}")).collect::<Vec<_>>().join("\n");
    let prompt = templates::TASK_LIST.render(&[("exemplars", &listing)]);
    let reply = generator.generate(&GenerationRequest::new(prompt, Decoding::SAMPLING).with_attachment(image))?;
    let mut proposed: Vec<String> = Vec::new();
    for line in reply.lines() {
        let task = strip_list_marker(line);
        if !task.is_empty() && !proposed.iter().any(|p| p == task) {
            proposed.push(task.to_string());
        }
    }
    if let Some(v) = validator {
        let mut kept = Vec::with_capacity(proposed.len());
        for task in proposed {
            let prompt = templates::TASK_COMPAT.render(&[("task", &task)]);
            let raw = v.generate(&GenerationRequest::new(prompt, Decoding::JUDGE).with_attachment(image))?;
            if parse_verdict(&raw).verdict == ConstraintVerdict::Satisfied {
                kept.push(task);
            }
        }
        proposed = kept;
    }
    if proposed.is_empty() {
        return Err(DatagenError::Rejected("no image-compatible task proposed".into()));
    }
    proposed.shuffle(rng);
    proposed.truncate(k);
    Ok(proposed)
}

/// Patterns for screening questions taken from existing annotations.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct FilterConfig {
    pub few_shot_patterns: Vec<String>,
    pub option_patterns: Vec<String>,
    pub max_chars: usize,
}

impl Default for FilterConfig {
    fn default() -> Self {
        FilterConfig {
            few_shot_patterns: vec![
                r"(?im)^\s*(?:examples?|demonstrations?|samples?)\s*\d*\s*:".into(),
                r"(?i)\bfor example\s*:".into(),
                r"(?ims)^\s*q\s*\d*\s*:.*^\s*a\s*\d*\s*:".into(),
                r"(?ims)^\s*(?:input|question)\s*\d*\s*:.*^\s*(?:output|answer)\s*\d*\s*:".into(),
            ],
            option_patterns: vec![
                r"(?s)(?:^|\s|\()A\s*[.):]\s*\S.*?(?:^|\s|\()B\s*[.):]\s*\S.*?(?:^|\s|\()C\s*[.):]\s*\S.*?(?:^|\s|\()D\s*[.):]\s*\S".into(),
                r"(?im)^\s*(?:options|choices)\s*:".into(),
            ],
            max_chars: 600,
        }
    }
}

impl FilterConfig {
    pub fn from_file(path: &Path) -> Result<Self, DatagenError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| DatagenError::Invalid(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| DatagenError::Invalid(format!("{}: {e}", path.display())))
    }

    fn compile(&self) -> Result<Vec<Regex>, DatagenError> {
        self.few_shot_patterns
            .iter()
            .chain(&self.option_patterns)
            .map(|p| Regex::new(p).map_err(|e| DatagenError::Invalid(format!("bad filter pattern {p:?}: {e}"))))
            .collect()
    }
}

/// Keep questions with no few-shot demonstrations, no option block and at
/// most `max_chars` characters, preserving order.
pub fn filter_existing_questions(questions: &[String], cfg: &FilterConfig) -> Result<Vec<String>, DatagenError> {
    let patterns = cfg.compile()?;
    Ok(questions
        .iter()
        .filter(|q| q.chars().count() <= cfg.max_chars && !patterns.iter().any(|p| p.is_match(q)))
        .cloned()
        .collect())
}
