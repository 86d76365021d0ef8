//! Hybrid instruction-following evaluation engine.
//!
//! - [`taxonomy`]: constraint categories and their evaluation methods.
//! - [`textseg`]: paragraph, sentence, word and number segmentation.
//! - [`verifiers`]: the rule-based verification functions.
//! - [`judge`]: LLM judges, parameter extraction, generation clients.
//! - [`evalrun`]: benchmark loading, per-item evaluation, aggregation.
//! - [`datagen`]: instruction generation, SFT filtering, preference pairs.

pub mod taxonomy;
pub mod textseg;
pub mod verifiers;
pub mod prompt;
pub mod judge;
pub mod evalrun;
pub mod datagen;
mod par;
