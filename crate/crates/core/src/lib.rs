//! Evaluation toolkit for generative vision-language model outputs.
//!
//! Scores free-form model annotations against ground truth across the
//! tasks a content-analysis pipeline cares about:
//!
//! - **Schema**: strict/lenient parsing of model output into a unified
//!   annotation record, validation, and a parse-reliability metric.
//! - **OCR**: unordered, variably-grouped text blocks are woven into
//!   matched super-block pairs, then scored with CER/WER and
//!   character/word F1.
//! - **Entities**: objects, humans and logos matched one-to-one through
//!   pluggable semantic matchers, with detection precision/recall/F1 and
//!   attribute accuracies.
//! - **Localization**: 3x3 spatial grid and temporal label sets compared
//!   by Jaccard similarity.
//! - **Descriptions**: key information units matched many-to-many for
//!   completeness and faithfulness.
//!
//! The judge client talks to an external LLM scoring service; a
//! deterministic stub stands in for it in tests and offline runs.

pub mod blockweaver;
pub mod entity;
mod error;
pub mod grid;
pub mod harness;
pub mod ocr;
pub mod schema;
pub mod textmatch;

pub mod judge;
pub mod kiu;

pub use error::EvalError;
