//! Deterministic stand-in for the judge service.
//!
//! Entity verdicts come from normalized equality plus a small synonym
//! table; quality scores are token-Jaccard based; unit extraction splits
//! on terminal punctuation. Identical inputs always produce identical
//! outputs, which keeps end-to-end evaluation runs reproducible.

use super::{Judge, JudgeAnswer, JudgeError, JudgeRequest, JudgeResponse, JudgeResult, JudgeTask};
use crate::textmatch::{fold_text, token_jaccard};

const SYNONYM_GROUPS: &[&[&str]] = &[
    &["cellphone", "mobile phone"],
    &["sofa", "couch"],
    &["smartphone", "phone"],
    &["cup", "coffee cup"],
    &["mcdonald's", "mcdonalds", "mcd's"],
];

/// The deterministic stub judge.
#[derive(Debug, Clone, Copy, Default)]
pub struct StubJudge;

impl StubJudge {
    pub fn new() -> Self {
        StubJudge
    }

    fn equivalent(a: &str, b: &str) -> bool {
        let fa = fold_text(a);
        let fb = fold_text(b);
        if fa == fb && !fa.is_empty() {
            return true;
        }
        SYNONYM_GROUPS.iter().any(|group| {
            group.contains(&fa.as_str()) && group.contains(&fb.as_str())
        })
    }

    /// Splits text into sentences on terminal punctuation, keeping the
    /// punctuation with its sentence.
    fn split_units(text: &str) -> Vec<String> {
        let mut units = Vec::new();
        let mut current = String::new();
        for c in text.chars() {
            current.push(c);
            if matches!(c, '.' | '!' | '?') {
                let unit = current.trim();
                if !unit.is_empty() {
                    units.push(unit.to_string());
                }
                current.clear();
            }
        }
        let tail = current.trim();
        if !tail.is_empty() {
            units.push(tail.to_string());
        }
        units
    }
}

impl Judge for StubJudge {
    fn judge_batch(&self, request: &JudgeRequest) -> Result<JudgeResponse, JudgeError> {
        request.validate()?;
        let results = request
            .items
            .iter()
            .map(|item| {
                let answer = match request.task {
                    JudgeTask::EntityMatch | JudgeTask::KiuMatch => {
                        JudgeAnswer::Verdict(Self::equivalent(&item.candidate, &item.reference))
                    }
                    JudgeTask::Score01 => {
                        JudgeAnswer::Score(token_jaccard(&item.candidate, &item.reference))
                    }
                    JudgeTask::Score15 => {
                        let j = token_jaccard(&item.candidate, &item.reference);
                        JudgeAnswer::Score(1.0 + (4.0 * j).round())
                    }
                    JudgeTask::KiuExtract => JudgeAnswer::Units(Self::split_units(&item.candidate)),
                };
                JudgeResult {
                    id: item.id.clone(),
                    answer,
                }
            })
            .collect();
        Ok(JudgeResponse { results })
    }

    fn model_id(&self) -> &str {
        "stub-judge-v1"
    }
}
